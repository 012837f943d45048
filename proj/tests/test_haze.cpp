#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "helpers.hpp"
#include "ism/data.hpp"
#include "ism/errors.hpp"
#include "ism/haze.hpp"

using namespace ism;

TEST_CASE("transmission oracles") {
    DepthMap d;
    d.height = 1;
    d.width = 3;
    d.values = {0.0, 0.5, std::log(2.0)};

    const auto t = transmission(d, 2.0);
    CHECK(t[0] == 1.0);                                             // e^0
    CHECK(t[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));  // 0.367879...

    const auto t1 = transmission(d, 1.0);
    CHECK(t1[2] == doctest::Approx(0.5).epsilon(1e-15));  // e^{-ln 2}

    CHECK_THROWS_AS(transmission(d, 0.0), ParameterError);
    CHECK_THROWS_AS(transmission(d, -1.0), ParameterError);
}

TEST_CASE("transmission is strictly decreasing in beta and depth") {
    DepthMap d;
    d.height = 1;
    d.width = 2;
    d.values = {0.3, 0.6};
    const auto a = transmission(d, 1.0);
    const auto b = transmission(d, 1.5);
    CHECK(b[0] < a[0]);
    CHECK(a[1] < a[0]);  // deeper pixel passes less light
}

TEST_CASE("compose_haze oracles") {
    Image j(2, 2, 0.5);

    // t = 1: haze-free limit
    Image clear = compose_haze(j, std::vector<double>(4, 1.0), 0.9);
    for (size_t i = 0; i < j.px.size(); ++i) CHECK(clear.px[i] == j.px[i]);

    // t = 0: opaque limit
    Image opaque = compose_haze(j, std::vector<double>(4, 0.0), 0.9);
    for (double v : opaque.px) CHECK(v == 0.9);

    // J=0.5, A=0.9, t=0.5 -> 0.70
    Image half = compose_haze(j, std::vector<double>(4, 0.5), 0.9);
    for (double v : half.px) CHECK(v == doctest::Approx(0.70).epsilon(1e-15));

    CHECK_THROWS_AS(compose_haze(j, std::vector<double>(3, 1.0), 0.9), DimensionError);
    CHECK_THROWS_AS(compose_haze(j, std::vector<double>(4, 1.0), 0.0), ParameterError);
    CHECK_THROWS_AS(compose_haze(j, std::vector<double>(4, 1.0), 1.5), ParameterError);
}

TEST_CASE("compose_haze: formula, contraction, and range on random pixels") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const double jv = rng.uniform();
        const double t = rng.uniform();
        const double a = rng.uniform(0.05, 1.0);
        Image img(1, 1);
        img.px = {jv, jv, jv};
        const Image out = compose_haze(img, {t}, a);
        const double i0 = out.px[0];

        // reference expression J*t + A*(1-t)
        CHECK(std::abs(i0 - (jv * t + a * (1.0 - t))) <= 1e-12);
        // contraction toward A
        CHECK(std::abs(std::abs(i0 - a) - t * std::abs(jv - a)) <= 4e-16);
        // convex combination stays in range
        CHECK(i0 >= 0.0);
        CHECK(i0 <= 1.0);
    }
}

TEST_CASE("compose_haze: contraction identity exact on a dyadic grid") {
    // Inputs exactly representable: J, t multiples of 1/256, A dyadic.
    for (double a : {0.5, 0.875, 0.90625}) {
        for (int jq = 0; jq <= 256; jq += 16)
            for (int tq = 0; tq <= 256; tq += 16) {
                const double jv = jq / 256.0;
                const double t = tq / 256.0;
                Image img(1, 1);
                img.px = {jv, jv, jv};
                const Image out = compose_haze(img, {t}, a);
                CHECK(std::abs(out.px[0] - a) == t * std::abs(jv - a));
            }
    }
}

TEST_CASE("haze density is monotone in beta") {
    // mean |I - J| nondecreasing over the beta sweep on a fixed image
    SyntheticConfig cfg;
    cfg.n_ids = 2;
    cfg.imgs_per_id = 1;
    cfg.seed = 31;
    const DatasetSplit split = generate_synthetic_identities(cfg);
    const Image& j = split.samples[0].pixels;
    const DepthMap depth = synthetic_depth(DepthKind::ramp, j.height, j.width);

    double prev = -1.0;
    for (double beta : {1.0, 1.25, 1.5, 1.75, 2.0}) {
        const Image hazy = compose_haze(j, transmission(depth, beta), 0.9);
        double mean_diff = 0.0;
        for (size_t i = 0; i < j.px.size(); ++i) mean_diff += std::abs(hazy.px[i] - j.px[i]);
        mean_diff /= static_cast<double>(j.px.size());
        CHECK(mean_diff >= prev);
        prev = mean_diff;
    }
    CHECK(prev > 0.0);
}

TEST_CASE("sample_beta oracles") {
    HazeParams p;
    p.beta_lo = 1.5;
    p.beta_hi = 1.5;
    Rng rng(1);
    CHECK(sample_beta(p, rng) == 1.5);  // degenerate range

    // Monte-Carlo mean on [1,2)
    p.beta_lo = 1.0;
    p.beta_hi = 2.0;
    Rng mc(77);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double b = sample_beta(p, mc);
        CHECK(b >= 1.0);
        CHECK(b < 2.0);
        sum += b;
    }
    CHECK(std::abs(sum / 10000.0 - 1.5) <= 0.02);

    // same seed, same sequence
    Rng r1(5), r2(5);
    for (int i = 0; i < 10; ++i) CHECK(sample_beta(p, r1) == sample_beta(p, r2));
}

TEST_CASE("beta_for_index is order-independent") {
    HazeParams p;
    p.seed = 9;
    const double b3 = beta_for_index(p, 3);
    const double b7 = beta_for_index(p, 7);
    CHECK(beta_for_index(p, 7) == b7);  // re-query any order
    CHECK(beta_for_index(p, 3) == b3);
    CHECK(b3 != b7);
}

TEST_CASE("synthetic_depth oracles") {
    // constant 0 leaves the image haze-free via t = 1
    const DepthMap zero = synthetic_depth(DepthKind::constant, 4, 4, 0.0);
    const auto t = transmission(zero, 2.0);
    for (double v : t) CHECK(v == 1.0);

    const DepthMap ramp = synthetic_depth(DepthKind::ramp, 8, 4);
    for (size_t c = 0; c < 4; ++c) {
        CHECK(ramp.values[c] == 0.0);                // top row
        CHECK(ramp.values[7 * 4 + c] == 1.0);        // bottom row
    }
    CHECK(ramp.values[3 * 4] == doctest::Approx(3.0 / 7.0).epsilon(1e-15));

    const DepthMap radial = synthetic_depth(DepthKind::radial, 9, 9);
    CHECK(radial.values[4 * 9 + 4] == 0.0);  // center pixel
    CHECK(radial.values[0] == 1.0);          // corner
    CHECK(radial.values[8 * 9 + 8] == 1.0);
    validate(radial);

    CHECK_THROWS_AS(synthetic_depth(DepthKind::constant, 4, 4, 1.5), ParameterError);
}

TEST_CASE("normalize_depth: min-max per image, constant collapses to zero") {
    GrayImage raw;
    raw.height = 1;
    raw.width = 4;
    raw.values = {0.2, 0.4, 0.6, 0.8};
    const DepthMap d = normalize_depth(raw);
    CHECK(d.values[0] == 0.0);
    CHECK(d.values[3] == 1.0);
    CHECK(d.values[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    raw.values = {0.5, 0.5, 0.5, 0.5};
    for (double v : normalize_depth(raw).values) CHECK(v == 0.0);
}

TEST_CASE("hazify_dataset: pairing, determinism, and error paths") {
    SyntheticConfig cfg;
    cfg.n_ids = 3;
    cfg.imgs_per_id = 4;
    cfg.seed = 12;
    const DatasetSplit split = generate_synthetic_identities(cfg);

    HazeParams p;
    p.seed = 55;
    const DepthSource depth = DepthSource::generator(DepthKind::ramp);

    const HazyDataset hazy1 = hazify_dataset(split, depth, p);
    const HazyDataset hazy2 = hazify_dataset(split, depth, p);
    REQUIRE(hazy1.split.size() == split.size());

    for (size_t i = 0; i < split.size(); ++i) {
        CHECK(hazy1.split.samples[i].person_id == split.samples[i].person_id);
        CHECK(hazy1.split.samples[i].camera_id == split.samples[i].camera_id);
        CHECK(hazy1.split.samples[i].domain == Domain::hazy);
        CHECK(hazy1.split.samples[i].filename == hazy_filename(split.samples[i].filename));
        CHECK(hazy1.split.samples[i].pixels.px == hazy2.split.samples[i].pixels.px);
        CHECK(hazy1.betas[i] == hazy2.betas[i]);
        CHECK(hazy1.betas[i] >= p.beta_lo);
        CHECK(hazy1.betas[i] < p.beta_hi);
    }

    // empty split passes through
    DatasetSplit empty;
    CHECK(hazify_dataset(empty, depth, p).split.size() == 0);

    // missing depth file names the offending image
    const auto dir = std::filesystem::temp_directory_path() / "ism_test_depth_missing";
    std::filesystem::create_directories(dir);
    const DepthSource folder = DepthSource::folder(dir);
    CHECK_THROWS_WITH_AS(hazify_dataset(split, folder, p),
                         doctest::Contains(split.samples[0].filename.c_str()), IngestionError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("hazify via depth folder round trip") {
    SyntheticConfig cfg;
    cfg.n_ids = 2;
    cfg.imgs_per_id = 2;
    cfg.seed = 3;
    const DatasetSplit split = generate_synthetic_identities(cfg);

    const auto dir = std::filesystem::temp_directory_path() / "ism_test_depth_folder";
    std::filesystem::create_directories(dir);
    for (const auto& s : split.samples) {
        GrayImage g;
        g.height = s.pixels.height;
        g.width = s.pixels.width;
        g.values.assign(g.height * g.width, 0.0);
        for (size_t r = 0; r < g.height; ++r)
            for (size_t c = 0; c < g.width; ++c)
                g.values[r * g.width + c] = static_cast<double>(r) / (g.height - 1);
        std::filesystem::path p = dir / s.filename;
        p.replace_extension(".png");
        write_png_gray16(p, g);
    }

    HazeParams p;
    p.seed = 8;
    const HazyDataset hazy = hazify_dataset(split, DepthSource::folder(dir), p);
    CHECK(hazy.split.size() == split.size());
    // ramp depth darkens the bottom toward A more than the top
    const auto& first = hazy.split.samples[0].pixels;
    const auto& orig = split.samples[0].pixels;
    const size_t last_row = (first.height - 1) * first.width * 3;
    CHECK(std::abs(first.px[last_row] - 0.9) <= std::abs(orig.px[last_row] - 0.9) + 1e-12);
    std::filesystem::remove_all(dir);
}
