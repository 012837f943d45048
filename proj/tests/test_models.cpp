#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "helpers.hpp"
#include "ism/errors.hpp"
#include "ism/models.hpp"
#include "ism/optim.hpp"

using namespace ism;

namespace {

ExtractorConfig small_config(uint64_t seed) {
    ExtractorConfig cfg;
    cfg.input_dim = 192;
    cfg.hidden = {64};
    cfg.feature_dim = 16;
    cfg.leaky_slope = 0.1;
    cfg.init_seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("init_model: reproducible per seed") {
    Mlp a = Mlp::init(small_config(7));
    Mlp b = Mlp::init(small_config(7));
    Mlp c = Mlp::init(small_config(8));
    CHECK(a.checksum() == b.checksum());
    CHECK(a.checksum() != c.checksum());
}

TEST_CASE("init_model: parameter count matches the shape arithmetic") {
    // 192*64 + 64 + 64*16 + 16 = 13392
    CHECK(Mlp::init(small_config(1)).parameter_count() == 13392);
}

TEST_CASE("init_model: rejects bad configs") {
    ExtractorConfig cfg = small_config(1);
    cfg.hidden = {0};
    CHECK_THROWS_AS(Mlp::init(cfg), ConfigError);
    cfg = small_config(1);
    cfg.feature_dim = 1;
    CHECK_THROWS_AS(Mlp::init(cfg), ConfigError);
}

TEST_CASE("extract: deterministic and row-independent") {
    Mlp net = Mlp::init(small_config(3));
    Rng rng(99);
    std::vector<double> row(192);
    for (double& v : row) v = rng.uniform();
    std::vector<double> batch;
    batch.insert(batch.end(), row.begin(), row.end());
    batch.insert(batch.end(), row.begin(), row.end());

    Tensor feats = extract(net, Tensor::from_values({2, 192}, batch));
    for (size_t k = 0; k < 16; ++k) CHECK(feats.at(0, k) == feats.at(1, k));

    // empty batch
    Tensor empty = extract(net, Tensor::from_values({0, 192}, {}));
    CHECK(empty.extent(0) == 0);
    CHECK(empty.extent(1) == 16);

    CHECK_THROWS_AS(net.forward(Tensor::from_values({1, 3}, {0, 0, 0})), DimensionError);
    CHECK_THROWS_AS(extract(net, Tensor::from_values({1, 192}, [] {
                        std::vector<double> v(192, 0.5);
                        v[0] = 1.5;
                        return v;
                    }())),
                    ContractError);
}

TEST_CASE("extract: perturbation response bounded by the product of weight norms") {
    Mlp net = Mlp::init(small_config(5));
    Rng rng(123);
    std::vector<double> row(192);
    for (double& v : row) v = rng.uniform();
    std::vector<double> bumped = row;
    const double eps = 0.01;
    bumped[40] = std::min(1.0, bumped[40] + eps);
    const double actual_bump = bumped[40] - row[40];

    Tensor fa = extract(net, Tensor::from_values({1, 192}, row));
    Tensor fb = extract(net, Tensor::from_values({1, 192}, bumped));
    double diff = 0.0;
    for (size_t k = 0; k < 16; ++k) diff += (fa.at(0, k) - fb.at(0, k)) * (fa.at(0, k) - fb.at(0, k));
    diff = std::sqrt(diff);

    // Lipschitz bound: product of spectral norms <= product of Frobenius norms
    double bound = actual_bump;
    for (size_t l = 0; l < net.layer_count(); ++l) {
        double fro = 0.0;
        for (double v : net.weight(l).data()) fro += v * v;
        bound *= std::sqrt(fro);
    }
    CHECK(diff <= bound + 1e-12);
}

TEST_CASE("discriminate: zero feature with zero bias gives zero logits") {
    Discriminator d = Discriminator::init(16, 32, 0.1, 11);
    Tensor z = Tensor::from_values({1, 16}, std::vector<double>(16, 0.0));
    Tensor logits = discriminate(d, z);
    CHECK(logits.extent(1) == 2);
    CHECK(logits.at(0, 0) == 0.0);  // biases start at zero
    CHECK(logits.at(0, 1) == 0.0);
}

TEST_CASE("discriminate: permutation equivariance over the batch") {
    Discriminator d = Discriminator::init(8, 16, 0.1, 21);
    Tensor f = test::random_tensor({3, 8}, 77);
    std::vector<double> perm;
    for (size_t i : {2u, 0u, 1u})
        perm.insert(perm.end(), f.data().begin() + i * 8, f.data().begin() + (i + 1) * 8);
    Tensor a = discriminate(d, f);
    Tensor b = discriminate(d, Tensor::from_values({3, 8}, perm));
    const size_t lookup[3] = {2, 0, 1};
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 2; ++j) CHECK(b.at(i, j) == a.at(lookup[i], j));
}

TEST_CASE("discriminate: matches a hand-rolled forward pass") {
    Discriminator d = Discriminator::init(4, 3, 0.1, 31);
    Tensor f = test::random_tensor({2, 4}, 42);
    Tensor got = discriminate(d, f);

    const Mlp& net = d.net();
    for (size_t row = 0; row < 2; ++row) {
        // layer 1
        double h[3];
        for (size_t j = 0; j < 3; ++j) {
            double acc = net.bias(0).at(j);
            for (size_t k = 0; k < 4; ++k) acc += f.at(row, k) * net.weight(0).at(k, j);
            h[j] = acc > 0 ? acc : 0.1 * acc;
        }
        // layer 2
        for (size_t j = 0; j < 2; ++j) {
            double acc = net.bias(1).at(j);
            for (size_t k = 0; k < 3; ++k) acc += h[k] * net.weight(1).at(k, j);
            CHECK(got.at(row, j) == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("clone_frozen: identical outputs, no gradients, source untouched") {
    Mlp net = Mlp::init(small_config(9));
    Mlp frozen = net.clone_frozen();
    CHECK(frozen.checksum() == net.checksum());
    CHECK_FALSE(frozen.trainable());
    CHECK(net.trainable());

    Tensor x = test::random_tensor({2, 192}, 5, 0.0, 1.0);
    CHECK(test::bitwise_equal(net.forward(x), frozen.forward(x)));

    // backward through the frozen copy reaches no parameters
    Tensor out = frozen.forward(x);
    backward(sum(mul(out, out)));
    for (const Tensor& p : frozen.parameters()) CHECK_FALSE(p.has_grad());
}

TEST_CASE("clone_frozen: training a student never moves the frozen teacher") {
    Mlp teacher = Mlp::init(small_config(13)).clone_frozen();
    Mlp student = teacher.clone_trainable();
    const uint64_t before = teacher.checksum();

    Adam opt(student.parameters(), {});
    Tensor x = test::random_tensor({4, 192}, 17, 0.0, 1.0);
    for (int step = 0; step < 10; ++step) {
        Tensor out = student.forward(x);
        opt.zero_grad();
        backward(sum(mul(out, out)));
        opt.step();
    }
    CHECK(teacher.checksum() == before);
    CHECK(student.checksum() != before);
}

TEST_CASE("checkpoint: bit-exact round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "ism_test_ckpt";
    std::filesystem::create_directories(dir);
    const auto path = dir / "model.ckpt";

    Mlp net = Mlp::init(small_config(23));
    ClassifierHead head = ClassifierHead::init(16, 5, 29);
    Checkpoint ckpt = Checkpoint::from_model(net, &head);
    save_checkpoint(ckpt, path);
    Checkpoint loaded = load_checkpoint(path);

    CHECK(loaded.config == net.config());
    CHECK(loaded.num_classes == size_t{5});
    CHECK(loaded.checksum() == ckpt.checksum());

    Mlp restored = loaded.extractor(true);
    CHECK(restored.checksum() == net.checksum());
    ClassifierHead rhead = loaded.head(false);
    CHECK(rhead.checksum() == head.checksum());

    // same forward outputs bit for bit
    Tensor x = test::random_tensor({3, 192}, 31, 0.0, 1.0);
    CHECK(test::bitwise_equal(net.forward(x), restored.forward(x)));

    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IngestionError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint: headless round trip has no classifier") {
    const auto dir = std::filesystem::temp_directory_path() / "ism_test_ckpt2";
    std::filesystem::create_directories(dir);
    const auto path = dir / "model.ckpt";

    Mlp net = Mlp::init(small_config(37));
    save_checkpoint(Checkpoint::from_model(net), path);
    Checkpoint loaded = load_checkpoint(path);
    CHECK_FALSE(loaded.num_classes.has_value());
    CHECK_THROWS_AS(loaded.head(true), IngestionError);
    std::filesystem::remove_all(dir);
}
