#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "ism/data.hpp"
#include "ism/errors.hpp"
#include "ism/eval.hpp"
#include "retrieval_oracle.hpp"

using namespace ism;


TEST_CASE("embed_split: unit rows, duplicates, zero handling") {
    ExtractorConfig cfg;
    cfg.input_dim = 8 * 8 * 3;
    cfg.hidden = {16};
    cfg.feature_dim = 8;
    cfg.init_seed = 5;
    const Mlp net = Mlp::init(cfg).clone_frozen();

    SyntheticConfig dcfg;
    dcfg.n_ids = 2;
    dcfg.imgs_per_id = 2;
    dcfg.seed = 9;
    DatasetSplit split = generate_synthetic_identities(dcfg);
    split.samples.push_back(split.samples[0]);  // duplicate image

    size_t zeros = 999;
    const Tensor feats = embed_split(net, split, &zeros);
    CHECK(zeros == 0);
    for (size_t i = 0; i < feats.extent(0); ++i) {
        double norm = 0.0;
        for (size_t k = 0; k < feats.extent(1); ++k) norm += feats.at(i, k) * feats.at(i, k);
        CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-12);
    }
    // duplicate images embed identically
    const size_t last = feats.extent(0) - 1;
    for (size_t k = 0; k < feats.extent(1); ++k) CHECK(feats.at(0, k) == feats.at(last, k));
}

TEST_CASE("cosine of normalized rows equals 1 - half squared distance") {
    Tensor f = test::random_tensor({4, 6}, 33, -1.0, 1.0);
    std::vector<double> rows(f.data().begin(), f.data().end());
    for (size_t i = 0; i < 4; ++i) {
        double n = 0.0;
        for (size_t k = 0; k < 6; ++k) n += rows[i * 6 + k] * rows[i * 6 + k];
        for (size_t k = 0; k < 6; ++k) rows[i * 6 + k] /= std::sqrt(n);
    }
    for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 4; ++j) {
            double dot = 0.0, d2 = 0.0;
            for (size_t k = 0; k < 6; ++k) {
                dot += rows[i * 6 + k] * rows[j * 6 + k];
                const double diff = rows[i * 6 + k] - rows[j * 6 + k];
                d2 += diff * diff;
            }
            CHECK(dot == doctest::Approx(1.0 - 0.5 * d2).epsilon(1e-12));
        }
}

TEST_CASE("rank_queries: duplicate from another camera ranks first") {
    // gallery holds the query's exact duplicate under a different camera
    Tensor qf = Tensor::from_values({1, 2}, {0.6, 0.8});
    Tensor gf = Tensor::from_values({3, 2}, {0.0, 1.0, 0.6, 0.8, 1.0, 0.0});
    const std::vector<ItemLabel> ql = {{5, 1}};
    const std::vector<ItemLabel> gl = {{9, 2}, {5, 2}, {7, 2}};
    const auto results = rank_queries(qf, ql, gf, gl);
    REQUIRE(results.size() == 1);
    CHECK(results[0].ordered_gallery[0] == 1);
    CHECK(results[0].relevant[0] == 1);
}

TEST_CASE("rank_queries: junk rule excludes same-id same-camera") {
    Tensor qf = Tensor::from_values({1, 2}, {1.0, 0.0});
    Tensor gf = Tensor::from_values({2, 2}, {1.0, 0.0, 0.0, 1.0});
    const std::vector<ItemLabel> ql = {{5, 1}};
    // gallery 0 is the same image under the same camera: excluded
    const std::vector<ItemLabel> gl = {{5, 1}, {5, 2}};
    const auto results = rank_queries(qf, ql, gf, gl);
    REQUIRE(results.size() == 1);
    CHECK(results[0].excluded == std::vector<size_t>{0});
    CHECK(results[0].ordered_gallery == std::vector<size_t>{1});
}

TEST_CASE("rank_queries: query with only same-camera positives is dropped") {
    Tensor qf = Tensor::from_values({1, 2}, {1.0, 0.0});
    Tensor gf = Tensor::from_values({2, 2}, {1.0, 0.0, 0.0, 1.0});
    const std::vector<ItemLabel> ql = {{5, 1}};
    const std::vector<ItemLabel> gl = {{5, 1}, {8, 2}};  // positive only via junk slot
    size_t dropped = 0;
    const auto results = rank_queries(qf, ql, gf, gl, &dropped);
    CHECK(results.empty());
    CHECK(dropped == 1);
}

TEST_CASE("rank_queries: empty gallery is a config error") {
    Tensor qf = Tensor::from_values({1, 2}, {1.0, 0.0});
    Tensor gf = Tensor::from_values({0, 2}, {});
    CHECK_THROWS_AS(rank_queries(qf, {{1, 1}}, gf, {}), ConfigError);
}

TEST_CASE("cmc oracles") {
    // first match at position 3: Rank-1 miss, Rank-5 hit
    RankingResult r;
    r.query_index = 0;
    r.ordered_gallery = {0, 1, 2, 3, 4};
    r.relevant = {0, 0, 1, 0, 1};
    const auto rates = cmc({r}, {1, 5});
    CHECK(rates.at(1) == 0.0);
    CHECK(rates.at(5) == 1.0);

    // all queries matched at position 1
    RankingResult p;
    p.ordered_gallery = {0};
    p.relevant = {1};
    const auto perfect = cmc({p, p, p}, {1, 5, 10});
    CHECK(perfect.at(1) == 1.0);
    CHECK(perfect.at(5) == 1.0);
    CHECK(perfect.at(10) == 1.0);
}

TEST_CASE("map oracles") {
    // relevant at positions {1,3} of 3 -> AP = (1 + 2/3)/2 = 5/6
    RankingResult r;
    r.ordered_gallery = {0, 1, 2};
    r.relevant = {1, 0, 1};
    CHECK(map_score({r}) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));

    // perfect ranking
    RankingResult p;
    p.ordered_gallery = {0, 1};
    p.relevant = {1, 1};
    CHECK(map_score({p}) == 1.0);

    // single relevant at position k -> AP = 1/k
    for (size_t k = 1; k <= 6; ++k) {
        RankingResult s;
        s.ordered_gallery.resize(6);
        s.relevant.assign(6, 0);
        s.relevant[k - 1] = 1;
        CHECK(map_score({s}) == 1.0 / static_cast<double>(k));
    }
}

TEST_CASE("cmc and map match the exhaustive oracle on 200 random instances") {
    const std::vector<size_t> ranks = {1, 5, 10};
    size_t checked = 0;
    for (uint64_t seed = 0; seed < 200; ++seed) {
        const test::OracleInstance inst = test::random_retrieval_instance(1000 + seed);
        const test::OracleMetrics want = test::oracle_metrics(inst, ranks);
        if (want.kept_queries == 0) continue;  // oracle and impl both drop everything

        size_t dropped = 0;
        const auto results = rank_queries(test::rows_to_tensor(inst.query), inst.qlabels,
                                          test::rows_to_tensor(inst.gallery), inst.glabels, &dropped);
        REQUIRE(results.size() == want.kept_queries);
        const auto got_cmc = cmc(results, ranks);
        for (size_t k : ranks) CHECK(got_cmc.at(k) == want.cmc.at(k));
        CHECK(map_score(results) == doctest::Approx(want.map).epsilon(1e-12));

        // CMC monotone in k
        CHECK(got_cmc.at(1) <= got_cmc.at(5));
        CHECK(got_cmc.at(5) <= got_cmc.at(10));
        ++checked;
    }
    CHECK(checked >= 150);  // the generator rarely drops every query
}

TEST_CASE("rankings and metrics are invariant under an orthogonal transform") {
    // Householder reflection H = I - 2vv^T
    Rng rng(7);
    const size_t d = 5;
    std::vector<double> v(d);
    double n = 0.0;
    for (double& x : v) {
        x = rng.uniform(-1.0, 1.0);
        n += x * x;
    }
    for (double& x : v) x /= std::sqrt(n);
    auto reflect = [&](const std::vector<double>& row) {
        double dot = 0.0;
        for (size_t k = 0; k < d; ++k) dot += row[k] * v[k];
        std::vector<double> out(d);
        for (size_t k = 0; k < d; ++k) out[k] = row[k] - 2.0 * dot * v[k];
        return out;
    };

    test::OracleInstance inst = test::random_retrieval_instance(777);
    while (inst.query[0].size() != d) inst = test::random_retrieval_instance(rng.next_u64());

    test::OracleInstance rotated = inst;
    for (auto& row : rotated.query) row = reflect(row);
    for (auto& row : rotated.gallery) row = reflect(row);

    const auto a = rank_queries(test::rows_to_tensor(inst.query), inst.qlabels,
                                test::rows_to_tensor(inst.gallery), inst.glabels);
    const auto b = rank_queries(test::rows_to_tensor(rotated.query), rotated.qlabels,
                                test::rows_to_tensor(rotated.gallery), rotated.glabels);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].ordered_gallery == b[i].ordered_gallery);
    if (!a.empty()) {
        CHECK(cmc(a, {1, 5}) == cmc(b, {1, 5}));
        CHECK(map_score(a) == doctest::Approx(map_score(b)).epsilon(1e-12));
    }
}

TEST_CASE("similarity_distributions: overlap extremes") {
    // identical score sets -> overlap 1: one positive and one negative pair,
    // both with cosine exactly 1
    Tensor qf = Tensor::from_values({1, 2}, {1, 0});
    Tensor gf = Tensor::from_values({2, 2}, {1, 0, 1, 0});
    const std::vector<ItemLabel> ql = {{1, 1}};
    const std::vector<ItemLabel> gl = {{1, 2}, {2, 2}};
    const auto d = similarity_distributions(qf, ql, gf, gl);
    CHECK(d.positives.count == 1);
    CHECK(d.negatives.count == 1);
    CHECK(d.overlap == doctest::Approx(1.0).epsilon(1e-12));

    // disjoint supports -> overlap 0
    Tensor qf2 = Tensor::from_values({1, 2}, {1, 0});
    Tensor gf2 = Tensor::from_values({2, 2}, {1, 0, -1, 0});
    const std::vector<ItemLabel> ql2 = {{1, 1}};
    const std::vector<ItemLabel> gl2 = {{1, 2}, {2, 2}};  // pos score 1, neg score -1
    const auto d2 = similarity_distributions(qf2, ql2, gf2, gl2);
    CHECK(d2.overlap == 0.0);
    CHECK(d2.positives.mean == doctest::Approx(1.0));
    CHECK(d2.negatives.mean == doctest::Approx(-1.0));
}

TEST_CASE("report serialization round trip and formatting") {
    EvalReport r;
    r.cmc = {{1, 0.5}, {5, 0.75}, {10, 1.0}};
    r.map = 0.625;
    r.num_queries = 4;
    r.per_query_ap = {0.5, 0.75};
    r.overlap = 0.25;
    const std::string json = report_to_json(r);
    CHECK(json.find("\"map\": 0.625") != std::string::npos);
    const std::string text = format_report(r);
    CHECK(text.find("Rank-1") != std::string::npos);
    CHECK(text.find("62.50%") != std::string::npos);
}
