#include "ism/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ism/errors.hpp"

namespace ism {

std::vector<ItemLabel> labels_of(const DatasetSplit& split) {
    std::vector<ItemLabel> out;
    out.reserve(split.samples.size());
    for (const auto& s : split.samples) out.push_back({s.person_id, s.camera_id});
    return out;
}

Tensor embed_split(const Mlp& model, const DatasetSplit& split, size_t* zero_rows) {
    const size_t n = split.samples.size();
    const size_t d = model.config().feature_dim;
    if (n == 0) {
        if (zero_rows) *zero_rows = 0;
        return Tensor::from_values({0, d}, {});
    }
    std::vector<size_t> indices(n);
    for (size_t i = 0; i < n; ++i) indices[i] = i;

    const Tensor feats = extract(model, batch_pixels(split, indices)).detach();
    std::vector<double> rows(feats.data().begin(), feats.data().end());
    size_t zeros = 0;
    for (size_t i = 0; i < n; ++i) {
        double norm2 = 0.0;
        for (size_t k = 0; k < d; ++k) norm2 += rows[i * d + k] * rows[i * d + k];
        if (norm2 == 0.0) {
            ++zeros;
            continue;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (size_t k = 0; k < d; ++k) rows[i * d + k] *= inv;
    }
    if (zero_rows) *zero_rows = zeros;
    return Tensor::from_values({n, d}, std::move(rows));
}

std::vector<RankingResult> rank_queries(const Tensor& query_features,
                                        const std::vector<ItemLabel>& query_labels,
                                        const Tensor& gallery_features,
                                        const std::vector<ItemLabel>& gallery_labels,
                                        size_t* dropped) {
    if (gallery_features.rank() != 2 || query_features.rank() != 2 ||
        query_features.extent(1) != gallery_features.extent(1))
        throw DimensionError("rank_queries: feature dimensions disagree");
    const size_t nq = query_features.extent(0), ng = gallery_features.extent(0);
    if (ng == 0) throw ConfigError("rank_queries: empty gallery");
    if (query_labels.size() != nq || gallery_labels.size() != ng)
        throw DimensionError("rank_queries: one label per feature row required");
    const size_t d = query_features.extent(1);
    const auto qf = query_features.data();
    const auto gf = gallery_features.data();

    std::vector<RankingResult> results;
    size_t dropped_count = 0;
    for (size_t q = 0; q < nq; ++q) {
        RankingResult r;
        r.query_index = q;
        std::vector<std::pair<double, size_t>> order;
        bool any_relevant = false;
        for (size_t g = 0; g < ng; ++g) {
            const bool same_id = gallery_labels[g].person_id == query_labels[q].person_id;
            const bool same_cam = gallery_labels[g].camera_id == query_labels[q].camera_id;
            if (same_id && same_cam) {
                r.excluded.push_back(g);
                continue;
            }
            double dist2 = 0.0;
            for (size_t k = 0; k < d; ++k) {
                const double diff = qf[q * d + k] - gf[g * d + k];
                dist2 += diff * diff;
            }
            order.emplace_back(std::sqrt(dist2), g);
            any_relevant = any_relevant || same_id;
        }
        if (!any_relevant) {
            ++dropped_count;
            continue;
        }
        std::sort(order.begin(), order.end());  // ties broken by gallery index
        r.ordered_gallery.reserve(order.size());
        r.relevant.reserve(order.size());
        for (const auto& [dist, g] : order) {
            r.ordered_gallery.push_back(g);
            r.relevant.push_back(gallery_labels[g].person_id == query_labels[q].person_id ? 1 : 0);
        }
        results.push_back(std::move(r));
    }
    if (dropped) *dropped = dropped_count;
    return results;
}

std::map<size_t, double> cmc(const std::vector<RankingResult>& results,
                             const std::vector<size_t>& ranks) {
    std::map<size_t, double> rates;
    if (results.empty()) {
        for (size_t k : ranks) rates[k] = 0.0;
        return rates;
    }
    for (size_t k : ranks) {
        size_t hits = 0;
        for (const auto& r : results) {
            bool found = false;
            if (r.relevant.empty()) throw ContractError("cmc: result without relevance flags");
            const size_t limit = std::min(k, r.relevant.size());
            for (size_t pos = 0; pos < limit; ++pos)
                if (r.relevant[pos]) {
                    found = true;
                    break;
                }
            hits += found ? 1 : 0;
        }
        rates[k] = static_cast<double>(hits) / static_cast<double>(results.size());
    }
    return rates;
}

double map_score(const std::vector<RankingResult>& results) {
    if (results.empty()) return 0.0;
    double total = 0.0;
    for (const auto& r : results) {
        size_t seen_relevant = 0;
        double ap = 0.0;
        for (size_t pos = 0; pos < r.relevant.size(); ++pos) {
            if (!r.relevant[pos]) continue;
            ++seen_relevant;
            ap += static_cast<double>(seen_relevant) / static_cast<double>(pos + 1);
        }
        if (seen_relevant == 0) throw ContractError("map_score: query without relevant items");
        total += ap / static_cast<double>(seen_relevant);
    }
    return total / static_cast<double>(results.size());
}

namespace {

size_t histogram_bin(double score) {
    double s = score;
    if (s < -1.0) s = -1.0;
    if (s > 1.0) s = 1.0;
    const auto bin = static_cast<long>(std::floor((s + 1.0) / 0.02));
    return static_cast<size_t>(std::clamp<long>(bin, 0, 99));
}

DistributionStats stats_from_scores(const std::vector<double>& scores) {
    DistributionStats st;
    st.count = scores.size();
    if (scores.empty()) return st;
    double sum = 0.0, sq = 0.0;
    for (double s : scores) {
        sum += s;
        sq += s * s;
        st.histogram[histogram_bin(s)] += 1.0;
    }
    st.mean = sum / static_cast<double>(scores.size());
    const double var = std::max(0.0, sq / static_cast<double>(scores.size()) - st.mean * st.mean);
    st.stddev = std::sqrt(var);
    for (double& h : st.histogram) h /= static_cast<double>(scores.size());
    return st;
}

double histogram_intersection(const DistributionStats& a, const DistributionStats& b) {
    if (a.count == 0 || b.count == 0) return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < a.histogram.size(); ++i) acc += std::min(a.histogram[i], b.histogram[i]);
    return acc;
}

}  // namespace

SimilarityDistributions similarity_distributions(const Tensor& query_features,
                                                 const std::vector<ItemLabel>& query_labels,
                                                 const Tensor& gallery_features,
                                                 const std::vector<ItemLabel>& gallery_labels) {
    const size_t nq = query_features.extent(0), ng = gallery_features.extent(0);
    const size_t d = query_features.extent(1);
    if (gallery_features.extent(1) != d)
        throw DimensionError("similarity_distributions: feature dimensions disagree");
    const auto qf = query_features.data();
    const auto gf = gallery_features.data();

    std::vector<double> pos, neg;
    for (size_t q = 0; q < nq; ++q)
        for (size_t g = 0; g < ng; ++g) {
            const bool same_id = gallery_labels[g].person_id == query_labels[q].person_id;
            const bool same_cam = gallery_labels[g].camera_id == query_labels[q].camera_id;
            if (same_id && same_cam) continue;  // junk rule
            double dot = 0.0;
            for (size_t k = 0; k < d; ++k) dot += qf[q * d + k] * gf[g * d + k];
            (same_id ? pos : neg).push_back(dot);
        }

    SimilarityDistributions out;
    out.positives = stats_from_scores(pos);
    out.negatives = stats_from_scores(neg);
    out.overlap = histogram_intersection(out.positives, out.negatives);
    return out;
}

EvalOutput evaluate_full(const Mlp& model, const DatasetSplit& query, const DatasetSplit& gallery,
                         const std::vector<size_t>& ranks) {
    EvalOutput out;
    EvalReport& report = out.report;
    size_t zq = 0, zg = 0;
    const Tensor qf = embed_split(model, query, &zq);
    const Tensor gf = embed_split(model, gallery, &zg);
    report.zero_feature_rows = zq + zg;

    const auto qlabels = labels_of(query);
    const auto glabels = labels_of(gallery);
    out.results = rank_queries(qf, qlabels, gf, glabels, &report.dropped_queries);
    report.num_queries = out.results.size();
    report.cmc = cmc(out.results, ranks);
    report.map = map_score(out.results);
    report.per_query_ap.reserve(out.results.size());
    for (const auto& r : out.results) {
        size_t seen = 0;
        double ap = 0.0;
        for (size_t pos = 0; pos < r.relevant.size(); ++pos)
            if (r.relevant[pos]) ap += static_cast<double>(++seen) / static_cast<double>(pos + 1);
        report.per_query_ap.push_back(ap / static_cast<double>(seen));
    }

    const auto dist = similarity_distributions(qf, qlabels, gf, glabels);
    report.positives = dist.positives;
    report.negatives = dist.negatives;
    report.overlap = dist.overlap;
    return out;
}

EvalReport evaluate(const Mlp& model, const DatasetSplit& query, const DatasetSplit& gallery,
                    const std::vector<size_t>& ranks) {
    return evaluate_full(model, query, gallery, ranks).report;
}

namespace {

nlohmann::json stats_to_json(const DistributionStats& st) {
    return {{"mean", st.mean},
            {"stddev", st.stddev},
            {"count", st.count},
            {"histogram", std::vector<double>(st.histogram.begin(), st.histogram.end())}};
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    nlohmann::json cmc_obj;
    for (const auto& [k, v] : report.cmc) cmc_obj[std::to_string(k)] = v;
    j["cmc"] = cmc_obj;
    j["map"] = report.map;
    j["num_queries"] = report.num_queries;
    j["dropped_queries"] = report.dropped_queries;
    j["zero_feature_rows"] = report.zero_feature_rows;
    j["positives"] = stats_to_json(report.positives);
    j["negatives"] = stats_to_json(report.negatives);
    j["overlap"] = report.overlap;
    j["per_query_ap"] = report.per_query_ap;
    return j.dump(2);
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IngestionError("report: cannot open for write: " + path.string());
    out << report_to_json(report) << '\n';
}

std::string format_report(const EvalReport& report) {
    std::ostringstream os;
    os << "queries: " << report.num_queries;
    if (report.dropped_queries) os << " (dropped " << report.dropped_queries << ")";
    os << '\n';
    for (const auto& [k, v] : report.cmc) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "Rank-%-3zu %6.2f%%\n", k, 100.0 * v);
        os << buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "mAP      %6.2f%%\n", 100.0 * report.map);
    os << buf;
    std::snprintf(buf, sizeof(buf), "pos similarity %.4f +- %.4f (n=%zu)\n", report.positives.mean,
                  report.positives.stddev, report.positives.count);
    os << buf;
    std::snprintf(buf, sizeof(buf), "neg similarity %.4f +- %.4f (n=%zu)\n", report.negatives.mean,
                  report.negatives.stddev, report.negatives.count);
    os << buf;
    std::snprintf(buf, sizeof(buf), "pos/neg overlap %.4f\n", report.overlap);
    os << buf;
    return os.str();
}

void dump_ranking_lists(const std::vector<RankingResult>& results, const DatasetSplit& query,
                        const DatasetSplit& gallery, size_t topk,
                        const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IngestionError("ranking dump: cannot open for write: " + path.string());
    out << "query";
    for (size_t k = 1; k <= topk; ++k) out << ",top" << k << ",rel" << k;
    out << '\n';
    for (const auto& r : results) {
        out << query.samples.at(r.query_index).filename;
        for (size_t k = 0; k < topk; ++k) {
            if (k < r.ordered_gallery.size())
                out << ',' << gallery.samples.at(r.ordered_gallery[k]).filename << ','
                    << static_cast<int>(r.relevant[k]);
            else
                out << ",,";
        }
        out << '\n';
    }
}

void dump_histograms(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IngestionError("histogram dump: cannot open for write: " + path.string());
    out << "# bin_center positive_mass negative_mass\n";
    for (size_t i = 0; i < report.positives.histogram.size(); ++i) {
        const double center = -1.0 + 0.02 * (static_cast<double>(i) + 0.5);
        out << center << ' ' << report.positives.histogram[i] << ' '
            << report.negatives.histogram[i] << '\n';
    }
}

}  // namespace ism
