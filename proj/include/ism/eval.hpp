#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ism/data.hpp"
#include "ism/models.hpp"
#include "ism/tensor.hpp"

namespace ism {

struct ItemLabel {
    int person_id = 0;
    int camera_id = 0;
};

std::vector<ItemLabel> labels_of(const DatasetSplit& split);

// Ranked gallery for one query after the junk rule (same id AND same camera
// excluded). `ordered_gallery` is ascending by distance, ties by index.
struct RankingResult {
    size_t query_index = 0;
    std::vector<size_t> ordered_gallery;
    std::vector<uint8_t> relevant;  // parallel to ordered_gallery
    std::vector<size_t> excluded;
};

struct DistributionStats {
    double mean = 0.0;
    double stddev = 0.0;
    size_t count = 0;
    std::array<double, 100> histogram{};  // probability mass per bin on [-1,1]
};

struct EvalReport {
    std::map<size_t, double> cmc;  // rank -> rate
    double map = 0.0;
    std::vector<double> per_query_ap;
    DistributionStats positives, negatives;
    double overlap = 0.0;  // histogram intersection of positives vs negatives
    size_t num_queries = 0;
    size_t dropped_queries = 0;     // no cross-camera positive after the junk rule
    size_t zero_feature_rows = 0;   // rows left unnormalized when embedding
};

// Forward pass over a split, rows L2-normalized; zero rows are left as
// zeros and counted.
Tensor embed_split(const Mlp& model, const DatasetSplit& split, size_t* zero_rows = nullptr);

std::vector<RankingResult> rank_queries(const Tensor& query_features,
                                        const std::vector<ItemLabel>& query_labels,
                                        const Tensor& gallery_features,
                                        const std::vector<ItemLabel>& gallery_labels,
                                        size_t* dropped = nullptr);

std::map<size_t, double> cmc(const std::vector<RankingResult>& results,
                             const std::vector<size_t>& ranks);

double map_score(const std::vector<RankingResult>& results);

// Cosine-score statistics over query/gallery pairs split by identity,
// junk rule applied. The overlap is the histogram intersection in [0,1].
struct SimilarityDistributions {
    DistributionStats positives, negatives;
    double overlap = 0.0;
};
SimilarityDistributions similarity_distributions(const Tensor& query_features,
                                                 const std::vector<ItemLabel>& query_labels,
                                                 const Tensor& gallery_features,
                                                 const std::vector<ItemLabel>& gallery_labels);

EvalReport evaluate(const Mlp& model, const DatasetSplit& query, const DatasetSplit& gallery,
                    const std::vector<size_t>& ranks = {1, 5, 10});

// evaluate() plus the per-query rankings, for Fig-5-style dumps.
struct EvalOutput {
    EvalReport report;
    std::vector<RankingResult> results;
};
EvalOutput evaluate_full(const Mlp& model, const DatasetSplit& query, const DatasetSplit& gallery,
                         const std::vector<size_t>& ranks = {1, 5, 10});

// Structured outputs: report JSON, Fig-5-style ranking rows (CSV), and
// two-column histogram data for external plotting.
void write_report(const EvalReport& report, const std::filesystem::path& path);
std::string report_to_json(const EvalReport& report);
std::string format_report(const EvalReport& report);
void dump_ranking_lists(const std::vector<RankingResult>& results, const DatasetSplit& query,
                        const DatasetSplit& gallery, size_t topk,
                        const std::filesystem::path& path);
void dump_histograms(const EvalReport& report, const std::filesystem::path& path);

}  // namespace ism
