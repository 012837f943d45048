#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ism/image.hpp"
#include "ism/rng.hpp"
#include "ism/tensor.hpp"

namespace ism {

enum class Domain { clear = 0, hazy = 1 };

struct IdentitySample {
    Image pixels;
    int person_id = 0;
    int camera_id = 1;
    Domain domain = Domain::clear;
    std::string filename;  // Market-style basename
};

enum class SplitRole { train, query, gallery };

struct DatasetSplit {
    std::vector<IdentitySample> samples;
    SplitRole role = SplitRole::train;

    size_t size() const { return samples.size(); }
    std::set<int> ids() const;
    std::set<int> cameras() const;
};

// Sorted-unique person_id -> dense class index.
std::map<int, size_t> class_index_map(const DatasetSplit& split);

struct SyntheticConfig {
    size_t n_ids = 50;
    size_t imgs_per_id = 8;
    size_t n_cams = 2;
    size_t height = 8;
    size_t width = 8;
    int id_offset = 0;  // person ids are offset+1 .. offset+n_ids
    uint64_t seed = 0;
};

// Procedural identities: a persistent attribute vector per person (torso,
// leg, skin, hair colors, build, headgear) rendered as a blocky figure;
// each camera applies a fixed brightness/contrast/translation nuisance and
// per-image Gaussian pixel noise (sigma 0.02). Deterministic per seed.
DatasetSplit generate_synthetic_identities(const SyntheticConfig& config);

struct MarketName {
    int person_id = 0;
    int camera_id = 0;
    bool distractor = false;  // pid -1
    bool junk = false;        // pid 0
};

// Parses "{pid}_c{cam}..." names, e.g. "0002_c1s1_000451_03.jpg" -> (2, 1).
MarketName parse_market_filename(const std::string& name);

std::string market_filename(int person_id, int camera_id, size_t sequence);

struct QueryGallerySplit {
    DatasetSplit query;
    DatasetSplit gallery;
    size_t single_camera_ids = 0;  // identities excluded from the query set
};

// Per identity, queries_per_id samples become queries (each keeps at least
// one cross-camera positive in the gallery); the rest go to the gallery.
QueryGallerySplit split_query_gallery(const DatasetSplit& split, size_t queries_per_id,
                                      uint64_t seed);

// Uniform without replacement within a per-epoch permutation.
class BatchSampler {
public:
    BatchSampler(size_t dataset_size, size_t batch, uint64_t seed);

    // Index batches covering one epoch in permutation order; the last batch
    // may be short when batch does not divide the dataset size.
    std::vector<std::vector<size_t>> epoch_batches();

    size_t batches_per_epoch() const;

private:
    size_t n_;
    size_t batch_;
    Rng rng_;
};

// Flattened pixel rows [B x (h*w*3)] for the extractor.
Tensor batch_pixels(const DatasetSplit& split, std::span<const size_t> indices);
std::vector<size_t> batch_classes(const DatasetSplit& split, std::span<const size_t> indices,
                                  const std::map<int, size_t>& classes);

// Folder layout: flat directory of Market-named PNGs. Junk/distractor
// names are skipped on load.
void save_split(const DatasetSplit& split, const std::filesystem::path& dir);
DatasetSplit load_split(const std::filesystem::path& dir, SplitRole role,
                        Domain domain = Domain::clear);

void write_manifest(const std::filesystem::path& path, const SyntheticConfig& config,
                    const DatasetSplit& split);

}  // namespace ism
