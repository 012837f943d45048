#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ism/data.hpp"
#include "ism/image.hpp"
#include "ism/rng.hpp"

namespace ism {

// Relative scene depth in [0,1], 0 = nearest, aligned with its clear image.
struct DepthMap {
    size_t height = 0;
    size_t width = 0;
    std::vector<double> values;
};

void validate(const DepthMap& depth);

struct HazeParams {
    double atmospheric_light = 0.9;  // A, single scalar for all channels
    double beta_lo = 1.0;
    double beta_hi = 2.0;
    uint64_t seed = 0;
};

void validate(const HazeParams& params);

// t = exp(-beta * depth), strictly decreasing in both beta and depth.
std::vector<double> transmission(const DepthMap& depth, double beta);

// I = J * t + A * (1 - t), a per-pixel convex combination; stays in [0,1].
Image compose_haze(const Image& clear, const std::vector<double>& t, double atmospheric_light);

// One uniform draw on [beta_lo, beta_hi).
double sample_beta(const HazeParams& params, Rng& rng);

// Per-index seeded stream: the i-th image always gets the same beta for a
// given seed, independent of processing order.
double beta_for_index(const HazeParams& params, size_t index);

enum class DepthKind { ramp, radial, constant };

// ramp: linear top(0) -> bottom(1); radial: normalized distance from image
// center; constant: `level` everywhere.
DepthMap synthetic_depth(DepthKind kind, size_t height, size_t width, double level = 0.0);

// Min-max normalization per image; constant maps collapse to all zeros.
DepthMap normalize_depth(const GrayImage& raw);

// Where depth comes from: a generator or a folder of grayscale PNGs named
// like the clear image they pair with.
class DepthSource {
public:
    static DepthSource generator(DepthKind kind, double level = 0.0);
    static DepthSource folder(std::filesystem::path dir);

    DepthMap depth_for(const Image& image, const std::string& filename) const;
    bool is_folder() const { return std::holds_alternative<std::filesystem::path>(source_); }

private:
    struct Generated {
        DepthKind kind;
        double level;
    };
    std::variant<Generated, std::filesystem::path> source_;
};

DepthKind parse_depth_kind(const std::string& text);

struct HazyDataset {
    DatasetSplit split;
    std::vector<double> betas;  // per sample, index-aligned
};

// One hazy image per clear image at the same index; labels preserved, beta
// drawn from the per-index stream, filename gains a "_hazy" suffix.
HazyDataset hazify_dataset(const DatasetSplit& split, const DepthSource& depth,
                           const HazeParams& params);

std::string hazy_filename(const std::string& clear_name);

}  // namespace ism
