#include "ism/haze.hpp"

#include <algorithm>
#include <cmath>

#include "ism/errors.hpp"

namespace ism {

void validate(const DepthMap& depth) {
    if (depth.values.size() != depth.height * depth.width)
        throw DimensionError("depth map: buffer does not match dimensions");
    for (double v : depth.values)
        if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("depth map: values must lie in [0,1]");
}

void validate(const HazeParams& params) {
    if (!(params.atmospheric_light > 0.0 && params.atmospheric_light <= 1.0))
        throw ConfigError("haze params: atmospheric light must be in (0,1]");
    if (!(params.beta_lo > 0.0 && params.beta_lo <= params.beta_hi))
        throw ConfigError("haze params: need 0 < beta_lo <= beta_hi");
}

std::vector<double> transmission(const DepthMap& depth, double beta) {
    if (!(beta > 0.0)) throw ParameterError("transmission: beta must be > 0");
    std::vector<double> t(depth.values.size());
    for (size_t i = 0; i < t.size(); ++i) t[i] = std::exp(-beta * depth.values[i]);
    return t;
}

Image compose_haze(const Image& clear, const std::vector<double>& t, double atmospheric_light) {
    if (!(atmospheric_light > 0.0 && atmospheric_light <= 1.0))
        throw ParameterError("compose_haze: atmospheric light must be in (0,1]");
    if (t.size() != clear.pixel_count())
        throw DimensionError("compose_haze: transmission map does not match image");
    Image out(clear.height, clear.width);
    for (size_t p = 0; p < t.size(); ++p)
        for (size_t ch = 0; ch < 3; ++ch)
            // A + t*(J - A): algebraically J*t + A*(1-t), one rounding step,
            // so |I - A| = t*|J - A| holds down to the last bit on exact inputs.
            out.px[p * 3 + ch] = atmospheric_light + t[p] * (clear.px[p * 3 + ch] - atmospheric_light);
    return out;
}

double sample_beta(const HazeParams& params, Rng& rng) {
    validate(params);
    if (params.beta_lo == params.beta_hi) {
        rng.uniform();  // keep the stream position consistent
        return params.beta_lo;
    }
    return rng.uniform(params.beta_lo, params.beta_hi);
}

double beta_for_index(const HazeParams& params, size_t index) {
    Rng rng(mix_seed(params.seed, 0xbe7a0000ULL + index));
    return sample_beta(params, rng);
}

DepthMap synthetic_depth(DepthKind kind, size_t height, size_t width, double level) {
    if (height == 0 || width == 0) throw ConfigError("synthetic depth: empty dimensions");
    DepthMap d;
    d.height = height;
    d.width = width;
    d.values.resize(height * width);
    switch (kind) {
        case DepthKind::ramp:
            for (size_t r = 0; r < height; ++r) {
                const double v = height > 1 ? static_cast<double>(r) / static_cast<double>(height - 1) : 0.0;
                for (size_t c = 0; c < width; ++c) d.values[r * width + c] = v;
            }
            break;
        case DepthKind::radial: {
            const double cr = (static_cast<double>(height) - 1.0) / 2.0;
            const double cc = (static_cast<double>(width) - 1.0) / 2.0;
            const double max_dist = std::sqrt(cr * cr + cc * cc);
            for (size_t r = 0; r < height; ++r)
                for (size_t c = 0; c < width; ++c) {
                    const double dr = static_cast<double>(r) - cr;
                    const double dc = static_cast<double>(c) - cc;
                    d.values[r * width + c] =
                        max_dist > 0.0 ? std::sqrt(dr * dr + dc * dc) / max_dist : 0.0;
                }
            break;
        }
        case DepthKind::constant:
            if (!(level >= 0.0 && level <= 1.0))
                throw ParameterError("synthetic depth: constant level must be in [0,1]");
            std::fill(d.values.begin(), d.values.end(), level);
            break;
    }
    return d;
}

DepthMap normalize_depth(const GrayImage& raw) {
    if (raw.values.empty()) throw IngestionError("normalize_depth: empty depth image");
    const auto [lo_it, hi_it] = std::minmax_element(raw.values.begin(), raw.values.end());
    const double lo = *lo_it, hi = *hi_it;
    DepthMap d;
    d.height = raw.height;
    d.width = raw.width;
    d.values.resize(raw.values.size());
    if (hi > lo) {
        for (size_t i = 0; i < d.values.size(); ++i) d.values[i] = (raw.values[i] - lo) / (hi - lo);
    }  // constant depth collapses to zeros
    return d;
}

DepthSource DepthSource::generator(DepthKind kind, double level) {
    DepthSource s;
    s.source_ = Generated{kind, level};
    return s;
}

DepthSource DepthSource::folder(std::filesystem::path dir) {
    DepthSource s;
    s.source_ = std::move(dir);
    return s;
}

DepthMap DepthSource::depth_for(const Image& image, const std::string& filename) const {
    if (const auto* gen = std::get_if<Generated>(&source_))
        return synthetic_depth(gen->kind, image.height, image.width, gen->level);

    const auto& dir = std::get<std::filesystem::path>(source_);
    std::filesystem::path p = dir / filename;
    p.replace_extension(".png");
    if (!std::filesystem::exists(p))
        throw IngestionError("depth: no depth map for image \"" + filename + "\" (expected " +
                             p.string() + ")");
    DepthMap d = normalize_depth(read_png_gray(p));
    if (d.height != image.height || d.width != image.width)
        throw DimensionError("depth: size mismatch between image \"" + filename +
                             "\" and its depth map");
    return d;
}

DepthKind parse_depth_kind(const std::string& text) {
    if (text == "ramp") return DepthKind::ramp;
    if (text == "radial") return DepthKind::radial;
    if (text == "constant") return DepthKind::constant;
    throw ParseError("depth kind: expected ramp|radial|constant, got \"" + text + "\"");
}

std::string hazy_filename(const std::string& clear_name) {
    const auto dot = clear_name.rfind('.');
    if (dot == std::string::npos) return clear_name + "_hazy";
    return clear_name.substr(0, dot) + "_hazy" + clear_name.substr(dot);
}

HazyDataset hazify_dataset(const DatasetSplit& split, const DepthSource& depth,
                           const HazeParams& params) {
    validate(params);
    HazyDataset out;
    out.split.role = split.role;
    out.split.samples.reserve(split.samples.size());
    out.betas.reserve(split.samples.size());
    for (size_t i = 0; i < split.samples.size(); ++i) {
        const IdentitySample& src = split.samples[i];
        const DepthMap d = depth.depth_for(src.pixels, src.filename);
        const double beta = beta_for_index(params, i);
        IdentitySample hazy;
        hazy.pixels = compose_haze(src.pixels, transmission(d, beta), params.atmospheric_light);
        hazy.person_id = src.person_id;
        hazy.camera_id = src.camera_id;
        hazy.domain = Domain::hazy;
        hazy.filename = hazy_filename(src.filename);
        out.split.samples.push_back(std::move(hazy));
        out.betas.push_back(beta);
    }
    return out;
}

}  // namespace ism
