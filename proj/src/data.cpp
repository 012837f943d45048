#include "ism/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ism/errors.hpp"

namespace ism {

std::set<int> DatasetSplit::ids() const {
    std::set<int> out;
    for (const auto& s : samples) out.insert(s.person_id);
    return out;
}

std::set<int> DatasetSplit::cameras() const {
    std::set<int> out;
    for (const auto& s : samples) out.insert(s.camera_id);
    return out;
}

std::map<int, size_t> class_index_map(const DatasetSplit& split) {
    std::map<int, size_t> m;
    for (int id : split.ids()) {
        const size_t next = m.size();
        m.emplace(id, next);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Synthetic identities
// ---------------------------------------------------------------------------

namespace {

struct IdentityLook {
    double torso[3], legs[3], skin[3], hair[3], headgear[3];
    bool has_headgear = false;
    bool wide_build = false;
};

IdentityLook draw_look(uint64_t seed, int person_id) {
    Rng rng(mix_seed(seed, 0x1d000000ULL + static_cast<uint64_t>(person_id)));
    IdentityLook look;
    // Muted clothing palette: identities are separable when clear but their
    // pixel gaps shrink toward the noise floor once haze compresses contrast.
    for (double& v : look.torso) v = rng.uniform(0.08, 0.42);
    for (double& v : look.legs) v = rng.uniform(0.08, 0.42);
    const double tan = rng.uniform(0.45, 0.75);
    look.skin[0] = tan;
    look.skin[1] = tan * rng.uniform(0.8, 0.95);
    look.skin[2] = tan * rng.uniform(0.6, 0.8);
    for (double& v : look.hair) v = rng.uniform(0.0, 0.35);
    look.has_headgear = rng.below(2) == 1;
    for (double& v : look.headgear) v = rng.uniform(0.08, 0.42);
    look.wide_build = rng.below(2) == 1;
    return look;
}

constexpr double kBackground = 0.78;

void paint(Image& img, size_t r, size_t c, const double rgb[3]) {
    for (size_t ch = 0; ch < 3; ++ch) img.at(r, c, ch) = rgb[ch];
}

// Blocky pedestrian: headgear/hair row, head, torso block, two legs.
Image render_identity(const IdentityLook& look, size_t h, size_t w) {
    Image img(h, w, kBackground);
    const size_t head_rows = std::max<size_t>(1, h / 4);
    const size_t torso_rows = std::max<size_t>(2, (3 * h) / 8);
    const size_t torso_end = std::min(h, head_rows + torso_rows);
    const size_t mid = w / 2;

    const size_t head_half = std::max<size_t>(1, w / 8);
    for (size_t r = 0; r < head_rows; ++r) {
        const double* color = (r == 0 && look.has_headgear) ? look.headgear
                              : (r == 0)                    ? look.hair
                                                            : look.skin;
        for (size_t c = mid - head_half; c < std::min(w, mid + head_half); ++c)
            paint(img, r, c, color);
    }

    const size_t torso_half = look.wide_build ? std::max<size_t>(2, (3 * w) / 8)
                                              : std::max<size_t>(1, w / 4);
    for (size_t r = head_rows; r < torso_end; ++r)
        for (size_t c = (mid >= torso_half ? mid - torso_half : 0); c < std::min(w, mid + torso_half);
             ++c)
            paint(img, r, c, look.torso);

    const size_t leg_gap = 1;
    for (size_t r = torso_end; r < h; ++r) {
        if (mid >= leg_gap + 1) paint(img, r, mid - leg_gap - 1, look.legs);
        paint(img, r, mid - 1, look.legs);
        if (mid + leg_gap < w) paint(img, r, mid + leg_gap, look.legs);
    }
    return img;
}

struct CameraNuisance {
    double brightness;
    double contrast;
    int dx, dy;  // pixel translation, magnitude 1..2
};

// Fixed per camera id, shared by every dataset.
CameraNuisance camera_nuisance(int camera_id) {
    Rng rng(splitmix64(0xca3e0000ULL + static_cast<uint64_t>(camera_id)));
    CameraNuisance n;
    n.brightness = rng.uniform(-0.12, 0.12);
    n.contrast = rng.uniform(0.85, 1.15);
    const int mag_x = 1 + static_cast<int>(rng.below(2));
    const int mag_y = 1 + static_cast<int>(rng.below(2));
    n.dx = rng.below(2) == 0 ? mag_x : -mag_x;
    n.dy = rng.below(2) == 0 ? 0 : (rng.below(2) == 0 ? mag_y : -mag_y);
    return n;
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

Image apply_camera(const Image& src, const CameraNuisance& n, Rng& noise_rng) {
    Image out(src.height, src.width, kBackground);
    for (size_t r = 0; r < src.height; ++r)
        for (size_t c = 0; c < src.width; ++c) {
            const long sr = static_cast<long>(r) - n.dy;
            const long sc = static_cast<long>(c) - n.dx;
            for (size_t ch = 0; ch < 3; ++ch) {
                double v = kBackground;
                if (sr >= 0 && sr < static_cast<long>(src.height) && sc >= 0 &&
                    sc < static_cast<long>(src.width))
                    v = src.at(static_cast<size_t>(sr), static_cast<size_t>(sc), ch);
                v = n.contrast * (v - 0.5) + 0.5 + n.brightness;
                v += 0.02 * noise_rng.gaussian();
                out.at(r, c, ch) = clamp01(v);
            }
        }
    return out;
}

}  // namespace

DatasetSplit generate_synthetic_identities(const SyntheticConfig& config) {
    if (config.n_ids < 2) throw ConfigError("synthetic data: need at least 2 identities");
    if (config.n_cams < 2) throw ConfigError("synthetic data: need at least 2 cameras");
    if (config.imgs_per_id < 1) throw ConfigError("synthetic data: need at least 1 image per id");
    if (config.height < 6 || config.width < 4)
        throw ConfigError("synthetic data: canvas too small to render a figure (min 6x4)");

    DatasetSplit split;
    split.role = SplitRole::train;
    for (size_t i = 0; i < config.n_ids; ++i) {
        const int pid = config.id_offset + 1 + static_cast<int>(i);
        const IdentityLook look = draw_look(config.seed, pid);
        const Image base = render_identity(look, config.height, config.width);
        std::vector<size_t> seq_per_cam(config.n_cams, 0);
        for (size_t j = 0; j < config.imgs_per_id; ++j) {
            const size_t cam_index = j % config.n_cams;
            const int cam = 1 + static_cast<int>(cam_index);
            Rng noise_rng(mix_seed(config.seed, 0x4015e000ULL ^
                                                    (static_cast<uint64_t>(pid) << 16) ^
                                                    static_cast<uint64_t>(j)));
            IdentitySample s;
            s.pixels = apply_camera(base, camera_nuisance(cam), noise_rng);
            s.person_id = pid;
            s.camera_id = cam;
            s.domain = Domain::clear;
            s.filename = market_filename(pid, cam, seq_per_cam[cam_index]++);
            split.samples.push_back(std::move(s));
        }
    }
    return split;
}

// ---------------------------------------------------------------------------
// Market-style names
// ---------------------------------------------------------------------------

MarketName parse_market_filename(const std::string& name) {
    const auto fail = [&]() -> ParseError {
        return ParseError("market name: cannot parse \"" + name + "\"");
    };
    size_t pos = 0;
    bool negative = false;
    if (pos < name.size() && name[pos] == '-') {
        negative = true;
        ++pos;
    }
    const size_t digits_begin = pos;
    while (pos < name.size() && std::isdigit(static_cast<unsigned char>(name[pos]))) ++pos;
    if (pos == digits_begin || pos >= name.size() || name[pos] != '_') throw fail();
    int pid = 0;
    for (size_t i = digits_begin; i < pos; ++i) pid = pid * 10 + (name[i] - '0');
    if (negative) pid = -pid;

    ++pos;  // skip '_'
    if (pos >= name.size() || name[pos] != 'c') throw fail();
    ++pos;
    const size_t cam_begin = pos;
    while (pos < name.size() && std::isdigit(static_cast<unsigned char>(name[pos]))) ++pos;
    if (pos == cam_begin) throw fail();
    int cam = 0;
    for (size_t i = cam_begin; i < pos; ++i) cam = cam * 10 + (name[i] - '0');
    if (cam < 1) throw fail();

    MarketName out;
    out.person_id = pid;
    out.camera_id = cam;
    out.distractor = pid == -1;
    out.junk = pid == 0;
    return out;
}

std::string market_filename(int person_id, int camera_id, size_t sequence) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d_c%ds1_%06zu_00.png", person_id, camera_id, sequence);
    return buf;
}

// ---------------------------------------------------------------------------
// Query/gallery split
// ---------------------------------------------------------------------------

QueryGallerySplit split_query_gallery(const DatasetSplit& split, size_t queries_per_id,
                                      uint64_t seed) {
    QueryGallerySplit out;
    out.query.role = SplitRole::query;
    out.gallery.role = SplitRole::gallery;

    std::map<int, std::vector<size_t>> by_id;
    for (size_t i = 0; i < split.samples.size(); ++i)
        by_id[split.samples[i].person_id].push_back(i);

    for (const auto& [pid, indices] : by_id) {
        std::set<int> cams;
        for (size_t i : indices) cams.insert(split.samples[i].camera_id);
        if (cams.size() < 2) {
            ++out.single_camera_ids;
            for (size_t i : indices) out.gallery.samples.push_back(split.samples[i]);
            continue;
        }

        std::vector<size_t> order = indices;
        Rng rng(mix_seed(seed, 0x59117000ULL + static_cast<uint64_t>(pid)));
        rng.shuffle(order);

        std::vector<bool> is_query(order.size(), false);
        size_t chosen = 0;
        for (size_t k = 0; k < order.size() && chosen < queries_per_id; ++k) {
            const int qcam = split.samples[order[k]].camera_id;
            // Keep at least one cross-camera positive in the gallery.
            bool cross_left = false;
            for (size_t m = 0; m < order.size(); ++m) {
                if (m == k || is_query[m]) continue;
                if (split.samples[order[m]].camera_id != qcam) {
                    cross_left = true;
                    break;
                }
            }
            if (cross_left) {
                is_query[k] = true;
                ++chosen;
            }
        }
        for (size_t k = 0; k < order.size(); ++k) {
            auto& dst = is_query[k] ? out.query : out.gallery;
            dst.samples.push_back(split.samples[order[k]]);
        }
    }

    auto by_name = [](const IdentitySample& a, const IdentitySample& b) {
        return a.filename < b.filename;
    };
    std::sort(out.query.samples.begin(), out.query.samples.end(), by_name);
    std::sort(out.gallery.samples.begin(), out.gallery.samples.end(), by_name);
    return out;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

BatchSampler::BatchSampler(size_t dataset_size, size_t batch, uint64_t seed)
    : n_(dataset_size), batch_(batch), rng_(mix_seed(seed, 0xba7c4000ULL)) {
    if (batch == 0) throw ConfigError("batch sampler: batch must be >= 1");
    if (batch > dataset_size) throw ConfigError("batch sampler: batch exceeds dataset size");
}

std::vector<std::vector<size_t>> BatchSampler::epoch_batches() {
    std::vector<size_t> perm(n_);
    for (size_t i = 0; i < n_; ++i) perm[i] = i;
    rng_.shuffle(perm);
    std::vector<std::vector<size_t>> batches;
    for (size_t start = 0; start < n_; start += batch_) {
        const size_t end = std::min(n_, start + batch_);
        batches.emplace_back(perm.begin() + static_cast<long>(start),
                             perm.begin() + static_cast<long>(end));
    }
    return batches;
}

size_t BatchSampler::batches_per_epoch() const { return (n_ + batch_ - 1) / batch_; }

Tensor batch_pixels(const DatasetSplit& split, std::span<const size_t> indices) {
    if (indices.empty()) throw ContractError("batch_pixels: empty index list");
    const size_t dim = split.samples.at(indices[0]).pixels.px.size();
    std::vector<double> rows;
    rows.reserve(indices.size() * dim);
    for (size_t i : indices) {
        const auto& px = split.samples.at(i).pixels.px;
        if (px.size() != dim) throw DimensionError("batch_pixels: inconsistent image sizes");
        rows.insert(rows.end(), px.begin(), px.end());
    }
    return Tensor::from_values({indices.size(), dim}, std::move(rows));
}

std::vector<size_t> batch_classes(const DatasetSplit& split, std::span<const size_t> indices,
                                  const std::map<int, size_t>& classes) {
    std::vector<size_t> out;
    out.reserve(indices.size());
    for (size_t i : indices) {
        const auto it = classes.find(split.samples.at(i).person_id);
        if (it == classes.end()) throw ContractError("batch_classes: person id not in class map");
        out.push_back(it->second);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Folder I/O
// ---------------------------------------------------------------------------

void save_split(const DatasetSplit& split, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& s : split.samples) write_png_rgb(dir / s.filename, s.pixels);
}

DatasetSplit load_split(const std::filesystem::path& dir, SplitRole role, Domain domain) {
    if (!std::filesystem::is_directory(dir))
        throw IngestionError("load_split: not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    DatasetSplit split;
    split.role = role;
    for (const auto& f : files) {
        const MarketName name = parse_market_filename(f.filename().string());
        if (name.junk || name.distractor) continue;
        IdentitySample s;
        s.pixels = read_png_rgb(f);
        s.person_id = name.person_id;
        s.camera_id = name.camera_id;
        s.domain = domain;
        s.filename = f.filename().string();
        split.samples.push_back(std::move(s));
    }
    return split;
}

void write_manifest(const std::filesystem::path& path, const SyntheticConfig& config,
                    const DatasetSplit& split) {
    nlohmann::json j;
    j["generator_seed"] = config.seed;
    j["config"] = {{"n_ids", config.n_ids},     {"imgs_per_id", config.imgs_per_id},
                   {"n_cams", config.n_cams},   {"height", config.height},
                   {"width", config.width},     {"id_offset", config.id_offset}};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : split.samples)
        rows.push_back({{"file", s.filename}, {"id", s.person_id}, {"cam", s.camera_id}});
    j["samples"] = rows;
    std::ofstream out(path);
    if (!out) throw IngestionError("manifest: cannot open for write: " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace ism
