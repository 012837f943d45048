#include "ism/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ism/checksum.hpp"
#include "ism/errors.hpp"
#include "ism/rng.hpp"

namespace ism {

void validate(const ExtractorConfig& config) {
    if (config.input_dim == 0) throw ConfigError("extractor config: input_dim must be >= 1");
    for (size_t w : config.hidden)
        if (w == 0) throw ConfigError("extractor config: zero-width hidden layer");
    if (config.feature_dim < 2) throw ConfigError("extractor config: feature_dim must be >= 2");
    if (!(config.leaky_slope >= 0.0 && config.leaky_slope < 1.0))
        throw ConfigError("extractor config: leaky slope must be in [0,1)");
}

bool operator==(const ExtractorConfig& a, const ExtractorConfig& b) {
    return a.input_dim == b.input_dim && a.hidden == b.hidden && a.feature_dim == b.feature_dim &&
           a.leaky_slope == b.leaky_slope && a.init_seed == b.init_seed;
}

namespace {

// Xavier-uniform weight matrix [fan_in x fan_out], row-major.
std::vector<double> xavier_uniform(size_t fan_in, size_t fan_out, Rng& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = rng.uniform(-s, s);
    return w;
}

std::vector<size_t> layer_widths(const ExtractorConfig& config) {
    std::vector<size_t> widths;
    widths.push_back(config.input_dim);
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(config.feature_dim);
    return widths;
}

}  // namespace

Mlp Mlp::init(const ExtractorConfig& config) {
    validate(config);
    Mlp m;
    m.config_ = config;
    const auto widths = layer_widths(config);
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        Rng rng(mix_seed(config.init_seed, 0x11a7e000 + l));
        m.weights_.push_back(
            Tensor::param({widths[l], widths[l + 1]}, xavier_uniform(widths[l], widths[l + 1], rng)));
        m.biases_.push_back(Tensor::param({widths[l + 1]}, std::vector<double>(widths[l + 1], 0.0)));
    }
    return m;
}

Tensor Mlp::forward(const Tensor& batch) const {
    if (weights_.empty()) throw ContractError("mlp: uninitialized model");
    if (batch.rank() != 2 || batch.extent(1) != config_.input_dim)
        throw DimensionError("mlp: batch width does not match input_dim");
    Tensor h = batch;
    for (size_t l = 0; l < weights_.size(); ++l) {
        h = affine(h, weights_[l], biases_[l]);
        if (l + 1 < weights_.size()) h = leaky_relu(h, config_.leaky_slope);
    }
    return h;
}

bool Mlp::trainable() const { return !weights_.empty() && weights_.front().requires_grad(); }

std::vector<Tensor> Mlp::parameters() const {
    std::vector<Tensor> params;
    for (size_t l = 0; l < weights_.size(); ++l) {
        params.push_back(weights_[l]);
        params.push_back(biases_[l]);
    }
    return params;
}

size_t Mlp::parameter_count() const {
    size_t n = 0;
    for (const Tensor& p : parameters()) n += p.size();
    return n;
}

uint64_t Mlp::checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const Tensor& p : parameters()) h = fnv1a_doubles(p.data(), h);
    return h;
}

Mlp Mlp::clone_frozen() const {
    Mlp m;
    m.config_ = config_;
    for (size_t l = 0; l < weights_.size(); ++l) {
        m.weights_.push_back(weights_[l].clone_frozen());
        m.biases_.push_back(biases_[l].clone_frozen());
    }
    return m;
}

Mlp Mlp::clone_trainable() const {
    Mlp m;
    m.config_ = config_;
    for (size_t l = 0; l < weights_.size(); ++l) {
        m.weights_.push_back(weights_[l].clone_as_param());
        m.biases_.push_back(biases_[l].clone_as_param());
    }
    return m;
}

Mlp Mlp::from_tensors(const ExtractorConfig& config, std::vector<Tensor> weights,
                      std::vector<Tensor> biases) {
    validate(config);
    const auto widths = layer_widths(config);
    if (weights.size() != widths.size() - 1 || biases.size() != widths.size() - 1)
        throw DimensionError("mlp: tensor count does not match config");
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        if (weights[l].shape() != Shape{widths[l], widths[l + 1]} ||
            biases[l].shape() != Shape{widths[l + 1]})
            throw DimensionError("mlp: tensor shape does not match config");
    }
    Mlp m;
    m.config_ = config;
    m.weights_ = std::move(weights);
    m.biases_ = std::move(biases);
    return m;
}

Tensor extract(const Mlp& model, const Tensor& batch) {
    for (double v : batch.data())
        if (!(v >= 0.0 && v <= 1.0)) throw ContractError("extract: pixel values must lie in [0,1]");
    return model.forward(batch);
}

ClassifierHead ClassifierHead::init(size_t feature_dim, size_t num_classes, uint64_t seed) {
    if (num_classes < 2) throw ConfigError("classifier head: need at least 2 classes");
    if (feature_dim == 0) throw ConfigError("classifier head: zero feature dim");
    Rng rng(mix_seed(seed, 0x4ead));
    ClassifierHead head;
    head.weight_ = Tensor::param({feature_dim, num_classes}, xavier_uniform(feature_dim, num_classes, rng));
    head.bias_ = Tensor::param({num_classes}, std::vector<double>(num_classes, 0.0));
    head.classes_ = num_classes;
    return head;
}

Tensor ClassifierHead::forward(const Tensor& features) const {
    if (!weight_.valid()) throw ContractError("classifier head: uninitialized");
    return affine(features, weight_, bias_);
}

size_t ClassifierHead::feature_dim() const {
    if (!weight_.valid()) throw ContractError("classifier head: uninitialized");
    return weight_.extent(0);
}

std::vector<Tensor> ClassifierHead::parameters() const { return {weight_, bias_}; }

uint64_t ClassifierHead::checksum() const {
    uint64_t h = fnv1a_doubles(weight_.data());
    return fnv1a_doubles(bias_.data(), h);
}

ClassifierHead ClassifierHead::clone_frozen() const {
    return from_tensors(classes_, weight_.clone_frozen(), bias_.clone_frozen());
}

ClassifierHead ClassifierHead::clone_trainable() const {
    return from_tensors(classes_, weight_.clone_as_param(), bias_.clone_as_param());
}

ClassifierHead ClassifierHead::from_tensors(size_t num_classes, Tensor weight, Tensor bias) {
    if (weight.rank() != 2 || weight.extent(1) != num_classes || bias.shape() != Shape{num_classes})
        throw DimensionError("classifier head: tensor shapes do not match class count");
    ClassifierHead head;
    head.weight_ = std::move(weight);
    head.bias_ = std::move(bias);
    head.classes_ = num_classes;
    return head;
}

Discriminator Discriminator::init(size_t feature_dim, size_t hidden, double leaky_slope,
                                  uint64_t seed) {
    ExtractorConfig cfg;
    cfg.input_dim = feature_dim;
    cfg.hidden = {hidden};
    cfg.feature_dim = 2;  // clear vs hazy
    cfg.leaky_slope = leaky_slope;
    cfg.init_seed = seed;
    return Discriminator(Mlp::init(cfg));
}

Tensor Discriminator::logits(const Tensor& features) const {
    if (!valid()) throw ContractError("discriminator: uninitialized");
    return net_.forward(features);
}

Tensor discriminate(const Discriminator& d, const Tensor& features) { return d.logits(features); }

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'I', 'S', 'M', 'C', 'K', 'P', 'T', '\n'};

nlohmann::json config_to_json(const ExtractorConfig& c) {
    return {{"input_dim", c.input_dim},
            {"hidden", c.hidden},
            {"feature_dim", c.feature_dim},
            {"leaky_slope", c.leaky_slope},
            {"init_seed", c.init_seed}};
}

ExtractorConfig config_from_json(const nlohmann::json& j) {
    ExtractorConfig c;
    c.input_dim = j.at("input_dim").get<size_t>();
    c.hidden = j.at("hidden").get<std::vector<size_t>>();
    c.feature_dim = j.at("feature_dim").get<size_t>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.init_seed = j.at("init_seed").get<uint64_t>();
    return c;
}

}  // namespace

Checkpoint Checkpoint::from_model(const Mlp& extractor, const ClassifierHead* head) {
    Checkpoint ckpt;
    ckpt.config = extractor.config();
    for (size_t l = 0; l < extractor.layer_count(); ++l) {
        ckpt.tensors.emplace_back("extractor.w" + std::to_string(l), extractor.weight(l).detach());
        ckpt.tensors.emplace_back("extractor.b" + std::to_string(l), extractor.bias(l).detach());
    }
    if (head != nullptr && head->valid()) {
        ckpt.num_classes = head->num_classes();
        ckpt.tensors.emplace_back("classifier.w", head->weight().detach());
        ckpt.tensors.emplace_back("classifier.b", head->bias().detach());
    }
    return ckpt;
}

Mlp Checkpoint::extractor(bool trainable) const {
    std::vector<Tensor> weights, biases;
    const size_t layers = config.hidden.size() + 1;
    for (size_t l = 0; l < layers; ++l) {
        const std::string wname = "extractor.w" + std::to_string(l);
        const std::string bname = "extractor.b" + std::to_string(l);
        const Tensor* w = nullptr;
        const Tensor* b = nullptr;
        for (const auto& [name, t] : tensors) {
            if (name == wname) w = &t;
            if (name == bname) b = &t;
        }
        if (w == nullptr || b == nullptr) throw IngestionError("checkpoint: missing tensor " + wname);
        weights.push_back(trainable ? w->clone_as_param() : w->clone_frozen());
        biases.push_back(trainable ? b->clone_as_param() : b->clone_frozen());
    }
    return Mlp::from_tensors(config, std::move(weights), std::move(biases));
}

ClassifierHead Checkpoint::head(bool trainable) const {
    if (!num_classes) throw IngestionError("checkpoint: no classifier head stored");
    const Tensor* w = nullptr;
    const Tensor* b = nullptr;
    for (const auto& [name, t] : tensors) {
        if (name == "classifier.w") w = &t;
        if (name == "classifier.b") b = &t;
    }
    if (w == nullptr || b == nullptr) throw IngestionError("checkpoint: missing classifier tensors");
    return ClassifierHead::from_tensors(*num_classes,
                                        trainable ? w->clone_as_param() : w->clone_frozen(),
                                        trainable ? b->clone_as_param() : b->clone_frozen());
}

uint64_t Checkpoint::checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, t] : tensors) h = fnv1a_doubles(t.data(), h);
    return h;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    nlohmann::json header;
    header["version"] = ckpt.version;
    header["config"] = config_to_json(ckpt.config);
    if (ckpt.num_classes)
        header["num_classes"] = *ckpt.num_classes;
    else
        header["num_classes"] = nullptr;

    nlohmann::json table = nlohmann::json::array();
    size_t offset = 0;
    for (const auto& [name, t] : ckpt.tensors) {
        table.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}});
        offset += t.size();
    }
    header["tensors"] = table;
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("checkpoint: cannot open for write: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const uint64_t hlen = head.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        const auto d = t.data();
        out.write(reinterpret_cast<const char*>(d.data()),
                  static_cast<std::streamsize>(d.size() * sizeof(double)));
    }
    if (!out) throw IngestionError("checkpoint: write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("checkpoint: cannot open: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ParseError("checkpoint: bad magic in " + path.string());
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || hlen == 0 || hlen > (1ULL << 30)) throw ParseError("checkpoint: bad header length");
    std::string head(hlen, '\0');
    in.read(head.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw ParseError("checkpoint: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(head);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: malformed header: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.version = header.at("version").get<uint32_t>();
    if (ckpt.version != 1) throw ParseError("checkpoint: unsupported version");
    ckpt.config = config_from_json(header.at("config"));
    if (!header.at("num_classes").is_null())
        ckpt.num_classes = header.at("num_classes").get<size_t>();

    for (const auto& entry : header.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<Shape>();
        const auto count = entry.at("count").get<size_t>();
        if (detail::shape_size(shape) != count) throw ParseError("checkpoint: shape/count mismatch");
        std::vector<double> values(count);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw ParseError("checkpoint: truncated tensor data for " + name);
        ckpt.tensors.emplace_back(name, Tensor::from_values(shape, std::move(values)));
    }
    return ckpt;
}

}  // namespace ism
