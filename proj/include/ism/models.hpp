#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ism/tensor.hpp"

namespace ism {

struct ExtractorConfig {
    size_t input_dim = 192;  // 8 x 8 x 3 flattened pixels
    std::vector<size_t> hidden = {128, 64};
    size_t feature_dim = 32;
    double leaky_slope = 0.1;
    uint64_t init_seed = 0;
};

void validate(const ExtractorConfig& config);

bool operator==(const ExtractorConfig& a, const ExtractorConfig& b);

// Plain MLP: affine + leaky ReLU on hidden layers, bare affine on the last.
// Weights are Xavier-uniform per seed, biases zero. Copies share parameters;
// use clone_* for independent copies.
class Mlp {
public:
    Mlp() = default;

    static Mlp init(const ExtractorConfig& config);

    Tensor forward(const Tensor& batch) const;

    const ExtractorConfig& config() const { return config_; }
    bool trainable() const;
    std::vector<Tensor> parameters() const;
    size_t parameter_count() const;
    uint64_t checksum() const;

    // Deep copy with requires_grad cleared everywhere; source untouched.
    Mlp clone_frozen() const;
    // Deep copy with fresh trainable leaves.
    Mlp clone_trainable() const;

    // Checkpoint plumbing.
    size_t layer_count() const { return weights_.size(); }
    const Tensor& weight(size_t i) const { return weights_[i]; }
    const Tensor& bias(size_t i) const { return biases_[i]; }
    static Mlp from_tensors(const ExtractorConfig& config, std::vector<Tensor> weights,
                            std::vector<Tensor> biases);

private:
    ExtractorConfig config_;
    std::vector<Tensor> weights_;
    std::vector<Tensor> biases_;
};

// Validates pixel range and runs the extractor forward pass.
Tensor extract(const Mlp& model, const Tensor& batch);

// Linear layer producing per-identity logits from features.
class ClassifierHead {
public:
    ClassifierHead() = default;

    static ClassifierHead init(size_t feature_dim, size_t num_classes, uint64_t seed);

    Tensor forward(const Tensor& features) const;

    size_t num_classes() const { return classes_; }
    size_t feature_dim() const;
    bool valid() const { return weight_.valid(); }
    std::vector<Tensor> parameters() const;
    uint64_t checksum() const;
    ClassifierHead clone_frozen() const;
    ClassifierHead clone_trainable() const;

    const Tensor& weight() const { return weight_; }
    const Tensor& bias() const { return bias_; }
    static ClassifierHead from_tensors(size_t num_classes, Tensor weight, Tensor bias);

private:
    Tensor weight_;  // d x C
    Tensor bias_;    // C
    size_t classes_ = 0;
};

// Two-logit domain classifier over features: d -> hidden -> 2.
class Discriminator {
public:
    Discriminator() = default;

    static Discriminator init(size_t feature_dim, size_t hidden, double leaky_slope,
                              uint64_t seed);

    Tensor logits(const Tensor& features) const;

    const Mlp& net() const { return net_; }
    std::vector<Tensor> parameters() const { return net_.parameters(); }
    uint64_t checksum() const { return net_.checksum(); }
    bool valid() const { return net_.layer_count() > 0; }

private:
    explicit Discriminator(Mlp net) : net_(std::move(net)) {}
    Mlp net_;
};

Tensor discriminate(const Discriminator& d, const Tensor& features);

// ---------------------------------------------------------------------------
// Checkpoints: self-describing binary container, bit-exact round trip.
// Layout: magic, little-endian u64 header length, JSON header, raw f64 data.
// ---------------------------------------------------------------------------

struct Checkpoint {
    uint32_t version = 1;
    ExtractorConfig config;
    std::optional<size_t> num_classes;  // present when a classifier head is stored
    std::vector<std::pair<std::string, Tensor>> tensors;

    static Checkpoint from_model(const Mlp& extractor, const ClassifierHead* head = nullptr);
    Mlp extractor(bool trainable) const;
    ClassifierHead head(bool trainable) const;  // throws if no head stored
    uint64_t checksum() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ism
