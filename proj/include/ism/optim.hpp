#pragma once

#include <cstdint>
#include <vector>

#include "ism/tensor.hpp"

namespace ism {

struct AdamConfig {
    double lr = 0.00035;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adaptive-moment optimizer with bias correction. Gradients are left
// untouched by step(); the caller zeroes them between iterations.
class Adam {
public:
    explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    void step();
    void zero_grad();

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    int64_t steps() const { return steps_; }
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    int64_t steps_ = 0;
    AdamConfig cfg_;
};

}  // namespace ism
