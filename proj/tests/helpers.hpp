#pragma once

#include <vector>

#include "ism/rng.hpp"
#include "ism/tensor.hpp"

namespace ism::test {

inline Tensor random_tensor(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0,
                            bool trainable = false) {
    Rng rng(seed);
    std::vector<double> values(detail::shape_size(shape));
    for (double& v : values) v = rng.uniform(lo, hi);
    return trainable ? Tensor::param(shape, std::move(values))
                     : Tensor::from_values(shape, std::move(values));
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    const auto ad = a.data(), bd = b.data();
    for (size_t i = 0; i < ad.size(); ++i)
        if (ad[i] != bd[i]) return false;
    return true;
}

}  // namespace ism::test
