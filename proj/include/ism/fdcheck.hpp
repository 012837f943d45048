#pragma once

#include <functional>
#include <vector>

#include "ism/tensor.hpp"

namespace ism {

// Compares analytic gradients of `f` against central finite differences,
// coordinate by coordinate, over every given parameter. `f` must rebuild
// its graph on each call and return a 0-d loss. Returns the worst relative
// error max(|a-n|) / max(1, |a|, |n|). Parameters are restored; their grad
// buffers hold the analytic gradient afterwards.
double finite_difference_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                               double h);

}  // namespace ism
