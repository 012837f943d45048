#include "ism/fdcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ism/errors.hpp"

namespace ism {

double finite_difference_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                               double h) {
    if (!(h > 0.0 && h <= 1e-3)) throw ParameterError("finite_difference_check: h must be in (0, 1e-3]");

    for (Tensor& p : params) {
        if (!p.requires_grad()) throw ContractError("finite_difference_check: parameter not trainable");
        p.zero_grad();
    }
    backward(f());

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Tensor& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto w = params[pi].mutable_data();
        for (size_t i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            w[i] = saved + h;
            const double fp = f().item();
            w[i] = saved - h;
            const double fm = f().item();
            w[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[pi][i];
            const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace ism
