#include "ism/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ism/errors.hpp"

namespace ism {

namespace {

// Row-wise stabilized log-softmax of an arbitrary [B x C] value buffer.
void log_softmax_rows(std::span<const double> z, size_t rows, size_t cols,
                      std::vector<double>& out) {
    out.resize(rows * cols);
    for (size_t i = 0; i < rows; ++i) {
        const double* row = z.data() + i * cols;
        double m = row[0];
        for (size_t j = 1; j < cols; ++j) m = std::max(m, row[j]);
        double acc = 0.0;
        for (size_t j = 0; j < cols; ++j) acc += std::exp(row[j] - m);
        const double lse = m + std::log(acc);
        for (size_t j = 0; j < cols; ++j) out[i * cols + j] = row[j] - lse;
    }
}

void require_finite(const Tensor& t, const char* what) {
    for (double v : t.data())
        if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite input");
}

}  // namespace

void validate(const LossWeights& w) {
    if (w.lambda1 < 0.0 || w.lambda2 < 0.0) throw ConfigError("loss weights: lambdas must be >= 0");
    if (!(w.epsilon >= 0.0 && w.epsilon < 1.0)) throw ConfigError("loss weights: epsilon must be in [0,1)");
    if (!(w.delta > 0.0)) throw ConfigError("loss weights: delta must be > 0");
}

std::vector<double> smooth_targets(size_t true_class, size_t num_classes, double epsilon) {
    if (num_classes < 2) throw ConfigError("smooth_targets: need at least 2 classes");
    if (true_class >= num_classes) throw ContractError("smooth_targets: class index out of range");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ParameterError("smooth_targets: epsilon must be in [0,1)");
    std::vector<double> t(num_classes, epsilon / static_cast<double>(num_classes - 1));
    t[true_class] = 1.0 - epsilon;
    return t;
}

Tensor smooth_target_rows(const std::vector<size_t>& classes, size_t num_classes, double epsilon) {
    std::vector<double> rows;
    rows.reserve(classes.size() * num_classes);
    for (size_t c : classes) {
        const auto t = smooth_targets(c, num_classes, epsilon);
        rows.insert(rows.end(), t.begin(), t.end());
    }
    return Tensor::from_values({classes.size(), num_classes}, std::move(rows));
}

Tensor ce_smoothed(const Tensor& logits, const Tensor& targets) {
    if (logits.rank() != 2 || targets.rank() != 2 || logits.shape() != targets.shape())
        throw DimensionError("ce_smoothed: logits and targets must be same-shape 2-d tensors");
    const size_t rows = logits.extent(0), cols = logits.extent(1);
    if (rows == 0) throw ContractError("ce_smoothed: empty batch");
    require_finite(logits, "ce_smoothed");

    const auto td = targets.data();
    for (size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < cols; ++j) s += td[i * cols + j];
        if (std::abs(s - 1.0) > 1e-9) throw ContractError("ce_smoothed: target row does not sum to 1");
    }

    std::vector<double> logp;
    log_softmax_rows(logits.data(), rows, cols, logp);
    double loss = 0.0;
    for (size_t i = 0; i < rows * cols; ++i) loss -= td[i] * logp[i];
    loss /= static_cast<double>(rows);

    return Tensor::make_op({}, {loss}, {logits, targets}, [rows, cols](detail::TensorNode& n) {
        const double g = n.grad[0] / static_cast<double>(rows);
        auto& pz = n.parents[0];
        auto& pt = n.parents[1];
        std::vector<double> logp;
        log_softmax_rows(pz->data, rows, cols, logp);
        if (pz->grad_path) {
            for (size_t i = 0; i < rows; ++i)
                for (size_t j = 0; j < cols; ++j) {
                    const size_t k = i * cols + j;
                    pz->grad[k] += g * (std::exp(logp[k]) - pt->data[k]);
                }
        }
        if (pt->grad_path) {
            for (size_t k = 0; k < rows * cols; ++k) pt->grad[k] += g * (-logp[k]);
        }
    });
}

Tensor pairwise_l2_matrix(const Tensor& features) {
    if (features.rank() != 2) throw DimensionError("pairwise_l2_matrix: features must be 2-d");
    const size_t b = features.extent(0), d = features.extent(1);
    if (b == 0) throw ContractError("pairwise_l2_matrix: empty batch");
    const auto f = features.data();

    std::vector<double> m(b * b, 0.0);
    for (size_t i = 0; i < b; ++i)
        for (size_t j = i + 1; j < b; ++j) {
            double acc = 0.0;
            for (size_t k = 0; k < d; ++k) {
                const double diff = f[i * d + k] - f[j * d + k];
                acc += diff * diff;
            }
            const double dist = std::sqrt(acc);
            m[i * b + j] = dist;
            m[j * b + i] = dist;
        }

    // Distances are needed in the backward pass; capture by value.
    std::vector<double> dists = m;
    return Tensor::make_op({b, b}, std::move(m), {features},
                           [b, d, dists = std::move(dists)](detail::TensorNode& n) {
                               auto& p = n.parents[0];
                               if (!p->grad_path) return;
                               for (size_t i = 0; i < b; ++i)
                                   for (size_t j = 0; j < b; ++j) {
                                       if (i == j) continue;
                                       const double dist = dists[i * b + j];
                                       if (dist == 0.0) continue;  // subgradient 0
                                       const double g = n.grad[i * b + j];
                                       if (g == 0.0) continue;
                                       const double s = g / dist;
                                       for (size_t k = 0; k < d; ++k) {
                                           const double diff = p->data[i * d + k] - p->data[j * d + k];
                                           p->grad[i * d + k] += s * diff;
                                           p->grad[j * d + k] -= s * diff;
                                       }
                                   }
                           });
}

Tensor isl_loss(const Tensor& clear_matrix, const Tensor& hazy_matrix) {
    if (clear_matrix.shape() != hazy_matrix.shape())
        throw DimensionError("isl_loss: matrices must have equal shapes");
    const size_t n = clear_matrix.size();
    if (n == 0) throw ContractError("isl_loss: empty matrices");
    const auto mc = clear_matrix.data(), mh = hazy_matrix.data();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += std::abs(mc[i] - mh[i]);
    acc /= static_cast<double>(n);

    return Tensor::make_op({}, {acc}, {clear_matrix, hazy_matrix}, [n](detail::TensorNode& node) {
        const double g = node.grad[0] / static_cast<double>(n);
        auto& pc = node.parents[0];
        auto& ph = node.parents[1];
        for (size_t i = 0; i < n; ++i) {
            const double diff = pc->data[i] - ph->data[i];
            const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            if (pc->grad_path) pc->grad[i] += g * s;
            if (ph->grad_path) ph->grad[i] -= g * s;
        }
    });
}

Tensor disc_ce(const Tensor& logits, const std::vector<int>& domain_labels) {
    if (logits.rank() != 2) throw DimensionError("disc_ce: logits must be 2-d");
    const size_t rows = logits.extent(0), cols = logits.extent(1);
    if (rows == 0) throw ContractError("disc_ce: empty batch");
    if (domain_labels.size() != rows) throw DimensionError("disc_ce: one label per row required");
    for (int y : domain_labels)
        if (y < 0 || static_cast<size_t>(y) >= cols)
            throw ContractError("disc_ce: label out of range");
    require_finite(logits, "disc_ce");

    std::vector<double> logp;
    log_softmax_rows(logits.data(), rows, cols, logp);
    double loss = 0.0;
    for (size_t i = 0; i < rows; ++i) loss -= logp[i * cols + static_cast<size_t>(domain_labels[i])];
    loss /= static_cast<double>(rows);

    return Tensor::make_op({}, {loss}, {logits},
                           [rows, cols, labels = domain_labels](detail::TensorNode& n) {
                               auto& pz = n.parents[0];
                               if (!pz->grad_path) return;
                               const double g = n.grad[0] / static_cast<double>(rows);
                               std::vector<double> logp;
                               log_softmax_rows(pz->data, rows, cols, logp);
                               for (size_t i = 0; i < rows; ++i)
                                   for (size_t j = 0; j < cols; ++j) {
                                       const size_t k = i * cols + j;
                                       const double onehot =
                                           (j == static_cast<size_t>(labels[i])) ? 1.0 : 0.0;
                                       pz->grad[k] += g * (std::exp(logp[k]) - onehot);
                                   }
                           });
}

Tensor idkl_loss(const Tensor& teacher_logits, const Tensor& student_logits, double delta) {
    if (!(delta > 0.0)) throw ParameterError("idkl_loss: delta must be > 0");
    if (teacher_logits.rank() != 2 || teacher_logits.shape() != student_logits.shape())
        throw DimensionError("idkl_loss: logit tensors must be same-shape 2-d");
    const size_t rows = teacher_logits.extent(0), cols = teacher_logits.extent(1);
    if (rows == 0) throw ContractError("idkl_loss: empty batch");
    require_finite(teacher_logits, "idkl_loss");
    require_finite(student_logits, "idkl_loss");

    // Softened log-distributions at temperature delta.
    std::vector<double> ht(rows * cols), hs(rows * cols);
    for (size_t i = 0; i < rows * cols; ++i) {
        ht[i] = teacher_logits.data()[i] / delta;
        hs[i] = student_logits.data()[i] / delta;
    }
    std::vector<double> logp, logq;
    log_softmax_rows(ht, rows, cols, logp);
    log_softmax_rows(hs, rows, cols, logq);

    double loss = 0.0;
    for (size_t i = 0; i < rows * cols; ++i) loss += std::exp(logp[i]) * (logp[i] - logq[i]);
    loss *= delta * delta / static_cast<double>(rows);
    loss = std::max(0.0, loss);  // roundoff can dip below zero when p ~ q

    // Teacher side is a pinned target: gradient flows into the student only.
    return Tensor::make_op(
        {}, {loss}, {teacher_logits, student_logits},
        [rows, cols, delta, logp = std::move(logp)](detail::TensorNode& n) {
            auto& ps = n.parents[1];
            if (!ps->grad_path) return;
            const double g = n.grad[0] * delta / static_cast<double>(rows);
            std::vector<double> hs(rows * cols), logq;
            for (size_t i = 0; i < rows * cols; ++i) hs[i] = ps->data[i] / delta;
            log_softmax_rows(hs, rows, cols, logq);
            for (size_t i = 0; i < rows * cols; ++i)
                ps->grad[i] += g * (std::exp(logq[i]) - std::exp(logp[i]));
        });
}

Tensor total_student_loss(const Tensor& ce, const Tensor& isl, const Tensor& idkl,
                          const LossWeights& w) {
    validate(w);
    for (const Tensor* t : {&ce, &isl, &idkl}) {
        if (t->rank() != 0) throw ContractError("total_student_loss: components must be 0-d");
        if (t->item() < 0.0) throw ContractError("total_student_loss: components must be >= 0");
    }
    return add(ce, add(scale(isl, w.lambda1), scale(idkl, w.lambda2)));
}

}  // namespace ism
