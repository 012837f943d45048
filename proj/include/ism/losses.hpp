#pragma once

#include <cstddef>
#include <vector>

#include "ism/tensor.hpp"

namespace ism {

struct LossWeights {
    double lambda1 = 4.0;  // weight of the similarity-matrix loss
    double lambda2 = 0.1;  // weight of the distillation KL
    double epsilon = 0.1;  // label smoothing
    double delta = 10.0;   // distillation temperature
};

void validate(const LossWeights& w);

// Smoothed one-hot: 1-eps on the true class, eps/(C-1) elsewhere.
std::vector<double> smooth_targets(size_t true_class, size_t num_classes, double epsilon);

// Stacks smooth_targets rows into a constant [B x C] tensor.
Tensor smooth_target_rows(const std::vector<size_t>& classes, size_t num_classes, double epsilon);

// Mean over the batch of -sum_i t_i * log softmax(z)_i, stabilized by
// max-subtraction. Each target row must sum to 1.
Tensor ce_smoothed(const Tensor& logits, const Tensor& targets);

// M[i][j] = ||f_i - f_j||_2 over batch rows. Symmetric, zero diagonal,
// differentiable with subgradient 0 at coincident rows.
Tensor pairwise_l2_matrix(const Tensor& features);

// Mean absolute entrywise difference between two same-shape matrices.
Tensor isl_loss(const Tensor& clear_matrix, const Tensor& hazy_matrix);

// Mean two-class softmax cross-entropy; labels are 0 (clear) or 1 (hazy).
Tensor disc_ce(const Tensor& logits, const std::vector<int>& domain_labels);

// delta^2 * KL(softmax(hT/delta) || softmax(hS/delta)), mean over the batch.
// The teacher side is a constant target: no gradient flows into hT.
Tensor idkl_loss(const Tensor& teacher_logits, const Tensor& student_logits, double delta);

// ce + lambda1 * isl + lambda2 * idkl
Tensor total_student_loss(const Tensor& ce, const Tensor& isl, const Tensor& idkl,
                          const LossWeights& w);

}  // namespace ism
