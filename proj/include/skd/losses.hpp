#pragma once

#include <string>
#include <vector>

#include "skd/ops.hpp"
#include "skd/tensor.hpp"

namespace skd {

enum class KdKind { kl_temp, mse_sum, mse_mean, l1, smooth_l1, cross_entropy, half_squared };

KdKind kd_kind_from_string(const std::string& s);
std::string to_string(KdKind k);

struct KDLossConfig {
    double alpha = 0.3;        // distillation weight in the two-term composition
    double temperature = 3.0;  // softmax softening for kl_temp
    KdKind kd_kind = KdKind::kl_temp;
    double feature_coeff = 0.03;  // weight of the feature-matching MSE term

    void validate() const;
};

/// Cross-entropy on logits vs integer labels, mean over the batch.
Tensor task_loss(const Tensor& logits, const std::vector<int>& labels);

/// Squared error against one-hot targets; class-sum or class-mean reduction,
/// always mean over the batch.
Tensor task_loss_mse(const Tensor& logits, const std::vector<int>& labels, bool sum_over_classes);

/// Distillation distance between student and teacher logits. Teacher logits
/// are detached internally: gradients flow to the student only.
/// kl_temp computes T^2 * KL(softmax(t/T) || softmax(s/T)), batch-mean.
/// cross_entropy drops the constant teacher-entropy offset (same gradients,
/// minimum value 0 at s == t).
Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits, const KDLossConfig& cfg);

/// (1-alpha)*task + alpha*kd + feature_coeff*MSE(student_feat, teacher_feat).
/// Terms with zero weight are omitted entirely, so the alpha=0 boundary is
/// bit-identical to plain task training.
Tensor composite_kd_loss(const Tensor& student_logits, const Tensor& student_features,
                         const Tensor& teacher_logits, const Tensor& teacher_features,
                         const std::vector<int>& labels, const KDLossConfig& cfg);

// Scalar-output regression forms used by the curvature analysis (c=1,
// half-squared task and distillation losses).
Tensor half_squared_loss(const Tensor& pred, const Tensor& target);
Tensor composite_kd_regression(const Tensor& pred, const Tensor& targets, const Tensor& teacher_pred,
                               double alpha);

}  // namespace skd
