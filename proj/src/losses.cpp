#include "skd/losses.hpp"

namespace skd {

KdKind kd_kind_from_string(const std::string& s) {
    if (s == "kl-temp") return KdKind::kl_temp;
    if (s == "mse-sum") return KdKind::mse_sum;
    if (s == "mse-mean") return KdKind::mse_mean;
    if (s == "l1") return KdKind::l1;
    if (s == "smooth-l1") return KdKind::smooth_l1;
    if (s == "cross-entropy") return KdKind::cross_entropy;
    if (s == "half-squared") return KdKind::half_squared;
    throw ConfigError("unknown kd kind '" + s + "'");
}

std::string to_string(KdKind k) {
    switch (k) {
        case KdKind::kl_temp: return "kl-temp";
        case KdKind::mse_sum: return "mse-sum";
        case KdKind::mse_mean: return "mse-mean";
        case KdKind::l1: return "l1";
        case KdKind::smooth_l1: return "smooth-l1";
        case KdKind::cross_entropy: return "cross-entropy";
        case KdKind::half_squared: return "half-squared";
    }
    throw ConfigError("unknown kd kind");
}

void KDLossConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("loss: alpha must be in [0,1]");
    if (temperature <= 0.0) throw ConfigError("loss: temperature must be positive");
    if (feature_coeff < 0.0) throw ConfigError("loss: feature coefficient must be >= 0");
}

Tensor task_loss(const Tensor& logits, const std::vector<int>& labels) {
    Tensor logp = log_softmax_rows(logits);
    return neg(mean_all(pick(logp, labels)));
}

Tensor task_loss_mse(const Tensor& logits, const std::vector<int>& labels, bool sum_over_classes) {
    if (logits.shape().size() != 2)
        throw ShapeError("task_loss_mse: logits must be (B,c), got " + shape_str(logits.shape()));
    const std::size_t b = logits.shape()[0], c = logits.shape()[1];
    if (labels.size() != b)
        throw ShapeError("task_loss_mse: batch " + std::to_string(b) + " vs labels " +
                         std::to_string(labels.size()));
    std::vector<double> onehot(b * c, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
            throw ConfigError("task_loss_mse: label " + std::to_string(labels[i]) + " out of [0," +
                              std::to_string(c) + ")");
        onehot[i * c + static_cast<std::size_t>(labels[i])] = 1.0;
    }
    Tensor sq = square(sub(logits, Tensor::constant(logits.shape(), std::move(onehot))));
    if (sum_over_classes) return mean_all(row_sum(sq));
    return mean_all(sq);
}

Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits, const KDLossConfig& cfg) {
    cfg.validate();
    if (student_logits.shape() != teacher_logits.shape())
        throw ShapeError("kd_loss: student " + shape_str(student_logits.shape()) + " vs teacher " +
                         shape_str(teacher_logits.shape()));
    const Tensor t = detach(teacher_logits);
    const Tensor& s = student_logits;
    switch (cfg.kd_kind) {
        case KdKind::kl_temp: {
            const double T = cfg.temperature;
            Tensor pt = softmax_rows(mul_scalar(t, 1.0 / T));
            Tensor log_pt = log_softmax_rows(mul_scalar(t, 1.0 / T));
            Tensor log_ps = log_softmax_rows(mul_scalar(s, 1.0 / T));
            Tensor kl = mean_all(row_sum(mul(pt, sub(log_pt, log_ps))));
            return mul_scalar(kl, T * T);
        }
        case KdKind::mse_sum:
            return mean_all(row_sum(square(sub(s, t))));
        case KdKind::mse_mean:
            return mean_all(square(sub(s, t)));
        case KdKind::l1:
            return mean_all(abs_op(sub(s, t)));
        case KdKind::smooth_l1:
            return mean_all(huber(sub(s, t), 1.0));
        case KdKind::cross_entropy: {
            Tensor pt = softmax_rows(t);
            Tensor log_pt = log_softmax_rows(t);
            Tensor log_ps = log_softmax_rows(s);
            return mean_all(row_sum(mul(pt, sub(log_pt, log_ps))));
        }
        case KdKind::half_squared:
            return mul_scalar(mean_all(row_sum(square(sub(s, t)))), 0.5);
    }
    throw ConfigError("kd_loss: unknown kind");
}

Tensor composite_kd_loss(const Tensor& student_logits, const Tensor& student_features,
                         const Tensor& teacher_logits, const Tensor& teacher_features,
                         const std::vector<int>& labels, const KDLossConfig& cfg) {
    cfg.validate();
    const bool use_kd = cfg.alpha > 0.0;
    const bool use_task = cfg.alpha < 1.0;
    const bool use_feat = cfg.feature_coeff > 0.0;

    Tensor total;
    if (use_task) {
        Tensor t = task_loss(student_logits, labels);
        total = cfg.alpha == 0.0 ? t : mul_scalar(t, 1.0 - cfg.alpha);
    }
    if (use_kd) {
        Tensor k = kd_loss(student_logits, teacher_logits, cfg);
        Tensor term = cfg.alpha == 1.0 ? k : mul_scalar(k, cfg.alpha);
        total = total.defined() ? add(total, term) : term;
    }
    if (use_feat) {
        if (!student_features.defined() || !teacher_features.defined())
            throw ConfigError("composite_kd_loss: feature term requested but features are missing");
        if (student_features.shape() != teacher_features.shape())
            throw ShapeError("composite_kd_loss: feature shapes " + shape_str(student_features.shape()) +
                             " vs " + shape_str(teacher_features.shape()));
        Tensor f = mean_all(square(sub(student_features, detach(teacher_features))));
        total = add(total, mul_scalar(f, cfg.feature_coeff));
    }
    return total;
}

Tensor half_squared_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw ShapeError("half_squared_loss: " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    return mul_scalar(mean_all(square(sub(pred, target))), 0.5);
}

Tensor composite_kd_regression(const Tensor& pred, const Tensor& targets, const Tensor& teacher_pred,
                               double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("composite_kd_regression: alpha out of [0,1]");
    Tensor task = half_squared_loss(pred, targets);
    if (alpha == 0.0) return task;
    Tensor kd = half_squared_loss(pred, detach(teacher_pred));
    if (alpha == 1.0) return kd;
    return add(mul_scalar(task, 1.0 - alpha), mul_scalar(kd, alpha));
}

}  // namespace skd
