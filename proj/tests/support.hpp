#pragma once

// Shared helpers for the test suites: finite-difference oracles and the
// randomized per-op gradient sweep. Everything here is independent of the
// backward implementation it checks (forward evaluations only).

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "skd/autodiff.hpp"
#include "skd/common.hpp"
#include "skd/ops.hpp"
#include "skd/tensor.hpp"

namespace skd::testing {

inline double rel_err(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1.0});
    return std::fabs(a - b) / scale;
}

/// Central-difference derivative of f (scalar-valued, re-runs the forward
/// pass) w.r.t. element `j` of leaf `leaf`.
inline double fd_partial(const std::function<double()>& f, Tensor leaf, std::size_t j, double step) {
    auto& d = leaf.mutable_data();
    const double orig = d[j];
    d[j] = orig + step;
    const double fp = f();
    d[j] = orig - step;
    const double fm = f();
    d[j] = orig;
    return (fp - fm) / (2.0 * step);
}

struct GradcheckFailure {
    std::string op;
    std::size_t leaf_index = 0;
    std::size_t element = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Compares analytic gradients of scalar()=f(leaves) against central finite
/// differences for every element of every grad-requiring leaf.
/// Returns true when all match within `tol` relative error.
inline bool gradcheck(const std::function<Tensor()>& forward, std::vector<Tensor>& leaves,
                      double step, double tol, GradcheckFailure* failure = nullptr) {
    Tensor loss = forward();
    std::vector<Tensor> grads = gradients(loss, leaves);
    const auto scalar_eval = [&]() { return forward().value(); };
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        if (!leaves[li].requires_grad()) continue;
        for (std::size_t j = 0; j < leaves[li].numel(); ++j) {
            const double num = fd_partial(scalar_eval, leaves[li], j, step);
            const double ana = grads[li].at(j);
            if (rel_err(ana, num) > tol) {
                if (failure) *failure = {loss.op(), li, j, ana, num};
                return false;
            }
        }
    }
    return true;
}

/// Randomized gradient sweep over the whole public op set. Values are kept
/// away from the kinks of relu/abs/huber so the finite-difference oracle is
/// valid. Returns the number of (op, case) pairs checked; throws on the
/// first mismatch with a descriptive message.
std::size_t run_op_gradient_sweep(std::size_t cases_per_op, double step = 1e-5, double tol = 1e-4);

}  // namespace skd::testing
