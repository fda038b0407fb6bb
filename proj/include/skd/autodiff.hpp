#pragma once

#include <functional>
#include <span>
#include <vector>

#include "skd/ops.hpp"
#include "skd/param_vector.hpp"
#include "skd/tensor.hpp"

namespace skd {

/// Reverse-mode gradients of a scalar `output` w.r.t. `wrt`. Entries for
/// tensors the output does not depend on come back as zero tensors. The
/// returned gradients are themselves graph nodes, so they can be
/// differentiated again (double backward).
std::vector<Tensor> gradients(const Tensor& output, std::span<const Tensor> wrt);

/// Training-loop entry point: writes d(loss)/d(segment) into each segment's
/// grad buffer. A loss tensor can be consumed by backward() exactly once.
void backward(const Tensor& loss, ParamVector& params);

/// Functional variant used by second-order machinery; no consumed-flag, no
/// stored grads, just the flat gradient vector.
std::vector<double> flat_gradients(const Tensor& loss, const ParamVector& params);

enum class HvpMode { double_backward, finite_difference };

/// Hessian-vector product of a scalar loss at the current values of `params`.
/// `loss_builder` re-runs the forward pass against those same parameter
/// tensors. Both modes restore `params` unchanged. With
/// `check_determinism` the builder is evaluated twice and must reproduce the
/// loss bit-for-bit.
std::vector<double> hvp(const std::function<Tensor()>& loss_builder, ParamVector& params,
                        std::span<const double> v, HvpMode mode = HvpMode::double_backward,
                        bool check_determinism = true);

}  // namespace skd
