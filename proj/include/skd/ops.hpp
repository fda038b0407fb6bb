#pragma once

#include <vector>

#include "skd/tensor.hpp"

namespace skd {

// Elementwise. Shapes must match exactly; no general broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor abs_op(const Tensor& a);
Tensor square(const Tensor& a);
// Huber kernel applied elementwise: 0.5 x^2 inside |x|<=delta, else
// delta*(|x| - 0.5 delta). smooth-L1 is huber with delta=1.
Tensor huber(const Tensor& a, double delta);
Tensor clamp_sym(const Tensor& a, double delta);  // clamp to [-delta, delta]

// Linear algebra (2-D).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add_rowwise(const Tensor& m, const Tensor& v);      // (B,C)+(C,)
Tensor add_channelwise(const Tensor& x, const Tensor& b);  // (B,C,H,W)+(C,)

// Convolution and pooling (4-D, NCHW). Second-order differentiation through
// conv2d is unsupported; use finite-difference HVP for conv nets.
Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad);
Tensor avg_pool2(const Tensor& x);  // 2x2 window, stride 2, floor boundary
Tensor mean_hw(const Tensor& x);    // (B,C,H,W)->(B,C)

// Shape.
Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten2(const Tensor& a);  // (B,...)->(B,rest)

// Reductions and their broadcast duals.
Tensor sum_all(const Tensor& a);   // -> scalar
Tensor mean_all(const Tensor& a);  // -> scalar
Tensor row_sum(const Tensor& a);   // (B,C)->(B,)
Tensor col_sum(const Tensor& a);   // (B,C)->(C,)
Tensor broadcast_rows(const Tensor& v, std::size_t rows);  // (C,)->(B,C)
Tensor broadcast_cols(const Tensor& v, std::size_t cols);  // (B,)->(B,C)
Tensor broadcast_scalar(const Tensor& s, Shape shape);

// Softmax family, rowwise over the class axis of (B,C).
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

// Row gather/scatter by class index: pick (B,C)->(B,), scatter (B,)->(B,C).
Tensor pick(const Tensor& a, const std::vector<int>& index);
Tensor scatter_rows(const Tensor& g, const std::vector<int>& index, std::size_t cols);

// Graph cut: constant copy of a's value.
Tensor detach(const Tensor& a);

// Convenience composites.
Tensor dot(const Tensor& a, const Tensor& b);  // sum(a*b), flat shapes equal

}  // namespace skd
