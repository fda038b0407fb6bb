#include "skd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

namespace skd {

namespace {

using detail::make_node;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

void require_rank(const char* op, const Tensor& a, std::size_t rank) {
    if (a.shape().size() != rank)
        throw ShapeError(std::string(op) + ": expected rank-" + std::to_string(rank) +
                         " tensor, got " + shape_str(a.shape()));
}

Tensor undef() { return Tensor{}; }

// linear duals used only inside backward rules
Tensor sum_bhw(const Tensor& x);                                        // (B,C,H,W)->(C,)
Tensor broadcast_chw(const Tensor& v, std::size_t b, std::size_t h, std::size_t w);
Tensor avg_unpool2(const Tensor& g, std::size_t h, std::size_t w);      // adjoint of avg_pool2
Tensor spread_hw(const Tensor& g, std::size_t h, std::size_t w);        // adjoint of mean_hw

}  // namespace

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    const bool na = a.requires_grad(), nb = b.requires_grad();
    return make_node("add", a.shape(), std::move(out), {a, b}, [na, nb](const Tensor& g) {
        return std::vector<Tensor>{na ? g : undef(), nb ? g : undef()};
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    const bool na = a.requires_grad(), nb = b.requires_grad();
    return make_node("sub", a.shape(), std::move(out), {a, b}, [na, nb](const Tensor& g) {
        return std::vector<Tensor>{na ? g : undef(), nb ? neg(g) : undef()};
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    const bool na = a.requires_grad(), nb = b.requires_grad();
    return make_node("mul", a.shape(), std::move(out), {a, b}, [a, b, na, nb](const Tensor& g) {
        return std::vector<Tensor>{na ? mul(g, b) : undef(), nb ? mul(g, a) : undef()};
    });
}

Tensor neg(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -a.data()[i];
    return make_node("neg", a.shape(), std::move(out), {a},
                     [](const Tensor& g) { return std::vector<Tensor>{neg(g)}; });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
    return make_node("add_scalar", a.shape(), std::move(out), {a},
                     [](const Tensor& g) { return std::vector<Tensor>{g}; });
}

Tensor mul_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    return make_node("mul_scalar", a.shape(), std::move(out), {a},
                     [c](const Tensor& g) { return std::vector<Tensor>{mul_scalar(g, c)}; });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    return make_node("relu", a.shape(), std::move(out), {a}, [a](const Tensor& g) {
        std::vector<double> mask(a.numel());
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = a.data()[i] > 0.0 ? 1.0 : 0.0;
        return std::vector<Tensor>{mul(g, Tensor::constant(a.shape(), std::move(mask)))};
    });
}

Tensor tanh_op(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
    return make_node("tanh", a.shape(), std::move(out), {a}, [a](const Tensor& g) {
        // 1 - tanh(a)^2, rebuilt as ops so second derivatives flow
        Tensor d = add_scalar(neg(square(tanh_op(a))), 1.0);
        return std::vector<Tensor>{mul(g, d)};
    });
}

Tensor abs_op(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(a.data()[i]);
    return make_node("abs", a.shape(), std::move(out), {a}, [a](const Tensor& g) {
        std::vector<double> s(a.numel());
        for (std::size_t i = 0; i < s.size(); ++i)
            s[i] = a.data()[i] > 0.0 ? 1.0 : (a.data()[i] < 0.0 ? -1.0 : 0.0);
        return std::vector<Tensor>{mul(g, Tensor::constant(a.shape(), std::move(s)))};
    });
}

Tensor square(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * a.data()[i];
    return make_node("square", a.shape(), std::move(out), {a}, [a](const Tensor& g) {
        return std::vector<Tensor>{mul(g, mul_scalar(a, 2.0))};
    });
}

Tensor huber(const Tensor& a, double delta) {
    if (delta <= 0.0) throw ConfigError("huber: delta must be positive");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.data()[i];
        out[i] = std::fabs(x) <= delta ? 0.5 * x * x : delta * (std::fabs(x) - 0.5 * delta);
    }
    return make_node("huber", a.shape(), std::move(out), {a}, [a, delta](const Tensor& g) {
        return std::vector<Tensor>{mul(g, clamp_sym(a, delta))};
    });
}

Tensor clamp_sym(const Tensor& a, double delta) {
    if (delta <= 0.0) throw ConfigError("clamp_sym: delta must be positive");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(a.data()[i], -delta, delta);
    return make_node("clamp_sym", a.shape(), std::move(out), {a}, [a, delta](const Tensor& g) {
        std::vector<double> mask(a.numel());
        for (std::size_t i = 0; i < mask.size(); ++i)
            mask[i] = std::fabs(a.data()[i]) <= delta ? 1.0 : 0.0;
        return std::vector<Tensor>{mul(g, Tensor::constant(a.shape(), std::move(mask)))};
    });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    if (b.shape()[0] != k)
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    std::vector<double> out(n * m, 0.0);
    const auto& A = a.data();
    const auto& B = b.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            if (av == 0.0) continue;
            const double* brow = &B[p * m];
            double* orow = &out[i * m];
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    const bool na = a.requires_grad(), nb = b.requires_grad();
    return make_node("matmul", {n, m}, std::move(out), {a, b}, [a, b, na, nb](const Tensor& g) {
        return std::vector<Tensor>{na ? matmul(g, transpose(b)) : undef(),
                                   nb ? matmul(transpose(a), g) : undef()};
    });
}

Tensor transpose(const Tensor& a) {
    require_rank("transpose", a, 2);
    const std::size_t n = a.shape()[0], m = a.shape()[1];
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a.data()[i * m + j];
    return make_node("transpose", {m, n}, std::move(out), {a},
                     [](const Tensor& g) { return std::vector<Tensor>{transpose(g)}; });
}

Tensor add_rowwise(const Tensor& m, const Tensor& v) {
    require_rank("add_rowwise", m, 2);
    require_rank("add_rowwise", v, 1);
    const std::size_t rows = m.shape()[0], cols = m.shape()[1];
    if (v.shape()[0] != cols)
        throw ShapeError("add_rowwise: " + shape_str(m.shape()) + " vs " + shape_str(v.shape()));
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = m.data()[i * cols + j] + v.data()[j];
    const bool nm = m.requires_grad(), nv = v.requires_grad();
    return make_node("add_rowwise", m.shape(), std::move(out), {m, v}, [nm, nv](const Tensor& g) {
        return std::vector<Tensor>{nm ? g : undef(), nv ? col_sum(g) : undef()};
    });
}

// ---------------------------------------------------------------------------
// conv / pool
// ---------------------------------------------------------------------------

namespace {

struct ConvGeom {
    std::size_t batch, cin, h, w;
    std::size_t cout, kh, kw;
    std::size_t stride, pad;
    std::size_t ho, wo;
};

ConvGeom conv_geometry(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
    require_rank("conv2d", x, 4);
    require_rank("conv2d", w, 4);
    ConvGeom ge{};
    ge.batch = x.shape()[0];
    ge.cin = x.shape()[1];
    ge.h = x.shape()[2];
    ge.w = x.shape()[3];
    ge.cout = w.shape()[0];
    ge.kh = w.shape()[2];
    ge.kw = w.shape()[3];
    ge.stride = stride;
    ge.pad = pad;
    if (w.shape()[1] != ge.cin)
        throw ShapeError("conv2d: input channels disagree, " + shape_str(x.shape()) + " vs " +
                         shape_str(w.shape()));
    if (stride == 0) throw ConfigError("conv2d: stride must be >= 1");
    if (ge.h + 2 * pad < ge.kh || ge.w + 2 * pad < ge.kw)
        throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " larger than padded input " +
                         shape_str(x.shape()));
    ge.ho = (ge.h + 2 * pad - ge.kh) / stride + 1;
    ge.wo = (ge.w + 2 * pad - ge.kw) / stride + 1;
    return ge;
}

inline std::size_t idx4(std::size_t a, std::size_t b, std::size_t c, std::size_t d,
                        std::size_t db, std::size_t dc, std::size_t dd) {
    return ((a * db + b) * dc + c) * dd + d;
}

[[noreturn]] std::vector<Tensor> conv_second_order_unsupported(const Tensor&) {
    throw Error("conv2d: second-order differentiation is not supported; use the finite-difference "
                "hvp mode for convolutional models");
}

Tensor conv2d_dx(const Tensor& g, const Tensor& w, const ConvGeom& ge) {
    std::vector<double> out(ge.batch * ge.cin * ge.h * ge.w, 0.0);
    const auto& G = g.data();
    const auto& W = w.data();
    for (std::size_t b = 0; b < ge.batch; ++b)
        for (std::size_t co = 0; co < ge.cout; ++co)
            for (std::size_t oh = 0; oh < ge.ho; ++oh)
                for (std::size_t ow = 0; ow < ge.wo; ++ow) {
                    const double gv = G[idx4(b, co, oh, ow, ge.cout, ge.ho, ge.wo)];
                    if (gv == 0.0) continue;
                    for (std::size_t ci = 0; ci < ge.cin; ++ci)
                        for (std::size_t u = 0; u < ge.kh; ++u)
                            for (std::size_t v = 0; v < ge.kw; ++v) {
                                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * ge.stride + u) -
                                                          static_cast<std::ptrdiff_t>(ge.pad);
                                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * ge.stride + v) -
                                                          static_cast<std::ptrdiff_t>(ge.pad);
                                if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(ge.h) ||
                                    iw >= static_cast<std::ptrdiff_t>(ge.w))
                                    continue;
                                out[idx4(b, ci, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw),
                                         ge.cin, ge.h, ge.w)] +=
                                    gv * W[idx4(co, ci, u, v, ge.cin, ge.kh, ge.kw)];
                            }
                }
    return make_node("conv2d_dx", {ge.batch, ge.cin, ge.h, ge.w}, std::move(out), {g, w},
                     conv_second_order_unsupported);
}

Tensor conv2d_dw(const Tensor& g, const Tensor& x, const ConvGeom& ge) {
    std::vector<double> out(ge.cout * ge.cin * ge.kh * ge.kw, 0.0);
    const auto& G = g.data();
    const auto& X = x.data();
    for (std::size_t b = 0; b < ge.batch; ++b)
        for (std::size_t co = 0; co < ge.cout; ++co)
            for (std::size_t oh = 0; oh < ge.ho; ++oh)
                for (std::size_t ow = 0; ow < ge.wo; ++ow) {
                    const double gv = G[idx4(b, co, oh, ow, ge.cout, ge.ho, ge.wo)];
                    if (gv == 0.0) continue;
                    for (std::size_t ci = 0; ci < ge.cin; ++ci)
                        for (std::size_t u = 0; u < ge.kh; ++u)
                            for (std::size_t v = 0; v < ge.kw; ++v) {
                                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * ge.stride + u) -
                                                          static_cast<std::ptrdiff_t>(ge.pad);
                                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * ge.stride + v) -
                                                          static_cast<std::ptrdiff_t>(ge.pad);
                                if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(ge.h) ||
                                    iw >= static_cast<std::ptrdiff_t>(ge.w))
                                    continue;
                                out[idx4(co, ci, u, v, ge.cin, ge.kh, ge.kw)] +=
                                    gv * X[idx4(b, ci, static_cast<std::size_t>(ih),
                                                static_cast<std::size_t>(iw), ge.cin, ge.h, ge.w)];
                            }
                }
    return make_node("conv2d_dw", {ge.cout, ge.cin, ge.kh, ge.kw}, std::move(out), {g, x},
                     conv_second_order_unsupported);
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
    const ConvGeom ge = conv_geometry(x, w, stride, pad);
    std::vector<double> out(ge.batch * ge.cout * ge.ho * ge.wo, 0.0);
    const auto& X = x.data();
    const auto& W = w.data();
    for (std::size_t b = 0; b < ge.batch; ++b)
        for (std::size_t co = 0; co < ge.cout; ++co)
            for (std::size_t oh = 0; oh < ge.ho; ++oh)
                for (std::size_t ow = 0; ow < ge.wo; ++ow) {
                    double acc = 0.0;
                    for (std::size_t ci = 0; ci < ge.cin; ++ci)
                        for (std::size_t u = 0; u < ge.kh; ++u)
                            for (std::size_t v = 0; v < ge.kw; ++v) {
                                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * ge.stride + u) -
                                                          static_cast<std::ptrdiff_t>(ge.pad);
                                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * ge.stride + v) -
                                                          static_cast<std::ptrdiff_t>(ge.pad);
                                if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(ge.h) ||
                                    iw >= static_cast<std::ptrdiff_t>(ge.w))
                                    continue;
                                acc += X[idx4(b, ci, static_cast<std::size_t>(ih),
                                              static_cast<std::size_t>(iw), ge.cin, ge.h, ge.w)] *
                                       W[idx4(co, ci, u, v, ge.cin, ge.kh, ge.kw)];
                            }
                    out[idx4(b, co, oh, ow, ge.cout, ge.ho, ge.wo)] = acc;
                }
    const bool nx = x.requires_grad(), nw = w.requires_grad();
    return make_node("conv2d", {ge.batch, ge.cout, ge.ho, ge.wo}, std::move(out), {x, w},
                     [x, w, ge, nx, nw](const Tensor& g) {
                         return std::vector<Tensor>{nx ? conv2d_dx(g, w, ge) : undef(),
                                                    nw ? conv2d_dw(g, x, ge) : undef()};
                     });
}

Tensor add_channelwise(const Tensor& x, const Tensor& b) {
    require_rank("add_channelwise", x, 4);
    require_rank("add_channelwise", b, 1);
    const std::size_t batch = x.shape()[0], ch = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    if (b.shape()[0] != ch)
        throw ShapeError("add_channelwise: " + shape_str(x.shape()) + " vs " + shape_str(b.shape()));
    std::vector<double> out(x.numel());
    const std::size_t hw = h * w;
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < ch; ++c) {
            const double bias = b.data()[c];
            const std::size_t base = (n * ch + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) out[base + i] = x.data()[base + i] + bias;
        }
    const bool nx = x.requires_grad(), nb = b.requires_grad();
    return make_node("add_channelwise", x.shape(), std::move(out), {x, b}, [nx, nb](const Tensor& g) {
        return std::vector<Tensor>{nx ? g : undef(), nb ? sum_bhw(g) : undef()};
    });
}

Tensor avg_pool2(const Tensor& x) {
    require_rank("avg_pool2", x, 4);
    const std::size_t b = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    const std::size_t ho = h / 2, wo = w / 2;
    if (ho == 0 || wo == 0)
        throw ShapeError("avg_pool2: input " + shape_str(x.shape()) + " too small for 2x2 pooling");
    std::vector<double> out(b * c * ho * wo);
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < ho; ++i)
                for (std::size_t j = 0; j < wo; ++j) {
                    const auto v = [&](std::size_t di, std::size_t dj) {
                        return x.data()[idx4(n, ch, 2 * i + di, 2 * j + dj, c, h, w)];
                    };
                    out[idx4(n, ch, i, j, c, ho, wo)] = 0.25 * (v(0, 0) + v(0, 1) + v(1, 0) + v(1, 1));
                }
    return make_node("avg_pool2", {b, c, ho, wo}, std::move(out), {x}, [h, w](const Tensor& g) {
        return std::vector<Tensor>{avg_unpool2(g, h, w)};
    });
}

Tensor mean_hw(const Tensor& x) {
    require_rank("mean_hw", x, 4);
    const std::size_t b = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    const std::size_t hw = h * w;
    std::vector<double> out(b * c, 0.0);
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            const std::size_t base = (n * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) acc += x.data()[base + i];
            out[n * c + ch] = acc / static_cast<double>(hw);
        }
    return make_node("mean_hw", {b, c}, std::move(out), {x}, [h, w](const Tensor& g) {
        return std::vector<Tensor>{spread_hw(g, h, w)};
    });
}

namespace {

Tensor sum_bhw(const Tensor& x) {
    const std::size_t b = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    const std::size_t hw = h * w;
    std::vector<double> out(c, 0.0);
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (n * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) out[ch] += x.data()[base + i];
        }
    return make_node("sum_bhw", {c}, std::move(out), {x}, [b, h, w](const Tensor& g) {
        return std::vector<Tensor>{broadcast_chw(g, b, h, w)};
    });
}

Tensor broadcast_chw(const Tensor& v, std::size_t b, std::size_t h, std::size_t w) {
    const std::size_t c = v.shape()[0], hw = h * w;
    std::vector<double> out(b * c * hw);
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (n * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) out[base + i] = v.data()[ch];
        }
    return make_node("broadcast_chw", {b, c, h, w}, std::move(out), {v},
                     [](const Tensor& g) { return std::vector<Tensor>{sum_bhw(g)}; });
}

Tensor avg_unpool2(const Tensor& g, std::size_t h, std::size_t w) {
    const std::size_t b = g.shape()[0], c = g.shape()[1], ho = g.shape()[2], wo = g.shape()[3];
    std::vector<double> out(b * c * h * w, 0.0);
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < ho; ++i)
                for (std::size_t j = 0; j < wo; ++j) {
                    const double v = 0.25 * g.data()[idx4(n, ch, i, j, c, ho, wo)];
                    out[idx4(n, ch, 2 * i, 2 * j, c, h, w)] += v;
                    out[idx4(n, ch, 2 * i, 2 * j + 1, c, h, w)] += v;
                    out[idx4(n, ch, 2 * i + 1, 2 * j, c, h, w)] += v;
                    out[idx4(n, ch, 2 * i + 1, 2 * j + 1, c, h, w)] += v;
                }
    return make_node("avg_unpool2", {b, c, h, w}, std::move(out), {g},
                     [](const Tensor& gg) { return std::vector<Tensor>{avg_pool2(gg)}; });
}

Tensor spread_hw(const Tensor& g, std::size_t h, std::size_t w) {
    const std::size_t b = g.shape()[0], c = g.shape()[1], hw = h * w;
    const double scale = 1.0 / static_cast<double>(hw);
    std::vector<double> out(b * c * hw);
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double v = g.data()[n * c + ch] * scale;
            const std::size_t base = (n * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) out[base + i] = v;
        }
    return make_node("spread_hw", {b, c, h, w}, std::move(out), {g},
                     [](const Tensor& gg) { return std::vector<Tensor>{mean_hw(gg)}; });
}

}  // namespace

// ---------------------------------------------------------------------------
// shape
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    Shape orig = a.shape();
    return make_node("reshape", std::move(shape), a.data(), {a}, [orig](const Tensor& g) {
        return std::vector<Tensor>{reshape(g, orig)};
    });
}

Tensor flatten2(const Tensor& a) {
    if (a.shape().empty()) throw ShapeError("flatten2: scalar input");
    const std::size_t b = a.shape()[0];
    return reshape(a, {b, a.numel() / b});
}

// ---------------------------------------------------------------------------
// reductions and duals
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    Shape orig = a.shape();
    return make_node("sum_all", {}, {acc}, {a}, [orig](const Tensor& g) {
        return std::vector<Tensor>{broadcast_scalar(g, orig)};
    });
}

Tensor mean_all(const Tensor& a) { return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

Tensor row_sum(const Tensor& a) {
    require_rank("row_sum", a, 2);
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    std::vector<double> out(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[i] += a.data()[i * cols + j];
    return make_node("row_sum", {rows}, std::move(out), {a}, [cols](const Tensor& g) {
        return std::vector<Tensor>{broadcast_cols(g, cols)};
    });
}

Tensor col_sum(const Tensor& a) {
    require_rank("col_sum", a, 2);
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    std::vector<double> out(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[j] += a.data()[i * cols + j];
    return make_node("col_sum", {cols}, std::move(out), {a}, [rows](const Tensor& g) {
        return std::vector<Tensor>{broadcast_rows(g, rows)};
    });
}

Tensor broadcast_rows(const Tensor& v, std::size_t rows) {
    require_rank("broadcast_rows", v, 1);
    const std::size_t cols = v.shape()[0];
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = v.data()[j];
    return make_node("broadcast_rows", {rows, cols}, std::move(out), {v}, [](const Tensor& g) {
        return std::vector<Tensor>{col_sum(g)};
    });
}

Tensor broadcast_cols(const Tensor& v, std::size_t cols) {
    require_rank("broadcast_cols", v, 1);
    const std::size_t rows = v.shape()[0];
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = v.data()[i];
    return make_node("broadcast_cols", {rows, cols}, std::move(out), {v}, [](const Tensor& g) {
        return std::vector<Tensor>{row_sum(g)};
    });
}

Tensor broadcast_scalar(const Tensor& s, Shape shape) {
    if (s.numel() != 1) throw ShapeError("broadcast_scalar: source " + shape_str(s.shape()) + " not scalar");
    const std::size_t n = shape_numel(shape);
    return make_node("broadcast_scalar", std::move(shape), std::vector<double>(n, s.data()[0]), {s},
                     [](const Tensor& g) { return std::vector<Tensor>{sum_all(g)}; });
}

// ---------------------------------------------------------------------------
// softmax family
// ---------------------------------------------------------------------------

Tensor softmax_rows(const Tensor& a) {
    require_rank("softmax_rows", a, 2);
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        double m = a.data()[i * cols];
        for (std::size_t j = 1; j < cols; ++j) m = std::max(m, a.data()[i * cols + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            out[i * cols + j] = std::exp(a.data()[i * cols + j] - m);
            z += out[i * cols + j];
        }
        for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] /= z;
    }
    return make_node("softmax_rows", a.shape(), std::move(out), {a}, [a, cols](const Tensor& g) {
        Tensor y = softmax_rows(a);
        Tensor inner = sub(g, broadcast_cols(row_sum(mul(g, y)), cols));
        return std::vector<Tensor>{mul(y, inner)};
    });
}

Tensor log_softmax_rows(const Tensor& a) {
    require_rank("log_softmax_rows", a, 2);
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        double m = a.data()[i * cols];
        for (std::size_t j = 1; j < cols; ++j) m = std::max(m, a.data()[i * cols + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) z += std::exp(a.data()[i * cols + j] - m);
        const double lse = m + std::log(z);
        for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = a.data()[i * cols + j] - lse;
    }
    return make_node("log_softmax_rows", a.shape(), std::move(out), {a}, [a, cols](const Tensor& g) {
        Tensor p = softmax_rows(a);
        return std::vector<Tensor>{sub(g, mul(p, broadcast_cols(row_sum(g), cols)))};
    });
}

// ---------------------------------------------------------------------------
// gather / scatter
// ---------------------------------------------------------------------------

Tensor pick(const Tensor& a, const std::vector<int>& index) {
    require_rank("pick", a, 2);
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    if (index.size() != rows)
        throw ShapeError("pick: index length " + std::to_string(index.size()) + " vs rows " +
                         std::to_string(rows));
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= cols)
            throw ConfigError("pick: index " + std::to_string(index[i]) + " out of [0," +
                              std::to_string(cols) + ")");
        out[i] = a.data()[i * cols + static_cast<std::size_t>(index[i])];
    }
    std::vector<int> idx = index;
    return make_node("pick", {rows}, std::move(out), {a}, [idx, cols](const Tensor& g) {
        return std::vector<Tensor>{scatter_rows(g, idx, cols)};
    });
}

Tensor scatter_rows(const Tensor& g, const std::vector<int>& index, std::size_t cols) {
    require_rank("scatter_rows", g, 1);
    const std::size_t rows = g.shape()[0];
    if (index.size() != rows)
        throw ShapeError("scatter_rows: index length " + std::to_string(index.size()) + " vs rows " +
                         std::to_string(rows));
    std::vector<double> out(rows * cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        out[i * cols + static_cast<std::size_t>(index[i])] = g.data()[i];
    std::vector<int> idx = index;
    return make_node("scatter_rows", {rows, cols}, std::move(out), {g}, [idx](const Tensor& gg) {
        return std::vector<Tensor>{pick(gg, idx)};
    });
}

Tensor detach(const Tensor& a) {
    Tensor t = Tensor::constant(a.shape(), a.data());
    t.impl()->op_name = "detach";
    return t;
}

Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel())
        throw ShapeError("dot: length mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor bf = b.shape() == a.shape() ? b : reshape(b, a.shape());
    return sum_all(mul(a, bf));
}

}  // namespace skd
