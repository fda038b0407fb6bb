#include "support.hpp"

#include <stdexcept>

namespace skd::testing {

namespace {

struct CaseRng {
    Rng rng;
    explicit CaseRng(std::uint64_t seed) : rng(seed) {}

    std::size_t dim(std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

    // values bounded away from the given kink offsets so central differences
    // stay on one smooth branch
    Tensor leaf(Shape shape, std::initializer_list<double> kinks = {}) {
        std::vector<double> v(shape_numel(shape));
        for (auto& x : v) {
            for (;;) {
                x = rng.uniform(-2.0, 2.0);
                bool ok = true;
                for (double k : kinks)
                    if (std::fabs(x - k) < 1e-3) ok = false;
                if (ok) break;
            }
        }
        return Tensor::leaf(std::move(shape), std::move(v), true);
    }

    Tensor weights(const Shape& shape) {
        std::vector<double> v(shape_numel(shape));
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        return Tensor::constant(shape, std::move(v));
    }

    std::vector<int> labels(std::size_t rows, std::size_t cols) {
        std::vector<int> idx(rows);
        for (auto& i : idx) i = static_cast<int>(rng.below(cols));
        return idx;
    }
};

void check(const char* name, const std::function<Tensor()>& forward, std::vector<Tensor> leaves,
           double step, double tol) {
    GradcheckFailure f;
    if (!gradcheck(forward, leaves, step, tol, &f))
        throw std::runtime_error(std::string("gradient sweep failed for op '") + name + "' leaf " +
                                 std::to_string(f.leaf_index) + " element " + std::to_string(f.element) +
                                 ": analytic " + std::to_string(f.analytic) + " vs numeric " +
                                 std::to_string(f.numeric));
}

}  // namespace

std::size_t run_op_gradient_sweep(std::size_t cases_per_op, double step, double tol) {
    std::size_t checked = 0;
    CaseRng c(20240817);

    for (std::size_t it = 0; it < cases_per_op; ++it) {
        const std::size_t B = c.dim(1, 4), C = c.dim(1, 4);

        // elementwise binaries
        for (const char* name : {"add", "sub", "mul"}) {
            Tensor a = c.leaf({B, C}), b = c.leaf({B, C});
            Tensor w = c.weights({B, C});
            auto fwd = [=]() {
                Tensor r = std::string(name) == "add" ? add(a, b)
                          : std::string(name) == "sub" ? sub(a, b)
                                                       : mul(a, b);
                return dot(r, w);
            };
            check(name, fwd, {a, b}, step, tol);
            ++checked;
        }

        // elementwise unaries
        {
            Tensor a = c.leaf({B, C});
            Tensor w = c.weights({B, C});
            check("neg", [=] { return dot(neg(a), w); }, {a}, step, tol);
            check("add_scalar", [=] { return dot(add_scalar(a, 0.7), w); }, {a}, step, tol);
            check("mul_scalar", [=] { return dot(mul_scalar(a, -1.3), w); }, {a}, step, tol);
            check("square", [=] { return dot(square(a), w); }, {a}, step, tol);
            check("tanh", [=] { return dot(tanh_op(a), w); }, {a}, step, tol);
            checked += 5;
        }
        {
            Tensor a = c.leaf({B, C}, {0.0});
            Tensor w = c.weights({B, C});
            check("relu", [=] { return dot(relu(a), w); }, {a}, step, tol);
            check("abs", [=] { return dot(abs_op(a), w); }, {a}, step, tol);
            checked += 2;
        }
        {
            Tensor a = c.leaf({B, C}, {-1.0, 1.0});
            Tensor w = c.weights({B, C});
            check("huber", [=] { return dot(huber(a, 1.0), w); }, {a}, step, tol);
            check("clamp_sym", [=] { return dot(clamp_sym(a, 1.0), w); }, {a}, step, tol);
            checked += 2;
        }

        // linear algebra
        {
            const std::size_t n = c.dim(1, 3), k = c.dim(1, 3), m = c.dim(1, 3);
            Tensor a = c.leaf({n, k}), b = c.leaf({k, m});
            Tensor w = c.weights({n, m});
            check("matmul", [=] { return dot(matmul(a, b), w); }, {a, b}, step, tol);
            ++checked;
        }
        {
            Tensor a = c.leaf({B, C});
            Tensor w = c.weights({C, B});
            check("transpose", [=] { return dot(transpose(a), w); }, {a}, step, tol);
            ++checked;
        }
        {
            Tensor m = c.leaf({B, C}), v = c.leaf({C});
            Tensor w = c.weights({B, C});
            check("add_rowwise", [=] { return dot(add_rowwise(m, v), w); }, {m, v}, step, tol);
            ++checked;
        }

        // conv / pool
        {
            const std::size_t ci = c.dim(1, 2), co = c.dim(1, 2);
            const std::size_t h = c.dim(3, 5), wdim = c.dim(3, 5);
            const std::size_t kk = c.dim(1, 3);
            const std::size_t stride = c.dim(1, 2), pad = c.dim(0, 1);
            Tensor x = c.leaf({2, ci, h, wdim});
            Tensor kern = c.leaf({co, ci, kk, kk});
            const std::size_t ho = (h + 2 * pad - kk) / stride + 1;
            const std::size_t wo = (wdim + 2 * pad - kk) / stride + 1;
            Tensor w = c.weights({2, co, ho, wo});
            check("conv2d", [=] { return dot(conv2d(x, kern, stride, pad), w); }, {x, kern}, step, tol);
            ++checked;

            Tensor bias = c.leaf({ci});
            Tensor w2 = c.weights({2, ci, h, wdim});
            check("add_channelwise", [=] { return dot(add_channelwise(x, bias), w2); }, {x, bias}, step,
                  tol);
            ++checked;

            Tensor w3 = c.weights({2, ci, h / 2, wdim / 2});
            check("avg_pool2", [=] { return dot(avg_pool2(x), w3); }, {x}, step, tol);
            ++checked;

            Tensor w4 = c.weights({2, ci});
            check("mean_hw", [=] { return dot(mean_hw(x), w4); }, {x}, step, tol);
            ++checked;
        }

        // shape + reductions
        {
            Tensor a = c.leaf({B, C});
            Tensor w = c.weights({C, B});
            check("reshape", [=] { return dot(reshape(a, {C, B}), w); }, {a}, step, tol);
            check("sum_all", [=] { return sum_all(a); }, {a}, step, tol);
            check("mean_all", [=] { return mean_all(a); }, {a}, step, tol);
            Tensor wr = c.weights({B});
            check("row_sum", [=] { return dot(row_sum(a), wr); }, {a}, step, tol);
            Tensor wc = c.weights({C});
            check("col_sum", [=] { return dot(col_sum(a), wc); }, {a}, step, tol);
            checked += 5;
        }
        {
            Tensor v = c.leaf({C});
            Tensor w = c.weights({B, C});
            check("broadcast_rows", [=] { return dot(broadcast_rows(v, B), w); }, {v}, step, tol);
            Tensor u = c.leaf({B});
            check("broadcast_cols", [=] { return dot(broadcast_cols(u, C), w); }, {u}, step, tol);
            Tensor s = c.leaf({});
            check("broadcast_scalar", [=] { return dot(broadcast_scalar(s, {B, C}), w); }, {s}, step, tol);
            checked += 3;
        }

        // softmax family
        {
            const std::size_t cls = c.dim(2, 5);
            Tensor a = c.leaf({B, cls});
            Tensor w = c.weights({B, cls});
            check("softmax_rows", [=] { return dot(softmax_rows(a), w); }, {a}, step, tol);
            check("log_softmax_rows", [=] { return dot(log_softmax_rows(a), w); }, {a}, step, tol);
            checked += 2;
        }

        // gather / scatter
        {
            const std::size_t cls = c.dim(2, 5);
            Tensor a = c.leaf({B, cls});
            const std::vector<int> idx = c.labels(B, cls);
            Tensor wr = c.weights({B});
            check("pick", [=] { return dot(pick(a, idx), wr); }, {a}, step, tol);
            Tensor u = c.leaf({B});
            Tensor w = c.weights({B, cls});
            check("scatter_rows", [=] { return dot(scatter_rows(u, idx, cls), w); }, {u}, step, tol);
            checked += 2;
        }
    }
    return checked;
}

}  // namespace skd::testing
