#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "skd/autodiff.hpp"
#include "skd/optimizer.hpp"
#include "support.hpp"

using namespace skd;
using skd::testing::rel_err;

namespace {

// tiny tanh MLP used by the second-order tests: 2 -> 2 -> 1 with biases
struct TinyMlp {
    ParamVector params;
    std::vector<Tensor> x;  // (1,2) inputs
    std::vector<double> y;

    explicit TinyMlp(std::uint64_t seed) {
        Rng rng(seed);
        auto rand_vec = [&](std::size_t n) {
            std::vector<double> v(n);
            for (auto& e : v) e = rng.uniform(-1.0, 1.0);
            return v;
        };
        params.append("w1", Tensor::leaf({2, 2}, rand_vec(4), true));
        params.append("b1", Tensor::leaf({2}, rand_vec(2), true));
        params.append("w2", Tensor::leaf({2, 1}, rand_vec(2), true));
        params.append("b2", Tensor::leaf({1}, rand_vec(1), true));
        for (int i = 0; i < 3; ++i) {
            x.push_back(Tensor::constant({1, 2}, rand_vec(2)));
            y.push_back(rng.uniform(-1.0, 1.0));
        }
    }

    Tensor loss() const {
        Tensor acc = Tensor::scalar(0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            Tensor h = tanh_op(add_rowwise(matmul(x[i], params.tensor(0)), params.tensor(1)));
            Tensor out = add_rowwise(matmul(h, params.tensor(2)), params.tensor(3));
            Tensor r = add_scalar(out, -y[i]);
            acc = add(acc, sum_all(square(r)));
        }
        return mul_scalar(acc, 1.0 / 3.0);
    }
};

}  // namespace

TEST_CASE("op examples") {
    Tensor a = Tensor::constant({2, 2}, {1, 2, 3, 4});
    Tensor eye = Tensor::constant({2, 2}, {1, 0, 0, 1});
    Tensor prod = matmul(a, eye);
    for (std::size_t i = 0; i < 4; ++i) CHECK(prod.at(i) == a.at(i));

    Tensor sm = softmax_rows(Tensor::constant({1, 2}, {0, 0}));
    CHECK(sm.at(0) == doctest::Approx(0.5));
    CHECK(sm.at(1) == doctest::Approx(0.5));

    Tensor r = relu(Tensor::constant({2}, {-1, 2}));
    CHECK(r.at(0) == 0.0);
    CHECK(r.at(1) == 2.0);
}

TEST_CASE("shape errors name both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({3, 3});
    try {
        add(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("(2,3)") != std::string::npos);
        CHECK(msg.find("(3,3)") != std::string::npos);
    }
    CHECK_THROWS_AS(matmul(a, Tensor::zeros({2, 2})), ShapeError);
}

TEST_CASE("non-finite op output raises NumericError") {
    // log_softmax overflow path is guarded by the max-shift; drive a plain
    // overflow through square instead
    Tensor big = Tensor::constant({1}, {1e200});
    CHECK_THROWS_AS(square(square(big)), NumericError);
}

TEST_CASE("backward: analytic examples") {
    ParamVector pv;
    pv.append("theta", Tensor::leaf({2}, {1, 2}, true));
    Tensor loss = sum_all(square(pv.tensor(0)));
    backward(loss, pv);
    const auto g = pv.flatten_grad();
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(4.0));

    // consumed-loss guard
    CHECK_THROWS_AS(backward(loss, pv), Error);
}

TEST_CASE("backward: constant loss gives zero gradient") {
    ParamVector pv;
    pv.append("theta", Tensor::leaf({3}, {1, 2, 3}, true));
    Tensor loss = Tensor::scalar(7.0);
    backward(loss, pv);
    for (double g : pv.flatten_grad()) CHECK(g == 0.0);
}

TEST_CASE("backward: linear-model MSE matches finite differences") {
    Rng rng(7);
    ParamVector pv;
    pv.append("w", Tensor::leaf({2, 1}, {rng.uniform(), rng.uniform()}, true));
    pv.append("b", Tensor::leaf({1}, {rng.uniform()}, true));
    Tensor x = Tensor::constant({3, 2}, {0.3, -1.2, 0.8, 0.5, -0.7, 1.1});
    std::vector<double> targets = {0.5, -0.25, 1.0};

    auto forward = [&]() {
        Tensor pred = add_rowwise(matmul(x, pv.tensor(0)), pv.tensor(1));
        Tensor resid = sub(pred, Tensor::constant({3, 1}, targets));
        return mean_all(square(resid));
    };

    Tensor loss = forward();
    auto wrt = pv.tensors();
    auto grads = gradients(loss, wrt);
    auto eval = [&]() { return forward().value(); };
    for (std::size_t li = 0; li < wrt.size(); ++li)
        for (std::size_t j = 0; j < wrt[li].numel(); ++j) {
            const double fd = skd::testing::fd_partial(eval, wrt[li], j, 1e-5);
            CHECK(rel_err(grads[li].at(j), fd) < 1e-6);
        }
}

TEST_CASE("hvp: identity and diagonal Hessians") {
    ParamVector pv;
    pv.append("theta", Tensor::leaf({3}, {0.4, -1.0, 2.0}, true));
    auto half_sq = [&]() { return mul_scalar(sum_all(square(pv.tensor(0))), 0.5); };

    const std::vector<double> v = {1.0, -2.0, 0.5};
    const auto hv = hvp(half_sq, pv, v);
    for (std::size_t i = 0; i < 3; ++i) CHECK(hv[i] == doctest::Approx(v[i]));

    Tensor diag = Tensor::constant({3}, {1, 2, 3});
    auto quad = [&]() { return mul_scalar(sum_all(mul(diag, square(pv.tensor(0)))), 0.5); };
    const std::vector<double> ones3 = {1.0, 1.0, 1.0};
    auto hv2 = hvp(quad, pv, ones3);
    CHECK(hv2[0] == doctest::Approx(1.0));
    CHECK(hv2[1] == doctest::Approx(2.0));
    CHECK(hv2[2] == doctest::Approx(3.0));

    auto hv3 = hvp(quad, pv, ones3, HvpMode::finite_difference);
    for (std::size_t i = 0; i < 3; ++i) CHECK(rel_err(hv3[i], hv2[i]) < 1e-6);
}

TEST_CASE("hvp: double backward agrees with finite differences on an MLP") {
    TinyMlp mlp(11);
    auto builder = [&]() { return mlp.loss(); };
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> v(mlp.params.total_dim());
        for (auto& e : v) e = rng.uniform(-1.0, 1.0);
        auto a = hvp(builder, mlp.params, v, HvpMode::double_backward);
        auto b = hvp(builder, mlp.params, v, HvpMode::finite_difference);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(rel_err(a[i], b[i]) < 1e-3);
    }
}

TEST_CASE("hvp: linearity in double-backward mode") {
    TinyMlp mlp(23);
    auto builder = [&]() { return mlp.loss(); };
    Rng rng(5);
    const std::size_t dim = mlp.params.total_dim();
    std::vector<double> v1(dim), v2(dim), mix(dim);
    for (auto& e : v1) e = rng.uniform(-1.0, 1.0);
    for (auto& e : v2) e = rng.uniform(-1.0, 1.0);
    const double ca = 0.7, cb = -1.9;
    for (std::size_t i = 0; i < dim; ++i) mix[i] = ca * v1[i] + cb * v2[i];
    auto h1 = hvp(builder, mlp.params, v1);
    auto h2 = hvp(builder, mlp.params, v2);
    auto hm = hvp(builder, mlp.params, mix);
    for (std::size_t i = 0; i < dim; ++i)
        CHECK(std::fabs(hm[i] - (ca * h1[i] + cb * h2[i])) < 1e-8);
}

TEST_CASE("hvp: non-deterministic loss builder is rejected") {
    ParamVector pv;
    pv.append("theta", Tensor::leaf({2}, {1, 1}, true));
    int calls = 0;
    auto flaky = [&]() {
        ++calls;
        return mul_scalar(sum_all(square(pv.tensor(0))), 1.0 + 0.01 * calls);
    };
    const std::vector<double> dir = {1.0, 0.0};
    CHECK_THROWS_AS(hvp(flaky, pv, dir), NumericError);
}

TEST_CASE("determinism: identical seeds give bit-identical forward and backward") {
    auto run = [](std::uint64_t seed) {
        TinyMlp mlp(seed);
        Tensor loss = mlp.loss();
        auto grads = flat_gradients(loss, mlp.params);
        return std::make_pair(loss.value(), grads);
    };
    auto [l1, g1] = run(99);
    auto [l2, g2] = run(99);
    CHECK(std::bit_cast<std::uint64_t>(l1) == std::bit_cast<std::uint64_t>(l2));
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(std::bit_cast<std::uint64_t>(g1[i]) == std::bit_cast<std::uint64_t>(g2[i]));
}

TEST_CASE("NoGradGuard and detach cut the graph") {
    Tensor w = Tensor::leaf({2}, {1, 2}, true);
    {
        NoGradGuard ng;
        Tensor out = square(w);
        CHECK_FALSE(out.requires_grad());
    }
    Tensor d = detach(square(w));
    CHECK_FALSE(d.requires_grad());
    Tensor loss = sum_all(mul(d, w));  // d treated as constant
    ParamVector pv;
    pv.append("w", w);
    auto g = flat_gradients(loss, pv);
    CHECK(g[0] == doctest::Approx(1.0));  // d = w^2 = (1,4), dL/dw = d
    CHECK(g[1] == doctest::Approx(4.0));
}

TEST_CASE("ParamVector flatten/load_flat identity") {
    ParamVector pv;
    pv.append("a", Tensor::leaf({2, 2}, {1, 2, 3, 4}, true));
    pv.append("b", Tensor::leaf({3}, {5, 6, 7}, true));
    CHECK(pv.total_dim() == 7);
    auto flat = pv.flatten();
    std::vector<double> tweaked = flat;
    for (auto& x : tweaked) x += 0.5;
    pv.load_flat(tweaked);
    CHECK(pv.flatten() == tweaked);
    pv.load_flat(flat);
    CHECK(pv.flatten() == flat);
    CHECK_THROWS_AS(pv.load_flat(std::vector<double>(6, 0.0)), ShapeError);
}

TEST_CASE("randomized gradient sweep over all ops") {
    // acceptance runs the full 100-case sweep; keep the unit run lighter
    CHECK(skd::testing::run_op_gradient_sweep(12) > 0);
}

TEST_CASE("sgd examples") {
    ParamVector pv;
    pv.append("t", Tensor::leaf({1}, {1.0}, true));
    SgdState plain(0.1, 0.0, 1);
    plain.step(pv, std::vector<double>{2.0});
    CHECK(pv.flatten()[0] == doctest::Approx(0.8));

    ParamVector pv2;
    pv2.append("t", Tensor::leaf({1}, {0.0}, true));
    SgdState mom(1.0, 0.9, 1);
    mom.step(pv2, std::vector<double>{1.0});
    CHECK(pv2.flatten()[0] == doctest::Approx(-1.0));
    mom.step(pv2, std::vector<double>{1.0});
    CHECK(pv2.flatten()[0] == doctest::Approx(-2.9));

    // zero gradients decay velocity geometrically
    double vel = mom.velocity()[0];
    for (int i = 0; i < 3; ++i) {
        mom.step(pv2, std::vector<double>{0.0});
        CHECK(mom.velocity()[0] == doctest::Approx(0.9 * vel));
        vel = mom.velocity()[0];
    }

    CHECK_THROWS_AS(plain.step(pv, std::vector<double>{std::nan("")}), NumericError);
}

TEST_CASE("sgd stability on quadratic loss") {
    for (double lambda : {0.5, 1.0, 2.0}) {
        ParamVector pv;
        pv.append("t", Tensor::leaf({1}, {1.0}, true));
        SgdState opt(0.9 * 2.0 / lambda, 0.0, 1);
        double prev = 1.0;
        for (int i = 0; i < 50; ++i) {
            Tensor loss = mul_scalar(sum_all(square(pv.tensor(0))), 0.5 * lambda);
            backward(loss, pv);
            opt.step(pv, pv.flatten_grad());
            const double cur = std::fabs(pv.flatten()[0]);
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}
