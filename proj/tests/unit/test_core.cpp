#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "advos/adam.hpp"
#include "advos/error.hpp"
#include "advos/nn.hpp"
#include "advos/rng.hpp"
#include "advos/tape.hpp"
#include "advos/tensor.hpp"

using advos::Adam;
using advos::AdamConfig;
using advos::NodeId;
using advos::Rng;
using advos::Tape;
using advos::Tensor;

namespace {

double central_diff(const std::function<double(double)>& f, double x0, double h) {
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

double rel_err(double got, double want) {
    const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
    return std::abs(got - want) / denom;
}

}  // namespace

TEST_CASE("tensor basics") {
    Tensor a(2, 3);
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 3);
    CHECK(a.at(1, 2) == 0.0);
    a.at(0, 1) = 4.5;
    CHECK(a.at(0, 1) == 4.5);
    CHECK_THROWS_AS((void)a.at(2, 0), advos::ContractError);
    CHECK_THROWS_AS((void)a.at(0, 3), advos::ContractError);

    Tensor s = Tensor::scalar(7.0);
    CHECK(s.item() == 7.0);
    CHECK_THROWS_AS((void)a.item(), advos::ContractError);

    Tensor t = a.transposed();
    CHECK(t.rows() == 3);
    CHECK(t.at(1, 0) == 4.5);
}

TEST_CASE("matmul matches hand result") {
    Tensor a(2, 3, {1, 2, 3, 4, 5, 6});
    Tensor b(3, 2, {7, 8, 9, 10, 11, 12});
    Tensor c;
    advos::matmul_nn(a, b, c);
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 2);
    CHECK(c.at(0, 0) == doctest::Approx(58));
    CHECK(c.at(0, 1) == doctest::Approx(64));
    CHECK(c.at(1, 0) == doctest::Approx(139));
    CHECK(c.at(1, 1) == doctest::Approx(154));

    Tensor c2;
    advos::matmul_nt(a, b.transposed(), c2);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c2[i] == doctest::Approx(c[i]));
    Tensor c3;
    advos::matmul_tn(a.transposed(), b, c3);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c3[i] == doctest::Approx(c[i]));

    Tensor bad(4, 2);
    Tensor out;
    CHECK_THROWS_AS(advos::matmul_nn(a, bad, out), advos::ContractError);
}

TEST_CASE("scalar square gradient") {
    Tape t;
    NodeId w = t.leaf(Tensor::scalar(3.0), true);
    NodeId loss = t.square(w);
    t.backward(loss);
    CHECK(t.grad(w).item() == doctest::Approx(6.0));
}

TEST_CASE("softmax cross-entropy on symmetric logits") {
    Tape t;
    NodeId z = t.leaf(Tensor(1, 2, {0.0, 0.0}), true);
    NodeId loss = advos::nn::ce_from_logits(t, z, {0});
    CHECK(t.value(loss).item() == doctest::Approx(std::log(2.0)));
    t.backward(loss);
    CHECK(t.grad(z).at(0, 0) == doctest::Approx(-0.5));
    CHECK(t.grad(z).at(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("complementary loss pushes probability away from the label") {
    Tape t;
    NodeId z = t.leaf(Tensor(1, 2, {0.0, 0.0}), true);
    NodeId loss = advos::nn::cce_from_logits(t, z, {0});
    CHECK(t.value(loss).item() == doctest::Approx(std::log(2.0)));
    t.backward(loss);
    CHECK(t.grad(z).at(0, 0) == doctest::Approx(0.5));
    CHECK(t.grad(z).at(0, 1) == doctest::Approx(-0.5));
}

TEST_CASE("row losses clamp near-zero probabilities") {
    Tensor p(1, 3, {1.0, 0.0, 0.0});
    CHECK(advos::nn::ce_row(p, 1) == doctest::Approx(-std::log(1e-7)));
    CHECK(advos::nn::cce_row(p, 0) == doctest::Approx(-std::log(1e-7)));
    CHECK(advos::nn::ce_row(p, 0) == doctest::Approx(0.0));
}

TEST_CASE("gradient accumulates when a node is reused") {
    // loss = sum(x*x + 3x) -> d/dx = 2x + 3
    Tape t;
    NodeId x = t.leaf(Tensor(1, 2, {1.5, -2.0}), true);
    NodeId loss = t.sum_all(t.add(t.mul(x, x), t.scale(x, 3.0)));
    t.backward(loss);
    CHECK(t.grad(x).at(0, 0) == doctest::Approx(2.0 * 1.5 + 3.0));
    CHECK(t.grad(x).at(0, 1) == doctest::Approx(2.0 * -2.0 + 3.0));
}

TEST_CASE("reductions and broadcasts round-trip gradients") {
    Tape t;
    NodeId x = t.leaf(Tensor(2, 3, {1, 2, 3, 4, 5, 6}), true);
    NodeId loss = t.mean_all(t.broadcast_col(t.row_sum(x), 3));
    t.backward(loss);
    // mean over 6 entries, each row-sum replicated 3 times -> d/dx = 3/6.
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) CHECK(t.grad(x).at(r, c) == doctest::Approx(0.5));
}

TEST_CASE("mlp gradients match finite differences") {
    Rng rng(1234);
    advos::nn::Mlp net = advos::nn::Mlp::make({5, 8, 6, 3}, rng);
    Tensor x(7, 5);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    std::vector<int> labels = {0, 2, 1, 1, 0, 2, 0};

    auto loss_at = [&]() {
        Tape t;
        NodeId xi = t.leaf(x, false);
        NodeId logits = net.forward(t, xi);
        return t.value(advos::nn::ce_from_logits(t, logits, labels)).item();
    };

    Tape t;
    NodeId xi = t.leaf(x, false);
    std::vector<NodeId> pids;
    NodeId logits = net.forward(t, xi, &pids);
    NodeId loss = advos::nn::ce_from_logits(t, logits, labels);
    t.backward(loss);

    Rng pick(99);
    auto params = net.params();
    for (std::size_t li = 0; li < params.size(); ++li) {
        Tensor& p = *params[li];
        const Tensor& g = t.grad(pids[li]);
        for (int probe = 0; probe < 4; ++probe) {
            const std::size_t k = pick.below(p.size());
            const double got = g[k];
            const double want = central_diff(
                [&](double v) {
                    const double keep = p[k];
                    p[k] = v;
                    const double l = loss_at();
                    p[k] = keep;
                    return l;
                },
                p[k], 1e-6);
            CHECK(rel_err(got, want) < 1e-4);
        }
    }
}

TEST_CASE("input gradient of a linear map recovers the weights") {
    Tape t;
    NodeId x = t.leaf(Tensor(2, 2, {3, 5, -1, 2}), false);
    NodeId w = t.leaf(Tensor(2, 1, {1.0, 0.0}), true);
    NodeId y = t.matmul(x, w);
    NodeId gx = t.input_gradient(y, x);
    CHECK(t.value(gx).at(0, 0) == doctest::Approx(1.0));
    CHECK(t.value(gx).at(0, 1) == doctest::Approx(0.0));
    CHECK(t.value(gx).at(1, 0) == doctest::Approx(1.0));
    CHECK(t.value(gx).at(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("input gradient of squared linear output") {
    // f(x) = (w.x)^2 with w=[1,0], x=[3,5] -> df/dx = [6, 0].
    Tape t;
    NodeId x = t.leaf(Tensor(1, 2, {3, 5}), false);
    NodeId w = t.leaf(Tensor(2, 1, {1.0, 0.0}), true);
    NodeId y = t.square(t.matmul(x, w));
    NodeId gx = t.input_gradient(y, x);
    CHECK(t.value(gx).at(0, 0) == doctest::Approx(6.0));
    CHECK(t.value(gx).at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("input gradient handles fan-out") {
    // y = x + x  ->  dy/dx = 2 per entry.
    Tape t;
    NodeId x = t.leaf(Tensor(3, 1, {1, 2, 3}), false);
    NodeId gx = t.input_gradient(t.add(x, x), x);
    for (int r = 0; r < 3; ++r) CHECK(t.value(gx).at(r, 0) == doctest::Approx(2.0));
}

TEST_CASE("input gradient is zero when output ignores the input") {
    Tape t;
    NodeId x = t.leaf(Tensor(2, 2, {1, 2, 3, 4}), false);
    NodeId w = t.leaf(Tensor(2, 1, {1, 1}), true);
    NodeId y = t.matmul(t.leaf(Tensor(2, 2, {5, 6, 7, 8}), false), w);
    NodeId gx = t.input_gradient(y, x);
    for (std::size_t i = 0; i < t.value(gx).size(); ++i) CHECK(t.value(gx)[i] == 0.0);
}

TEST_CASE("recorded input gradient stays differentiable") {
    // out = sum(x^2); d out/dx = 2x; loss = sum(d out/dx) -> dloss/dx = 2.
    Tape t;
    NodeId x = t.leaf(Tensor(1, 2, {1.0, 2.0}), true);
    NodeId out = t.row_sum(t.square(x));
    NodeId gx = t.input_gradient(out, x);
    CHECK(t.value(gx).at(0, 0) == doctest::Approx(2.0));
    CHECK(t.value(gx).at(0, 1) == doctest::Approx(4.0));
    NodeId loss = t.sum_all(gx);
    t.backward(loss);
    CHECK(t.grad(x).at(0, 0) == doctest::Approx(2.0));
    CHECK(t.grad(x).at(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("input gradient refuses ops without a second-order rule") {
    Tape t;
    NodeId x = t.leaf(Tensor(1, 2, {0.3, 0.7}), false);
    NodeId y = t.row_sum(t.softmax_row(x));
    CHECK_THROWS_AS(t.input_gradient(y, x), advos::UnsupportedOpError);
}

TEST_CASE("penalty gradient matches finite differences") {
    Rng init(7);
    advos::nn::Mlp critic = advos::nn::Mlp::make({4, 8, 4, 1}, init);
    Tensor real(6, 4), fake(6, 4);
    for (std::size_t i = 0; i < real.size(); ++i) real[i] = init.uniform(-1, 1);
    for (std::size_t i = 0; i < fake.size(); ++i) fake[i] = init.uniform(-1, 1);

    auto gp_at = [&]() {
        Rng eps(42);
        Tape t;
        auto pids = critic.register_params(t);
        return t.value(advos::nn::gradient_penalty(t, critic, pids, real, fake, eps)).item();
    };

    Rng eps(42);
    Tape t;
    auto pids = critic.register_params(t);
    NodeId gp = advos::nn::gradient_penalty(t, critic, pids, real, fake, eps);
    t.backward(gp);

    Rng pick(5);
    auto params = critic.params();
    for (std::size_t li = 0; li < params.size(); ++li) {
        Tensor& p = *params[li];
        const Tensor& g = t.grad(pids[li]);
        for (int probe = 0; probe < 3; ++probe) {
            const std::size_t k = pick.below(p.size());
            const double want = central_diff(
                [&](double v) {
                    const double keep = p[k];
                    p[k] = v;
                    const double l = gp_at();
                    p[k] = keep;
                    return l;
                },
                p[k], 1e-5);
            CHECK(rel_err(g[k], want) < 1e-3);
        }
    }
}

TEST_CASE("replay reproduces the forward pass bit for bit") {
    Rng rng(3);
    advos::nn::Mlp net = advos::nn::Mlp::make({4, 6, 2}, rng);
    Tensor x(5, 4);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
    Tape t;
    NodeId logits = net.forward(t, t.leaf(x, false));
    (void)advos::nn::ce_from_logits(t, logits, {0, 1, 0, 1, 1});
    CHECK(t.replay());
}

TEST_CASE("non-finite intermediate values are rejected") {
    Tape t;
    NodeId x = t.leaf(Tensor(1, 1, {-1.0}), true);
    CHECK_THROWS_AS(t.log_(x), advos::NumericError);
    CHECK_THROWS_AS(t.leaf(Tensor(1, 1, {std::nan("")}), false), advos::NumericError);
}

TEST_CASE("adam follows the textbook recurrence") {
    AdamConfig cfg;
    cfg.lr = 0.1;
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.999;
    cfg.eps = 1e-8;
    Adam opt(cfg);

    Tensor p = Tensor::scalar(1.0);
    const std::vector<double> gs = {0.5, -0.3, 0.8};

    double m = 0.0, v = 0.0, expect = 1.0;
    for (int step = 1; step <= 3; ++step) {
        const double g = gs[step - 1];
        Tensor gt = Tensor::scalar(g);
        opt.step({&p}, {&gt});

        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, step));
        const double vh = v / (1.0 - std::pow(0.999, step));
        expect -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
        CHECK(p.item() == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(opt.steps() == 3);
}

TEST_CASE("adam first step moves by roughly lr in the gradient direction") {
    Adam opt(AdamConfig{0.01, 0.9, 0.999, 1e-8});
    Tensor p(1, 2, {0.0, 0.0});
    Tensor g(1, 2, {5.0, -0.002});
    opt.step({&p}, {&g});
    CHECK(p.at(0, 0) == doctest::Approx(-0.01).epsilon(1e-4));
    CHECK(p.at(0, 1) == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("rng streams are deterministic and forks are independent") {
    Rng a(11), b(11);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    Rng c = a.fork(1), d = b.fork(1);
    for (int i = 0; i < 16; ++i) CHECK(c.uniform() == d.uniform());
    Rng e = a.fork(5), f = b.fork(6);
    bool differ = false;
    for (int i = 0; i < 16; ++i) differ |= (e.uniform() != f.uniform());
    CHECK(differ);
}

TEST_CASE("rng bounded draws stay in range") {
    Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t k = r.below(13);
        CHECK(k < 13);
        const double u = r.uniform(2.0, 3.0);
        CHECK(u >= 2.0);
        CHECK(u < 3.0);
    }
}

TEST_CASE("glorot init is bounded and centered") {
    Rng r(21);
    Tensor w = advos::nn::glorot_uniform(100, 50, r);
    const double bound = std::sqrt(6.0 / 150.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(std::abs(w[i]) <= bound);
        sum += w[i];
    }
    CHECK(std::abs(sum / static_cast<double>(w.size())) < 0.01);
}
