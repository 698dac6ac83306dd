#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "advos/adversarial.hpp"
#include "advos/error.hpp"
#include "advos/nn.hpp"
#include "advos/rng.hpp"
#include "advos/tensor.hpp"

using advos::ConfigError;
using advos::ContractError;
using advos::NodeId;
using advos::Rng;
using advos::Tape;
using advos::Tensor;
using advos::data::Dataset;
using advos::adv::GeneratorMixture;
using advos::adv::Operator;
using advos::adv::Regime;
using advos::adv::SamplingPlan;
using advos::adv::ThreePlayerState;
using advos::adv::TrainConfig;

namespace {

constexpr double kLn2 = 0.6931471805599453;

Dataset make_ds(const std::vector<std::vector<std::vector<double>>>& per_class) {
    Dataset d;
    d.C = static_cast<int>(per_class.size());
    int n = 0;
    const int dim = static_cast<int>(per_class[0][0].size());
    for (const auto& rows : per_class) n += static_cast<int>(rows.size());
    d.X = Tensor(n, dim);
    int r = 0;
    for (int c = 0; c < d.C; ++c) {
        d.class_names.push_back("c" + std::to_string(c));
        for (const auto& row : per_class[c]) {
            for (int j = 0; j < dim; ++j) d.X.at(r, j) = row[j];
            d.y.push_back(c);
            ++r;
        }
    }
    return d;
}

Dataset random_ds(Rng& rng, const std::vector<int>& sizes, int dim) {
    std::vector<std::vector<std::vector<double>>> per_class;
    for (int s : sizes) {
        std::vector<std::vector<double>> rows;
        for (int i = 0; i < s; ++i) {
            std::vector<double> row;
            for (int j = 0; j < dim; ++j) row.push_back(rng.uniform());
            rows.push_back(row);
        }
        per_class.push_back(rows);
    }
    return make_ds(per_class);
}

TrainConfig tiny_config(Regime regime) {
    TrainConfig cfg;
    cfg.regime = regime;
    cfg.latent = 3;
    cfg.g_trunk = {8};
    cfg.d_hidden = {6};
    cfg.q_hidden = {6};
    cfg.epochs = 4;
    cfg.batch = 16;
    cfg.seed = 91;
    return cfg;
}

void zero_params(std::vector<Tensor*> params) {
    for (Tensor* p : params) p->fill(0.0);
}

// Forces player output to `raw` on every input: all weights zero, last bias.
void force_constant(advos::nn::Mlp& net, double raw) {
    zero_params(net.params());
    net.layers.back().b.fill(raw);
}

double eval_loss_G(const ThreePlayerState& st, const Tensor& z, const std::vector<int>& cls) {
    Tape t;
    const auto ids = st.G.register_params(t);
    return t.value(advos::adv::build_loss_G(t, st, ids, z, cls)).item();
}

double eval_loss_D(const ThreePlayerState& st, const Tensor& real, const Tensor& fake,
                   std::uint64_t gp_seed) {
    Tape t;
    const auto ids = st.D.register_params(t);
    Rng gp(gp_seed);
    return t.value(advos::adv::build_loss_D(t, st, ids, real, fake, gp)).item();
}

double eval_loss_Q(const ThreePlayerState& st, const Tensor& xr, const std::vector<int>& yr,
                   const Tensor& xg, const std::vector<int>& yg) {
    Tape t;
    const auto ids = st.Q.register_params(t);
    return t.value(advos::adv::build_loss_Q(t, st, ids, xr, yr, xg, yg)).item();
}

// Central-difference check of `analytic` (one tensor per parameter, in
// params() order) against the scalar functional `eval` at `samples` random
// parameter components.
template <typename F>
void fd_check(std::vector<Tensor*> params, const std::vector<Tensor>& analytic, F eval,
              int samples, double tol, Rng& rng) {
    REQUIRE(params.size() == analytic.size());
    const double h = 1e-5;
    for (int s = 0; s < samples; ++s) {
        const std::size_t pi = rng.below(params.size());
        Tensor* p = params[pi];
        const std::size_t ei = rng.below(p->size());
        const double keep = (*p)[ei];
        (*p)[ei] = keep + h;
        const double up = eval();
        (*p)[ei] = keep - h;
        const double dn = eval();
        (*p)[ei] = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double an = analytic[pi][ei];
        const double err = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
        CHECK(err < tol);
    }
}

std::vector<Tensor> copy_grads(Tape& t, const std::vector<NodeId>& ids) {
    std::vector<Tensor> out;
    for (NodeId id : ids) out.push_back(t.grad(id));
    return out;
}

template <typename A, typename B>
bool same_params(const std::vector<A>& a, const std::vector<B>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i]->raw() != b[i]->raw()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("regime names round-trip") {
    using advos::adv::regime_from_string;
    using advos::adv::regime_name;
    CHECK(regime_from_string("baseline") == Regime::kBaseline);
    CHECK(regime_from_string("q") == Regime::kBaseline);
    CHECK(regime_from_string("ao") == Regime::kAO);
    CHECK(regime_from_string("do") == Regime::kDO);
    for (Regime r : {Regime::kBaseline, Regime::kAO, Regime::kDO}) {
        CHECK(regime_from_string(regime_name(r)) == r);
    }
    CHECK_THROWS_AS(regime_from_string("DO"), ConfigError);
    CHECK_THROWS_AS(regime_from_string("gan"), ConfigError);
}

TEST_CASE("sampling plan fills every class toward the largest") {
    const SamplingPlan a = advos::adv::make_sampling_plan({90, 10}, 1.0);
    CHECK(a.m == std::vector<int>{0, 80});
    CHECK(a.active());
    CHECK(a.total() == 80);
    CHECK(a.classifier_probs() == std::vector<double>{0.0, 1.0});

    // ceil(f * deficit) at f = 0.5 on a 1023/73 split.
    const SamplingPlan b = advos::adv::make_sampling_plan({73, 1023}, 0.5);
    CHECK(b.m == std::vector<int>{475, 0});
    const SamplingPlan c = advos::adv::make_sampling_plan({73, 1023}, 1.0);
    CHECK(c.m == std::vector<int>{950, 0});

    const SamplingPlan d = advos::adv::make_sampling_plan({70, 90, 100}, 1.0);
    CHECK(d.m == std::vector<int>{30, 10, 0});
    const auto probs = d.classifier_probs();
    CHECK(probs[0] == doctest::Approx(0.75));
    CHECK(probs[1] == doctest::Approx(0.25));
    CHECK(probs[2] == 0.0);
}

TEST_CASE("sampling plan degenerates cleanly") {
    const SamplingPlan balanced = advos::adv::make_sampling_plan({50, 50}, 1.0);
    CHECK_FALSE(balanced.active());
    CHECK(balanced.total() == 0);
    CHECK_THROWS_AS(balanced.classifier_probs(), ContractError);

    const SamplingPlan off = advos::adv::make_sampling_plan({10, 90}, 0.0);
    CHECK_FALSE(off.active());

    CHECK_THROWS_AS(advos::adv::make_sampling_plan({}, 1.0), ConfigError);
    CHECK_THROWS_AS(advos::adv::make_sampling_plan({10, 90}, -0.1), ConfigError);
    CHECK_THROWS_AS(advos::adv::make_sampling_plan({10, 90}, 1.5), ConfigError);
}

TEST_CASE("config validation rejects out-of-range settings") {
    TrainConfig good = tiny_config(Regime::kDO);
    CHECK_NOTHROW(good.validate());
    auto expect_reject = [](auto mutate) {
        TrainConfig bad = tiny_config(Regime::kDO);
        mutate(bad);
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    };
    expect_reject([](TrainConfig& c) { c.epochs = 0; });
    expect_reject([](TrainConfig& c) { c.batch = 0; });
    expect_reject([](TrainConfig& c) { c.critic_steps = 0; });
    expect_reject([](TrainConfig& c) { c.latent = 0; });
    expect_reject([](TrainConfig& c) { c.f = -0.25; });
    expect_reject([](TrainConfig& c) { c.f = 1.25; });
    expect_reject([](TrainConfig& c) { c.gp_lambda = -1.0; });
    expect_reject([](TrainConfig& c) { c.g_trunk.clear(); });
    expect_reject([](TrainConfig& c) { c.q_hidden.clear(); });
}

TEST_CASE("generator output is a convex mixture of its class's rows") {
    Rng rng(6101);
    const Dataset d = random_ds(rng, {5, 9}, 4);
    const TrainConfig cfg = tiny_config(Regime::kDO);
    ThreePlayerState st = advos::adv::make_state(d, cfg);

    Rng zr(6102);
    for (int k = 0; k < d.C; ++k) {
        const int nk = st.G.tau[k].rows();
        Tensor z(7, cfg.latent);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = zr.normal();
        const Tensor w = st.G.weights_eager(k, z);
        const Tensor x = st.G.generate_eager(k, z);
        REQUIRE(w.rows() == 7);
        REQUIRE(w.cols() == nk);
        REQUIRE(x.cols() == d.dim());
        for (int r = 0; r < w.rows(); ++r) {
            double sum = 0.0;
            for (int c = 0; c < nk; ++c) {
                CHECK(w.at(r, c) >= 0.0);
                sum += w.at(r, c);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            // The sample is exactly the weighted average of the class rows.
            for (int j = 0; j < d.dim(); ++j) {
                double want = 0.0;
                for (int c = 0; c < nk; ++c) want += w.at(r, c) * st.G.tau[k].at(c, j);
                CHECK(x.at(r, j) == doctest::Approx(want).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("generated rows stay inside per-feature class bounds") {
    Rng rng(6103);
    const Dataset d = random_ds(rng, {6, 12, 20}, 5);
    ThreePlayerState st = advos::adv::make_state(d, tiny_config(Regime::kAO));
    Rng zr(6104);
    for (int k = 0; k < d.C; ++k) {
        std::vector<double> lo(d.dim(), 1e300), hi(d.dim(), -1e300);
        for (int r = 0; r < st.G.tau[k].rows(); ++r) {
            for (int j = 0; j < d.dim(); ++j) {
                lo[j] = std::min(lo[j], st.G.tau[k].at(r, j));
                hi[j] = std::max(hi[j], st.G.tau[k].at(r, j));
            }
        }
        Tensor z(100, st.G.latent);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = zr.normal();
        const Tensor x = st.G.generate_eager(k, z);
        for (int r = 0; r < x.rows(); ++r) {
            for (int j = 0; j < d.dim(); ++j) {
                CHECK(x.at(r, j) >= lo[j] - 1e-9);
                CHECK(x.at(r, j) <= hi[j] + 1e-9);
            }
        }
    }
}

TEST_CASE("a dominant head logit reproduces a single training row") {
    Rng rng(6105);
    const Dataset d = random_ds(rng, {4, 7}, 3);
    ThreePlayerState st = advos::adv::make_state(d, tiny_config(Regime::kDO));
    const int k = 0, target = 2;
    st.G.heads[k].w.fill(0.0);
    st.G.heads[k].b.fill(0.0);
    st.G.heads[k].b.at(0, target) = 50.0;
    Tensor z(3, st.G.latent);
    Rng zr(6106);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = zr.normal();
    const Tensor x = st.G.generate_eager(k, z);
    for (int r = 0; r < x.rows(); ++r) {
        for (int j = 0; j < d.dim(); ++j) {
            CHECK(x.at(r, j) == doctest::Approx(st.G.tau[k].at(target, j)).epsilon(1e-12));
        }
    }
}

TEST_CASE("single-member classes generate that member exactly") {
    const Dataset d = make_ds({{{0.3, 0.9}}, {{0.1, 0.1}, {0.2, 0.4}, {0.8, 0.5}}});
    ThreePlayerState st = advos::adv::make_state(d, tiny_config(Regime::kDO));
    Tensor z(5, st.G.latent);
    Rng zr(6107);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = zr.normal();
    const Tensor x = st.G.generate_eager(0, z);
    for (int r = 0; r < x.rows(); ++r) {
        CHECK(x.at(r, 0) == 0.3);
        CHECK(x.at(r, 1) == 0.9);
    }
}

TEST_CASE("taped generation matches the eager path bit for bit") {
    Rng rng(6108);
    const Dataset d = random_ds(rng, {5, 8}, 4);
    ThreePlayerState st = advos::adv::make_state(d, tiny_config(Regime::kDO));
    Tensor z(6, st.G.latent);
    Rng zr(6109);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = zr.normal();
    for (int k = 0; k < d.C; ++k) {
        Tape t;
        const auto ids = st.G.register_params(t);
        const auto [w, x] = st.G.generate(t, ids, k, z);
        CHECK(t.value(x).raw() == st.G.generate_eager(k, z).raw());
        CHECK(t.value(w).raw() == st.G.weights_eager(k, z).raw());
    }
}

TEST_CASE("generator losses hit their closed-form values on frozen opponents") {
    Rng rng(6110);
    const Dataset d = random_ds(rng, {4, 6}, 3);
    TrainConfig cfg = tiny_config(Regime::kAO);
    ThreePlayerState st = advos::adv::make_state(d, cfg);
    Tensor z(6, cfg.latent);
    Rng zr(6111);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = zr.normal();
    const std::vector<int> classes = {0, 1, 0, 1, 1, 0};

    // Frozen critic at 0 and uniform classifier: 1 + ln 2 under s(x) = x.
    zero_params(st.D.params());
    zero_params(st.Q.params());
    CHECK(eval_loss_G(st, z, classes) == doctest::Approx(1.0 + kLn2).epsilon(1e-12));

    // Same state under the favoring regime: CE(uniform) = CCE(uniform) at C=2.
    st.cfg.regime = Regime::kDO;
    CHECK(eval_loss_G(st, z, classes) == doctest::Approx(1.0 + kLn2).epsilon(1e-12));

    // Confident classifier and critic at 1: both terms vanish.
    force_constant(st.D, 1.0);
    st.Q.layers.back().b.at(0, 0) = 40.0;
    const std::vector<int> zeros(z.rows(), 0);
    CHECK(std::abs(eval_loss_G(st, z, zeros)) < 1e-12);

    // Sigmoid operator at raw 0 gives log(1/2), cancelling the ln 2 term.
    st.cfg.regime = Regime::kAO;
    st.cfg.op = Operator::kVanilla;
    zero_params(st.D.params());
    zero_params(st.Q.params());
    CHECK(std::abs(eval_loss_G(st, z, classes)) < 1e-12);
}

TEST_CASE("the two generator regimes differ exactly by cce minus ce") {
    Rng rng(6112);
    const Dataset d = random_ds(rng, {5, 7, 9}, 4);
    TrainConfig cfg = tiny_config(Regime::kAO);
    ThreePlayerState st = advos::adv::make_state(d, cfg);
    Tensor z(9, cfg.latent);
    Rng zr(6113);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = zr.normal();
    const std::vector<int> classes = {0, 1, 2, 1, 1, 0, 2, 2, 2};

    st.cfg.regime = Regime::kAO;
    const double ao = eval_loss_G(st, z, classes);
    st.cfg.regime = Regime::kDO;
    const double dofl = eval_loss_G(st, z, classes);

    // Recompute the classifier terms off-tape on the same samples.
    double ce = 0.0, cce = 0.0;
    for (int k = 0; k < d.C; ++k) {
        std::vector<int> rows;
        for (std::size_t i = 0; i < classes.size(); ++i) {
            if (classes[i] == k) rows.push_back(static_cast<int>(i));
        }
        if (rows.empty()) continue;
        Tensor zk(static_cast<int>(rows.size()), z.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int c = 0; c < z.cols(); ++c) zk.at(static_cast<int>(i), c) = z.at(rows[i], c);
        const Tensor x = st.G.generate_eager(k, zk);
        const Tensor probs = advos::nn::softmax_rows(advos::nn::forward_eval(st.Q, x));
        for (int r = 0; r < probs.rows(); ++r) {
            Tensor row(1, probs.cols());
            for (int c = 0; c < probs.cols(); ++c) row.at(0, c) = probs.at(r, c);
            ce += advos::nn::ce_row(row, k);
            cce += advos::nn::cce_row(row, k);
        }
    }
    const double want = (cce - ce) / static_cast<double>(classes.size());
    CHECK(ao - dofl == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("critic loss is the mean gap plus a vanishing penalty for a unit-slope critic") {
    // Critic computing x -> x0 exactly: gradient norm 1, penalty 0.
    const Dataset d = make_ds({{{0.5, 0.5, 0.5}}, {{0.6, 0.1, 0.2}, {0.7, 0.3, 0.4}}});
    TrainConfig cfg = tiny_config(Regime::kDO);
    cfg.d_hidden = {2};
    ThreePlayerState st = advos::adv::make_state(d, cfg);
    zero_params(st.D.params());
    st.D.layers[0].w.at(0, 0) = 1.0;
    st.D.layers[1].w.at(0, 0) = 1.0;

    const Tensor real = {{1.0, 0.3, 0.7}, {1.0, 0.9, 0.1}};
    const Tensor fake = {{0.0, 0.5, 0.5}, {0.0, 0.2, 0.8}};
    CHECK(eval_loss_D(st, real, fake, 501) == doctest::Approx(-1.0).epsilon(1e-12));

    // Sigmoid operator on a zeroed critic: -(log .5 + log .5) = 2 ln 2.
    st.cfg.op = Operator::kVanilla;
    zero_params(st.D.params());
    CHECK(eval_loss_D(st, real, fake, 502) == doctest::Approx(2.0 * kLn2).epsilon(1e-12));
}

TEST_CASE("classifier loss hits its closed-form values and baseline degeneracy") {
    Rng rng(6114);
    const Dataset d2 = random_ds(rng, {4, 6}, 3);
    TrainConfig cfg = tiny_config(Regime::kAO);
    ThreePlayerState st = advos::adv::make_state(d2, cfg);
    zero_params(st.Q.params());

    Tensor xr(4, 3), xg(4, 3);
    for (std::size_t i = 0; i < xr.size(); ++i) xr[i] = rng.uniform();
    for (std::size_t i = 0; i < xg.size(); ++i) xg[i] = rng.uniform();
    const std::vector<int> yr = {0, 1, 1, 0}, yg = {1, 1, 0, 1};

    // Uniform classifier at C=2: both terms are ln 2 under either regime.
    CHECK(eval_loss_Q(st, xr, yr, xg, yg) == doctest::Approx(2.0 * kLn2).epsilon(1e-12));
    st.cfg.regime = Regime::kDO;
    CHECK(eval_loss_Q(st, xr, yr, xg, yg) == doctest::Approx(2.0 * kLn2).epsilon(1e-12));

    // At C=3 the regimes separate: ln 3 + ln 3 vs ln 3 + log(3/2).
    const Dataset d3 = random_ds(rng, {3, 4, 5}, 3);
    ThreePlayerState st3 = advos::adv::make_state(d3, tiny_config(Regime::kAO));
    zero_params(st3.Q.params());
    const std::vector<int> yr3 = {0, 2, 1, 1}, yg3 = {2, 0, 1, 2};
    const double ln3 = std::log(3.0);
    CHECK(eval_loss_Q(st3, xr, yr3, xg, yg3) == doctest::Approx(2.0 * ln3).epsilon(1e-12));
    st3.cfg.regime = Regime::kDO;
    CHECK(eval_loss_Q(st3, xr, yr3, xg, yg3) ==
          doctest::Approx(ln3 + std::log(1.5)).epsilon(1e-12));
}

TEST_CASE("an empty generated batch reduces the classifier loss to plain cross-entropy") {
    Rng rng(6115);
    const Dataset d = random_ds(rng, {5, 8}, 4);
    TrainConfig cfg = tiny_config(Regime::kDO);
    ThreePlayerState st = advos::adv::make_state(d, cfg);

    Tensor xr(6, 4);
    for (std::size_t i = 0; i < xr.size(); ++i) xr[i] = rng.uniform();
    const std::vector<int> yr = {0, 1, 1, 0, 1, 1};

    // Hand CE on the live (non-zeroed) classifier.
    const Tensor probs = advos::nn::softmax_rows(advos::nn::forward_eval(st.Q, xr));
    double ce = 0.0;
    for (int r = 0; r < probs.rows(); ++r) {
        Tensor row(1, probs.cols());
        for (int c = 0; c < probs.cols(); ++c) row.at(0, c) = probs.at(r, c);
        ce += advos::nn::ce_row(row, yr[r]);
    }
    ce /= static_cast<double>(yr.size());

    const Tensor empty(0, 4);
    CHECK(eval_loss_Q(st, xr, yr, empty, {}) == doctest::Approx(ce).epsilon(1e-12));

    // The baseline regime ignores generated rows even when present.
    st.cfg.regime = Regime::kBaseline;
    Tensor xg(3, 4);
    for (std::size_t i = 0; i < xg.size(); ++i) xg[i] = rng.uniform();
    CHECK(eval_loss_Q(st, xr, yr, xg, {1, 1, 0}) == doctest::Approx(ce).epsilon(1e-12));
}

TEST_CASE("player gradients match finite differences") {
    Rng rng(6116);
    const Dataset d = random_ds(rng, {5, 8}, 4);
    TrainConfig cfg = tiny_config(Regime::kAO);
    ThreePlayerState st = advos::adv::make_state(d, cfg);

    Tensor z(6, cfg.latent);
    Rng zr(6117);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = zr.normal();
    const std::vector<int> classes = {0, 1, 0, 1, 1, 0};
    Tensor xr(6, 4), xg(5, 4);
    for (std::size_t i = 0; i < xr.size(); ++i) xr[i] = rng.uniform();
    for (std::size_t i = 0; i < xg.size(); ++i) xg[i] = rng.uniform();
    const std::vector<int> yr = {0, 1, 1, 0, 1, 1}, yg = {0, 0, 1, 0, 1};

    Rng pick(6118);
    for (Regime regime : {Regime::kAO, Regime::kDO}) {
        st.cfg.regime = regime;
        {
            Tape t;
            const auto ids = st.G.register_params(t);
            t.backward(advos::adv::build_loss_G(t, st, ids, z, classes));
            const auto grads = copy_grads(t, ids);
            fd_check(st.G.params(), grads,
                     [&] { return eval_loss_G(st, z, classes); }, 25, 1e-4, pick);
        }
        {
            Tape t;
            const auto ids = st.Q.register_params(t);
            t.backward(advos::adv::build_loss_Q(t, st, ids, xr, yr, xg, yg));
            const auto grads = copy_grads(t, ids);
            fd_check(st.Q.params(), grads,
                     [&] { return eval_loss_Q(st, xr, yr, xg, yg); }, 25, 1e-4, pick);
        }
    }

    // Critic under the penalty operator: the loss differentiates a recorded
    // gradient, so allow the looser tolerance.
    const Tensor fake = st.G.generate_eager(1, z);
    Tensor real(6, 4);
    for (std::size_t i = 0; i < real.size(); ++i) real[i] = rng.uniform();
    {
        Tape t;
        const auto ids = st.D.register_params(t);
        Rng gp(901);
        t.backward(advos::adv::build_loss_D(t, st, ids, real, fake, gp));
        const auto grads = copy_grads(t, ids);
        fd_check(st.D.params(), grads,
                 [&] { return eval_loss_D(st, real, fake, 901); }, 25, 1e-3, pick);
    }
    {
        st.cfg.op = Operator::kVanilla;
        Tape t;
        const auto ids = st.D.register_params(t);
        Rng gp(902);
        t.backward(advos::adv::build_loss_D(t, st, ids, real, fake, gp));
        const auto grads = copy_grads(t, ids);
        fd_check(st.D.params(), grads,
                 [&] { return eval_loss_D(st, real, fake, 902); }, 15, 1e-4, pick);
    }
}

TEST_CASE("prediction takes the argmax and breaks ties toward the lower class") {
    Rng rng(6119);
    const Dataset d = random_ds(rng, {4, 5}, 3);
    ThreePlayerState st = advos::adv::make_state(d, tiny_config(Regime::kDO));
    zero_params(st.Q.params());
    Tensor x(4, 3);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
    const auto tied = advos::adv::predict(st.Q, x);
    CHECK(tied.labels == std::vector<int>{0, 0, 0, 0});
    for (int r = 0; r < tied.probs.rows(); ++r) {
        CHECK(tied.probs.at(r, 0) == doctest::Approx(0.5).epsilon(1e-12));
    }

    st.Q.layers.back().b.at(0, 1) = 3.0;
    const auto pushed = advos::adv::predict(st.Q, x);
    CHECK(pushed.labels == std::vector<int>{1, 1, 1, 1});
}

TEST_CASE("classifier initialization is regime-independent") {
    Rng rng(6120);
    const Dataset d = random_ds(rng, {6, 10}, 4);
    TrainConfig base = tiny_config(Regime::kBaseline);
    TrainConfig dorc = tiny_config(Regime::kDO);
    ThreePlayerState a = advos::adv::make_state(d, base);
    ThreePlayerState b = advos::adv::make_state(d, dorc);
    const advos::nn::Mlp& qa = a.Q;
    const advos::nn::Mlp& qb = b.Q;
    CHECK(same_params(qa.params(), qb.params()));
}

TEST_CASE("checkpoints round-trip every parameter") {
    Rng rng(6121);
    const Dataset d = random_ds(rng, {4, 7}, 3);
    ThreePlayerState st = advos::adv::make_state(d, tiny_config(Regime::kAO));
    const std::string path = "/tmp/advos_test_ckpt.json";
    advos::adv::save_state(path, st, "cfg-hash");
    const ThreePlayerState back = advos::adv::load_state(path, d);
    CHECK(back.cfg.regime == Regime::kAO);
    CHECK(same_params(st.Q.params(), back.Q.params()));
    CHECK(same_params(st.D.params(), back.D.params()));
    CHECK(st.G.trunk.params()[0]->raw() == back.G.trunk.params()[0]->raw());
    for (std::size_t k = 0; k < st.G.heads.size(); ++k) {
        CHECK(st.G.heads[k].w.raw() == back.G.heads[k].w.raw());
        CHECK(st.G.heads[k].b.raw() == back.G.heads[k].b.raw());
    }
    // tau blocks are rebuilt from the split, so generation must agree.
    Tensor z(4, st.G.latent);
    Rng zr(6122);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = zr.normal();
    CHECK(st.G.generate_eager(0, z).raw() == back.G.generate_eager(0, z).raw());
    std::remove(path.c_str());

    const Dataset other = random_ds(rng, {4, 7}, 5);
    advos::adv::save_state(path, st, "cfg-hash");
    CHECK_THROWS_AS(advos::adv::load_state(path, other), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("baseline training separates an easy two-class problem") {
    Rng rng(6123);
    std::vector<std::vector<std::vector<double>>> per_class(2);
    for (int i = 0; i < 14; ++i) {
        per_class[0].push_back({0.15 + 0.1 * rng.uniform(), 0.15 + 0.1 * rng.uniform()});
    }
    for (int i = 0; i < 36; ++i) {
        per_class[1].push_back({0.75 + 0.1 * rng.uniform(), 0.75 + 0.1 * rng.uniform()});
    }
    const Dataset all = make_ds(per_class);
    TrainConfig cfg = tiny_config(Regime::kBaseline);
    cfg.epochs = 100;
    cfg.q_hidden = {16};
    const advos::adv::TrainResult res = advos::adv::train(all, all, cfg);
    CHECK(res.final_report.acsa >= 95.0);
    CHECK(static_cast<int>(res.history.size()) == cfg.epochs);
}

TEST_CASE("training is bitwise deterministic in the seed") {
    Rng rng(6124);
    const Dataset d = random_ds(rng, {8, 24}, 3);
    TrainConfig cfg = tiny_config(Regime::kDO);
    cfg.epochs = 3;
    const advos::adv::TrainResult a = advos::adv::train(d, d, cfg);
    const advos::adv::TrainResult b = advos::adv::train(d, d, cfg);
    CHECK(same_params(a.Q.params(), b.Q.params()));
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].acsa == b.history[i].acsa);
        CHECK(a.history[i].gm == b.history[i].gm);
    }
}

TEST_CASE("training tracks the best epoch by acsa and by gm independently") {
    Rng rng(6125);
    const Dataset d = random_ds(rng, {8, 20}, 3);
    TrainConfig cfg = tiny_config(Regime::kAO);
    cfg.epochs = 6;
    const advos::adv::TrainResult res = advos::adv::train(d, d, cfg);
    double best_acsa = -1.0, best_gm = -1.0;
    for (const auto& r : res.history) {
        best_acsa = std::max(best_acsa, r.acsa);
        best_gm = std::max(best_gm, r.gm);
    }
    CHECK(res.best_by_acsa.acsa == best_acsa);
    CHECK(res.best_gm == best_gm);
    CHECK(res.best_by_acsa.epoch >= 1);
    CHECK(res.best_gm_epoch >= 1);
    CHECK(res.final_report.acsa == res.history.back().acsa);
}

TEST_CASE("balanced data degrades adversarial training to the baseline") {
    Rng rng(6126);
    const Dataset d = random_ds(rng, {15, 15}, 3);
    TrainConfig cfg = tiny_config(Regime::kDO);
    cfg.epochs = 3;
    const advos::adv::TrainResult adv_res = advos::adv::train(d, d, cfg);
    cfg.regime = Regime::kBaseline;
    const advos::adv::TrainResult base_res = advos::adv::train(d, d, cfg);
    CHECK(same_params(adv_res.Q.params(), base_res.Q.params()));
}
