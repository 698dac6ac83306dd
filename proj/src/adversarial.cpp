#include "advos/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "advos/error.hpp"
#include "advos/log.hpp"

namespace advos::adv {

using nlohmann::json;

Regime regime_from_string(const std::string& s) {
    if (s == "baseline" || s == "q") return Regime::kBaseline;
    if (s == "ao") return Regime::kAO;
    if (s == "do") return Regime::kDO;
    throw ConfigError("unknown regime '" + s + "'");
}

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::kBaseline: return "baseline";
        case Regime::kAO: return "ao";
        case Regime::kDO: return "do";
    }
    return "?";
}

bool SamplingPlan::active() const {
    for (int v : m) {
        if (v > 0) return true;
    }
    return false;
}

int SamplingPlan::total() const {
    int t = 0;
    for (int v : m) t += v;
    return t;
}

std::vector<double> SamplingPlan::classifier_probs() const {
    const int t = total();
    if (t == 0) throw ContractError("classifier_probs: inactive plan");
    std::vector<double> p(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
        p[k] = static_cast<double>(m[k]) / static_cast<double>(t);
    }
    return p;
}

SamplingPlan make_sampling_plan(const std::vector<int>& sizes, double f) {
    if (sizes.empty()) throw ConfigError("sampling plan: no class sizes");
    if (f < 0.0 || f > 1.0) {
        throw ConfigError("sampling plan: f must lie in [0,1], got " + std::to_string(f));
    }
    const int p_max = *std::max_element(sizes.begin(), sizes.end());
    SamplingPlan plan;
    plan.f = f;
    plan.m.resize(sizes.size());
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        plan.m[k] = static_cast<int>(std::ceil(f * (p_max - sizes[k])));
    }
    return plan;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (critic_steps < 1) throw ConfigError("critic_steps must be >= 1");
    if (latent < 1) throw ConfigError("latent must be >= 1");
    if (f < 0.0 || f > 1.0) throw ConfigError("f must lie in [0,1]");
    if (gp_lambda < 0.0) throw ConfigError("gp_lambda must be >= 0");
    if (g_trunk.empty() || d_hidden.empty() || q_hidden.empty()) {
        throw ConfigError("network widths must be nonempty");
    }
}

std::vector<Tensor*> GeneratorMixture::params() {
    std::vector<Tensor*> out = trunk.params();
    for (auto& h : heads) {
        out.push_back(&h.w);
        out.push_back(&h.b);
    }
    return out;
}

std::vector<NodeId> GeneratorMixture::register_params(Tape& t) const {
    std::vector<NodeId> ids = trunk.register_params(t);
    for (const auto& h : heads) {
        ids.push_back(t.leaf(h.w, true));
        ids.push_back(t.leaf(h.b, true));
    }
    return ids;
}

namespace {

Tensor latent_with_class(const Tensor& z, int k, int C) {
    Tensor in(z.rows(), z.cols() + C);
    for (int r = 0; r < z.rows(); ++r) {
        for (int c = 0; c < z.cols(); ++c) in.at(r, c) = z.at(r, c);
        in.at(r, z.cols() + k) = 1.0;
    }
    return in;
}

}  // namespace

std::pair<NodeId, NodeId> GeneratorMixture::generate(Tape& t, const std::vector<NodeId>& ids,
                                                     int k, const Tensor& z) const {
    if (k < 0 || k >= C) throw ConfigError("generate: class id out of range");
    if (tau[k].rows() == 0) throw ConfigError("generate: class " + std::to_string(k) + " empty");
    if (z.cols() != latent) throw ContractError("generate: latent width mismatch");

    const std::size_t trunk_ids = trunk.layers.size() * 2;
    if (ids.size() != trunk_ids + heads.size() * 2) {
        throw ContractError("generate: parameter id list does not match mixture layout");
    }
    std::vector<NodeId> t_ids(ids.begin(), ids.begin() + trunk_ids);
    NodeId x = t.leaf(latent_with_class(z, k, C), false);
    NodeId h = trunk.forward(t, x, &t_ids, true);
    NodeId logits = t.add_rowvec(t.matmul(h, ids[trunk_ids + 2 * k]), ids[trunk_ids + 2 * k + 1]);
    NodeId weights = t.softmax_row(logits);
    NodeId samples = t.matmul(weights, t.leaf(tau[k], false));
    return {weights, samples};
}

Tensor GeneratorMixture::weights_eager(int k, const Tensor& z) const {
    if (k < 0 || k >= C) throw ConfigError("weights_eager: class id out of range");
    Tensor h = nn::forward_eval(trunk, latent_with_class(z, k, C), true);
    Tensor logits;
    matmul_nn(h, heads[k].w, logits);
    for (int r = 0; r < logits.rows(); ++r)
        for (int c = 0; c < logits.cols(); ++c) logits.at(r, c) += heads[k].b.at(0, c);
    return nn::softmax_rows(logits);
}

Tensor GeneratorMixture::generate_eager(int k, const Tensor& z) const {
    Tensor w = weights_eager(k, z);
    Tensor out;
    matmul_nn(w, tau[k], out);
    return out;
}

GeneratorMixture make_generator(const data::Dataset& train, const TrainConfig& cfg, Rng& rng) {
    GeneratorMixture g;
    g.latent = cfg.latent;
    g.C = train.C;
    g.d = train.dim();

    std::vector<int> dims = {cfg.latent + train.C};
    dims.insert(dims.end(), cfg.g_trunk.begin(), cfg.g_trunk.end());
    g.trunk = nn::Mlp::make(dims, rng);
    const int width = dims.back();

    const auto tau_rows = train.class_rows();
    for (int k = 0; k < train.C; ++k) {
        const auto& rows = tau_rows[k];
        if (rows.empty()) throw ConfigError("generator: class " + std::to_string(k) + " empty");
        nn::Dense head;
        head.w = nn::glorot_uniform(width, static_cast<int>(rows.size()), rng);
        head.b = Tensor(1, static_cast<int>(rows.size()));
        g.heads.push_back(std::move(head));

        Tensor block(static_cast<int>(rows.size()), train.dim());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int c = 0; c < train.dim(); ++c)
                block.at(static_cast<int>(i), c) = train.X.at(rows[i], c);
        g.tau.push_back(std::move(block));
    }
    return g;
}

namespace {

struct Streams {
    Rng q, g, d, shuffle, z, plan, gp;
};

// All streams are forked in a fixed order so a baseline run and a degraded
// adversarial run draw identically for Q.
Streams fork_streams(std::uint64_t seed) {
    Rng root(seed);
    Streams s{root.fork(1), root.fork(2), root.fork(3), root.fork(4),
              root.fork(5), root.fork(6), root.fork(7)};
    return s;
}

ThreePlayerState build_state(const data::Dataset& train, const TrainConfig& cfg, Rng& rq,
                             Rng& rg, Rng& rd) {
    ThreePlayerState st;
    st.cfg = cfg;

    std::vector<int> q_dims = {train.dim()};
    q_dims.insert(q_dims.end(), cfg.q_hidden.begin(), cfg.q_hidden.end());
    q_dims.push_back(train.C);
    st.Q = nn::Mlp::make(q_dims, rq);

    st.G = make_generator(train, cfg, rg);

    std::vector<int> d_dims = {train.dim()};
    d_dims.insert(d_dims.end(), cfg.d_hidden.begin(), cfg.d_hidden.end());
    d_dims.push_back(1);
    st.D = nn::Mlp::make(d_dims, rd);
    return st;
}

}  // namespace

ThreePlayerState make_state(const data::Dataset& train, const TrainConfig& cfg) {
    cfg.validate();
    Streams s = fork_streams(cfg.seed);
    return build_state(train, cfg, s.q, s.g, s.d);
}

namespace {

NodeId ce_sum(Tape& t, NodeId logits, const std::vector<int>& labels) {
    NodeId p = t.pick_class(t.softmax_row(logits), labels);
    return t.sum_all(t.neg(t.log_(t.clamp_min(p, nn::kProbFloor))));
}

NodeId cce_sum(Tape& t, NodeId logits, const std::vector<int>& labels) {
    NodeId p = t.pick_class(t.softmax_row(logits), labels);
    return t.sum_all(t.neg(t.log_(t.clamp_min(t.one_minus(p), nn::kProbFloor))));
}

}  // namespace

NodeId build_loss_G(Tape& t, const ThreePlayerState& st, const std::vector<NodeId>& g_ids,
                    const Tensor& z, const std::vector<int>& classes) {
    if (st.cfg.regime == Regime::kBaseline) {
        throw ContractError("generator loss undefined for the baseline regime");
    }
    if (z.rows() != static_cast<int>(classes.size()) || z.rows() == 0) {
        throw ContractError("build_loss_G: one class per z row required");
    }

    std::vector<NodeId> d_const = st.D.register_params(t, false);
    std::vector<NodeId> q_const = st.Q.register_params(t, false);
    const int b = z.rows();
    NodeId acc = -1;
    for (int k = 0; k < st.G.C; ++k) {
        std::vector<int> rows;
        for (int i = 0; i < b; ++i) {
            if (classes[i] == k) rows.push_back(i);
        }
        if (rows.empty()) continue;
        Tensor zk(static_cast<int>(rows.size()), z.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int c = 0; c < z.cols(); ++c)
                zk.at(static_cast<int>(i), c) = z.at(rows[i], c);

        auto [w, samples] = st.G.generate(t, g_ids, k, zk);

        NodeId d_out = st.D.forward(t, samples, &d_const);
        NodeId adv;
        if (st.cfg.op == Operator::kWganGp) {
            adv = t.sum_all(t.one_minus(d_out));
        } else {
            adv = t.sum_all(
                t.log_(t.clamp_min(t.one_minus(t.sigmoid(d_out)), nn::kProbFloor)));
        }

        NodeId q_logits = st.Q.forward(t, samples, &q_const);
        const std::vector<int> labels(rows.size(), k);
        NodeId cls = st.cfg.regime == Regime::kAO ? cce_sum(t, q_logits, labels)
                                                  : ce_sum(t, q_logits, labels);

        NodeId term = t.add(adv, cls);
        acc = acc < 0 ? term : t.add(acc, term);
    }
    if (acc < 0) throw ContractError("build_loss_G: empty batch");
    return t.scale(acc, 1.0 / static_cast<double>(b));
}

NodeId build_loss_D(Tape& t, const ThreePlayerState& st, const std::vector<NodeId>& d_ids,
                    const Tensor& real, const Tensor& fake, Rng& gp_rng) {
    if (real.rows() == 0 || fake.rows() == 0) {
        throw ContractError("build_loss_D: empty batch");
    }
    std::vector<NodeId> ids_r = d_ids, ids_f = d_ids;
    NodeId d_real = st.D.forward(t, t.leaf(real, false), &ids_r);
    NodeId d_fake = st.D.forward(t, t.leaf(fake, false), &ids_f);
    if (st.cfg.op == Operator::kWganGp) {
        NodeId wass = t.sub(t.mean_all(d_fake), t.mean_all(d_real));
        if (st.cfg.gp_lambda == 0.0) return wass;
        NodeId gp = nn::gradient_penalty(t, st.D, d_ids, real, fake, gp_rng);
        return t.add(wass, t.scale(gp, st.cfg.gp_lambda));
    }
    NodeId lr = t.mean_all(t.log_(t.clamp_min(t.sigmoid(d_real), nn::kProbFloor)));
    NodeId lf = t.mean_all(t.log_(t.clamp_min(t.one_minus(t.sigmoid(d_fake)), nn::kProbFloor)));
    return t.neg(t.add(lr, lf));
}

NodeId build_loss_Q(Tape& t, const ThreePlayerState& st, const std::vector<NodeId>& q_ids,
                    const Tensor& x_real, const std::vector<int>& y_real, const Tensor& x_gen,
                    const std::vector<int>& y_gen) {
    if (x_real.rows() == 0) throw ContractError("build_loss_Q: empty real batch");
    if (x_gen.rows() != static_cast<int>(y_gen.size())) {
        throw ContractError("build_loss_Q: generated rows/labels mismatch");
    }
    std::vector<NodeId> ids = q_ids;
    NodeId logits_r = st.Q.forward(t, t.leaf(x_real, false), &ids);
    NodeId loss = nn::ce_from_logits(t, logits_r, y_real);
    if (x_gen.rows() == 0 || st.cfg.regime == Regime::kBaseline) return loss;

    NodeId logits_g = st.Q.forward(t, t.leaf(x_gen, false), &ids);
    NodeId gen_term = st.cfg.regime == Regime::kAO
                          ? nn::ce_from_logits(t, logits_g, y_gen)
                          : nn::cce_from_logits(t, logits_g, y_gen);
    return t.add(loss, gen_term);
}

Prediction predict(const nn::Mlp& q, const Tensor& X) {
    Prediction p;
    p.probs = nn::softmax_rows(nn::forward_eval(q, X));
    p.labels.reserve(X.rows());
    for (int r = 0; r < p.probs.rows(); ++r) {
        int best = 0;
        for (int c = 1; c < p.probs.cols(); ++c) {
            if (p.probs.at(r, c) > p.probs.at(r, best)) best = c;
        }
        p.labels.push_back(best);
    }
    return p;
}

namespace {

void check_finite_loss(double v, int epoch, const char* player) {
    if (!std::isfinite(v)) {
        throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", player " +
                         player + ": " + std::to_string(v));
    }
}

void step_player(Tape& t, NodeId loss, const std::vector<NodeId>& ids,
                 const std::vector<Tensor*>& params, Adam& opt, int epoch,
                 const char* player) {
    check_finite_loss(t.value(loss).item(), epoch, player);
    try {
        t.backward(loss);
    } catch (const NumericError& e) {
        throw TrainError("epoch " + std::to_string(epoch) + ", player " + player + ": " +
                         e.what());
    }
    std::vector<const Tensor*> grads;
    grads.reserve(ids.size());
    for (NodeId id : ids) grads.push_back(&t.grad(id));
    opt.step(params, grads);
}

Tensor draw_z(Rng& rz, int rows, int latent) {
    Tensor z(rows, latent);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = rz.normal();
    return z;
}

// Generates one fake row per real row, class-matched, placed at the same
// position as its real counterpart.
Tensor fake_like(const GeneratorMixture& g, const std::vector<int>& classes, Rng& rz) {
    Tensor out(static_cast<int>(classes.size()), g.d);
    for (int k = 0; k < g.C; ++k) {
        std::vector<int> rows;
        for (std::size_t i = 0; i < classes.size(); ++i) {
            if (classes[i] == k) rows.push_back(static_cast<int>(i));
        }
        if (rows.empty()) continue;
        Tensor zk = draw_z(rz, static_cast<int>(rows.size()), g.latent);
        Tensor fk = g.generate_eager(k, zk);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int c = 0; c < g.d; ++c) out.at(rows[i], c) = fk.at(static_cast<int>(i), c);
    }
    return out;
}

}  // namespace

TrainResult train(const data::Dataset& train_set, const data::Dataset& val_set,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.n() == 0 || val_set.n() == 0) throw TrainError("empty train or validation set");
    if (train_set.dim() != val_set.dim()) throw TrainError("train/val dimension mismatch");

    const auto sizes = train_set.counts();
    Regime regime = cfg.regime;
    SamplingPlan plan =
        make_sampling_plan(sizes, regime == Regime::kBaseline ? 0.0 : cfg.f);
    if (regime != Regime::kBaseline && !plan.active()) {
        log::warn(regime_name(regime), ": sampling plan inactive (balanced data or f = 0); "
                  "training reduces to the baseline classifier");
        regime = Regime::kBaseline;
    }

    Streams rs = fork_streams(cfg.seed);
    ThreePlayerState st = build_state(train_set, cfg, rs.q, rs.g, rs.d);
    st.cfg.regime = regime;

    Adam opt_q(cfg.adam_q);
    AdamConfig gd_cfg = cfg.adam_gd;
    Adam opt_g(gd_cfg), opt_d(gd_cfg);

    const int n = train_set.n();
    const int nb = (n + cfg.batch - 1) / cfg.batch;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult res;
    res.best_by_acsa.acsa = -1.0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rs.shuffle.shuffle(order);

        std::vector<int> gen_classes;
        if (regime != Regime::kBaseline) {
            for (int k = 0; k < train_set.C; ++k) {
                gen_classes.insert(gen_classes.end(), plan.m[k], k);
            }
            rs.plan.shuffle(gen_classes);
        }
        std::size_t gen_pos = 0;

        for (int bi = 0; bi < nb; ++bi) {
            const int lo = bi * cfg.batch;
            const int hi = std::min(n, lo + cfg.batch);
            const int bsz = hi - lo;
            Tensor x_real(bsz, train_set.dim());
            std::vector<int> y_real(bsz);
            for (int i = 0; i < bsz; ++i) {
                const int row = order[lo + i];
                for (int c = 0; c < train_set.dim(); ++c)
                    x_real.at(i, c) = train_set.X.at(row, c);
                y_real[i] = train_set.y[row];
            }

            if (regime != Regime::kBaseline) {
                for (int cs = 0; cs < cfg.critic_steps; ++cs) {
                    Tensor fake = fake_like(st.G, y_real, rs.z);
                    Tape t;
                    auto d_ids = st.D.register_params(t);
                    NodeId loss = build_loss_D(t, st, d_ids, x_real, fake, rs.gp);
                    step_player(t, loss, d_ids, st.D.params(), opt_d, epoch, "D");
                }
                {
                    std::vector<int> classes(bsz);
                    for (int i = 0; i < bsz; ++i)
                        classes[i] = static_cast<int>(rs.plan.below(train_set.C));
                    Tensor z = draw_z(rs.z, bsz, cfg.latent);
                    Tape t;
                    auto g_ids = st.G.register_params(t);
                    NodeId loss = build_loss_G(t, st, g_ids, z, classes);
                    step_player(t, loss, g_ids, st.G.params(), opt_g, epoch, "G");
                }
            }

            Tensor x_gen(0, train_set.dim());
            std::vector<int> y_gen;
            if (!gen_classes.empty()) {
                // Spread the epoch quota evenly over minibatches.
                const std::size_t want =
                    gen_classes.size() * static_cast<std::size_t>(bi + 1) / nb;
                if (want > gen_pos) {
                    y_gen.assign(gen_classes.begin() + gen_pos, gen_classes.begin() + want);
                    gen_pos = want;
                    x_gen = fake_like(st.G, y_gen, rs.z);
                }
            }
            Tape t;
            auto q_ids = st.Q.register_params(t);
            NodeId loss = build_loss_Q(t, st, q_ids, x_real, y_real, x_gen, y_gen);
            step_player(t, loss, q_ids, st.Q.params(), opt_q, epoch, "Q");
        }

        const Prediction pred = predict(st.Q, val_set.X);
        metrics::EvalReport rep = metrics::evaluate(val_set.y, pred.labels, val_set.C, epoch);
        if (cfg.verbose) {
            log::info("epoch ", epoch, ": acsa=", rep.acsa, " gm=", rep.gm);
        }
        if (rep.acsa > res.best_by_acsa.acsa) res.best_by_acsa = rep;
        if (rep.gm > res.best_gm) {
            res.best_gm = rep.gm;
            res.best_gm_epoch = epoch;
        }
        res.history.push_back(std::move(rep));
    }
    res.final_report = res.history.back();
    res.Q = st.Q;
    return res;
}

namespace {

json tensor_to_json(const Tensor& t) {
    json j;
    j["rows"] = t.rows();
    j["cols"] = t.cols();
    std::vector<double> data(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) data[i] = t[i];
    j["data"] = std::move(data);
    return j;
}

Tensor tensor_from_json(const json& j) {
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<std::size_t>(rows) * cols != data.size()) {
        throw ConfigError("checkpoint tensor size mismatch");
    }
    return Tensor(rows, cols, data);
}

json mlp_to_json(const nn::Mlp& m) {
    json layers = json::array();
    for (const auto& l : m.layers) {
        layers.push_back({{"w", tensor_to_json(l.w)}, {"b", tensor_to_json(l.b)}});
    }
    return {{"slope", m.slope}, {"layers", std::move(layers)}};
}

nn::Mlp mlp_from_json(const json& j) {
    nn::Mlp m;
    m.slope = j.at("slope").get<double>();
    for (const auto& l : j.at("layers")) {
        nn::Dense d;
        d.w = tensor_from_json(l.at("w"));
        d.b = tensor_from_json(l.at("b"));
        m.layers.push_back(std::move(d));
    }
    return m;
}

constexpr const char* kCkptVersion = "advos-ckpt-1";

}  // namespace

void save_state(const std::string& path, const ThreePlayerState& st,
                const std::string& config_hash) {
    json j;
    j["version"] = kCkptVersion;
    j["config_hash"] = config_hash;
    j["regime"] = regime_name(st.cfg.regime);
    j["op"] = st.cfg.op == Operator::kWganGp ? "wgan-gp" : "vanilla";
    j["latent"] = st.G.latent;
    j["classes"] = st.G.C;
    j["dim"] = st.G.d;
    j["trunk"] = mlp_to_json(st.G.trunk);
    json heads = json::array();
    for (const auto& h : st.G.heads) {
        heads.push_back({{"w", tensor_to_json(h.w)}, {"b", tensor_to_json(h.b)}});
    }
    j["heads"] = std::move(heads);
    j["discriminator"] = mlp_to_json(st.D);
    j["classifier"] = mlp_to_json(st.Q);

    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    out << j.dump(2) << "\n";
}

ThreePlayerState load_state(const std::string& path, const data::Dataset& train_set) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    json j;
    in >> j;
    if (j.at("version").get<std::string>() != kCkptVersion) {
        throw ConfigError("unsupported checkpoint version in " + path);
    }
    ThreePlayerState st;
    st.cfg.regime = regime_from_string(j.at("regime").get<std::string>());
    st.cfg.op = j.at("op").get<std::string>() == "vanilla" ? Operator::kVanilla
                                                           : Operator::kWganGp;
    st.cfg.latent = j.at("latent").get<int>();

    st.G.latent = st.cfg.latent;
    st.G.C = j.at("classes").get<int>();
    st.G.d = j.at("dim").get<int>();
    if (st.G.C != train_set.C || st.G.d != train_set.dim()) {
        throw ConfigError("checkpoint does not match the provided training split");
    }
    st.G.trunk = mlp_from_json(j.at("trunk"));
    for (const auto& h : j.at("heads")) {
        nn::Dense d;
        d.w = tensor_from_json(h.at("w"));
        d.b = tensor_from_json(h.at("b"));
        st.G.heads.push_back(std::move(d));
    }
    const auto tau_rows = train_set.class_rows();
    for (int k = 0; k < train_set.C; ++k) {
        const auto& rows = tau_rows[k];
        if (st.G.heads[k].w.cols() != static_cast<int>(rows.size())) {
            throw ConfigError("checkpoint head " + std::to_string(k) +
                              " arity does not match the training split");
        }
        Tensor block(static_cast<int>(rows.size()), train_set.dim());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int c = 0; c < train_set.dim(); ++c)
                block.at(static_cast<int>(i), c) = train_set.X.at(rows[i], c);
        st.G.tau.push_back(std::move(block));
    }
    st.D = mlp_from_json(j.at("discriminator"));
    st.Q = mlp_from_json(j.at("classifier"));
    return st;
}

}  // namespace advos::adv
