#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "advos/adam.hpp"
#include "advos/data.hpp"
#include "advos/metrics.hpp"
#include "advos/nn.hpp"
#include "advos/rng.hpp"
#include "advos/tape.hpp"

namespace advos::adv {

// AO: the generator works against the classifier (complement loss on Q's
// generated rows, plain CE in Q's update). DO: the generator favors the
// classifier (CE in G's update, complement loss on generated rows in Q's).
enum class Regime { kBaseline, kAO, kDO };
enum class Operator { kWganGp, kVanilla };

Regime regime_from_string(const std::string& s);
std::string regime_name(Regime r);

// Per-epoch generated-sample schedule: m_k = ceil(f * (p_max - p_k)).
struct SamplingPlan {
    double f = 1.0;
    std::vector<int> m;

    bool active() const;
    int total() const;
    // Class distribution for classifier updates: P(j) = m_j / sum(m).
    std::vector<double> classifier_probs() const;
};

// f = 0 is accepted and yields an inactive plan (no generated samples).
SamplingPlan make_sampling_plan(const std::vector<int>& sizes, double f);

struct TrainConfig {
    Regime regime = Regime::kDO;
    Operator op = Operator::kWganGp;
    double gp_lambda = 10.0;
    double f = 1.0;
    int latent = 32;
    std::vector<int> g_trunk = {128, 64};
    std::vector<int> d_hidden = {128, 64};
    std::vector<int> q_hidden = {256, 128, 64};
    int epochs = 100;
    int batch = 64;
    int critic_steps = 2;
    AdamConfig adam_gd{2e-4, 0.5, 0.9, 1e-8};
    AdamConfig adam_q{1e-3, 0.9, 0.999, 1e-8};
    std::uint64_t seed = 1;
    bool verbose = false;

    void validate() const;
};

// Mixture of per-class generators: a shared trunk on z concatenated with a
// one-hot class code, and one weight head per class. Head k emits |tau_k|
// logits; softmax of those weights the class's training rows, so every
// sample is a convex combination of real rows of its class.
struct GeneratorMixture {
    nn::Mlp trunk;                 // (latent + C) -> ... -> width, activated output
    std::vector<nn::Dense> heads;  // width -> |tau_k|
    std::vector<Tensor> tau;       // per class: [n_k x d] block of training rows
    int latent = 0;
    int C = 0;
    int d = 0;

    std::vector<Tensor*> params();
    // Leaf ids in the order trunk w/b pairs, then head w/b pairs.
    std::vector<NodeId> register_params(Tape& t) const;

    // Records generation for class k on the tape; z is [b x latent].
    // Returns (weight node [b x n_k], sample node [b x d]).
    std::pair<NodeId, NodeId> generate(Tape& t, const std::vector<NodeId>& ids, int k,
                                       const Tensor& z) const;

    Tensor generate_eager(int k, const Tensor& z) const;
    Tensor weights_eager(int k, const Tensor& z) const;
};

GeneratorMixture make_generator(const data::Dataset& train, const TrainConfig& cfg, Rng& rng);

struct ThreePlayerState {
    GeneratorMixture G;
    nn::Mlp D;
    nn::Mlp Q;
    TrainConfig cfg;
};

// Builds G, D, Q with independent streams forked from cfg.seed. The Q
// stream is forked first so a baseline run and a degraded adversarial run
// initialize Q identically.
ThreePlayerState make_state(const data::Dataset& train, const TrainConfig& cfg);

// Loss builders shared by the training loop and the tests. Each records on
// a fresh tape; params of the player being updated must come from the
// matching register_params call, other players enter as constants.

// Generator loss: mean s(1 - D(G(z|i))) plus mean CCE (AO) or CE (DO) of
// Q(G(z|i)) toward the generating class.
NodeId build_loss_G(Tape& t, const ThreePlayerState& st, const std::vector<NodeId>& g_ids,
                    const Tensor& z, const std::vector<int>& classes);

// Critic loss: mean D(fake) - mean D(real) + lambda * gradient penalty under
// the wgan-gp operator; log-discriminator loss under vanilla.
NodeId build_loss_D(Tape& t, const ThreePlayerState& st, const std::vector<NodeId>& d_ids,
                    const Tensor& real, const Tensor& fake, Rng& gp_rng);

// Classifier loss: mean CE on real rows plus mean CE (AO) or CCE (DO) on
// generated rows. x_gen may have zero rows, leaving the plain CE baseline.
NodeId build_loss_Q(Tape& t, const ThreePlayerState& st, const std::vector<NodeId>& q_ids,
                    const Tensor& x_real, const std::vector<int>& y_real, const Tensor& x_gen,
                    const std::vector<int>& y_gen);

struct Prediction {
    std::vector<int> labels;
    Tensor probs;
};

// Argmax of Q's softmax rows; ties go to the lower class id.
Prediction predict(const nn::Mlp& q, const Tensor& X);

struct TrainResult {
    nn::Mlp Q;  // final-epoch classifier
    std::vector<metrics::EvalReport> history;
    metrics::EvalReport final_report;
    metrics::EvalReport best_by_acsa;
    double best_gm = 0.0;  // best GM over epochs (may be a different epoch)
    int best_gm_epoch = -1;
};

TrainResult train(const data::Dataset& train_set, const data::Dataset& val_set,
                  const TrainConfig& cfg);

// Parameter checkpoint (JSON, versioned). tau blocks are data-derived and
// not stored; load_state rebuilds them from the training split.
void save_state(const std::string& path, const ThreePlayerState& st,
                const std::string& config_hash);
ThreePlayerState load_state(const std::string& path, const data::Dataset& train_set);

}  // namespace advos::adv
