#pragma once

#include <vector>

#include "advos/rng.hpp"
#include "advos/tape.hpp"
#include "advos/tensor.hpp"

namespace advos::nn {

// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(int fan_in, int fan_out, Rng& rng);

struct Dense {
    Tensor w;  // [in x out]
    Tensor b;  // [1 x out]
};

// Fully connected stack with leaky-relu between layers. The last layer is
// linear unless the caller asks for activation (used by the generator trunk,
// whose output feeds further layers).
struct Mlp {
    std::vector<Dense> layers;
    double slope = 0.2;

    static Mlp make(const std::vector<int>& dims, Rng& rng, double slope = 0.2);

    int in_dim() const;
    int out_dim() const;

    // Records the forward pass on the tape and returns the output node.
    // When param_ids is given it receives the leaf ids of w0, b0, w1, b1, ...
    // so the caller can read gradients after backward(). Passing cached
    // param_ids reuses those leaves instead of recording new ones.
    NodeId forward(Tape& t, NodeId x, std::vector<NodeId>* param_ids = nullptr,
                   bool activate_last = false) const;

    // Registers all parameters as leaves without running a forward pass.
    // needs_grad = false enters them as constants (frozen player).
    std::vector<NodeId> register_params(Tape& t, bool needs_grad = true) const;

    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
};

// Plain (off-tape) forward for evaluation.
Tensor forward_eval(const Mlp& net, const Tensor& x, bool activate_last = false);

Tensor softmax_rows(const Tensor& logits);

// Row-level losses on an already-normalized probability row.
double ce_row(const Tensor& probs_row, int label);
double cce_row(const Tensor& probs_row, int label);

// Mean over the batch of -log(max(p_label, 1e-7)).
NodeId ce_from_logits(Tape& t, NodeId logits, const std::vector<int>& labels);
// Mean over the batch of -log(max(1 - p_label, 1e-7)).
NodeId cce_from_logits(Tape& t, NodeId logits, const std::vector<int>& labels);

// WGAN-GP term: interpolates real/fake per row with u ~ U(0,1), runs the
// critic, and records mean((||d critic / d x_hat||_2 - 1)^2) so that a later
// backward() reaches the critic parameters. critic_params must come from
// register_params / forward on the same tape.
NodeId gradient_penalty(Tape& t, const Mlp& critic, const std::vector<NodeId>& critic_params,
                        const Tensor& real, const Tensor& fake, Rng& rng);

inline constexpr double kProbFloor = 1e-7;

}  // namespace advos::nn
