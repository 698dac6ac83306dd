#include "advos/nn.hpp"

#include <cmath>

#include "advos/error.hpp"

namespace advos::nn {

Tensor glorot_uniform(int fan_in, int fan_out, Rng& rng) {
    if (fan_in <= 0 || fan_out <= 0) throw ContractError("glorot_uniform: bad fan dims");
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor w(fan_in, fan_out);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-a, a);
    return w;
}

Mlp Mlp::make(const std::vector<int>& dims, Rng& rng, double slope) {
    if (dims.size() < 2) throw ContractError("Mlp::make: need at least in/out dims");
    Mlp net;
    net.slope = slope;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Dense d;
        d.w = glorot_uniform(dims[i], dims[i + 1], rng);
        d.b = Tensor(1, dims[i + 1]);
        net.layers.push_back(std::move(d));
    }
    return net;
}

int Mlp::in_dim() const {
    if (layers.empty()) throw ContractError("Mlp: empty");
    return layers.front().w.rows();
}

int Mlp::out_dim() const {
    if (layers.empty()) throw ContractError("Mlp: empty");
    return layers.back().w.cols();
}

std::vector<NodeId> Mlp::register_params(Tape& t, bool needs_grad) const {
    std::vector<NodeId> ids;
    ids.reserve(layers.size() * 2);
    for (const auto& l : layers) {
        ids.push_back(t.leaf(l.w, needs_grad));
        ids.push_back(t.leaf(l.b, needs_grad));
    }
    return ids;
}

NodeId Mlp::forward(Tape& t, NodeId x, std::vector<NodeId>* param_ids,
                    bool activate_last) const {
    std::vector<NodeId> local;
    std::vector<NodeId>* ids = param_ids ? param_ids : &local;
    if (ids->empty()) *ids = register_params(t);
    if (ids->size() != layers.size() * 2) {
        throw ContractError("Mlp::forward: param id list does not match layer count");
    }
    NodeId h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = t.add_rowvec(t.matmul(h, (*ids)[2 * i]), (*ids)[2 * i + 1]);
        if (i + 1 < layers.size() || activate_last) h = t.leaky_relu(h, slope);
    }
    return h;
}

std::vector<Tensor*> Mlp::params() {
    std::vector<Tensor*> out;
    out.reserve(layers.size() * 2);
    for (auto& l : layers) {
        out.push_back(&l.w);
        out.push_back(&l.b);
    }
    return out;
}

std::vector<const Tensor*> Mlp::params() const {
    std::vector<const Tensor*> out;
    out.reserve(layers.size() * 2);
    for (const auto& l : layers) {
        out.push_back(&l.w);
        out.push_back(&l.b);
    }
    return out;
}

Tensor forward_eval(const Mlp& net, const Tensor& x, bool activate_last) {
    if (x.cols() != net.in_dim()) {
        throw ContractError("forward_eval: input width " + std::to_string(x.cols()) +
                            " does not match net in_dim " + std::to_string(net.in_dim()));
    }
    Tensor h = x;
    Tensor z;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        matmul_nn(h, l.w, z);
        for (int r = 0; r < z.rows(); ++r)
            for (int c = 0; c < z.cols(); ++c) z.at(r, c) += l.b.at(0, c);
        if (i + 1 < net.layers.size() || activate_last) {
            for (std::size_t k = 0; k < z.size(); ++k) {
                if (z[k] < 0.0) z[k] *= net.slope;
            }
        }
        h = z;
    }
    return h;
}

Tensor softmax_rows(const Tensor& logits) {
    Tensor p = logits;
    for (int r = 0; r < p.rows(); ++r) {
        double mx = p.at(r, 0);
        for (int c = 1; c < p.cols(); ++c) mx = std::max(mx, p.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < p.cols(); ++c) {
            double e = std::exp(p.at(r, c) - mx);
            p.at(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < p.cols(); ++c) p.at(r, c) /= sum;
    }
    return p;
}

double ce_row(const Tensor& probs_row, int label) {
    if (probs_row.rows() != 1) throw ContractError("ce_row: expects a single row");
    if (label < 0 || label >= probs_row.cols()) throw ContractError("ce_row: label out of range");
    return -std::log(std::max(probs_row.at(0, label), kProbFloor));
}

double cce_row(const Tensor& probs_row, int label) {
    if (probs_row.rows() != 1) throw ContractError("cce_row: expects a single row");
    if (label < 0 || label >= probs_row.cols())
        throw ContractError("cce_row: label out of range");
    return -std::log(std::max(1.0 - probs_row.at(0, label), kProbFloor));
}

NodeId ce_from_logits(Tape& t, NodeId logits, const std::vector<int>& labels) {
    NodeId p = t.pick_class(t.softmax_row(logits), labels);
    return t.mean_all(t.neg(t.log_(t.clamp_min(p, kProbFloor))));
}

NodeId cce_from_logits(Tape& t, NodeId logits, const std::vector<int>& labels) {
    NodeId p = t.pick_class(t.softmax_row(logits), labels);
    return t.mean_all(t.neg(t.log_(t.clamp_min(t.one_minus(p), kProbFloor))));
}

NodeId gradient_penalty(Tape& t, const Mlp& critic, const std::vector<NodeId>& critic_params,
                        const Tensor& real, const Tensor& fake, Rng& rng) {
    if (!real.same_shape(fake)) {
        throw ContractError("gradient_penalty: real " + real.shape_str() + " vs fake " +
                            fake.shape_str());
    }
    Tensor x_hat(real.rows(), real.cols());
    for (int r = 0; r < real.rows(); ++r) {
        const double u = rng.uniform();
        for (int c = 0; c < real.cols(); ++c) {
            x_hat.at(r, c) = u * real.at(r, c) + (1.0 - u) * fake.at(r, c);
        }
    }
    NodeId xh = t.leaf(std::move(x_hat), false);
    std::vector<NodeId> ids = critic_params;
    NodeId out = critic.forward(t, xh, &ids);
    NodeId grad_x = t.input_gradient(out, xh);
    // Tiny shift keeps sqrt differentiable if a row gradient vanishes.
    NodeId norm = t.sqrt_(t.add_const(t.row_sum(t.square(grad_x)), 1e-12));
    return t.mean_all(t.square(t.add_const(norm, -1.0)));
}

}  // namespace advos::nn
