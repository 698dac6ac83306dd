#include "advos/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "advos/error.hpp"

namespace advos {

const char* op_name(Op op) {
    switch (op) {
        case Op::kLeaf: return "leaf";
        case Op::kMatmul: return "matmul";
        case Op::kMatmulNT: return "matmul_nt";
        case Op::kMatmulTN: return "matmul_tn";
        case Op::kAddRowVec: return "add_rowvec";
        case Op::kAdd: return "add";
        case Op::kSub: return "sub";
        case Op::kMul: return "mul";
        case Op::kScale: return "scale";
        case Op::kAddConst: return "add_const";
        case Op::kNeg: return "neg";
        case Op::kOneMinus: return "one_minus";
        case Op::kRecip: return "recip";
        case Op::kLeakyRelu: return "leaky_relu";
        case Op::kLeakyReluMask: return "leaky_relu_mask";
        case Op::kSoftmaxRow: return "softmax_row";
        case Op::kSigmoid: return "sigmoid";
        case Op::kLog: return "log";
        case Op::kClampMin: return "clamp_min";
        case Op::kSquare: return "square";
        case Op::kSqrt: return "sqrt";
        case Op::kRowSum: return "row_sum";
        case Op::kColSum: return "col_sum";
        case Op::kSumAll: return "sum_all";
        case Op::kMean: return "mean";
        case Op::kBroadcastCol: return "broadcast_col";
        case Op::kBroadcastRow: return "broadcast_row";
        case Op::kBroadcastFull: return "broadcast_full";
        case Op::kPickClass: return "pick_class";
    }
    return "?";
}

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

}  // namespace

NodeId Tape::push(Node n) {
    compute_value(n);
    if (check_finite && !n.value.all_finite()) {
        throw NumericError(std::string("non-finite values after op ") + op_name(n.op));
    }
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor value, bool needs_grad) {
    Node n;
    n.op = Op::kLeaf;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (check_finite && !n.value.all_finite()) {
        throw NumericError("non-finite values in leaf tensor");
    }
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

namespace {
Tape::Node make(Op op, NodeId a, NodeId b, double attr, bool needs_grad) {
    Tape::Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.attr = attr;
    n.needs_grad = needs_grad;
    return n;
}
}  // namespace

#define ADVOS_CHECK_ID(id) \
    require((id) >= 0 && static_cast<std::size_t>(id) < nodes_.size(), "tape: bad node id")

NodeId Tape::matmul(NodeId a, NodeId b) {
    ADVOS_CHECK_ID(a);
    ADVOS_CHECK_ID(b);
    return push(make(Op::kMatmul, a, b, 0.0, nodes_[a].needs_grad || nodes_[b].needs_grad));
}
NodeId Tape::matmul_nt(NodeId a, NodeId b) {
    ADVOS_CHECK_ID(a);
    ADVOS_CHECK_ID(b);
    return push(make(Op::kMatmulNT, a, b, 0.0, nodes_[a].needs_grad || nodes_[b].needs_grad));
}
NodeId Tape::matmul_tn(NodeId a, NodeId b) {
    ADVOS_CHECK_ID(a);
    ADVOS_CHECK_ID(b);
    return push(make(Op::kMatmulTN, a, b, 0.0, nodes_[a].needs_grad || nodes_[b].needs_grad));
}
NodeId Tape::add_rowvec(NodeId x, NodeId bias) {
    ADVOS_CHECK_ID(x);
    ADVOS_CHECK_ID(bias);
    return push(make(Op::kAddRowVec, x, bias, 0.0,
                     nodes_[x].needs_grad || nodes_[bias].needs_grad));
}
NodeId Tape::add(NodeId a, NodeId b) {
    ADVOS_CHECK_ID(a);
    ADVOS_CHECK_ID(b);
    return push(make(Op::kAdd, a, b, 0.0, nodes_[a].needs_grad || nodes_[b].needs_grad));
}
NodeId Tape::sub(NodeId a, NodeId b) {
    ADVOS_CHECK_ID(a);
    ADVOS_CHECK_ID(b);
    return push(make(Op::kSub, a, b, 0.0, nodes_[a].needs_grad || nodes_[b].needs_grad));
}
NodeId Tape::mul(NodeId a, NodeId b) {
    ADVOS_CHECK_ID(a);
    ADVOS_CHECK_ID(b);
    return push(make(Op::kMul, a, b, 0.0, nodes_[a].needs_grad || nodes_[b].needs_grad));
}
NodeId Tape::scale(NodeId a, double c) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kScale, a, -1, c, nodes_[a].needs_grad));
}
NodeId Tape::add_const(NodeId a, double c) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kAddConst, a, -1, c, nodes_[a].needs_grad));
}
NodeId Tape::neg(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kNeg, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::one_minus(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kOneMinus, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::recip(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kRecip, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::leaky_relu(NodeId a, double slope) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kLeakyRelu, a, -1, slope, nodes_[a].needs_grad));
}
NodeId Tape::leaky_relu_mask(NodeId a, double slope) {
    ADVOS_CHECK_ID(a);
    // The mask is piecewise constant, so it never carries gradient itself.
    return push(make(Op::kLeakyReluMask, a, -1, slope, false));
}
NodeId Tape::softmax_row(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kSoftmaxRow, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::sigmoid(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kSigmoid, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::log_(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kLog, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::clamp_min(NodeId a, double floor) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kClampMin, a, -1, floor, nodes_[a].needs_grad));
}
NodeId Tape::square(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kSquare, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::sqrt_(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kSqrt, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::row_sum(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kRowSum, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::col_sum(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kColSum, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::sum_all(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kSumAll, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::mean_all(NodeId a) {
    ADVOS_CHECK_ID(a);
    return push(make(Op::kMean, a, -1, 0.0, nodes_[a].needs_grad));
}
NodeId Tape::broadcast_col(NodeId a, int cols) {
    ADVOS_CHECK_ID(a);
    require(nodes_[a].value.cols() == 1, "broadcast_col: source must be [m x 1]");
    require(cols >= 1, "broadcast_col: cols >= 1");
    return push(make(Op::kBroadcastCol, a, -1, static_cast<double>(cols), nodes_[a].needs_grad));
}
NodeId Tape::broadcast_row(NodeId a, int rows) {
    ADVOS_CHECK_ID(a);
    require(nodes_[a].value.rows() == 1, "broadcast_row: source must be [1 x n]");
    require(rows >= 1, "broadcast_row: rows >= 1");
    return push(make(Op::kBroadcastRow, a, -1, static_cast<double>(rows), nodes_[a].needs_grad));
}
NodeId Tape::broadcast_full(NodeId a, int rows, int cols) {
    ADVOS_CHECK_ID(a);
    require(nodes_[a].value.rows() == 1 && nodes_[a].value.cols() == 1,
            "broadcast_full: source must be scalar");
    Node n = make(Op::kBroadcastFull, a, -1, 0.0, nodes_[a].needs_grad);
    n.labels = {rows, cols};
    return push(std::move(n));
}
NodeId Tape::pick_class(NodeId probs, std::vector<int> labels) {
    ADVOS_CHECK_ID(probs);
    const Tensor& p = nodes_[probs].value;
    require(static_cast<int>(labels.size()) == p.rows(), "pick_class: one label per row");
    for (int lbl : labels) {
        require(lbl >= 0 && lbl < p.cols(), "pick_class: label out of range");
    }
    Node n = make(Op::kPickClass, probs, -1, 0.0, nodes_[probs].needs_grad);
    n.labels = std::move(labels);
    return push(std::move(n));
}

const Tensor& Tape::value(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw ContractError("tape: bad node id");
    }
    return nodes_[id].value;
}

const Tape::Node& Tape::node(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw ContractError("tape: bad node id");
    }
    return nodes_[id];
}

void Tape::clear() {
    nodes_.clear();
    grads_.clear();
    has_grad_.clear();
}

void Tape::compute_value(Node& n) const {
    const Tensor* A = n.a >= 0 ? &nodes_[n.a].value : nullptr;
    const Tensor* B = n.b >= 0 ? &nodes_[n.b].value : nullptr;
    switch (n.op) {
        case Op::kLeaf:
            return;
        case Op::kMatmul:
            ::advos::matmul_nn(*A, *B, n.value);
            return;
        case Op::kMatmulNT:
            ::advos::matmul_nt(*A, *B, n.value);
            return;
        case Op::kMatmulTN:
            ::advos::matmul_tn(*A, *B, n.value);
            return;
        case Op::kAddRowVec: {
            require(B->rows() == 1 && B->cols() == A->cols(),
                    "add_rowvec: bias must be [1 x cols]");
            n.value = *A;
            for (int r = 0; r < A->rows(); ++r)
                for (int c = 0; c < A->cols(); ++c) n.value.at(r, c) += B->at(0, c);
            return;
        }
        case Op::kAdd:
        case Op::kSub:
        case Op::kMul: {
            require(A->same_shape(*B), std::string(op_name(n.op)) + ": shape mismatch " +
                                           A->shape_str() + " vs " + B->shape_str());
            n.value = *A;
            const std::size_t len = A->size();
            if (n.op == Op::kAdd)
                for (std::size_t i = 0; i < len; ++i) n.value[i] += (*B)[i];
            else if (n.op == Op::kSub)
                for (std::size_t i = 0; i < len; ++i) n.value[i] -= (*B)[i];
            else
                for (std::size_t i = 0; i < len; ++i) n.value[i] *= (*B)[i];
            return;
        }
        case Op::kScale: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= n.attr;
            return;
        }
        case Op::kAddConst: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += n.attr;
            return;
        }
        case Op::kNeg: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = -n.value[i];
            return;
        }
        case Op::kOneMinus: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = 1.0 - n.value[i];
            return;
        }
        case Op::kRecip: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = 1.0 / n.value[i];
            return;
        }
        case Op::kLeakyRelu: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i) {
                if (n.value[i] < 0.0) n.value[i] *= n.attr;
            }
            return;
        }
        case Op::kLeakyReluMask: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i) {
                n.value[i] = n.value[i] >= 0.0 ? 1.0 : n.attr;
            }
            return;
        }
        case Op::kSoftmaxRow: {
            n.value = *A;
            for (int r = 0; r < n.value.rows(); ++r) {
                double mx = n.value.at(r, 0);
                for (int c = 1; c < n.value.cols(); ++c) mx = std::max(mx, n.value.at(r, c));
                double sum = 0.0;
                for (int c = 0; c < n.value.cols(); ++c) {
                    double e = std::exp(n.value.at(r, c) - mx);
                    n.value.at(r, c) = e;
                    sum += e;
                }
                for (int c = 0; c < n.value.cols(); ++c) n.value.at(r, c) /= sum;
            }
            return;
        }
        case Op::kSigmoid: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i) {
                const double x = n.value[i];
                n.value[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                      : std::exp(x) / (1.0 + std::exp(x));
            }
            return;
        }
        case Op::kLog: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::log(n.value[i]);
            return;
        }
        case Op::kClampMin: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i)
                n.value[i] = std::max(n.value[i], n.attr);
            return;
        }
        case Op::kSquare: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= n.value[i];
            return;
        }
        case Op::kSqrt: {
            n.value = *A;
            for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::sqrt(n.value[i]);
            return;
        }
        case Op::kRowSum: {
            n.value = Tensor(A->rows(), 1);
            for (int r = 0; r < A->rows(); ++r) {
                double s = 0.0;
                for (int c = 0; c < A->cols(); ++c) s += A->at(r, c);
                n.value.at(r, 0) = s;
            }
            return;
        }
        case Op::kColSum: {
            n.value = Tensor(1, A->cols());
            for (int r = 0; r < A->rows(); ++r)
                for (int c = 0; c < A->cols(); ++c) n.value.at(0, c) += A->at(r, c);
            return;
        }
        case Op::kSumAll:
        case Op::kMean: {
            double s = 0.0;
            for (std::size_t i = 0; i < A->size(); ++i) s += (*A)[i];
            if (n.op == Op::kMean) {
                require(A->size() > 0, "mean of empty tensor");
                s /= static_cast<double>(A->size());
            }
            n.value = Tensor::scalar(s);
            return;
        }
        case Op::kBroadcastCol: {
            const int cols = static_cast<int>(n.attr);
            n.value = Tensor(A->rows(), cols);
            for (int r = 0; r < A->rows(); ++r)
                for (int c = 0; c < cols; ++c) n.value.at(r, c) = A->at(r, 0);
            return;
        }
        case Op::kBroadcastRow: {
            const int rows = static_cast<int>(n.attr);
            n.value = Tensor(rows, A->cols());
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < A->cols(); ++c) n.value.at(r, c) = A->at(0, c);
            return;
        }
        case Op::kBroadcastFull: {
            n.value = Tensor::full(n.labels[0], n.labels[1], A->at(0, 0));
            return;
        }
        case Op::kPickClass: {
            n.value = Tensor(A->rows(), 1);
            for (int r = 0; r < A->rows(); ++r) n.value.at(r, 0) = A->at(r, n.labels[r]);
            return;
        }
    }
    throw ContractError("tape: unknown op");
}

void Tape::backward(NodeId loss) {
    ADVOS_CHECK_ID(loss);
    const Tensor& lv = nodes_[loss].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ContractError("backward: loss node must be scalar, got " + lv.shape_str());
    }
    grads_.assign(nodes_.size(), Tensor());
    has_grad_.assign(nodes_.size(), 0);
    grads_[loss] = Tensor::scalar(1.0);
    has_grad_[loss] = 1;
    for (NodeId id = loss; id >= 0; --id) {
        if (!has_grad_[id] || !nodes_[id].needs_grad) continue;
        backward_into(nodes_[id], id);
    }
}

namespace {
// Ensures a gradient buffer exists with the right shape before accumulation.
struct GradSlot {
    Tensor& g;
    bool fresh;
};
}  // namespace

void Tape::backward_into(const Node& n, NodeId id) {
    const Tensor& g = grads_[id];
    auto slot = [&](NodeId pid) -> Tensor& {
        if (!has_grad_[pid]) {
            grads_[pid] = Tensor(nodes_[pid].value.rows(), nodes_[pid].value.cols());
            has_grad_[pid] = 1;
        }
        return grads_[pid];
    };
    auto wants = [&](NodeId pid) { return pid >= 0 && nodes_[pid].needs_grad; };

    switch (n.op) {
        case Op::kLeaf:
            return;
        case Op::kMatmul: {
            if (wants(n.a)) ::advos::matmul_nt(g, nodes_[n.b].value, slot(n.a), true);
            if (wants(n.b)) ::advos::matmul_tn(nodes_[n.a].value, g, slot(n.b), true);
            return;
        }
        case Op::kMatmulNT: {  // C = A @ B^T
            if (wants(n.a)) ::advos::matmul_nn(g, nodes_[n.b].value, slot(n.a), true);
            if (wants(n.b)) ::advos::matmul_tn(g, nodes_[n.a].value, slot(n.b), true);
            return;
        }
        case Op::kMatmulTN: {  // C = A^T @ B
            if (wants(n.a)) ::advos::matmul_nt(nodes_[n.b].value, g, slot(n.a), true);
            if (wants(n.b)) ::advos::matmul_nn(nodes_[n.a].value, g, slot(n.b), true);
            return;
        }
        case Op::kAddRowVec: {
            if (wants(n.a)) {
                Tensor& da = slot(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
            }
            if (wants(n.b)) {
                Tensor& db = slot(n.b);
                for (int r = 0; r < g.rows(); ++r)
                    for (int c = 0; c < g.cols(); ++c) db.at(0, c) += g.at(r, c);
            }
            return;
        }
        case Op::kAdd: {
            for (NodeId p : {n.a, n.b}) {
                if (!wants(p)) continue;
                Tensor& d = slot(p);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
            }
            return;
        }
        case Op::kSub: {
            if (wants(n.a)) {
                Tensor& da = slot(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
            }
            if (wants(n.b)) {
                Tensor& db = slot(n.b);
                for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
            }
            return;
        }
        case Op::kMul: {
            if (wants(n.a)) {
                Tensor& da = slot(n.a);
                const Tensor& bv = nodes_[n.b].value;
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
            }
            if (wants(n.b)) {
                Tensor& db = slot(n.b);
                const Tensor& av = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
            }
            return;
        }
        case Op::kScale: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * n.attr;
            return;
        }
        case Op::kAddConst: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
            return;
        }
        case Op::kNeg:
        case Op::kOneMinus: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            for (std::size_t i = 0; i < g.size(); ++i) da[i] -= g[i];
            return;
        }
        case Op::kRecip: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            const Tensor& y = n.value;
            for (std::size_t i = 0; i < g.size(); ++i) da[i] -= g[i] * y[i] * y[i];
            return;
        }
        case Op::kLeakyRelu: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < g.size(); ++i) {
                da[i] += g[i] * (x[i] >= 0.0 ? 1.0 : n.attr);
            }
            return;
        }
        case Op::kLeakyReluMask:
            // Piecewise constant: zero derivative almost everywhere.
            return;
        case Op::kSoftmaxRow: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            const Tensor& y = n.value;
            for (int r = 0; r < y.rows(); ++r) {
                double dot = 0.0;
                for (int c = 0; c < y.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
                for (int c = 0; c < y.cols(); ++c)
                    da.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
            }
            return;
        }
        case Op::kSigmoid: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            const Tensor& y = n.value;
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i] * (1.0 - y[i]);
            return;
        }
        case Op::kLog: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] / x[i];
            return;
        }
        case Op::kClampMin: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (x[i] > n.attr) da[i] += g[i];
            }
            return;
        }
        case Op::kSquare: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += 2.0 * x[i] * g[i];
            return;
        }
        case Op::kSqrt: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            const Tensor& y = n.value;
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += 0.5 * g[i] / y[i];
            return;
        }
        case Op::kRowSum: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            for (int r = 0; r < da.rows(); ++r)
                for (int c = 0; c < da.cols(); ++c) da.at(r, c) += g.at(r, 0);
            return;
        }
        case Op::kColSum: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            for (int r = 0; r < da.rows(); ++r)
                for (int c = 0; c < da.cols(); ++c) da.at(r, c) += g.at(0, c);
            return;
        }
        case Op::kSumAll: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            const double gv = g.at(0, 0);
            for (std::size_t i = 0; i < da.size(); ++i) da[i] += gv;
            return;
        }
        case Op::kMean: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            const double gv = g.at(0, 0) / static_cast<double>(da.size());
            for (std::size_t i = 0; i < da.size(); ++i) da[i] += gv;
            return;
        }
        case Op::kBroadcastCol: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            for (int r = 0; r < g.rows(); ++r)
                for (int c = 0; c < g.cols(); ++c) da.at(r, 0) += g.at(r, c);
            return;
        }
        case Op::kBroadcastRow: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            for (int r = 0; r < g.rows(); ++r)
                for (int c = 0; c < g.cols(); ++c) da.at(0, c) += g.at(r, c);
            return;
        }
        case Op::kBroadcastFull: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) s += g[i];
            da.at(0, 0) += s;
            return;
        }
        case Op::kPickClass: {
            if (!wants(n.a)) return;
            Tensor& da = slot(n.a);
            for (int r = 0; r < g.rows(); ++r) da.at(r, n.labels[r]) += g.at(r, 0);
            return;
        }
    }
}

const Tensor& Tape::grad(NodeId id) {
    ADVOS_CHECK_ID(id);
    if (grads_.size() != nodes_.size()) {
        throw ContractError("grad() before backward()");
    }
    if (!has_grad_[id]) {
        grads_[id] = Tensor(nodes_[id].value.rows(), nodes_[id].value.cols());
        has_grad_[id] = 1;
    }
    return grads_[id];
}

NodeId Tape::input_gradient(NodeId output, NodeId input) {
    ADVOS_CHECK_ID(output);
    ADVOS_CHECK_ID(input);
    if (nodes_[output].value.cols() != 1) {
        throw ContractError("input_gradient: output must be scalar per row, got " +
                            nodes_[output].value.shape_str());
    }
    // Nodes that consume `input` (directly or transitively), up to `output`.
    std::vector<char> from_input(static_cast<std::size_t>(output) + 1, 0);
    from_input[input] = 1;
    for (NodeId id = input + 1; id <= output; ++id) {
        const Node& n = nodes_[id];
        if ((n.a >= 0 && n.a <= output && from_input[n.a]) ||
            (n.b >= 0 && n.b <= output && from_input[n.b])) {
            from_input[id] = 1;
        }
    }
    const Tensor& in_v = nodes_[input].value;
    if (!from_input[output]) {
        // Output does not depend on input; the gradient is identically zero.
        return leaf(Tensor(in_v.rows(), in_v.cols()), false);
    }

    // Recorded adjoints, seeded with ones at the output.
    std::vector<NodeId> adj(static_cast<std::size_t>(output) + 1, -1);
    adj[output] = leaf(Tensor::full(nodes_[output].value.rows(), 1, 1.0), false);

    auto accumulate = [&](NodeId target, NodeId contribution) {
        if (adj[target] < 0)
            adj[target] = contribution;
        else
            adj[target] = add(adj[target], contribution);
    };

    for (NodeId id = output; id >= input; --id) {
        if (!from_input[id] || adj[id] < 0 || id == input) continue;
        const Node n = nodes_[id];  // copy: push() may reallocate nodes_
        const NodeId g = adj[id];
        switch (n.op) {
            case Op::kMatmul:
                if (from_input[n.a]) accumulate(n.a, matmul_nt(g, n.b));
                if (n.b <= output && from_input[n.b]) accumulate(n.b, matmul_tn(n.a, g));
                break;
            case Op::kMatmulNT:
                if (from_input[n.a]) accumulate(n.a, matmul(g, n.b));
                if (n.b <= output && from_input[n.b]) accumulate(n.b, matmul_tn(g, n.a));
                break;
            case Op::kMatmulTN:
                if (from_input[n.a]) accumulate(n.a, matmul_nt(n.b, g));
                if (n.b <= output && from_input[n.b]) accumulate(n.b, matmul(n.a, g));
                break;
            case Op::kAddRowVec:
                if (from_input[n.a]) accumulate(n.a, g);
                if (n.b <= output && from_input[n.b]) accumulate(n.b, col_sum(g));
                break;
            case Op::kAdd:
                if (from_input[n.a]) accumulate(n.a, g);
                if (n.b <= output && from_input[n.b]) accumulate(n.b, g);
                break;
            case Op::kSub:
                if (from_input[n.a]) accumulate(n.a, g);
                if (n.b <= output && from_input[n.b]) accumulate(n.b, neg(g));
                break;
            case Op::kMul:
                if (from_input[n.a]) accumulate(n.a, mul(g, n.b));
                if (n.b <= output && from_input[n.b]) accumulate(n.b, mul(g, n.a));
                break;
            case Op::kScale:
                accumulate(n.a, scale(g, n.attr));
                break;
            case Op::kAddConst:
                accumulate(n.a, g);
                break;
            case Op::kNeg:
            case Op::kOneMinus:
                accumulate(n.a, neg(g));
                break;
            case Op::kLeakyRelu:
                accumulate(n.a, mul(g, leaky_relu_mask(n.a, n.attr)));
                break;
            case Op::kLeakyReluMask:
                // Zero derivative almost everywhere: contributes nothing.
                break;
            case Op::kSquare:
                accumulate(n.a, scale(mul(g, n.a), 2.0));
                break;
            case Op::kSqrt:
                accumulate(n.a, scale(mul(g, recip(id)), 0.5));
                break;
            case Op::kRowSum:
                accumulate(n.a, broadcast_col(g, nodes_[n.a].value.cols()));
                break;
            case Op::kColSum:
                accumulate(n.a, broadcast_row(g, nodes_[n.a].value.rows()));
                break;
            case Op::kSumAll:
                accumulate(n.a, broadcast_full(g, nodes_[n.a].value.rows(),
                                               nodes_[n.a].value.cols()));
                break;
            case Op::kMean: {
                const auto& av = nodes_[n.a].value;
                accumulate(n.a, scale(broadcast_full(g, av.rows(), av.cols()),
                                      1.0 / static_cast<double>(av.size())));
                break;
            }
            default:
                throw UnsupportedOpError(std::string("input_gradient: no second-order rule for op ") +
                                         op_name(n.op));
        }
    }
    if (adj[input] < 0) {
        return leaf(Tensor(in_v.rows(), in_v.cols()), false);
    }
    return adj[input];
}

bool Tape::replay() {
    for (auto& n : nodes_) {
        if (n.op == Op::kLeaf) continue;
        Tensor cached = n.value;
        compute_value(n);
        if (cached.rows() != n.value.rows() || cached.cols() != n.value.cols()) return false;
        for (std::size_t i = 0; i < cached.size(); ++i) {
            // Bitwise comparison, not numeric: replay must be exact.
            if (std::memcmp(&cached[i], &n.value[i], sizeof(double)) != 0) return false;
        }
    }
    return true;
}

}  // namespace advos
