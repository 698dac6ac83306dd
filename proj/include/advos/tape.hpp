#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advos/tensor.hpp"

namespace advos {

using NodeId = std::int32_t;

enum class Op : std::uint8_t {
    kLeaf,
    kMatmul,       // A @ B
    kMatmulNT,     // A @ B^T
    kMatmulTN,     // A^T @ B
    kAddRowVec,    // X + b (b broadcast over rows)
    kAdd,
    kSub,
    kMul,          // elementwise
    kScale,        // attr * X
    kAddConst,     // X + attr
    kNeg,
    kOneMinus,     // 1 - X
    kRecip,        // 1 / X
    kLeakyRelu,    // attr = negative slope
    kLeakyReluMask,// d/dx leaky_relu: 1 or attr (its own derivative is 0 a.e.)
    kSoftmaxRow,
    kSigmoid,
    kLog,
    kClampMin,     // max(X, attr)
    kSquare,
    kSqrt,
    kRowSum,       // [m,n] -> [m,1]
    kColSum,       // [m,n] -> [1,n]
    kSumAll,       // [m,n] -> [1,1]
    kMean,         // [m,n] -> [1,1]
    kBroadcastCol, // [m,1] -> [m,n] (attr = n)
    kBroadcastRow, // [1,n] -> [m,n] (attr = m)
    kBroadcastFull,// [1,1] -> [m,n] (attr packs m,n via labels[0],labels[1])
    kPickClass,    // probs[m,n], labels[m] -> [m,1]
};

const char* op_name(Op op);

// Reverse-mode computation graph. Nodes are appended in topological order
// (parents always precede children) and values are computed eagerly, so
// replay() can verify the cache bit-for-bit. backward() fills per-node
// gradient buffers; input_gradient() instead *records* the
// vector-Jacobian product as new tape nodes, which is what lets the
// gradient-penalty norm be differentiated with respect to parameters.
class Tape {
public:
    struct Node {
        Op op = Op::kLeaf;
        NodeId a = -1;
        NodeId b = -1;
        double attr = 0.0;
        std::vector<int> labels;  // kPickClass classes / broadcast dims
        Tensor value;
        bool needs_grad = false;
    };

    // When set, every op output is checked for NaN/Inf (numeric error state).
    bool check_finite = true;

    NodeId leaf(Tensor value, bool needs_grad = false);

    NodeId matmul(NodeId a, NodeId b);
    NodeId matmul_nt(NodeId a, NodeId b);
    NodeId matmul_tn(NodeId a, NodeId b);
    NodeId add_rowvec(NodeId x, NodeId bias);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId add_const(NodeId a, double c);
    NodeId neg(NodeId a);
    NodeId one_minus(NodeId a);
    NodeId recip(NodeId a);
    NodeId leaky_relu(NodeId a, double slope);
    NodeId leaky_relu_mask(NodeId a, double slope);
    NodeId softmax_row(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId log_(NodeId a);
    NodeId clamp_min(NodeId a, double floor);
    NodeId square(NodeId a);
    NodeId sqrt_(NodeId a);
    NodeId row_sum(NodeId a);
    NodeId col_sum(NodeId a);
    NodeId sum_all(NodeId a);
    NodeId mean_all(NodeId a);
    NodeId broadcast_col(NodeId a, int cols);
    NodeId broadcast_row(NodeId a, int rows);
    NodeId broadcast_full(NodeId a, int rows, int cols);
    NodeId pick_class(NodeId probs, std::vector<int> labels);

    const Tensor& value(NodeId id) const;
    const Node& node(NodeId id) const;
    std::size_t size() const { return nodes_.size(); }
    void clear();

    // Reverse sweep from a scalar loss node. Gradients accumulate for every
    // needs_grad node reachable from the loss; query them with grad().
    void backward(NodeId loss);

    // Gradient buffer for `id` after backward(); zeros if the node was not
    // reached by the sweep.
    const Tensor& grad(NodeId id);

    // Records d(sum of output rows)/d(input) as tape nodes and returns the
    // resulting [rows(input) x cols(input)] node. `output` must be scalar
    // per row ([m x 1]). Every op between input and output must have a
    // second-order rule; others raise UnsupportedOpError.
    NodeId input_gradient(NodeId output, NodeId input);

    // Recomputes every node value from the leaves in recorded order.
    // Returns true when all cached values are reproduced bit-for-bit.
    bool replay();

private:
    NodeId push(Node n);
    void compute_value(Node& n) const;
    void backward_into(const Node& n, NodeId id);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::vector<char> has_grad_;
};

}  // namespace advos
