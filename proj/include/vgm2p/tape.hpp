#pragma once

#include <vector>

#include "vgm2p/tensor.hpp"

namespace vgm2p::ad {

// Reverse-mode tape over the small set of tensor primitives the training
// losses need. Nodes are appended in evaluation order; gradients() walks
// the tape backwards from a scalar root. Forward values are computed with
// the same free functions as the plain evaluation paths, so a loss and its
// gradient pass see bit-identical arithmetic.
class Tape {
public:
    using NodeId = int;

    NodeId constant(Tensor value);  // no gradient tracked
    NodeId leaf(Tensor value);      // gradient tracked

    NodeId matmul(NodeId a, NodeId b);
    NodeId add_bias(NodeId x, NodeId bias);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId x, double s);
    NodeId tanh(NodeId x);
    NodeId relu(NodeId x);
    NodeId concat_cols(const std::vector<NodeId>& parts);        // [B,n_i] -> [B, sum n_i]
    NodeId gather_rows(NodeId table, std::vector<int> indices);  // [R,d] -> [B,d]
    NodeId sum_squares(NodeId x);                                // -> scalar [1]
    NodeId sum(NodeId x);                                        // -> scalar [1]

    const Tensor& value(NodeId id) const;
    double scalar(NodeId id) const;

    // d(root)/d(wrt) for a scalar root; non-reached leaves get zero tensors.
    std::vector<Tensor> gradients(NodeId root, const std::vector<NodeId>& wrt) const;

private:
    enum class Op {
        Leaf,
        Const,
        MatMul,
        AddBias,
        Add,
        Sub,
        Mul,
        Scale,
        Tanh,
        Relu,
        ConcatCols,
        GatherRows,
        SumSquares,
        Sum,
    };

    struct Node {
        Op op;
        Tensor value;
        std::vector<NodeId> parents;
        std::vector<int> indices;  // GatherRows
        double factor = 0.0;       // Scale
        bool needs_grad = false;
    };

    NodeId push(Node node);
    void check(NodeId id) const;

    std::vector<Node> nodes_;
};

}  // namespace vgm2p::ad
