#include "vgm2p/tape.hpp"

#include <cmath>

namespace vgm2p::ad {

Tape::NodeId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

void Tape::check(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) throw DimensionError("tape: bad node id");
}

Tape::NodeId Tape::constant(Tensor value) {
    return push({Op::Const, std::move(value), {}, {}, 0.0, false});
}

Tape::NodeId Tape::leaf(Tensor value) {
    return push({Op::Leaf, std::move(value), {}, {}, 0.0, true});
}

const Tensor& Tape::value(NodeId id) const {
    check(id);
    return nodes_[id].value;
}

double Tape::scalar(NodeId id) const {
    const Tensor& v = value(id);
    if (v.numel() != 1) throw DimensionError("tape: scalar() on tensor " + v.shape_str());
    return v.data[0];
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    check(a);
    check(b);
    Node n{Op::MatMul, vgm2p::matmul(nodes_[a].value, nodes_[b].value), {a, b}, {}, 0.0,
           nodes_[a].needs_grad || nodes_[b].needs_grad};
    return push(std::move(n));
}

Tape::NodeId Tape::add_bias(NodeId x, NodeId bias) {
    check(x);
    check(bias);
    Node n{Op::AddBias, vgm2p::add_bias(nodes_[x].value, nodes_[bias].value), {x, bias}, {}, 0.0,
           nodes_[x].needs_grad || nodes_[bias].needs_grad};
    return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    check(a);
    check(b);
    Node n{Op::Add, vgm2p::add(nodes_[a].value, nodes_[b].value), {a, b}, {}, 0.0,
           nodes_[a].needs_grad || nodes_[b].needs_grad};
    return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    check(a);
    check(b);
    Node n{Op::Sub, vgm2p::sub(nodes_[a].value, nodes_[b].value), {a, b}, {}, 0.0,
           nodes_[a].needs_grad || nodes_[b].needs_grad};
    return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    check(a);
    check(b);
    Node n{Op::Mul, vgm2p::hadamard(nodes_[a].value, nodes_[b].value), {a, b}, {}, 0.0,
           nodes_[a].needs_grad || nodes_[b].needs_grad};
    return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId x, double s) {
    check(x);
    Node n{Op::Scale, vgm2p::scale(nodes_[x].value, s), {x}, {}, s, nodes_[x].needs_grad};
    return push(std::move(n));
}

Tape::NodeId Tape::tanh(NodeId x) {
    check(x);
    Tensor y = nodes_[x].value;
    for (double& v : y.data) v = std::tanh(v);
    Node n{Op::Tanh, std::move(y), {x}, {}, 0.0, nodes_[x].needs_grad};
    return push(std::move(n));
}

Tape::NodeId Tape::relu(NodeId x) {
    check(x);
    Tensor y = nodes_[x].value;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    Node n{Op::Relu, std::move(y), {x}, {}, 0.0, nodes_[x].needs_grad};
    return push(std::move(n));
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw DimensionError("tape: concat_cols with no parts");
    std::size_t rows = 0, cols = 0;
    bool needs = false;
    for (NodeId p : parts) {
        check(p);
        const Tensor& t = nodes_[p].value;
        if (t.rank() != 2) throw DimensionError("tape: concat_cols expects rank-2, got " + t.shape_str());
        if (rows == 0)
            rows = t.shape[0];
        else if (t.shape[0] != rows)
            throw DimensionError("tape: concat_cols row mismatch");
        cols += t.shape[1];
        needs = needs || nodes_[p].needs_grad;
    }
    Tensor out = Tensor::zeros({rows, cols});
    std::size_t offset = 0;
    for (NodeId p : parts) {
        const Tensor& t = nodes_[p].value;
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < t.shape[1]; ++j) out.at(i, offset + j) = t.at(i, j);
        offset += t.shape[1];
    }
    Node n{Op::ConcatCols, std::move(out), parts, {}, 0.0, needs};
    return push(std::move(n));
}

Tape::NodeId Tape::gather_rows(NodeId table, std::vector<int> indices) {
    check(table);
    const Tensor& t = nodes_[table].value;
    if (t.rank() != 2) throw DimensionError("tape: gather_rows expects rank-2 table");
    Tensor out = Tensor::zeros({indices.size(), t.shape[1]});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int r = indices[i];
        if (r < 0 || static_cast<std::size_t>(r) >= t.shape[0])
            throw DimensionError("tape: gather_rows index out of range");
        for (std::size_t j = 0; j < t.shape[1]; ++j) out.at(i, j) = t.at(static_cast<std::size_t>(r), j);
    }
    Node n{Op::GatherRows, std::move(out), {table}, std::move(indices), 0.0, nodes_[table].needs_grad};
    return push(std::move(n));
}

Tape::NodeId Tape::sum_squares(NodeId x) {
    check(x);
    Tensor out = Tensor::zeros({1});
    out.data[0] = vgm2p::sum_squares(nodes_[x].value);
    Node n{Op::SumSquares, std::move(out), {x}, {}, 0.0, nodes_[x].needs_grad};
    return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId x) {
    check(x);
    Tensor out = Tensor::zeros({1});
    double acc = 0.0;
    for (double v : nodes_[x].value.data) acc += v;
    out.data[0] = acc;
    Node n{Op::Sum, std::move(out), {x}, {}, 0.0, nodes_[x].needs_grad};
    return push(std::move(n));
}

std::vector<Tensor> Tape::gradients(NodeId root, const std::vector<NodeId>& wrt) const {
    check(root);
    if (nodes_[root].value.numel() != 1) throw DimensionError("tape: gradients() root must be scalar");

    std::vector<Tensor> grad(nodes_.size());
    std::vector<char> has_grad(nodes_.size(), 0);
    auto accum = [&](NodeId id, std::size_t flat_index, double v) {
        if (!nodes_[id].needs_grad) return;
        if (!has_grad[id]) {
            grad[id] = Tensor::zeros(nodes_[id].value.shape);
            has_grad[id] = 1;
        }
        grad[id].data[flat_index] += v;
    };

    if (nodes_[root].needs_grad) {
        grad[root] = Tensor::filled({1}, 1.0);
        has_grad[root] = 1;
    }

    for (NodeId id = root; id >= 0; --id) {
        if (!has_grad[id] || !nodes_[id].needs_grad) continue;
        const Node& node = nodes_[id];
        const Tensor& g = grad[id];
        switch (node.op) {
            case Op::Leaf:
            case Op::Const:
                break;
            case Op::MatMul: {
                const NodeId a = node.parents[0], b = node.parents[1];
                if (nodes_[a].needs_grad) {
                    Tensor da = matmul_a_bt(g, nodes_[b].value);
                    for (std::size_t i = 0; i < da.data.size(); ++i) accum(a, i, da.data[i]);
                }
                if (nodes_[b].needs_grad) {
                    Tensor db = matmul_at_b(nodes_[a].value, g);
                    for (std::size_t i = 0; i < db.data.size(); ++i) accum(b, i, db.data[i]);
                }
                break;
            }
            case Op::AddBias: {
                const NodeId x = node.parents[0], b = node.parents[1];
                if (nodes_[x].needs_grad)
                    for (std::size_t i = 0; i < g.data.size(); ++i) accum(x, i, g.data[i]);
                if (nodes_[b].needs_grad) {
                    Tensor db = col_sums(g);
                    for (std::size_t i = 0; i < db.data.size(); ++i) accum(b, i, db.data[i]);
                }
                break;
            }
            case Op::Add:
                for (int side = 0; side < 2; ++side)
                    if (nodes_[node.parents[side]].needs_grad)
                        for (std::size_t i = 0; i < g.data.size(); ++i) accum(node.parents[side], i, g.data[i]);
                break;
            case Op::Sub: {
                if (nodes_[node.parents[0]].needs_grad)
                    for (std::size_t i = 0; i < g.data.size(); ++i) accum(node.parents[0], i, g.data[i]);
                if (nodes_[node.parents[1]].needs_grad)
                    for (std::size_t i = 0; i < g.data.size(); ++i) accum(node.parents[1], i, -g.data[i]);
                break;
            }
            case Op::Mul: {
                const NodeId a = node.parents[0], b = node.parents[1];
                if (nodes_[a].needs_grad)
                    for (std::size_t i = 0; i < g.data.size(); ++i) accum(a, i, g.data[i] * nodes_[b].value.data[i]);
                if (nodes_[b].needs_grad)
                    for (std::size_t i = 0; i < g.data.size(); ++i) accum(b, i, g.data[i] * nodes_[a].value.data[i]);
                break;
            }
            case Op::Scale:
                if (nodes_[node.parents[0]].needs_grad)
                    for (std::size_t i = 0; i < g.data.size(); ++i) accum(node.parents[0], i, g.data[i] * node.factor);
                break;
            case Op::Tanh: {
                const NodeId x = node.parents[0];
                if (nodes_[x].needs_grad)
                    for (std::size_t i = 0; i < g.data.size(); ++i) {
                        const double y = node.value.data[i];
                        accum(x, i, g.data[i] * (1.0 - y * y));
                    }
                break;
            }
            case Op::Relu: {
                const NodeId x = node.parents[0];
                if (nodes_[x].needs_grad)
                    for (std::size_t i = 0; i < g.data.size(); ++i)
                        accum(x, i, nodes_[x].value.data[i] > 0.0 ? g.data[i] : 0.0);
                break;
            }
            case Op::ConcatCols: {
                std::size_t offset = 0;
                const std::size_t rows = node.value.shape[0], total = node.value.shape[1];
                for (NodeId p : node.parents) {
                    const std::size_t w = nodes_[p].value.shape[1];
                    if (nodes_[p].needs_grad)
                        for (std::size_t i = 0; i < rows; ++i)
                            for (std::size_t j = 0; j < w; ++j) accum(p, i * w + j, g.data[i * total + offset + j]);
                    offset += w;
                }
                break;
            }
            case Op::GatherRows: {
                const NodeId t = node.parents[0];
                if (nodes_[t].needs_grad) {
                    const std::size_t w = node.value.shape[1];
                    for (std::size_t i = 0; i < node.indices.size(); ++i) {
                        const std::size_t r = static_cast<std::size_t>(node.indices[i]);
                        for (std::size_t j = 0; j < w; ++j) accum(t, r * w + j, g.data[i * w + j]);
                    }
                }
                break;
            }
            case Op::SumSquares: {
                const NodeId x = node.parents[0];
                if (nodes_[x].needs_grad) {
                    const double gs = g.data[0];
                    for (std::size_t i = 0; i < nodes_[x].value.data.size(); ++i)
                        accum(x, i, 2.0 * gs * nodes_[x].value.data[i]);
                }
                break;
            }
            case Op::Sum: {
                const NodeId x = node.parents[0];
                if (nodes_[x].needs_grad) {
                    const double gs = g.data[0];
                    for (std::size_t i = 0; i < nodes_[x].value.data.size(); ++i) accum(x, i, gs);
                }
                break;
            }
        }
    }

    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (NodeId id : wrt) {
        check(id);
        out.push_back(has_grad[id] ? grad[id] : Tensor::zeros(nodes_[id].value.shape));
    }
    return out;
}

}  // namespace vgm2p::ad
