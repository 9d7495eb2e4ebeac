#include "vgm2p/mlp.hpp"

#include <cmath>

#include "vgm2p/rng.hpp"

namespace vgm2p {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + name);
}

int MlpParams::input_dim() const {
    if (layers.empty()) throw DimensionError("mlp: no layers");
    return static_cast<int>(layers.front().weight.shape[0]);
}

int MlpParams::output_dim() const {
    if (layers.empty()) throw DimensionError("mlp: no layers");
    return static_cast<int>(layers.back().weight.shape[1]);
}

MlpParams make_mlp(const std::vector<int>& dims, Activation hidden_act, std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output dims");
    MlpParams p;
    p.seed = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t fan_in = static_cast<std::size_t>(dims[l]);
        const std::size_t fan_out = static_cast<std::size_t>(dims[l + 1]);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        MlpParams::Layer layer;
        layer.weight = rng.uniform_tensor({fan_in, fan_out}, -bound, bound);
        layer.bias = Tensor::zeros({fan_out});
        layer.act = (l + 2 < dims.size()) ? hidden_act : Activation::Identity;
        p.layers.push_back(std::move(layer));
    }
    return p;
}

std::vector<Tensor*> mlp_parameters(MlpParams& p) {
    std::vector<Tensor*> out;
    for (auto& layer : p.layers) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    return out;
}

std::vector<const Tensor*> mlp_parameters(const MlpParams& p) {
    std::vector<const Tensor*> out;
    for (const auto& layer : p.layers) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    return out;
}

namespace {

void check_input(const MlpParams& p, const Tensor& input) {
    if (input.rank() != 2)
        throw DimensionError("mlp: input must be rank-2, got " + input.shape_str());
    if (static_cast<int>(input.shape[1]) != p.input_dim())
        throw DimensionError("mlp: layer 0 expects input width " + std::to_string(p.input_dim()) + ", got " +
                             std::to_string(input.shape[1]));
}

Tensor apply_activation(Tensor x, Activation act) {
    switch (act) {
        case Activation::Tanh:
            for (double& v : x.data) v = std::tanh(v);
            break;
        case Activation::Relu:
            for (double& v : x.data) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::Identity:
            break;
    }
    return x;
}

}  // namespace

Tensor mlp_forward(const MlpParams& p, const Tensor& input) {
    check_input(p, input);
    Tensor x = input;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        if (x.shape[1] != layer.weight.shape[0])
            throw DimensionError("mlp: layer " + std::to_string(l) + " expects width " +
                                 std::to_string(layer.weight.shape[0]) + ", got " + std::to_string(x.shape[1]));
        x = apply_activation(add_bias(matmul(x, layer.weight), layer.bias), layer.act);
    }
    return x;
}

DualTensor mlp_jvp(const MlpParams& p, const DualTensor& input) {
    check_input(p, input.primal);
    Tensor x = input.primal;
    Tensor dx = input.tangent;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        if (x.shape[1] != layer.weight.shape[0])
            throw DimensionError("mlp: layer " + std::to_string(l) + " expects width " +
                                 std::to_string(layer.weight.shape[0]) + ", got " + std::to_string(x.shape[1]));
        Tensor z = add_bias(matmul(x, layer.weight), layer.bias);
        Tensor dz = matmul(dx, layer.weight);
        switch (layer.act) {
            case Activation::Tanh:
                for (std::size_t i = 0; i < z.data.size(); ++i) {
                    const double y = std::tanh(z.data[i]);
                    dz.data[i] *= 1.0 - y * y;
                    z.data[i] = y;
                }
                break;
            case Activation::Relu:
                for (std::size_t i = 0; i < z.data.size(); ++i) {
                    if (z.data[i] <= 0.0) {
                        z.data[i] = 0.0;
                        dz.data[i] = 0.0;
                    }
                }
                break;
            case Activation::Identity:
                break;
        }
        x = std::move(z);
        dx = std::move(dz);
    }
    return DualTensor(std::move(x), std::move(dx));
}

std::vector<ad::Tape::NodeId> lift_mlp(ad::Tape& tape, const MlpParams& p) {
    std::vector<ad::Tape::NodeId> ids;
    for (const auto& layer : p.layers) {
        ids.push_back(tape.leaf(layer.weight));
        ids.push_back(tape.leaf(layer.bias));
    }
    return ids;
}

ad::Tape::NodeId mlp_on_tape(ad::Tape& tape, const MlpParams& p, const std::vector<ad::Tape::NodeId>& param_ids,
                             ad::Tape::NodeId input) {
    if (param_ids.size() != 2 * p.layers.size()) throw DimensionError("mlp_on_tape: parameter id count mismatch");
    ad::Tape::NodeId x = input;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        x = tape.add_bias(tape.matmul(x, param_ids[2 * l]), param_ids[2 * l + 1]);
        switch (p.layers[l].act) {
            case Activation::Tanh: x = tape.tanh(x); break;
            case Activation::Relu: x = tape.relu(x); break;
            case Activation::Identity: break;
        }
    }
    return x;
}

LossValueGrad loss_grad(const MlpParams& p,
                        const std::function<ad::Tape::NodeId(ad::Tape&, const std::vector<ad::Tape::NodeId>&)>& build) {
    ad::Tape tape;
    std::vector<ad::Tape::NodeId> param_ids = lift_mlp(tape, p);
    const ad::Tape::NodeId root = build(tape, param_ids);
    LossValueGrad out;
    out.loss = tape.scalar(root);
    if (!std::isfinite(out.loss)) throw NumericError("loss_grad: non-finite loss", out.loss);
    out.grads = tape.gradients(root, param_ids);
    return out;
}

}  // namespace vgm2p
