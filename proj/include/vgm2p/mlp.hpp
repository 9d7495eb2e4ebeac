#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vgm2p/tape.hpp"
#include "vgm2p/tensor.hpp"

namespace vgm2p {

enum class Activation { Tanh, Relu, Identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully connected network. Weights are stored [in, out] so the forward
// pass is a plain x*W + b per layer; hidden layers share one activation,
// the output layer is linear. Initialization is uniform in
// +-sqrt(6/(fan_in+fan_out)), biases zero, fully determined by `seed`.
struct MlpParams {
    struct Layer {
        Tensor weight;  // [in, out]
        Tensor bias;    // [out]
        Activation act = Activation::Identity;
    };
    std::vector<Layer> layers;
    std::uint64_t seed = 0;

    int input_dim() const;
    int output_dim() const;
};

MlpParams make_mlp(const std::vector<int>& dims, Activation hidden_act, std::uint64_t seed);

// Parameter tensors in fixed order: W0, b0, W1, b1, ...
std::vector<Tensor*> mlp_parameters(MlpParams& p);
std::vector<const Tensor*> mlp_parameters(const MlpParams& p);

Tensor mlp_forward(const MlpParams& p, const Tensor& input);          // [B,in] -> [B,out]
DualTensor mlp_jvp(const MlpParams& p, const DualTensor& input);

// Tape integration. lift_mlp creates leaves for every parameter tensor in
// mlp_parameters order; mlp_on_tape replays the forward pass through them.
std::vector<ad::Tape::NodeId> lift_mlp(ad::Tape& tape, const MlpParams& p);
ad::Tape::NodeId mlp_on_tape(ad::Tape& tape, const MlpParams& p, const std::vector<ad::Tape::NodeId>& param_ids,
                             ad::Tape::NodeId input);

struct LossValueGrad {
    double loss = 0.0;
    std::vector<Tensor> grads;  // mirrors the parameter list used to build the loss
};

// Reverse-mode gradient of a scalar loss built on a tape over the net's
// parameters. `build` receives the tape and the parameter leaf ids (in
// mlp_parameters order) and returns the scalar loss node. Throws
// NumericError if the loss is non-finite.
LossValueGrad loss_grad(const MlpParams& p,
                        const std::function<ad::Tape::NodeId(ad::Tape&, const std::vector<ad::Tape::NodeId>&)>& build);

}  // namespace vgm2p
