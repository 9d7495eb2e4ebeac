#pragma once

#include <vector>

#include "vgm2p/mlp.hpp"
#include "vgm2p/tensor.hpp"

namespace vgm2p {

// Adam moments for a fixed list of parameter tensors.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long step_count = 0;
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam(const std::vector<const Tensor*>& params, double lr);

// Standard bias-corrected Adam update, in place. `grads` mirrors `params`.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state);

// Convenience overload over a whole net's parameter list.
void adam_step(MlpParams& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace vgm2p
