#include "vgm2p/adam.hpp"

#include <cmath>

namespace vgm2p {

AdamState make_adam(const std::vector<const Tensor*>& params, double lr) {
    AdamState s;
    s.lr = lr;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor* p : params) {
        s.m.push_back(Tensor::zeros(p->shape));
        s.v.push_back(Tensor::zeros(p->shape));
    }
    return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw DimensionError("adam_step: parameter/gradient/state count mismatch");
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        if (!p.same_shape(g)) throw DimensionError("adam_step: gradient shape mismatch at tensor " + std::to_string(i));
        ensure_finite(g, "adam_step: gradient " + std::to_string(i));
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            m.data[j] = state.beta1 * m.data[j] + (1.0 - state.beta1) * g.data[j];
            v.data[j] = state.beta2 * v.data[j] + (1.0 - state.beta2) * g.data[j] * g.data[j];
            const double m_hat = m.data[j] / bc1;
            const double v_hat = v.data[j] / bc2;
            p.data[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

void adam_step(MlpParams& params, const std::vector<Tensor>& grads, AdamState& state) {
    adam_step(mlp_parameters(params), grads, state);
}

}  // namespace vgm2p
