#pragma once

#include <cstdint>
#include <vector>

#include "vgm2p/adam.hpp"
#include "vgm2p/mlp.hpp"
#include "vgm2p/rng.hpp"
#include "vgm2p/tensor.hpp"

namespace vgm2p {

// Network input layout: concat(a_k, k, r, o, condition embedding).
// Flow-matching nets drop the r column; unconditional nets drop the
// embedding block.
struct InputLayout {
    int action_dim = 0;
    int obs_dim = 0;
    bool has_r = true;
    bool has_cond = true;
    int embed_dim = 8;

    int width() const { return action_dim + 1 + (has_r ? 1 : 0) + obs_dim + (has_cond ? embed_dim : 0); }
};

// One training batch for the flow losses: (o, a) rows from the dataset,
// fresh noise, flow times with r <= k, and binary condition labels.
struct FlowBatch {
    Tensor obs;      // [B, obs_dim]
    Tensor action;   // [B, action_dim]
    Tensor epsilon;  // [B, action_dim]
    Tensor k;        // [B]
    Tensor r;        // [B]
    std::vector<int> c;  // [B], values in {0,1}; may be empty for unconditional nets

    int size() const { return static_cast<int>(obs.shape[0]); }
};

// k and r are two uniforms swapped so r <= k; a `r_equals_k_fraction` share
// of rows is forced to r == k so the instantaneous field u(.,k,k|.) stays
// trained. Noise is standard normal. Draw order per row: (u_k, u_r,
// u_collapse), then all epsilon entries, so a seed pins the batch exactly.
FlowBatch make_flow_batch(const Tensor& obs, const Tensor& action, const std::vector<int>& c_labels, Rng& rng,
                          double r_equals_k_fraction);

Tensor interpolate_action(const Tensor& action, const Tensor& epsilon, const Tensor& k);  // (1-k)a + k*eps
Tensor sample_velocity(const Tensor& action, const Tensor& epsilon);                      // eps - a

// Average/instantaneous velocity field u(a_k, r, k | o, c). Abstract so
// analytic fields can stand in for a network in verification code.
class AvgVelocityModel {
public:
    virtual ~AvgVelocityModel() = default;
    virtual const InputLayout& layout() const = 0;
    // a_k [B,d], k [B], r [B], obs [B,p], c labels (ignored unless has_cond)
    virtual Tensor evaluate(const Tensor& a_k, const Tensor& k, const Tensor& r, const Tensor& obs,
                            const std::vector<int>& c) const = 0;
    // Forward-mode directional derivative along (da, dk, dr); returns
    // {u, du}. Observation and condition tangents are zero.
    virtual DualTensor evaluate_jvp(const Tensor& a_k, const Tensor& k, const Tensor& r, const Tensor& obs,
                                    const std::vector<int>& c, const Tensor& da, const Tensor& dk,
                                    const Tensor& dr) const = 0;
};

// MLP-backed field. The condition enters as a learned 2-row embedding
// appended to the input features.
class AvgVelocityNet final : public AvgVelocityModel {
public:
    MlpParams net;
    Tensor cond_embed;  // [2, embed_dim] when layout.has_cond

    static AvgVelocityNet make(const InputLayout& layout, const std::vector<int>& hidden_dims, Activation act,
                               std::uint64_t seed);

    const InputLayout& layout() const override { return layout_; }
    Tensor evaluate(const Tensor& a_k, const Tensor& k, const Tensor& r, const Tensor& obs,
                    const std::vector<int>& c) const override;
    DualTensor evaluate_jvp(const Tensor& a_k, const Tensor& k, const Tensor& r, const Tensor& obs,
                            const std::vector<int>& c, const Tensor& da, const Tensor& dk,
                            const Tensor& dr) const override;

    Tensor assemble_input(const Tensor& a_k, const Tensor& k, const Tensor& r, const Tensor& obs,
                          const std::vector<int>& c) const;

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

    void set_layout(InputLayout layout) { layout_ = layout; }  // checkpoint restore

private:
    InputLayout layout_;
};

// Flow-matching regression of the instantaneous field against eps - a.
// Requires the degenerate layout (no r column).
double fm_loss(const AvgVelocityModel& model, const FlowBatch& batch);

// MeanFlow regression target v_c - (k - r) * du/dk with du/dk taken along
// (da/dk = v_c, dk/dk = 1, dr/dk = 0). Detached: the returned tensor
// carries no dependence on the model parameters.
Tensor mf_target(const AvgVelocityModel& model, const FlowBatch& batch);
double mf_loss(const AvgVelocityModel& model, const FlowBatch& batch);

// Classifier-free guided field omega * (eps - a) + (1 - omega) * u(a_k, k,
// k | o, c = 1); the unconditional branch is the model itself at r = k
// with the condition forced to 1.
Tensor cfg_field(const AvgVelocityModel& model, const FlowBatch& batch, double omega);
Tensor vgmp_target(const AvgVelocityModel& model, const FlowBatch& batch, double omega);
double vgmp_loss(const AvgVelocityModel& model, const FlowBatch& batch, double omega);

// One-step sampling: a = a1 - u(a1, 0, 1 | o, c) with a1 ~ N(0, I).
Tensor sample_one_step(const AvgVelocityModel& model, const Tensor& obs, int c, Rng& rng);
// Euler walk over a uniform grid k: 1 -> 0; each step moves along the
// model field, which for flow-matching nets is the instantaneous velocity.
Tensor sample_multi_step(const AvgVelocityModel& model, const Tensor& obs, int c, int n_steps, Rng& rng);

// Reverse-mode training passes. Targets are computed detached first; the
// gradient covers the trunk weights plus the condition embedding, in
// AvgVelocityNet::parameters() order.
LossValueGrad fm_loss_grad(const AvgVelocityNet& net, const FlowBatch& batch);
LossValueGrad mf_loss_grad(const AvgVelocityNet& net, const FlowBatch& batch);
LossValueGrad vgmp_loss_grad(const AvgVelocityNet& net, const FlowBatch& batch, double omega);

}  // namespace vgm2p
