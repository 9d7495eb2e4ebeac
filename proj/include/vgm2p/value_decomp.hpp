#pragma once

#include <cstdint>
#include <vector>

#include "vgm2p/mlp.hpp"
#include "vgm2p/tensor.hpp"

namespace vgm2p {

// Per-agent Q networks whose sum is the joint value. Parameter sharing
// keeps a single online/target pair used by every agent; otherwise each
// agent owns its own pair. Targets mirror the online nets and are only
// moved by target_update.
struct QEnsemble {
    std::vector<MlpParams> q_nets;       // size 1 when shared
    std::vector<MlpParams> target_nets;  // mirrors q_nets
    bool shared = true;
    int n_agents = 0;
    double gamma = 0.99;

    static QEnsemble make(int n_agents, int obs_dim, int action_dim, const std::vector<int>& hidden_dims,
                          Activation act, bool shared, double gamma, std::uint64_t seed);

    const MlpParams& online(int agent) const;
    const MlpParams& target(int agent) const;
    std::vector<Tensor*> online_parameters();
    std::vector<const Tensor*> online_parameters() const;
};

// Transitions aligned across agents per row; the reward is the team reward.
struct JointTransitionBatch {
    std::vector<Tensor> obs;       // per agent [B, obs_dim]
    std::vector<Tensor> actions;   // per agent [B, action_dim]
    std::vector<Tensor> next_obs;  // per agent [B, obs_dim]
    Tensor reward;                 // [B]
    Tensor done;                   // [B], 0/1

    int size() const { return static_cast<int>(reward.shape[0]); }
    int n_agents() const { return static_cast<int>(obs.size()); }
};

// Q_i(o_i, a_i) for one agent, flattened to [B].
Tensor q_values(const MlpParams& q_net, const Tensor& obs, const Tensor& actions);

// Mean squared joint TD residual: sum_i Q_i(o_i,a_i) vs
// r + gamma * (1 - done) * sum_i Qbar_i(o'_i, a'_i); the bootstrap side is
// detached (target nets, no gradient).
double joint_td_loss(const QEnsemble& q, const JointTransitionBatch& batch, const std::vector<Tensor>& next_actions);
LossValueGrad joint_td_loss_grad(const QEnsemble& q, const JointTransitionBatch& batch,
                                 const std::vector<Tensor>& next_actions);

// Single-agent TD residual used by the independent-training ablation.
double independent_td_loss(const MlpParams& q_net, const MlpParams& target_net, const Tensor& obs,
                           const Tensor& actions, const Tensor& next_obs, const Tensor& next_actions,
                           const Tensor& reward, const Tensor& done, double gamma);
LossValueGrad independent_td_loss_grad(const MlpParams& q_net, const MlpParams& target_net, const Tensor& obs,
                                       const Tensor& actions, const Tensor& next_obs, const Tensor& next_actions,
                                       const Tensor& reward, const Tensor& done, double gamma);

// Polyak move: target <- tau * online + (1 - tau) * target.
void target_update(QEnsemble& q, double tau);

// A_i = Q_i(o_i, a_dataset) - Q_i(o_i, a_policy), per row.
Tensor advantage(const QEnsemble& q, int agent, const Tensor& obs, const Tensor& a_dataset, const Tensor& a_policy);

}  // namespace vgm2p
