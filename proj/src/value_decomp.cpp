#include "vgm2p/value_decomp.hpp"

#include <cmath>

#include "vgm2p/rng.hpp"

namespace vgm2p {

namespace {

Tensor concat_obs_action(const Tensor& obs, const Tensor& actions) {
    if (obs.shape[0] != actions.shape[0]) throw DimensionError("q_values: obs/action row counts differ");
    Tensor input = Tensor::zeros({obs.shape[0], obs.shape[1] + actions.shape[1]});
    for (std::size_t i = 0; i < obs.shape[0]; ++i) {
        std::size_t col = 0;
        for (std::size_t j = 0; j < obs.shape[1]; ++j) input.at(i, col++) = obs.at(i, j);
        for (std::size_t j = 0; j < actions.shape[1]; ++j) input.at(i, col++) = actions.at(i, j);
    }
    return input;
}

// r + gamma * (1 - done) * sum_i Qbar_i(o'_i, a'_i), detached
Tensor bootstrap_target(const QEnsemble& q, const JointTransitionBatch& batch,
                        const std::vector<Tensor>& next_actions) {
    Tensor target = batch.reward;
    for (int agent = 0; agent < q.n_agents; ++agent) {
        const Tensor qn = q_values(q.target(agent), batch.next_obs[agent], next_actions[agent]);
        for (std::size_t i = 0; i < target.data.size(); ++i)
            target.data[i] += q.gamma * (1.0 - batch.done.data[i]) * qn.data[i];
    }
    return target;
}

void check_joint(const QEnsemble& q, const JointTransitionBatch& batch, const std::vector<Tensor>& next_actions) {
    if (batch.n_agents() != q.n_agents || static_cast<int>(next_actions.size()) != q.n_agents)
        throw std::invalid_argument("joint_td_loss: agent count mismatch");
}

}  // namespace

QEnsemble QEnsemble::make(int n_agents, int obs_dim, int action_dim, const std::vector<int>& hidden_dims,
                          Activation act, bool shared, double gamma, std::uint64_t seed) {
    if (n_agents < 1) throw std::invalid_argument("QEnsemble: need at least one agent");
    QEnsemble q;
    q.shared = shared;
    q.n_agents = n_agents;
    q.gamma = gamma;
    std::vector<int> dims;
    dims.push_back(obs_dim + action_dim);
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(1);
    const int count = shared ? 1 : n_agents;
    for (int i = 0; i < count; ++i) {
        q.q_nets.push_back(make_mlp(dims, act, splitmix64(seed + static_cast<std::uint64_t>(i))));
        q.target_nets.push_back(q.q_nets.back());
    }
    return q;
}

const MlpParams& QEnsemble::online(int agent) const {
    return q_nets[shared ? 0 : static_cast<std::size_t>(agent)];
}

const MlpParams& QEnsemble::target(int agent) const {
    return target_nets[shared ? 0 : static_cast<std::size_t>(agent)];
}

std::vector<Tensor*> QEnsemble::online_parameters() {
    std::vector<Tensor*> out;
    for (auto& net : q_nets) {
        auto ps = mlp_parameters(net);
        out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
}

std::vector<const Tensor*> QEnsemble::online_parameters() const {
    std::vector<const Tensor*> out;
    for (const auto& net : q_nets) {
        auto ps = mlp_parameters(net);
        out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
}

Tensor q_values(const MlpParams& q_net, const Tensor& obs, const Tensor& actions) {
    const Tensor out = mlp_forward(q_net, concat_obs_action(obs, actions));
    Tensor flat = Tensor::zeros({out.shape[0]});
    for (std::size_t i = 0; i < out.shape[0]; ++i) flat.data[i] = out.at(i, 0);
    return flat;
}

double joint_td_loss(const QEnsemble& q, const JointTransitionBatch& batch, const std::vector<Tensor>& next_actions) {
    check_joint(q, batch, next_actions);
    const Tensor target = bootstrap_target(q, batch, next_actions);
    Tensor q_tot = Tensor::zeros({batch.reward.shape[0]});
    for (int agent = 0; agent < q.n_agents; ++agent) {
        const Tensor qi = q_values(q.online(agent), batch.obs[agent], batch.actions[agent]);
        for (std::size_t i = 0; i < q_tot.data.size(); ++i) q_tot.data[i] += qi.data[i];
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < q_tot.data.size(); ++i) {
        const double resid = q_tot.data[i] - target.data[i];
        loss += resid * resid;
    }
    loss /= static_cast<double>(q_tot.data.size());
    if (!std::isfinite(loss)) throw NumericError("joint_td_loss: non-finite loss", loss);
    return loss;
}

LossValueGrad joint_td_loss_grad(const QEnsemble& q, const JointTransitionBatch& batch,
                                 const std::vector<Tensor>& next_actions) {
    check_joint(q, batch, next_actions);
    const Tensor target = bootstrap_target(q, batch, next_actions);

    ad::Tape tape;
    std::vector<std::vector<ad::Tape::NodeId>> lifted;
    for (const auto& net : q.q_nets) lifted.push_back(lift_mlp(tape, net));

    ad::Tape::NodeId q_tot = -1;
    for (int agent = 0; agent < q.n_agents; ++agent) {
        const std::size_t net_idx = q.shared ? 0 : static_cast<std::size_t>(agent);
        const ad::Tape::NodeId input =
            tape.constant(concat_obs_action(batch.obs[agent], batch.actions[agent]));
        const ad::Tape::NodeId qi = mlp_on_tape(tape, q.q_nets[net_idx], lifted[net_idx], input);
        q_tot = (q_tot < 0) ? qi : tape.add(q_tot, qi);
    }
    Tensor target_col = Tensor::zeros({target.shape[0], 1});
    for (std::size_t i = 0; i < target.shape[0]; ++i) target_col.at(i, 0) = target.data[i];
    const ad::Tape::NodeId resid = tape.sub(q_tot, tape.constant(std::move(target_col)));
    const ad::Tape::NodeId root =
        tape.scale(tape.sum_squares(resid), 1.0 / static_cast<double>(target.shape[0]));

    std::vector<ad::Tape::NodeId> wrt;
    for (const auto& ids : lifted) wrt.insert(wrt.end(), ids.begin(), ids.end());

    LossValueGrad out;
    out.loss = tape.scalar(root);
    if (!std::isfinite(out.loss)) throw NumericError("joint_td_loss: non-finite loss", out.loss);
    out.grads = tape.gradients(root, wrt);
    return out;
}

double independent_td_loss(const MlpParams& q_net, const MlpParams& target_net, const Tensor& obs,
                           const Tensor& actions, const Tensor& next_obs, const Tensor& next_actions,
                           const Tensor& reward, const Tensor& done, double gamma) {
    const Tensor qn = q_values(target_net, next_obs, next_actions);
    const Tensor qi = q_values(q_net, obs, actions);
    double loss = 0.0;
    for (std::size_t i = 0; i < qi.data.size(); ++i) {
        const double target = reward.data[i] + gamma * (1.0 - done.data[i]) * qn.data[i];
        const double resid = qi.data[i] - target;
        loss += resid * resid;
    }
    loss /= static_cast<double>(qi.data.size());
    if (!std::isfinite(loss)) throw NumericError("independent_td_loss: non-finite loss", loss);
    return loss;
}

LossValueGrad independent_td_loss_grad(const MlpParams& q_net, const MlpParams& target_net, const Tensor& obs,
                                       const Tensor& actions, const Tensor& next_obs, const Tensor& next_actions,
                                       const Tensor& reward, const Tensor& done, double gamma) {
    const Tensor qn = q_values(target_net, next_obs, next_actions);
    Tensor target_col = Tensor::zeros({reward.shape[0], 1});
    for (std::size_t i = 0; i < reward.shape[0]; ++i)
        target_col.at(i, 0) = reward.data[i] + gamma * (1.0 - done.data[i]) * qn.data[i];

    return loss_grad(q_net, [&](ad::Tape& tape, const std::vector<ad::Tape::NodeId>& params) {
        const ad::Tape::NodeId input = tape.constant(concat_obs_action(obs, actions));
        const ad::Tape::NodeId qi = mlp_on_tape(tape, q_net, params, input);
        const ad::Tape::NodeId resid = tape.sub(qi, tape.constant(target_col));
        return tape.scale(tape.sum_squares(resid), 1.0 / static_cast<double>(reward.shape[0]));
    });
}

void target_update(QEnsemble& q, double tau) {
    if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("target_update: tau out of [0,1]");
    for (std::size_t n = 0; n < q.q_nets.size(); ++n) {
        auto online = mlp_parameters(q.q_nets[n]);
        auto target = mlp_parameters(q.target_nets[n]);
        for (std::size_t i = 0; i < online.size(); ++i)
            for (std::size_t j = 0; j < online[i]->data.size(); ++j)
                target[i]->data[j] = tau * online[i]->data[j] + (1.0 - tau) * target[i]->data[j];
    }
}

Tensor advantage(const QEnsemble& q, int agent, const Tensor& obs, const Tensor& a_dataset, const Tensor& a_policy) {
    const Tensor q_data = q_values(q.online(agent), obs, a_dataset);
    const Tensor q_policy = q_values(q.online(agent), obs, a_policy);
    return sub(q_data, q_policy);
}

}  // namespace vgm2p
