#include "vgm2p/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace vgm2p {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Tensor vstack(const std::vector<Tensor>& parts) {
    std::size_t rows = 0;
    const std::size_t cols = parts[0].shape[1];
    for (const auto& t : parts) rows += t.shape[0];
    Tensor out = Tensor::zeros({rows, cols});
    std::size_t offset = 0;
    for (const auto& t : parts) {
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += t.data.size();
    }
    return out;
}

Tensor row_tensor(const Observation& obs) {
    Tensor t = Tensor::zeros({1, obs.size()});
    for (std::size_t j = 0; j < obs.size(); ++j) t.at(0, j) = obs[j];
    return t;
}

InputLayout layout_for(const std::string& method, int obs_dim, int action_dim, int embed_dim) {
    InputLayout lay;
    lay.action_dim = action_dim;
    lay.obs_dim = obs_dim;
    lay.embed_dim = embed_dim;
    if (method == "vgm2p") {
        lay.has_r = true;
        lay.has_cond = true;
    } else if (method == "bc-mf") {
        lay.has_r = true;
        lay.has_cond = false;
    } else if (method == "bc-fm") {
        lay.has_r = false;
        lay.has_cond = false;
    } else {
        throw std::invalid_argument("unknown method '" + method + "'");
    }
    return lay;
}

}  // namespace

void TrainConfig::validate() const {
    if (method != "vgm2p" && method != "bc-fm" && method != "bc-mf")
        throw std::invalid_argument("config: unknown method '" + method + "'");
    if (lr < 0.0) throw std::invalid_argument("config: lr must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (gradient_steps < 0) throw std::invalid_argument("config: gradient_steps must be >= 0");
    if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("config: gamma must lie in [0,1)");
    if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("config: tau must lie in [0,1]");
    if (r_equals_k_fraction < 0.0 || r_equals_k_fraction > 1.0)
        throw std::invalid_argument("config: r_equals_k_fraction must lie in [0,1]");
    if (hidden_dims.empty()) throw std::invalid_argument("config: hidden_dims must not be empty");
    if (embed_dim < 1) throw std::invalid_argument("config: embed_dim must be >= 1");
    if (eval_every < 1 || eval_episodes < 1) throw std::invalid_argument("config: eval cadence must be >= 1");
    if (fm_sample_steps < 1) throw std::invalid_argument("config: fm_sample_steps must be >= 1");
}

std::vector<int> condition_label(const Tensor& advantages) {
    ensure_finite(advantages, "condition_label: advantages");
    std::vector<int> c(advantages.data.size());
    for (std::size_t i = 0; i < advantages.data.size(); ++i) c[i] = advantages.data[i] >= 0.0 ? 1 : 0;
    return c;
}

TrainState make_train_state(const TrainConfig& cfg, int n_agents, int obs_dim, int action_dim,
                            bool /*discrete_actions*/) {
    cfg.validate();
    TrainState state;
    state.cfg = cfg;
    state.rng = Rng(cfg.seed).fork(0x7EA1);

    const InputLayout lay = layout_for(cfg.method, obs_dim, action_dim, cfg.embed_dim);
    state.policies.shared = cfg.share_parameters;
    state.policies.n_agents = n_agents;
    state.policies.sample_steps = (cfg.method == "bc-fm") ? cfg.fm_sample_steps : 1;
    const int n_policy_nets = cfg.share_parameters ? 1 : n_agents;
    for (int i = 0; i < n_policy_nets; ++i) {
        state.policies.nets.push_back(AvgVelocityNet::make(
            lay, cfg.hidden_dims, cfg.activation, splitmix64(cfg.seed ^ (0xP0LICY & 0x0ULL) ^ 0xA5A5ULL) + static_cast<std::uint64_t>(i)));
        state.policy_opt.push_back(make_adam(
            std::vector<const Tensor*>(state.policies.nets.back().parameters().begin(),
                                       state.policies.nets.back().parameters().end()),
            cfg.lr));
    }

    if (cfg.method == "vgm2p") {
        state.q = QEnsemble::make(n_agents, obs_dim, action_dim, cfg.hidden_dims, cfg.activation,
                                  cfg.share_parameters, cfg.gamma, splitmix64(cfg.seed ^ 0xQQ));
        for (auto& net : state.q.q_nets)
            state.q_opt.push_back(make_adam(
                std::vector<const Tensor*>(mlp_parameters(net).begin(), mlp_parameters(net).end()), cfg.lr));
    }
    return state;
}

StepLosses train_step(TrainState& state, const JointTransitionBatch& batch) {
    const TrainConfig& cfg = state.cfg;
    if (cfg.method != "vgm2p") throw std::invalid_argument("train_step: state was built for " + cfg.method);
    if (batch.n_agents() != state.policies.n_agents) throw std::invalid_argument("train_step: agent count mismatch");
    StepLosses losses;

    // --- value update: bootstrap actions from the current one-step policies, c = 1
    const double q_start = now_ms();
    std::vector<Tensor> next_actions;
    for (int i = 0; i < batch.n_agents(); ++i)
        next_actions.push_back(sample_one_step(state.policies.agent(i), batch.next_obs[static_cast<std::size_t>(i)],
                                               1, state.rng));

    if (!cfg.independent_q) {
        LossValueGrad lg = joint_td_loss_grad(state.q, batch, next_actions);
        losses.q_loss = lg.loss;
        if (state.q.shared) {
            adam_step(mlp_parameters(state.q.q_nets[0]), lg.grads, state.q_opt[0]);
        } else {
            const std::size_t per_net = lg.grads.size() / state.q.q_nets.size();
            for (std::size_t n = 0; n < state.q.q_nets.size(); ++n) {
                std::vector<Tensor> slice(lg.grads.begin() + static_cast<std::ptrdiff_t>(n * per_net),
                                          lg.grads.begin() + static_cast<std::ptrdiff_t>((n + 1) * per_net));
                adam_step(mlp_parameters(state.q.q_nets[n]), slice, state.q_opt[n]);
            }
        }
    } else {
        // ablation: every agent fits the full team reward on its own
        double total = 0.0;
        std::vector<std::vector<Tensor>> accumulated(state.q.q_nets.size());
        for (int i = 0; i < batch.n_agents(); ++i) {
            const std::size_t net_idx = state.q.shared ? 0 : static_cast<std::size_t>(i);
            LossValueGrad lg = independent_td_loss_grad(
                state.q.q_nets[net_idx], state.q.target_nets[net_idx], batch.obs[static_cast<std::size_t>(i)],
                batch.actions[static_cast<std::size_t>(i)], batch.next_obs[static_cast<std::size_t>(i)],
                next_actions[static_cast<std::size_t>(i)], batch.reward, batch.done, state.q.gamma);
            total += lg.loss;
            auto& acc = accumulated[net_idx];
            if (acc.empty())
                acc = std::move(lg.grads);
            else
                for (std::size_t g = 0; g < acc.size(); ++g) acc[g] = add(acc[g], lg.grads[g]);
        }
        losses.q_loss = total / batch.n_agents();
        for (std::size_t n = 0; n < state.q.q_nets.size(); ++n)
            if (!accumulated[n].empty()) adam_step(mlp_parameters(state.q.q_nets[n]), accumulated[n], state.q_opt[n]);
    }
    target_update(state.q, cfg.tau);
    losses.wall_ms_q = now_ms() - q_start;

    // --- condition labels from the freshly updated critic
    const double policy_start = now_ms();
    std::vector<std::vector<int>> labels;
    for (int i = 0; i < batch.n_agents(); ++i) {
        const Tensor policy_actions =
            sample_one_step(state.policies.agent(i), batch.obs[static_cast<std::size_t>(i)], 1, state.rng);
        const Tensor adv = advantage(state.q, i, batch.obs[static_cast<std::size_t>(i)],
                                     batch.actions[static_cast<std::size_t>(i)], policy_actions);
        labels.push_back(condition_label(adv));
    }

    // --- guided policy update
    if (state.policies.shared) {
        std::vector<int> all_labels;
        for (const auto& l : labels) all_labels.insert(all_labels.end(), l.begin(), l.end());
        const FlowBatch flow =
            make_flow_batch(vstack(batch.obs), vstack(batch.actions), all_labels, state.rng, cfg.r_equals_k_fraction);
        LossValueGrad lg = vgmp_loss_grad(state.policies.nets[0], flow, cfg.omega);
        losses.policy_loss = lg.loss;
        adam_step(state.policies.nets[0].parameters(), lg.grads, state.policy_opt[0]);
    } else {
        double total = 0.0;
        for (int i = 0; i < batch.n_agents(); ++i) {
            const FlowBatch flow =
                make_flow_batch(batch.obs[static_cast<std::size_t>(i)], batch.actions[static_cast<std::size_t>(i)],
                                labels[static_cast<std::size_t>(i)], state.rng, cfg.r_equals_k_fraction);
            LossValueGrad lg = vgmp_loss_grad(state.policies.nets[static_cast<std::size_t>(i)], flow, cfg.omega);
            total += lg.loss;
            adam_step(state.policies.nets[static_cast<std::size_t>(i)].parameters(), lg.grads,
                      state.policy_opt[static_cast<std::size_t>(i)]);
        }
        losses.policy_loss = total / batch.n_agents();
    }
    losses.wall_ms_policy = now_ms() - policy_start;
    return losses;
}

StepLosses train_step_bc(TrainState& state, const JointTransitionBatch& batch) {
    const TrainConfig& cfg = state.cfg;
    StepLosses losses;
    const double start = now_ms();
    auto update_net = [&](AvgVelocityNet& net, AdamState& opt, const Tensor& obs, const Tensor& actions) {
        const FlowBatch flow = make_flow_batch(obs, actions, {}, state.rng, cfg.r_equals_k_fraction);
        LossValueGrad lg = (cfg.method == "bc-fm") ? fm_loss_grad(net, flow) : mf_loss_grad(net, flow);
        adam_step(net.parameters(), lg.grads, opt);
        return lg.loss;
    };
    if (state.policies.shared) {
        losses.policy_loss = update_net(state.policies.nets[0], state.policy_opt[0], vstack(batch.obs),
                                        vstack(batch.actions));
    } else {
        double total = 0.0;
        for (int i = 0; i < batch.n_agents(); ++i)
            total += update_net(state.policies.nets[static_cast<std::size_t>(i)],
                                state.policy_opt[static_cast<std::size_t>(i)], batch.obs[static_cast<std::size_t>(i)],
                                batch.actions[static_cast<std::size_t>(i)]);
        losses.policy_loss = total / batch.n_agents();
    }
    losses.wall_ms_policy = now_ms() - start;
    return losses;
}

JointAction execute(const PolicyEnsemble& policies, const JointObservation& obs, const ActionSpace& space, Rng& rng) {
    if (static_cast<int>(obs.size()) != policies.n_agents)
        throw std::invalid_argument("execute: one observation per agent required");
    JointAction action;
    for (int i = 0; i < policies.n_agents; ++i) {
        const Tensor o = row_tensor(obs[static_cast<std::size_t>(i)]);
        const AvgVelocityNet& net = policies.agent(i);
        const Tensor a = policies.sample_steps == 1 ? sample_one_step(net, o, 1, rng)
                                                    : sample_multi_step(net, o, 1, policies.sample_steps, rng);
        if (space.discrete) {
            std::vector<double> row(a.data.begin(), a.data.end());
            action.index.push_back(argmax_index(row));
        } else {
            action.vec.push_back(std::vector<double>(a.data.begin(), a.data.end()));
        }
    }
    return action;
}

JointAction FlowPolicyActor::act(const JointObservation& obs, Rng& rng) const {
    return execute(*policies_, obs, space_, rng);
}

EvalStats evaluate(const Actor& actor, const Env& env, int n_episodes, Rng& rng) {
    if (n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be >= 1");
    std::unique_ptr<Env> rollout = env.clone();
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(n_episodes));
    for (int e = 0; e < n_episodes; ++e) {
        JointObservation obs = rollout->reset(rng);
        double total = 0.0;
        bool done = false;
        while (!done) {
            const StepResult result = rollout->step(actor.act(obs, rng), rng);
            total += result.reward;
            obs = result.obs;
            done = result.done;
        }
        returns.push_back(total);
    }
    EvalStats stats;
    stats.episodes = n_episodes;
    for (double r : returns) stats.mean += r;
    stats.mean /= n_episodes;
    if (n_episodes > 1) {
        double acc = 0.0;
        for (double r : returns) acc += (r - stats.mean) * (r - stats.mean);
        stats.stddev = std::sqrt(acc / (n_episodes - 1));
    }
    return stats;
}

EvalStats evaluate(const PolicyEnsemble& policies, const Env& env, int n_episodes, Rng& rng) {
    FlowPolicyActor actor(policies, env.action_space());
    return evaluate(actor, env, n_episodes, rng);
}

JointTransitionBatch sample_batch(const OfflineDataset& dataset, int batch_size, Rng& rng) {
    if (dataset.size() == 0) throw std::invalid_argument("sample_batch: empty dataset");
    const std::size_t m = static_cast<std::size_t>(dataset.size());
    std::vector<std::size_t> rows(static_cast<std::size_t>(batch_size));
    for (auto& r : rows) r = static_cast<std::size_t>(rng.integer(m));

    JointTransitionBatch batch;
    const std::size_t b = rows.size();
    for (int i = 0; i < dataset.n_agents; ++i) {
        const Tensor& o = dataset.obs[static_cast<std::size_t>(i)];
        const Tensor& a = dataset.actions[static_cast<std::size_t>(i)];
        const Tensor& no = dataset.next_obs[static_cast<std::size_t>(i)];
        Tensor ob = Tensor::zeros({b, o.shape[1]});
        Tensor ab = Tensor::zeros({b, a.shape[1]});
        Tensor nb = Tensor::zeros({b, no.shape[1]});
        for (std::size_t r = 0; r < b; ++r) {
            for (std::size_t j = 0; j < o.shape[1]; ++j) ob.at(r, j) = o.at(rows[r], j);
            for (std::size_t j = 0; j < a.shape[1]; ++j) ab.at(r, j) = a.at(rows[r], j);
            for (std::size_t j = 0; j < no.shape[1]; ++j) nb.at(r, j) = no.at(rows[r], j);
        }
        batch.obs.push_back(std::move(ob));
        batch.actions.push_back(std::move(ab));
        batch.next_obs.push_back(std::move(nb));
    }
    batch.reward = Tensor::zeros({b});
    batch.done = Tensor::zeros({b});
    for (std::size_t r = 0; r < b; ++r) {
        batch.reward.data[r] = dataset.reward.data[rows[r]];
        batch.done.data[r] = dataset.done.data[rows[r]];
    }
    return batch;
}

TrainResult train(const OfflineDataset& dataset, const Env* eval_env, const TrainConfig& cfg) {
    cfg.validate();
    TrainResult result;
    result.state = make_train_state(cfg, dataset.n_agents, dataset.obs_dim, dataset.space.dim, dataset.space.discrete);
    TrainState& state = result.state;
    const Rng eval_base = Rng(cfg.seed).fork(0xE7A1);

    for (long s = 1; s <= cfg.gradient_steps; ++s) {
        const JointTransitionBatch batch = sample_batch(dataset, cfg.batch_size, state.rng);
        const StepLosses losses = (cfg.method == "vgm2p") ? train_step(state, batch) : train_step_bc(state, batch);

        TrainReportRow row;
        row.step = s;
        row.policy_loss = losses.policy_loss;
        row.q_loss = losses.q_loss;
        row.wall_ms_policy = losses.wall_ms_policy;
        row.wall_ms_q = losses.wall_ms_q;
        if (eval_env != nullptr && (s % cfg.eval_every == 0 || s == cfg.gradient_steps)) {
            Rng eval_rng = eval_base.fork(static_cast<std::uint64_t>(s));
            const EvalStats stats = evaluate(state.policies, *eval_env, cfg.eval_episodes, eval_rng);
            row.has_eval = true;
            row.eval_mean = stats.mean;
            row.eval_std = stats.stddev;
        }
        result.report.rows.push_back(row);
    }
    return result;
}

TrainResult train_bc_baseline(const std::string& mode, const OfflineDataset& dataset, const Env* eval_env,
                              TrainConfig cfg) {
    if (mode == "flow_matching")
        cfg.method = "bc-fm";
    else if (mode == "meanflow")
        cfg.method = "bc-mf";
    else
        throw std::invalid_argument("train_bc_baseline: mode must be flow_matching or meanflow");
    return train(dataset, eval_env, cfg);
}

void write_report_csv(const TrainReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "step,policy_loss,q_loss,eval_return_mean,eval_return_std,wall_ms_policy,wall_ms_q\n";
    for (const auto& row : report.rows) {
        out << row.step << "," << fmt_double(row.policy_loss) << "," << fmt_double(row.q_loss) << ",";
        if (row.has_eval) out << fmt_double(row.eval_mean) << "," << fmt_double(row.eval_std);
        else out << ",";
        out << "," << fmt_double(row.wall_ms_policy) << "," << fmt_double(row.wall_ms_q) << "\n";
    }
}

void write_losses_csv(const TrainReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "step,policy_loss,q_loss,eval_return_mean,eval_return_std\n";
    for (const auto& row : report.rows) {
        out << row.step << "," << fmt_double(row.policy_loss) << "," << fmt_double(row.q_loss) << ",";
        if (row.has_eval) out << fmt_double(row.eval_mean) << "," << fmt_double(row.eval_std);
        else out << ",";
        out << "\n";
    }
}

namespace {

std::map<std::string, std::string> policy_meta(const PolicyEnsemble& policies) {
    const InputLayout& lay = policies.nets[0].layout();
    return {
        {"kind", "policy"},
        {"n_agents", std::to_string(policies.n_agents)},
        {"shared", policies.shared ? "1" : "0"},
        {"sample_steps", std::to_string(policies.sample_steps)},
        {"action_dim", std::to_string(lay.action_dim)},
        {"obs_dim", std::to_string(lay.obs_dim)},
        {"has_r", lay.has_r ? "1" : "0"},
        {"has_cond", lay.has_cond ? "1" : "0"},
        {"embed_dim", std::to_string(lay.embed_dim)},
    };
}

}  // namespace

void save_policy_checkpoint(const std::string& path, const PolicyEnsemble& policies, std::uint64_t config_hash) {
    std::vector<CheckpointNetView> views;
    const auto meta = policy_meta(policies);
    for (std::size_t i = 0; i < policies.nets.size(); ++i) {
        CheckpointNetView view;
        view.name = "policy" + std::to_string(i);
        view.net = &policies.nets[i].net;
        view.embedding = policies.nets[i].layout().has_cond ? &policies.nets[i].cond_embed : nullptr;
        view.meta = meta;
        views.push_back(view);
    }
    save_checkpoint(path, views, config_hash);
}

PolicyEnsemble load_policy_checkpoint(const std::string& path) {
    const LoadedCheckpoint ckpt = load_checkpoint(path);
    if (ckpt.nets.empty()) throw std::runtime_error("policy checkpoint is empty: " + path);
    PolicyEnsemble policies;
    const auto& meta = ckpt.nets[0].meta;
    policies.n_agents = std::stoi(meta.at("n_agents"));
    policies.shared = meta.at("shared") == "1";
    policies.sample_steps = std::stoi(meta.at("sample_steps"));
    InputLayout lay;
    lay.action_dim = std::stoi(meta.at("action_dim"));
    lay.obs_dim = std::stoi(meta.at("obs_dim"));
    lay.has_r = meta.at("has_r") == "1";
    lay.has_cond = meta.at("has_cond") == "1";
    lay.embed_dim = std::stoi(meta.at("embed_dim"));
    for (const auto& loaded : ckpt.nets) {
        AvgVelocityNet net;
        net.net = loaded.net;
        net.cond_embed = loaded.embedding;
        net.set_layout(lay);
        policies.nets.push_back(std::move(net));
    }
    return policies;
}

void save_q_checkpoint(const std::string& path, const QEnsemble& q, std::uint64_t config_hash) {
    std::vector<CheckpointNetView> views;
    std::map<std::string, std::string> meta = {
        {"kind", "qvalue"},
        {"n_agents", std::to_string(q.n_agents)},
        {"shared", q.shared ? "1" : "0"},
        {"gamma", fmt_double(q.gamma)},
    };
    for (std::size_t i = 0; i < q.q_nets.size(); ++i) {
        views.push_back({"q" + std::to_string(i), &q.q_nets[i], nullptr, meta});
        views.push_back({"target" + std::to_string(i), &q.target_nets[i], nullptr, meta});
    }
    save_checkpoint(path, views, config_hash);
}

QEnsemble load_q_checkpoint(const std::string& path) {
    const LoadedCheckpoint ckpt = load_checkpoint(path);
    if (ckpt.nets.empty()) throw std::runtime_error("q checkpoint is empty: " + path);
    QEnsemble q;
    const auto& meta = ckpt.nets[0].meta;
    q.n_agents = std::stoi(meta.at("n_agents"));
    q.shared = meta.at("shared") == "1";
    q.gamma = std::stod(meta.at("gamma"));
    for (const auto& loaded : ckpt.nets) {
        if (loaded.name.rfind("target", 0) == 0)
            q.target_nets.push_back(loaded.net);
        else
            q.q_nets.push_back(loaded.net);
    }
    return q;
}

}  // namespace vgm2p
