#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vgm2p/adam.hpp"
#include "vgm2p/envs.hpp"
#include "vgm2p/flow.hpp"
#include "vgm2p/value_decomp.hpp"

namespace vgm2p {

// Desk-scale defaults; the documented full-scale settings (4x512 hidden,
// 1e6 steps) are reachable through the same knobs.
struct TrainConfig {
    std::string method = "vgm2p";  // vgm2p | bc-fm | bc-mf
    double lambda_temp = 1.0;      // softmax temperature, consumed by the oracle checks only;
                                   // the trainer's thresholded condition labels replace it
    double omega = 5.0;            // guidance weight
    double gamma = 0.995;
    double lr = 3e-4;
    int batch_size = 64;
    long gradient_steps = 20000;
    std::vector<int> hidden_dims = {64, 64};
    double tau = 0.005;
    double r_equals_k_fraction = 0.25;
    std::uint64_t seed = 0;
    int embed_dim = 8;
    bool share_parameters = true;
    bool independent_q = false;  // ablation: per-agent TD instead of the joint residual
    int eval_every = 500;
    int eval_episodes = 10;
    int fm_sample_steps = 10;  // Euler steps when executing a flow-matching policy
    Activation activation = Activation::Tanh;

    void validate() const;
};

struct TrainReportRow {
    long step = 0;
    double policy_loss = 0.0;
    double q_loss = 0.0;
    bool has_eval = false;
    double eval_mean = 0.0;
    double eval_std = 0.0;
    double wall_ms_policy = 0.0;
    double wall_ms_q = 0.0;
};

struct TrainReport {
    std::vector<TrainReportRow> rows;
};

// Full schema including wall-clock columns.
void write_report_csv(const TrainReport& report, const std::string& path);
// Deterministic columns only; byte-identical across reruns of a seed.
void write_losses_csv(const TrainReport& report, const std::string& path);

// One conditional policy per agent, or a single shared one. sample_steps=1
// is one-step generation; larger values run the Euler walk (flow matching).
struct PolicyEnsemble {
    std::vector<AvgVelocityNet> nets;
    bool shared = true;
    int n_agents = 0;
    int sample_steps = 1;

    const AvgVelocityNet& agent(int i) const { return nets[shared ? 0 : static_cast<std::size_t>(i)]; }
    AvgVelocityNet& agent_mut(int i) { return nets[shared ? 0 : static_cast<std::size_t>(i)]; }
};

// c = 1 where the advantage is >= 0 (inclusive), else 0.
std::vector<int> condition_label(const Tensor& advantages);

struct StepLosses {
    double policy_loss = 0.0;
    double q_loss = 0.0;
};

// All mutable training state; owned by a single loop.
struct TrainState {
    TrainConfig cfg;
    PolicyEnsemble policies;
    QEnsemble q;  // untouched for the BC baselines
    std::vector<AdamState> policy_opt;
    std::vector<AdamState> q_opt;
    Rng rng;

    TrainState() : rng(0) {}
};

TrainState make_train_state(const TrainConfig& cfg, int n_agents, int obs_dim, int action_dim, bool discrete_actions);

// One centralized training step: refresh Q on the joint TD residual with
// next actions drawn from the current one-step policies (condition fixed to
// 1), Polyak-update the targets, label the batch by advantage sign, then
// update the conditional policies on the guided MeanFlow objective.
StepLosses train_step(TrainState& state, const JointTransitionBatch& batch);

// Unconditional behavior-cloning step for the bc-fm / bc-mf baselines.
StepLosses train_step_bc(TrainState& state, const JointTransitionBatch& batch);

// Decentralized execution: each agent draws its own noise and consumes only
// its local observation; condition fixed to 1.
JointAction execute(const PolicyEnsemble& policies, const JointObservation& obs, const ActionSpace& space, Rng& rng);

struct EvalStats {
    double mean = 0.0;
    double stddev = 0.0;
    int episodes = 0;
};

EvalStats evaluate(const Actor& actor, const Env& env, int n_episodes, Rng& rng);
EvalStats evaluate(const PolicyEnsemble& policies, const Env& env, int n_episodes, Rng& rng);

// Actor adapter running Algorithm-style decentralized execution.
class FlowPolicyActor final : public Actor {
public:
    FlowPolicyActor(const PolicyEnsemble& policies, ActionSpace space) : policies_(&policies), space_(space) {}
    JointAction act(const JointObservation& obs, Rng& rng) const override;

private:
    const PolicyEnsemble* policies_;
    ActionSpace space_;
};

struct TrainResult {
    TrainReport report;
    TrainState state;
};

// Full training loop over an offline dataset; evaluates on `eval_env`
// (when given) every cfg.eval_every steps and once more at the end.
TrainResult train(const OfflineDataset& dataset, const Env* eval_env, const TrainConfig& cfg);

// Unconditional generative behavior cloning; mode is "flow_matching" or
// "meanflow". Shares the training loop and evaluation protocol with the
// conditional method.
TrainResult train_bc_baseline(const std::string& mode, const OfflineDataset& dataset, const Env* eval_env,
                              TrainConfig cfg);

// Sample a joint batch of transitions uniformly with replacement.
JointTransitionBatch sample_batch(const OfflineDataset& dataset, int batch_size, Rng& rng);

// Checkpoint round-trip for policy/value ensembles.
void save_policy_checkpoint(const std::string& path, const PolicyEnsemble& policies, std::uint64_t config_hash);
PolicyEnsemble load_policy_checkpoint(const std::string& path);
void save_q_checkpoint(const std::string& path, const QEnsemble& q, std::uint64_t config_hash);
QEnsemble load_q_checkpoint(const std::string& path);

}  // namespace vgm2p
