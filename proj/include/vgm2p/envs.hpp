#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vgm2p/rng.hpp"
#include "vgm2p/tensor.hpp"

namespace vgm2p {

struct ActionSpace {
    bool discrete = true;
    int dim = 0;  // number of actions (discrete) or action-vector width (continuous)
};

using Observation = std::vector<double>;
using JointObservation = std::vector<Observation>;

// Per-agent actions: indices for discrete envs, vectors for continuous.
struct JointAction {
    std::vector<int> index;
    std::vector<std::vector<double>> vec;
};

struct StepResult {
    JointObservation obs;
    double reward = 0.0;
    bool done = false;
};

// Cooperative environment behind a minimal rollout interface; instances are
// value types, cloned per rollout worker.
class Env {
public:
    virtual ~Env() = default;
    virtual std::string name() const = 0;
    virtual int n_agents() const = 0;
    virtual int obs_dim() const = 0;
    virtual ActionSpace action_space() const = 0;
    virtual int horizon() const = 0;
    virtual JointObservation reset(Rng& rng) = 0;
    virtual StepResult step(const JointAction& action, Rng& rng) = 0;
    virtual std::unique_ptr<Env> clone() const = 0;
};

// Exact finite Dec-POMDP tables: deterministic per-agent observation of the
// state, tabular transitions over joint actions, team reward.
struct TabularSpec {
    std::string name;
    int n_agents = 0;
    int n_states = 0;
    std::vector<int> n_actions;                             // per agent
    std::vector<int> n_obs;                                 // per agent
    std::vector<std::vector<int>> obs_of_state;             // [agent][state] -> obs index
    std::vector<std::vector<std::vector<double>>> transition;  // [state][joint action][next state]
    std::vector<std::vector<double>> reward;                // [state][joint action]
    std::vector<double> initial;                            // rho0 over states
    std::vector<std::uint8_t> terminal;                     // per state
    double gamma = 0.95;
    int horizon = 1;

    int n_joint_actions() const;
    int joint_action_index(const std::vector<int>& per_agent) const;
    std::vector<int> split_joint_action(int joint) const;
    void validate() const;
};

class TabularEnv final : public Env {
public:
    explicit TabularEnv(TabularSpec spec);

    std::string name() const override { return spec_.name; }
    int n_agents() const override { return spec_.n_agents; }
    int obs_dim() const override { return spec_.n_obs[0]; }
    ActionSpace action_space() const override { return {true, spec_.n_actions[0]}; }
    int horizon() const override { return spec_.horizon; }
    JointObservation reset(Rng& rng) override;
    StepResult step(const JointAction& action, Rng& rng) override;
    std::unique_ptr<Env> clone() const override;

    const TabularSpec& spec() const { return spec_; }
    int state() const { return state_; }
    void set_state(int state);  // replay/verification helper

private:
    JointObservation observe() const;

    TabularSpec spec_;
    int state_ = 0;
    int t_ = 0;
};

// Continuous cooperative coverage task: agents move in the unit box, team
// reward is the negative sum over landmarks of the closest agent distance.
// Kinematics are deterministic; only reset() draws randomness.
class SpreadEnv final : public Env {
public:
    SpreadEnv(int n_agents, std::vector<std::array<double, 2>> landmarks, double dt, int horizon);

    std::string name() const override { return "spread"; }
    int n_agents() const override { return n_agents_; }
    int obs_dim() const override { return 2 + 2 * static_cast<int>(landmarks_.size()); }
    ActionSpace action_space() const override { return {false, 2}; }
    int horizon() const override { return horizon_; }
    JointObservation reset(Rng& rng) override;
    StepResult step(const JointAction& action, Rng& rng) override;
    std::unique_ptr<Env> clone() const override;

    const std::vector<std::array<double, 2>>& landmarks() const { return landmarks_; }
    const std::vector<std::array<double, 2>>& positions() const { return positions_; }
    void set_positions(std::vector<std::array<double, 2>> positions);  // replay helper
    double current_reward() const;

private:
    JointObservation observe() const;

    int n_agents_;
    std::vector<std::array<double, 2>> landmarks_;
    double dt_;
    int horizon_;
    std::vector<std::array<double, 2>> positions_;
    int t_ = 0;
};

// Behavior policies used for dataset generation and evaluation baselines.
class Actor {
public:
    virtual ~Actor() = default;
    virtual JointAction act(const JointObservation& obs, Rng& rng) const = 0;
};

class UniformActor final : public Actor {
public:
    UniformActor(int n_agents, ActionSpace space) : n_agents_(n_agents), space_(space) {}
    JointAction act(const JointObservation& obs, Rng& rng) const override;

private:
    int n_agents_;
    ActionSpace space_;
};

// Deterministic tabular expert: per agent, observation index -> action.
class TabularActor final : public Actor {
public:
    explicit TabularActor(std::vector<std::vector<int>> action_by_obs) : action_by_obs_(std::move(action_by_obs)) {}
    JointAction act(const JointObservation& obs, Rng& rng) const override;

private:
    std::vector<std::vector<int>> action_by_obs_;
};

// Per-agent, per-step epsilon mixing with a uniform action.
class EpsilonNoisyActor final : public Actor {
public:
    EpsilonNoisyActor(std::shared_ptr<const Actor> base, double epsilon, int n_agents, ActionSpace space)
        : base_(std::move(base)), epsilon_(epsilon), n_agents_(n_agents), space_(space) {}
    JointAction act(const JointObservation& obs, Rng& rng) const override;

private:
    std::shared_ptr<const Actor> base_;
    double epsilon_;
    int n_agents_;
    ActionSpace space_;
};

// Scripted spread expert: agent i drives straight at landmark i.
class SpreadExpertActor final : public Actor {
public:
    explicit SpreadExpertActor(double dt) : dt_(dt) {}
    JointAction act(const JointObservation& obs, Rng& rng) const override;

private:
    double dt_;
};

// Offline transitions, aligned across agents per row. Actions are stored as
// vectors (one-hot for discrete envs).
struct OfflineDataset {
    std::string env_name;
    std::string tier;
    std::uint64_t seed = 0;
    std::string behavior;
    int n_agents = 0;
    int obs_dim = 0;
    ActionSpace space;

    std::vector<Tensor> obs;       // per agent [M, obs_dim]
    std::vector<Tensor> actions;   // per agent [M, action width]
    std::vector<Tensor> next_obs;  // per agent [M, obs_dim]
    Tensor reward;                 // [M]
    Tensor done;                   // [M]
    std::vector<std::pair<int, int>> episodes;  // (start row, length)

    int size() const { return static_cast<int>(reward.shape[0]); }
    std::vector<double> episode_returns() const;
    double mean_episode_return() const;
};

// Rolls full episodes with the tier's behavior policy until at least
// n_transitions rows are stored. Tier `mixed` interleaves whole expert and
// uniform episodes (30/70); `medium` is a 0.4-noisy expert; `poor` is
// uniform. Deterministic given the seed.
OfflineDataset generate_offline_dataset(const Env& env, const Actor& expert, const std::string& tier,
                                        long n_transitions, std::uint64_t seed);

void save_dataset(const OfflineDataset& ds, const std::string& jsonl_path);
OfflineDataset load_dataset(const std::string& jsonl_path);

// Named desk-scale suite with scripted experts and documented optimal
// returns (exact DP for tabular tasks, measured expert reference for the
// continuous one).
struct ReferenceEnv {
    std::shared_ptr<Env> env;
    std::shared_ptr<Actor> expert;
    double optimal_return = 0.0;
    std::string description;
};

std::vector<std::string> reference_env_names();
ReferenceEnv make_reference_env(const std::string& name);
std::map<std::string, ReferenceEnv> make_reference_envs();

// Optimal undiscounted return over the episode horizon via dynamic
// programming on the joint action space.
double tabular_optimal_return(const TabularSpec& spec);

Observation one_hot(int index, int size);
int argmax_index(const std::vector<double>& values);  // lowest index on ties

}  // namespace vgm2p
