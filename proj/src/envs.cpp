#include "vgm2p/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace vgm2p {

using nlohmann::json;

Observation one_hot(int index, int size) {
    Observation v(static_cast<std::size_t>(size), 0.0);
    v[static_cast<std::size_t>(index)] = 1.0;
    return v;
}

int argmax_index(const std::vector<double>& values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i)
        if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
    return best;
}

int TabularSpec::n_joint_actions() const {
    int n = 1;
    for (int a : n_actions) n *= a;
    return n;
}

int TabularSpec::joint_action_index(const std::vector<int>& per_agent) const {
    if (static_cast<int>(per_agent.size()) != n_agents)
        throw std::invalid_argument("joint_action_index: wrong agent count");
    int idx = 0;
    for (int i = 0; i < n_agents; ++i) {
        const int a = per_agent[static_cast<std::size_t>(i)];
        if (a < 0 || a >= n_actions[static_cast<std::size_t>(i)])
            throw std::invalid_argument("joint_action_index: invalid action index " + std::to_string(a) +
                                        " for agent " + std::to_string(i));
        idx = idx * n_actions[static_cast<std::size_t>(i)] + a;
    }
    return idx;
}

std::vector<int> TabularSpec::split_joint_action(int joint) const {
    std::vector<int> out(static_cast<std::size_t>(n_agents));
    for (int i = n_agents - 1; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = joint % n_actions[static_cast<std::size_t>(i)];
        joint /= n_actions[static_cast<std::size_t>(i)];
    }
    return out;
}

void TabularSpec::validate() const {
    if (n_agents < 1 || n_states < 1) throw std::invalid_argument("tabular spec: empty");
    const int ja = n_joint_actions();
    if (static_cast<int>(transition.size()) != n_states || static_cast<int>(reward.size()) != n_states)
        throw std::invalid_argument("tabular spec: table size mismatch");
    for (int s = 0; s < n_states; ++s) {
        if (static_cast<int>(transition[s].size()) != ja || static_cast<int>(reward[s].size()) != ja)
            throw std::invalid_argument("tabular spec: row size mismatch at state " + std::to_string(s));
        for (int a = 0; a < ja; ++a) {
            double total = 0.0;
            for (double p : transition[s][a]) {
                if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("tabular spec: bad probability");
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw std::invalid_argument("tabular spec: transition row does not sum to 1 at state " +
                                            std::to_string(s));
            if (!std::isfinite(reward[s][a])) throw std::invalid_argument("tabular spec: non-finite reward");
        }
    }
    double mass = 0.0;
    for (double p : initial) mass += p;
    if (std::abs(mass - 1.0) > 1e-12) throw std::invalid_argument("tabular spec: initial distribution");
}

TabularEnv::TabularEnv(TabularSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
}

JointObservation TabularEnv::observe() const {
    JointObservation obs;
    obs.reserve(static_cast<std::size_t>(spec_.n_agents));
    for (int i = 0; i < spec_.n_agents; ++i)
        obs.push_back(one_hot(spec_.obs_of_state[static_cast<std::size_t>(i)][static_cast<std::size_t>(state_)],
                              spec_.n_obs[static_cast<std::size_t>(i)]));
    return obs;
}

JointObservation TabularEnv::reset(Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    state_ = spec_.n_states - 1;
    for (int s = 0; s < spec_.n_states; ++s) {
        acc += spec_.initial[static_cast<std::size_t>(s)];
        if (u < acc) {
            state_ = s;
            break;
        }
    }
    t_ = 0;
    return observe();
}

StepResult TabularEnv::step(const JointAction& action, Rng& rng) {
    const int ja = spec_.joint_action_index(action.index);
    const auto& row = spec_.transition[static_cast<std::size_t>(state_)][static_cast<std::size_t>(ja)];
    const double u = rng.uniform();
    double acc = 0.0;
    int next = spec_.n_states - 1;
    for (int s = 0; s < spec_.n_states; ++s) {
        acc += row[static_cast<std::size_t>(s)];
        if (u < acc) {
            next = s;
            break;
        }
    }
    StepResult result;
    result.reward = spec_.reward[static_cast<std::size_t>(state_)][static_cast<std::size_t>(ja)];
    state_ = next;
    t_ += 1;
    result.obs = observe();
    result.done = spec_.terminal[static_cast<std::size_t>(state_)] != 0 || t_ >= spec_.horizon;
    return result;
}

std::unique_ptr<Env> TabularEnv::clone() const {
    return std::make_unique<TabularEnv>(*this);
}

void TabularEnv::set_state(int state) {
    if (state < 0 || state >= spec_.n_states) throw std::invalid_argument("set_state: out of range");
    state_ = state;
    t_ = 0;
}

SpreadEnv::SpreadEnv(int n_agents, std::vector<std::array<double, 2>> landmarks, double dt, int horizon)
    : n_agents_(n_agents), landmarks_(std::move(landmarks)), dt_(dt), horizon_(horizon) {
    positions_.assign(static_cast<std::size_t>(n_agents_), {0.0, 0.0});
}

JointObservation SpreadEnv::observe() const {
    JointObservation obs;
    for (int i = 0; i < n_agents_; ++i) {
        Observation o;
        o.reserve(static_cast<std::size_t>(obs_dim()));
        const auto& p = positions_[static_cast<std::size_t>(i)];
        o.push_back(p[0]);
        o.push_back(p[1]);
        for (const auto& l : landmarks_) {
            o.push_back(l[0] - p[0]);
            o.push_back(l[1] - p[1]);
        }
        obs.push_back(std::move(o));
    }
    return obs;
}

double SpreadEnv::current_reward() const {
    double total = 0.0;
    for (const auto& l : landmarks_) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : positions_) {
            const double dx = l[0] - p[0], dy = l[1] - p[1];
            best = std::min(best, std::sqrt(dx * dx + dy * dy));
        }
        total += best;
    }
    return -total;
}

JointObservation SpreadEnv::reset(Rng& rng) {
    for (auto& p : positions_) {
        p[0] = -1.0 + 2.0 * rng.uniform();
        p[1] = -1.0 + 2.0 * rng.uniform();
    }
    t_ = 0;
    return observe();
}

StepResult SpreadEnv::step(const JointAction& action, Rng&) {
    if (static_cast<int>(action.vec.size()) != n_agents_)
        throw std::invalid_argument("spread: need one action vector per agent");
    for (int i = 0; i < n_agents_; ++i) {
        const auto& a = action.vec[static_cast<std::size_t>(i)];
        if (a.size() != 2) throw std::invalid_argument("spread: actions are 2-D velocities");
        auto& p = positions_[static_cast<std::size_t>(i)];
        for (int d = 0; d < 2; ++d) {
            const double v = std::clamp(a[static_cast<std::size_t>(d)], -1.0, 1.0);
            p[static_cast<std::size_t>(d)] =
                std::clamp(p[static_cast<std::size_t>(d)] + v * dt_, -1.0, 1.0);
        }
    }
    t_ += 1;
    StepResult result;
    result.reward = current_reward();
    result.obs = observe();
    result.done = t_ >= horizon_;
    return result;
}

std::unique_ptr<Env> SpreadEnv::clone() const {
    return std::make_unique<SpreadEnv>(*this);
}

void SpreadEnv::set_positions(std::vector<std::array<double, 2>> positions) {
    if (static_cast<int>(positions.size()) != n_agents_) throw std::invalid_argument("set_positions: wrong count");
    positions_ = std::move(positions);
    t_ = 0;
}

JointAction UniformActor::act(const JointObservation&, Rng& rng) const {
    JointAction action;
    if (space_.discrete) {
        for (int i = 0; i < n_agents_; ++i)
            action.index.push_back(static_cast<int>(rng.integer(static_cast<std::uint64_t>(space_.dim))));
    } else {
        for (int i = 0; i < n_agents_; ++i) {
            std::vector<double> a(static_cast<std::size_t>(space_.dim));
            for (double& v : a) v = -1.0 + 2.0 * rng.uniform();
            action.vec.push_back(std::move(a));
        }
    }
    return action;
}

JointAction TabularActor::act(const JointObservation& obs, Rng&) const {
    JointAction action;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const int obs_idx = argmax_index(obs[i]);
        action.index.push_back(action_by_obs_[i][static_cast<std::size_t>(obs_idx)]);
    }
    return action;
}

JointAction EpsilonNoisyActor::act(const JointObservation& obs, Rng& rng) const {
    JointAction action = base_->act(obs, rng);
    for (int i = 0; i < n_agents_; ++i) {
        if (rng.uniform() < epsilon_) {
            if (space_.discrete)
                action.index[static_cast<std::size_t>(i)] =
                    static_cast<int>(rng.integer(static_cast<std::uint64_t>(space_.dim)));
            else
                for (double& v : action.vec[static_cast<std::size_t>(i)]) v = -1.0 + 2.0 * rng.uniform();
        }
    }
    return action;
}

JointAction SpreadExpertActor::act(const JointObservation& obs, Rng&) const {
    JointAction action;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        // offset to landmark i sits at columns [2 + 2i, 2 + 2i + 1]
        const double dx = obs[i][2 + 2 * i];
        const double dy = obs[i][2 + 2 * i + 1];
        std::vector<double> a(2);
        a[0] = std::clamp(dx / dt_, -1.0, 1.0);
        a[1] = std::clamp(dy / dt_, -1.0, 1.0);
        action.vec.push_back(std::move(a));
    }
    return action;
}

std::vector<double> OfflineDataset::episode_returns() const {
    std::vector<double> out;
    out.reserve(episodes.size());
    for (const auto& [start, len] : episodes) {
        double total = 0.0;
        for (int i = 0; i < len; ++i) total += reward.data[static_cast<std::size_t>(start + i)];
        out.push_back(total);
    }
    return out;
}

double OfflineDataset::mean_episode_return() const {
    const auto returns = episode_returns();
    if (returns.empty()) return 0.0;
    double total = 0.0;
    for (double r : returns) total += r;
    return total / static_cast<double>(returns.size());
}

namespace {

std::vector<double> action_vector(const JointAction& action, int agent, const ActionSpace& space) {
    if (space.discrete) {
        std::vector<double> v(static_cast<std::size_t>(space.dim), 0.0);
        v[static_cast<std::size_t>(action.index[static_cast<std::size_t>(agent)])] = 1.0;
        return v;
    }
    return action.vec[static_cast<std::size_t>(agent)];
}

}  // namespace

OfflineDataset generate_offline_dataset(const Env& env, const Actor& expert, const std::string& tier,
                                        long n_transitions, std::uint64_t seed) {
    if (n_transitions <= 0) throw std::invalid_argument("generate_offline_dataset: n_transitions must be positive");
    if (tier != "expert" && tier != "medium" && tier != "poor" && tier != "mixed")
        throw std::invalid_argument("generate_offline_dataset: unknown tier '" + tier + "'");

    const ActionSpace space = env.action_space();
    UniformActor uniform(env.n_agents(), space);
    EpsilonNoisyActor medium(std::shared_ptr<const Actor>(&expert, [](const Actor*) {}), 0.4, env.n_agents(), space);

    OfflineDataset ds;
    ds.env_name = env.name();
    ds.tier = tier;
    ds.seed = seed;
    ds.n_agents = env.n_agents();
    ds.obs_dim = env.obs_dim();
    ds.space = space;
    if (tier == "expert")
        ds.behavior = "scripted expert";
    else if (tier == "medium")
        ds.behavior = "expert with 0.4 per-agent uniform noise";
    else if (tier == "poor")
        ds.behavior = "uniform random";
    else
        ds.behavior = "episode mixture: 0.30 expert / 0.70 uniform";

    std::vector<std::vector<std::vector<double>>> obs_rows(static_cast<std::size_t>(ds.n_agents));
    std::vector<std::vector<std::vector<double>>> act_rows(static_cast<std::size_t>(ds.n_agents));
    std::vector<std::vector<std::vector<double>>> next_rows(static_cast<std::size_t>(ds.n_agents));
    std::vector<double> rewards, dones;

    Rng rng(seed);
    std::unique_ptr<Env> rollout = env.clone();
    long rows = 0;
    while (rows < n_transitions) {
        const Actor* actor = &expert;
        if (tier == "poor")
            actor = &uniform;
        else if (tier == "medium")
            actor = &medium;
        else if (tier == "mixed")
            actor = (rng.uniform() < 0.30) ? static_cast<const Actor*>(&expert) : &uniform;

        const int start = static_cast<int>(rows);
        JointObservation obs = rollout->reset(rng);
        bool done = false;
        int len = 0;
        while (!done) {
            const JointAction action = actor->act(obs, rng);
            const StepResult result = rollout->step(action, rng);
            for (int i = 0; i < ds.n_agents; ++i) {
                obs_rows[static_cast<std::size_t>(i)].push_back(obs[static_cast<std::size_t>(i)]);
                act_rows[static_cast<std::size_t>(i)].push_back(action_vector(action, i, space));
                next_rows[static_cast<std::size_t>(i)].push_back(result.obs[static_cast<std::size_t>(i)]);
            }
            rewards.push_back(result.reward);
            dones.push_back(result.done ? 1.0 : 0.0);
            obs = result.obs;
            done = result.done;
            rows += 1;
            len += 1;
        }
        ds.episodes.emplace_back(start, len);
    }

    const std::size_t m = rewards.size();
    const int act_dim = space.dim;
    for (int i = 0; i < ds.n_agents; ++i) {
        Tensor o = Tensor::zeros({m, static_cast<std::size_t>(ds.obs_dim)});
        Tensor a = Tensor::zeros({m, static_cast<std::size_t>(act_dim)});
        Tensor no = Tensor::zeros({m, static_cast<std::size_t>(ds.obs_dim)});
        for (std::size_t row = 0; row < m; ++row) {
            for (int j = 0; j < ds.obs_dim; ++j) {
                o.at(row, static_cast<std::size_t>(j)) = obs_rows[static_cast<std::size_t>(i)][row][static_cast<std::size_t>(j)];
                no.at(row, static_cast<std::size_t>(j)) = next_rows[static_cast<std::size_t>(i)][row][static_cast<std::size_t>(j)];
            }
            for (int j = 0; j < act_dim; ++j)
                a.at(row, static_cast<std::size_t>(j)) = act_rows[static_cast<std::size_t>(i)][row][static_cast<std::size_t>(j)];
        }
        ds.obs.push_back(std::move(o));
        ds.actions.push_back(std::move(a));
        ds.next_obs.push_back(std::move(no));
    }
    ds.reward = Tensor({m}, std::move(rewards));
    ds.done = Tensor({m}, std::move(dones));
    return ds;
}

namespace {

std::string manifest_path_for(const std::string& jsonl_path) {
    const std::string suffix = ".jsonl";
    if (jsonl_path.size() > suffix.size() &&
        jsonl_path.compare(jsonl_path.size() - suffix.size(), suffix.size(), suffix) == 0)
        return jsonl_path.substr(0, jsonl_path.size() - suffix.size()) + ".manifest.json";
    return jsonl_path + ".manifest.json";
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash " + path);
    std::uint64_t hash = 14695981039346656037ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ULL;
        }
        if (!in) break;
    }
    return hash;
}

}  // namespace

void save_dataset(const OfflineDataset& ds, const std::string& jsonl_path) {
    std::ofstream out(jsonl_path, std::ios::binary);
    if (!out) throw std::runtime_error("save_dataset: cannot open " + jsonl_path);
    for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
        const auto& [start, len] = ds.episodes[e];
        for (int t = 0; t < len; ++t) {
            const std::size_t row = static_cast<std::size_t>(start + t);
            json rec;
            rec["episode"] = e;
            rec["t"] = t;
            json obs = json::array(), act = json::array();
            for (int i = 0; i < ds.n_agents; ++i) {
                json o = json::array(), a = json::array();
                for (std::size_t j = 0; j < ds.obs[static_cast<std::size_t>(i)].shape[1]; ++j)
                    o.push_back(ds.obs[static_cast<std::size_t>(i)].at(row, j));
                for (std::size_t j = 0; j < ds.actions[static_cast<std::size_t>(i)].shape[1]; ++j)
                    a.push_back(ds.actions[static_cast<std::size_t>(i)].at(row, j));
                obs.push_back(std::move(o));
                act.push_back(std::move(a));
            }
            rec["obs"] = std::move(obs);
            rec["act"] = std::move(act);
            rec["reward"] = ds.reward.data[row];
            rec["done"] = ds.done.data[row] != 0.0;
            out << rec.dump() << "\n";
        }
    }
    out.close();

    json manifest;
    manifest["tier"] = ds.tier;
    manifest["seed"] = ds.seed;
    manifest["env"] = ds.env_name;
    manifest["n_agents"] = ds.n_agents;
    manifest["obs_dim"] = ds.obs_dim;
    manifest["action_dim"] = ds.space.dim;
    manifest["action_discrete"] = ds.space.discrete;
    manifest["n_transitions"] = ds.size();
    manifest["behavior"] = ds.behavior;
    {
        std::ostringstream hex;
        hex << std::hex << fnv1a64_file(jsonl_path);
        manifest["content_hash_fnv1a64"] = hex.str();
    }
    std::ofstream mf(manifest_path_for(jsonl_path), std::ios::binary);
    if (!mf) throw std::runtime_error("save_dataset: cannot open manifest for " + jsonl_path);
    mf << manifest.dump(2) << "\n";
}

OfflineDataset load_dataset(const std::string& jsonl_path) {
    std::ifstream mf(manifest_path_for(jsonl_path));
    if (!mf) throw std::runtime_error("load_dataset: missing manifest for " + jsonl_path);
    json manifest = json::parse(mf);

    OfflineDataset ds;
    ds.tier = manifest.at("tier").get<std::string>();
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.env_name = manifest.at("env").get<std::string>();
    ds.n_agents = manifest.at("n_agents").get<int>();
    ds.obs_dim = manifest.at("obs_dim").get<int>();
    ds.space.dim = manifest.at("action_dim").get<int>();
    ds.space.discrete = manifest.at("action_discrete").get<bool>();
    ds.behavior = manifest.value("behavior", "");

    std::ifstream in(jsonl_path);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + jsonl_path);

    std::vector<std::vector<std::vector<double>>> obs_rows(static_cast<std::size_t>(ds.n_agents));
    std::vector<std::vector<std::vector<double>>> act_rows(static_cast<std::size_t>(ds.n_agents));
    std::vector<double> rewards, dones;
    std::vector<long> episode_ids;

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        episode_ids.push_back(rec.at("episode").get<long>());
        for (int i = 0; i < ds.n_agents; ++i) {
            obs_rows[static_cast<std::size_t>(i)].push_back(
                rec.at("obs")[static_cast<std::size_t>(i)].get<std::vector<double>>());
            act_rows[static_cast<std::size_t>(i)].push_back(
                rec.at("act")[static_cast<std::size_t>(i)].get<std::vector<double>>());
        }
        rewards.push_back(rec.at("reward").get<double>());
        dones.push_back(rec.at("done").get<bool>() ? 1.0 : 0.0);
    }

    const std::size_t m = rewards.size();
    if (m == 0) throw std::runtime_error("load_dataset: empty dataset " + jsonl_path);

    // episode boundaries from the id column
    long current = episode_ids[0];
    int start = 0;
    for (std::size_t row = 1; row <= m; ++row) {
        if (row == m || episode_ids[row] != current) {
            ds.episodes.emplace_back(start, static_cast<int>(row) - start);
            if (row < m) {
                current = episode_ids[row];
                start = static_cast<int>(row);
            }
        }
    }

    for (int i = 0; i < ds.n_agents; ++i) {
        Tensor o = Tensor::zeros({m, static_cast<std::size_t>(ds.obs_dim)});
        Tensor a = Tensor::zeros({m, static_cast<std::size_t>(ds.space.dim)});
        Tensor no = Tensor::zeros({m, static_cast<std::size_t>(ds.obs_dim)});
        for (std::size_t row = 0; row < m; ++row) {
            for (int j = 0; j < ds.obs_dim; ++j)
                o.at(row, static_cast<std::size_t>(j)) = obs_rows[static_cast<std::size_t>(i)][row][static_cast<std::size_t>(j)];
            for (int j = 0; j < ds.space.dim; ++j)
                a.at(row, static_cast<std::size_t>(j)) = act_rows[static_cast<std::size_t>(i)][row][static_cast<std::size_t>(j)];
        }
        ds.obs.push_back(std::move(o));
        ds.actions.push_back(std::move(a));
        ds.next_obs.push_back(std::move(no));
    }
    // next observations: successor row inside the episode, self for the last row
    for (const auto& [ep_start, len] : ds.episodes) {
        for (int t = 0; t < len; ++t) {
            const std::size_t row = static_cast<std::size_t>(ep_start + t);
            const std::size_t src = (t + 1 < len) ? row + 1 : row;
            for (int i = 0; i < ds.n_agents; ++i)
                for (int j = 0; j < ds.obs_dim; ++j)
                    ds.next_obs[static_cast<std::size_t>(i)].at(row, static_cast<std::size_t>(j)) =
                        ds.obs[static_cast<std::size_t>(i)].at(src, static_cast<std::size_t>(j));
        }
    }
    ds.reward = Tensor({m}, std::move(rewards));
    ds.done = Tensor({m}, std::move(dones));
    return ds;
}

namespace {

TabularSpec make_matrix_spec(const std::string& name, const std::vector<std::vector<double>>& payoff) {
    TabularSpec spec;
    spec.name = name;
    spec.n_agents = 2;
    spec.n_states = 1;
    spec.n_actions = {static_cast<int>(payoff.size()), static_cast<int>(payoff[0].size())};
    spec.n_obs = {1, 1};
    spec.obs_of_state = {{0}, {0}};
    const int ja = spec.n_joint_actions();
    spec.transition = {std::vector<std::vector<double>>(static_cast<std::size_t>(ja), {1.0})};
    spec.reward.resize(1);
    for (int a1 = 0; a1 < spec.n_actions[0]; ++a1)
        for (int a2 = 0; a2 < spec.n_actions[1]; ++a2)
            spec.reward[0].push_back(payoff[static_cast<std::size_t>(a1)][static_cast<std::size_t>(a2)]);
    spec.initial = {1.0};
    spec.terminal = {0};
    spec.gamma = 0.95;
    spec.horizon = 1;
    return spec;
}

TabularSpec make_bandit_spec() {
    TabularSpec spec;
    spec.name = "bandit";
    spec.n_agents = 1;
    spec.n_states = 1;
    spec.n_actions = {3};
    spec.n_obs = {1};
    spec.obs_of_state = {{0}};
    spec.transition = {{{1.0}, {1.0}, {1.0}}};
    spec.reward = {{0.1, 0.3, 1.0}};
    spec.initial = {1.0};
    spec.terminal = {0};
    spec.gamma = 0.95;
    spec.horizon = 1;
    return spec;
}

// Five-state cooperative chain: pushing together advances toward the goal
// at a small cost, idling pays a small local bonus, lone pushes slip back.
TabularSpec make_chain_spec() {
    TabularSpec spec;
    spec.name = "chain";
    spec.n_agents = 2;
    spec.n_states = 5;
    spec.n_actions = {2, 2};
    spec.n_obs = {5, 5};
    spec.obs_of_state = {{0, 1, 2, 3, 4}, {0, 1, 2, 3, 4}};
    const int goal = 4;
    const int ja = spec.n_joint_actions();
    spec.transition.assign(5, std::vector<std::vector<double>>(static_cast<std::size_t>(ja),
                                                               std::vector<double>(5, 0.0)));
    spec.reward.assign(5, std::vector<double>(static_cast<std::size_t>(ja), 0.0));
    for (int s = 0; s < 5; ++s) {
        for (int a1 = 0; a1 < 2; ++a1) {
            for (int a2 = 0; a2 < 2; ++a2) {
                const int j = spec.joint_action_index({a1, a2});
                int next;
                double r;
                if (s == goal) {  // absorbing
                    next = goal;
                    r = 0.0;
                } else if (a1 == 1 && a2 == 1) {
                    next = s + 1;
                    r = (next == goal) ? 3.0 : -0.05;
                } else if (a1 != a2) {
                    next = std::max(s - 1, 0);
                    r = 0.02;
                } else {
                    next = s;
                    r = 0.04;
                }
                spec.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)]
                               [static_cast<std::size_t>(next)] = 1.0;
                spec.reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)] = r;
            }
        }
    }
    spec.initial = {1.0, 0.0, 0.0, 0.0, 0.0};
    spec.terminal = {0, 0, 0, 0, 1};
    spec.gamma = 0.95;
    spec.horizon = 12;
    return spec;
}

std::shared_ptr<Actor> greedy_tabular_actor(const TabularSpec& spec) {
    // optimal joint action per state from the finite-horizon DP, split per agent
    const int ja = spec.n_joint_actions();
    std::vector<double> value(static_cast<std::size_t>(spec.n_states), 0.0);
    std::vector<int> best_action(static_cast<std::size_t>(spec.n_states), 0);
    for (int t = spec.horizon - 1; t >= 0; --t) {
        std::vector<double> next_value(static_cast<std::size_t>(spec.n_states), 0.0);
        for (int s = 0; s < spec.n_states; ++s) {
            if (spec.terminal[static_cast<std::size_t>(s)]) {
                next_value[static_cast<std::size_t>(s)] = 0.0;
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int a = 0; a < ja; ++a) {
                double v = spec.reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
                for (int s2 = 0; s2 < spec.n_states; ++s2)
                    v += spec.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]
                                        [static_cast<std::size_t>(s2)] *
                         value[static_cast<std::size_t>(s2)];
                if (v > best) {
                    best = v;
                    arg = a;
                }
            }
            next_value[static_cast<std::size_t>(s)] = best;
            if (t == 0) best_action[static_cast<std::size_t>(s)] = arg;
        }
        value = std::move(next_value);
        // remember the greedy action of the final sweep for a stationary policy
        if (t == 0) break;
    }
    // stationary greedy policy wrt the horizon-0 sweep
    std::vector<std::vector<int>> per_agent(static_cast<std::size_t>(spec.n_agents));
    for (int i = 0; i < spec.n_agents; ++i)
        per_agent[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(spec.n_obs[static_cast<std::size_t>(i)]), 0);
    for (int s = 0; s < spec.n_states; ++s) {
        const std::vector<int> split = spec.split_joint_action(best_action[static_cast<std::size_t>(s)]);
        for (int i = 0; i < spec.n_agents; ++i)
            per_agent[static_cast<std::size_t>(i)]
                     [static_cast<std::size_t>(spec.obs_of_state[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)])] =
                split[static_cast<std::size_t>(i)];
    }
    return std::make_shared<TabularActor>(std::move(per_agent));
}

double measured_expert_return(const Env& proto, const Actor& expert, int episodes, std::uint64_t seed) {
    Rng rng(seed);
    std::unique_ptr<Env> env = proto.clone();
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        JointObservation obs = env->reset(rng);
        bool done = false;
        double ret = 0.0;
        while (!done) {
            const StepResult result = env->step(expert.act(obs, rng), rng);
            ret += result.reward;
            obs = result.obs;
            done = result.done;
        }
        total += ret;
    }
    return total / episodes;
}

}  // namespace

double tabular_optimal_return(const TabularSpec& spec) {
    const int ja = spec.n_joint_actions();
    std::vector<double> value(static_cast<std::size_t>(spec.n_states), 0.0);
    for (int t = spec.horizon - 1; t >= 0; --t) {
        std::vector<double> next_value(static_cast<std::size_t>(spec.n_states), 0.0);
        for (int s = 0; s < spec.n_states; ++s) {
            if (spec.terminal[static_cast<std::size_t>(s)]) continue;
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < ja; ++a) {
                double v = spec.reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
                for (int s2 = 0; s2 < spec.n_states; ++s2)
                    v += spec.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]
                                        [static_cast<std::size_t>(s2)] *
                         value[static_cast<std::size_t>(s2)];
                best = std::max(best, v);
            }
            next_value[static_cast<std::size_t>(s)] = best;
        }
        value = std::move(next_value);
    }
    double expected = 0.0;
    for (int s = 0; s < spec.n_states; ++s)
        expected += spec.initial[static_cast<std::size_t>(s)] * value[static_cast<std::size_t>(s)];
    return expected;
}

std::vector<std::string> reference_env_names() {
    return {"bandit", "matrix_additive", "matrix_coupled", "chain", "spread"};
}

ReferenceEnv make_reference_env(const std::string& name) {
    ReferenceEnv ref;
    if (name == "bandit") {
        TabularSpec spec = make_bandit_spec();
        ref.env = std::make_shared<TabularEnv>(spec);
        ref.expert = greedy_tabular_actor(spec);
        ref.optimal_return = tabular_optimal_return(spec);
        ref.description = "single-agent 3-armed bandit, best arm pays 1.0";
    } else if (name == "matrix_additive") {
        // payoff f(a1) + f(a2), f = [0, 0.2, 1.0]; optimum 2.0 at (2,2)
        const std::vector<double> f = {0.0, 0.2, 1.0};
        std::vector<std::vector<double>> payoff(3, std::vector<double>(3, 0.0));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                payoff[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    f[static_cast<std::size_t>(i)] + f[static_cast<std::size_t>(j)];
        TabularSpec spec = make_matrix_spec("matrix_additive", payoff);
        ref.env = std::make_shared<TabularEnv>(spec);
        ref.expert = greedy_tabular_actor(spec);
        ref.optimal_return = tabular_optimal_return(spec);
        ref.description = "2-agent 3-action one-step game with additive payoff";
    } else if (name == "matrix_coupled") {
        const std::vector<std::vector<double>> payoff = {{1.0, 0.0, 0.0}, {0.0, 0.2, 0.0}, {0.0, 0.0, 0.8}};
        TabularSpec spec = make_matrix_spec("matrix_coupled", payoff);
        ref.env = std::make_shared<TabularEnv>(spec);
        ref.expert = greedy_tabular_actor(spec);
        ref.optimal_return = tabular_optimal_return(spec);
        ref.description = "2-agent 3-action coordination game; payoff is not a sum of per-agent terms";
    } else if (name == "chain") {
        TabularSpec spec = make_chain_spec();
        ref.env = std::make_shared<TabularEnv>(spec);
        ref.expert = greedy_tabular_actor(spec);
        ref.optimal_return = tabular_optimal_return(spec);
        ref.description = "2-agent 5-state chain; coordinated pushes reach the goal bonus";
    } else if (name == "spread") {
        auto env = std::make_shared<SpreadEnv>(
            2, std::vector<std::array<double, 2>>{{-0.6, 0.5}, {0.7, -0.4}}, 0.25, 10);
        auto expert = std::make_shared<SpreadExpertActor>(0.25);
        ref.env = env;
        ref.expert = expert;
        // measured reference: scripted expert over a fixed evaluation stream
        ref.optimal_return = measured_expert_return(*env, *expert, 1000, 0x5EEDULL);
        ref.description = "2-agent continuous spread; reference return measured from the scripted expert";
    } else {
        throw std::invalid_argument("unknown reference env '" + name + "'");
    }
    return ref;
}

std::map<std::string, ReferenceEnv> make_reference_envs() {
    std::map<std::string, ReferenceEnv> suite;
    for (const auto& name : reference_env_names()) suite[name] = make_reference_env(name);
    return suite;
}

}  // namespace vgm2p
