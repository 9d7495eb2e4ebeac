#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vgm2p/envs.hpp"
#include "vgm2p/tensor.hpp"

namespace vgm2p::oracle {

// Exact tabular policy: one probability row per observation.
struct ExactPolicy {
    Tensor table;  // [n_obs, n_actions], rows sum to 1

    int n_obs() const { return static_cast<int>(table.shape[0]); }
    int n_actions() const { return static_cast<int>(table.shape[1]); }
    void validate() const;  // rows sum to 1 +- 1e-12, entries >= 0
};

// Exact tabular Q function with the softmax temperature it is used at.
struct ExactQ {
    Tensor table;  // [n_obs, n_actions]
    double lambda_temp = 1.0;
};

// Half the L1 distance between two probability rows / tables (max over rows).
double tv_distance(const Tensor& p, const Tensor& q);

// Exact policy evaluation on the joint tabular MDP by direct linear solve;
// the policy is over joint actions per state. Bellman residual of the
// returned table is <= 1e-10 (checked). gamma = 1 with recurrent dynamics
// makes the system singular -> NumericError.
ExactQ exact_q_evaluation(const TabularSpec& spec, const ExactPolicy& joint_policy);

// pi*(a|o) proportional to beta(a|o) * exp(Q(o,a)/lambda), computed with a
// per-row max shift for stability.
ExactPolicy exact_optimal_policy(const ExactQ& q, const ExactPolicy& beta, double lambda_temp);

// p(c=1|o,a) = sigmoid((Q(o,a) - V(o))/lambda).
Tensor condition_posterior(const ExactQ& q, const Tensor& v, double lambda_temp);

// Bayes update of the behavior policy by an arbitrary positive posterior
// table; a zero-mass row raises DegenerateConditionError.
ExactPolicy conditional_behavior_policy(const ExactPolicy& beta, const Tensor& posterior);

struct Prop2Report {
    double tv = 0.0;
    bool pass = false;
};

// Compares the product of per-agent value-conditioned behavior policies
// against the joint optimal policy of the summed Q over the enumerated
// joint action space. `joint_q_override` (indexed [joint obs][joint
// action]) replaces the additive sum to probe non-decomposable values.
Prop2Report verify_proposition_2(const std::vector<ExactPolicy>& betas, const std::vector<ExactQ>& qs,
                                 double lambda_temp, const Tensor* joint_q_override = nullptr,
                                 std::size_t enumeration_cap = 1000000);

struct IgmReport {
    std::vector<int> joint_argmax;
    std::vector<int> per_agent_argmax;
    bool consistent = false;
};

// Enumerates sum_i Q_i over the joint action space at the given per-agent
// observations; consistency requires the enumerated argmax tuple to equal
// the per-agent argmaxes (ties broken toward the lowest index on both
// sides). `joint_q_override` evaluates a non-additive joint table instead.
IgmReport igm_check(const std::vector<ExactQ>& qs, const std::vector<int>& obs_indices,
                    const Tensor* joint_q_override = nullptr, std::size_t enumeration_cap = 1000000);

// One line of a verification report, serialized as structured text.
struct CheckLine {
    std::string check;
    std::uint64_t seed = 0;
    double tv = 0.0;
    bool pass = false;
    std::string detail;
};

std::string format_check_line(const CheckLine& line);

}  // namespace vgm2p::oracle
