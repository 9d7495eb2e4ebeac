#include "vgm2p/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace vgm2p::oracle {

void ExactPolicy::validate() const {
    if (table.rank() != 2) throw std::invalid_argument("policy table must be rank-2");
    for (std::size_t o = 0; o < table.shape[0]; ++o) {
        double total = 0.0;
        for (std::size_t a = 0; a < table.shape[1]; ++a) {
            const double p = table.at(o, a);
            if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("policy entries must be >= 0 and finite");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("policy row " + std::to_string(o) + " sums to " + std::to_string(total));
    }
}

double tv_distance(const Tensor& p, const Tensor& q) {
    if (!p.same_shape(q)) throw DimensionError("tv_distance: shape mismatch");
    if (p.rank() == 1) {
        double acc = 0.0;
        for (std::size_t i = 0; i < p.data.size(); ++i) acc += std::abs(p.data[i] - q.data[i]);
        return 0.5 * acc;
    }
    double worst = 0.0;
    for (std::size_t o = 0; o < p.shape[0]; ++o) {
        double acc = 0.0;
        for (std::size_t a = 0; a < p.shape[1]; ++a) acc += std::abs(p.at(o, a) - q.at(o, a));
        worst = std::max(worst, 0.5 * acc);
    }
    return worst;
}

namespace {

// Gaussian elimination with partial pivoting; A is n x n row-major.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, std::size_t n) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::abs(a[col * n + col]);
        for (std::size_t row = col + 1; row < n; ++row) {
            const double cand = std::abs(a[row * n + col]);
            if (cand > best) {
                best = cand;
                pivot = row;
            }
        }
        if (best < 1e-300) throw NumericError("exact_q_evaluation: singular policy-evaluation system", best);
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[pivot * n + j], a[col * n + j]);
            std::swap(b[pivot], b[col]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (std::size_t row = col + 1; row < n; ++row) {
            const double factor = a[row * n + col] * inv;
            if (factor == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a[row * n + j] -= factor * a[col * n + j];
            b[row] -= factor * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t row = n; row-- > 0;) {
        double acc = b[row];
        for (std::size_t j = row + 1; j < n; ++j) acc -= a[row * n + j] * x[j];
        x[row] = acc / a[row * n + row];
    }
    return x;
}

}  // namespace

ExactQ exact_q_evaluation(const TabularSpec& spec, const ExactPolicy& joint_policy) {
    spec.validate();
    joint_policy.validate();
    const int ja = spec.n_joint_actions();
    if (joint_policy.n_obs() != spec.n_states || joint_policy.n_actions() != ja)
        throw std::invalid_argument("exact_q_evaluation: policy table must be [n_states, n_joint_actions]");

    const std::size_t n = static_cast<std::size_t>(spec.n_states) * static_cast<std::size_t>(ja);
    std::vector<double> a(n * n, 0.0);
    std::vector<double> b(n, 0.0);
    auto idx = [ja](int s, int act) { return static_cast<std::size_t>(s) * static_cast<std::size_t>(ja) + static_cast<std::size_t>(act); };

    for (int s = 0; s < spec.n_states; ++s) {
        for (int act = 0; act < ja; ++act) {
            const std::size_t row = idx(s, act);
            a[row * n + row] += 1.0;
            b[row] = spec.reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(act)];
            for (int s2 = 0; s2 < spec.n_states; ++s2) {
                const double t = spec.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(act)]
                                                [static_cast<std::size_t>(s2)];
                if (t == 0.0) continue;
                for (int act2 = 0; act2 < ja; ++act2) {
                    const double p = joint_policy.table.at(static_cast<std::size_t>(s2), static_cast<std::size_t>(act2));
                    if (p == 0.0) continue;
                    a[row * n + idx(s2, act2)] -= spec.gamma * t * p;
                }
            }
        }
    }

    const std::vector<double> x = solve_dense(std::move(a), std::move(b), n);

    ExactQ q;
    q.table = Tensor::zeros({static_cast<std::size_t>(spec.n_states), static_cast<std::size_t>(ja)});
    for (int s = 0; s < spec.n_states; ++s)
        for (int act = 0; act < ja; ++act)
            q.table.at(static_cast<std::size_t>(s), static_cast<std::size_t>(act)) = x[idx(s, act)];

    // Bellman residual check
    double worst = 0.0;
    for (int s = 0; s < spec.n_states; ++s) {
        for (int act = 0; act < ja; ++act) {
            double rhs = spec.reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(act)];
            for (int s2 = 0; s2 < spec.n_states; ++s2) {
                const double t = spec.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(act)]
                                                [static_cast<std::size_t>(s2)];
                if (t == 0.0) continue;
                double v = 0.0;
                for (int act2 = 0; act2 < ja; ++act2)
                    v += joint_policy.table.at(static_cast<std::size_t>(s2), static_cast<std::size_t>(act2)) *
                         q.table.at(static_cast<std::size_t>(s2), static_cast<std::size_t>(act2));
                rhs += spec.gamma * t * v;
            }
            worst = std::max(worst,
                             std::abs(q.table.at(static_cast<std::size_t>(s), static_cast<std::size_t>(act)) - rhs));
        }
    }
    if (worst > 1e-10) throw NumericError("exact_q_evaluation: Bellman residual too large", worst);
    return q;
}

ExactPolicy exact_optimal_policy(const ExactQ& q, const ExactPolicy& beta, double lambda_temp) {
    if (lambda_temp <= 0.0) throw std::invalid_argument("exact_optimal_policy: lambda must be positive");
    beta.validate();
    if (!q.table.same_shape(beta.table)) throw DimensionError("exact_optimal_policy: Q/beta shape mismatch");

    ExactPolicy out;
    out.table = Tensor::zeros(beta.table.shape);
    for (std::size_t o = 0; o < beta.table.shape[0]; ++o) {
        double max_q = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < beta.table.shape[1]; ++a)
            if (beta.table.at(o, a) > 0.0) max_q = std::max(max_q, q.table.at(o, a));
        double mass = 0.0;
        for (std::size_t a = 0; a < beta.table.shape[1]; ++a) {
            const double w =
                beta.table.at(o, a) > 0.0
                    ? beta.table.at(o, a) * std::exp((q.table.at(o, a) - max_q) / lambda_temp)
                    : 0.0;
            out.table.at(o, a) = w;
            mass += w;
        }
        if (mass <= 0.0) throw DegenerateConditionError("exact_optimal_policy: zero-mass row");
        for (std::size_t a = 0; a < beta.table.shape[1]; ++a) out.table.at(o, a) /= mass;
    }
    return out;
}

Tensor condition_posterior(const ExactQ& q, const Tensor& v, double lambda_temp) {
    if (lambda_temp <= 0.0) throw std::invalid_argument("condition_posterior: lambda must be positive");
    if (v.shape[0] != q.table.shape[0]) throw DimensionError("condition_posterior: V rows mismatch");
    Tensor out = Tensor::zeros(q.table.shape);
    for (std::size_t o = 0; o < q.table.shape[0]; ++o) {
        for (std::size_t a = 0; a < q.table.shape[1]; ++a) {
            const double z = (q.table.at(o, a) - v.data[o]) / lambda_temp;
            out.at(o, a) = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        }
    }
    return out;
}

ExactPolicy conditional_behavior_policy(const ExactPolicy& beta, const Tensor& posterior) {
    beta.validate();
    if (!posterior.same_shape(beta.table)) throw DimensionError("conditional_behavior_policy: shape mismatch");
    for (double p : posterior.data)
        if (p < 0.0 || !std::isfinite(p))
            throw std::invalid_argument("conditional_behavior_policy: posterior entries must be >= 0 and finite");

    ExactPolicy out;
    out.table = Tensor::zeros(beta.table.shape);
    for (std::size_t o = 0; o < beta.table.shape[0]; ++o) {
        double mass = 0.0;
        for (std::size_t a = 0; a < beta.table.shape[1]; ++a) {
            const double w = posterior.at(o, a) * beta.table.at(o, a);
            out.table.at(o, a) = w;
            mass += w;
        }
        if (mass <= 0.0)
            throw DegenerateConditionError("conditional_behavior_policy: condition has zero mass at observation " +
                                           std::to_string(o));
        for (std::size_t a = 0; a < beta.table.shape[1]; ++a) out.table.at(o, a) /= mass;
    }
    return out;
}

namespace {

struct MixedRadix {
    std::vector<int> sizes;

    std::size_t total() const {
        std::size_t n = 1;
        for (int s : sizes) n *= static_cast<std::size_t>(s);
        return n;
    }
    std::vector<int> split(std::size_t flat) const {
        std::vector<int> out(sizes.size());
        for (std::size_t i = sizes.size(); i-- > 0;) {
            out[i] = static_cast<int>(flat % static_cast<std::size_t>(sizes[i]));
            flat /= static_cast<std::size_t>(sizes[i]);
        }
        return out;
    }
};

}  // namespace

Prop2Report verify_proposition_2(const std::vector<ExactPolicy>& betas, const std::vector<ExactQ>& qs,
                                 double lambda_temp, const Tensor* joint_q_override, std::size_t enumeration_cap) {
    if (betas.empty() || betas.size() != qs.size())
        throw std::invalid_argument("verify_proposition_2: need matching per-agent policies and Q tables");
    const std::size_t n_agents = betas.size();

    MixedRadix actions, observations;
    for (std::size_t i = 0; i < n_agents; ++i) {
        betas[i].validate();
        if (!betas[i].table.same_shape(qs[i].table))
            throw DimensionError("verify_proposition_2: beta/Q shape mismatch for agent " + std::to_string(i));
        actions.sizes.push_back(betas[i].n_actions());
        observations.sizes.push_back(betas[i].n_obs());
    }
    if (actions.total() > enumeration_cap)
        throw std::length_error("verify_proposition_2: joint action space exceeds enumeration cap");

    // per-agent value-conditioned behavior policies with posterior
    // proportional to exp(Q_i / lambda)
    std::vector<ExactPolicy> conditioned;
    for (std::size_t i = 0; i < n_agents; ++i) {
        Tensor post = Tensor::zeros(qs[i].table.shape);
        for (std::size_t o = 0; o < post.shape[0]; ++o) {
            double max_q = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < post.shape[1]; ++a) max_q = std::max(max_q, qs[i].table.at(o, a));
            for (std::size_t a = 0; a < post.shape[1]; ++a)
                post.at(o, a) = std::exp((qs[i].table.at(o, a) - max_q) / lambda_temp);
        }
        conditioned.push_back(conditional_behavior_policy(betas[i], post));
    }

    Prop2Report report;
    const std::size_t n_joint_actions = actions.total();
    for (std::size_t jo = 0; jo < observations.total(); ++jo) {
        const std::vector<int> obs = observations.split(jo);

        Tensor joint_beta = Tensor::zeros({1, n_joint_actions});
        Tensor joint_q = Tensor::zeros({1, n_joint_actions});
        Tensor product_policy = Tensor::zeros({1, n_joint_actions});
        for (std::size_t jaidx = 0; jaidx < n_joint_actions; ++jaidx) {
            const std::vector<int> acts = actions.split(jaidx);
            double beta_prob = 1.0, q_sum = 0.0, cond_prob = 1.0;
            for (std::size_t i = 0; i < n_agents; ++i) {
                const std::size_t o = static_cast<std::size_t>(obs[i]);
                const std::size_t a = static_cast<std::size_t>(acts[i]);
                beta_prob *= betas[i].table.at(o, a);
                q_sum += qs[i].table.at(o, a);
                cond_prob *= conditioned[i].table.at(o, a);
            }
            joint_beta.at(0, jaidx) = beta_prob;
            joint_q.at(0, jaidx) = joint_q_override != nullptr ? joint_q_override->at(jo, jaidx) : q_sum;
            product_policy.at(0, jaidx) = cond_prob;
        }

        ExactQ jq{joint_q, lambda_temp};
        ExactPolicy jbeta{joint_beta};
        const ExactPolicy joint_optimal = exact_optimal_policy(jq, jbeta, lambda_temp);
        report.tv = std::max(report.tv, tv_distance(product_policy, joint_optimal.table));
    }
    report.pass = report.tv <= 1e-10;
    return report;
}

IgmReport igm_check(const std::vector<ExactQ>& qs, const std::vector<int>& obs_indices,
                    const Tensor* joint_q_override, std::size_t enumeration_cap) {
    if (qs.empty() || qs.size() != obs_indices.size())
        throw std::invalid_argument("igm_check: need one observation index per agent");

    MixedRadix actions;
    for (const auto& q : qs) actions.sizes.push_back(static_cast<int>(q.table.shape[1]));
    if (actions.total() > enumeration_cap) throw std::length_error("igm_check: joint space exceeds enumeration cap");

    IgmReport report;
    for (std::size_t i = 0; i < qs.size(); ++i) {
        const std::size_t o = static_cast<std::size_t>(obs_indices[i]);
        int best = 0;
        for (int a = 1; a < static_cast<int>(qs[i].table.shape[1]); ++a)
            if (qs[i].table.at(o, static_cast<std::size_t>(a)) > qs[i].table.at(o, static_cast<std::size_t>(best)))
                best = a;
        report.per_agent_argmax.push_back(best);
    }

    double best_value = -std::numeric_limits<double>::infinity();
    std::size_t best_joint = 0;
    for (std::size_t jaidx = 0; jaidx < actions.total(); ++jaidx) {
        double value = 0.0;
        if (joint_q_override != nullptr) {
            value = joint_q_override->at(0, jaidx);
        } else {
            const std::vector<int> acts = actions.split(jaidx);
            for (std::size_t i = 0; i < qs.size(); ++i)
                value += qs[i].table.at(static_cast<std::size_t>(obs_indices[i]), static_cast<std::size_t>(acts[i]));
        }
        if (value > best_value) {  // strict: first (lexicographically lowest) maximizer wins
            best_value = value;
            best_joint = jaidx;
        }
    }
    report.joint_argmax = actions.split(best_joint);
    report.consistent = report.joint_argmax == report.per_agent_argmax;
    return report;
}

std::string format_check_line(const CheckLine& line) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s seed=%llu tv=%.3e pass=%s", line.check.c_str(),
                  static_cast<unsigned long long>(line.seed), line.tv, line.pass ? "true" : "false");
    std::string out(buf);
    if (!line.detail.empty()) out += " " + line.detail;
    return out;
}

}  // namespace vgm2p::oracle
