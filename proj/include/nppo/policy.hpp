#pragma once

#include "nppo/mdp.hpp"
#include "nppo/net.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nppo {

enum class EnergyTag { Zero, NetResidual, Table };

/// Energy function over (s,a), materialized as a table on the finite MDP.
/// The tag records where it came from; NetResidual means u_theta - u_theta0,
/// so the energy is exactly zero at initialization.
struct EnergyFn {
    Mat values;  // S x A
    EnergyTag tag = EnergyTag::Table;

    static EnergyFn zero(int n_states, int n_actions) {
        return {Mat::Zero(n_states, n_actions), EnergyTag::Zero};
    }

    static EnergyFn from_net_residual(const TwoLayerNet& net, const FiniteMdp& mdp) {
        EnergyFn f;
        f.tag = EnergyTag::NetResidual;
        f.values.resize(mdp.n_states, mdp.n_actions);
        TwoLayerNet at_init = net;
        at_init.set_weights(net.init_weights());
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a) {
                const Vec x = mdp.feature(s, a).transpose();
                f.values(s, a) = net.forward(x) - at_init.forward(x);
            }
        return f;
    }
};

/// pi(a|s) proportional to exp{f(s,a)/tau}.
struct EnergyPolicy {
    EnergyFn energy;
    double tau = 1.0;
};

/// Row-wise softmax of f/tau with log-sum-exp stabilization.
inline PolicyTable to_policy_table(const EnergyPolicy& ep, const FiniteMdp& mdp) {
    if (!(ep.tau > 0.0)) throw std::invalid_argument("to_policy_table: tau must be positive");
    if (!ep.energy.values.allFinite()) throw std::invalid_argument("to_policy_table: non-finite energy");
    if (ep.energy.values.rows() != mdp.n_states || ep.energy.values.cols() != mdp.n_actions)
        throw std::invalid_argument("to_policy_table: energy shape mismatch");
    PolicyTable pi;
    pi.probs.resize(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        Eigen::RowVectorXd z = ep.energy.values.row(s) / ep.tau;
        z.array() -= z.maxCoeff();
        Eigen::RowVectorXd e = z.array().exp();
        pi.probs.row(s) = e / e.sum();
    }
    return pi;
}

/// KL(p || q) for rows over actions; +inf when p puts mass where q has none.
inline double kl(const Eigen::Ref<const Eigen::RowVectorXd>& p,
                 const Eigen::Ref<const Eigen::RowVectorXd>& q) {
    double out = 0.0;
    for (int a = 0; a < p.size(); ++a) {
        if (p(a) == 0.0) continue;
        if (q(a) <= 0.0) return std::numeric_limits<double>::infinity();
        out += p(a) * std::log(p(a) / q(a));
    }
    return out < 0.0 && out > -1e-15 ? 0.0 : out;
}

inline double expected_kl(const StateDistribution& nu, const PolicyTable& p,
                          const PolicyTable& q) {
    double out = 0.0;
    for (int s = 0; s < p.n_states(); ++s) out += nu.weights(s) * kl(p.probs.row(s), q.probs.row(s));
    return out;
}

/// Closed-form KL-regularized update: the maximizer of
/// <Q(s,.), pi> - beta_k KL(pi || pi_k) is proportional to
/// exp{Q/beta_k + f_k/tau_k}.
inline EnergyPolicy ideal_update(const EnergyPolicy& ep_k, const Mat& q_table, double beta_k) {
    if (!(beta_k > 0.0)) throw std::invalid_argument("ideal_update: beta_k must be positive");
    EnergyPolicy next;
    next.tau = 1.0;
    next.energy.tag = EnergyTag::Table;
    next.energy.values = q_table / beta_k + ep_k.energy.values / ep_k.tau;
    return next;
}

/// E_dist[(pi_a(a|s) - pi_b(a|s))^2], exact finite sum.
inline double policy_gap_sq(const PolicyTable& pa, const PolicyTable& pb,
                            const StateActionDistribution& dist) {
    return (dist.weights.array() * (pa.probs - pb.probs).array().square()).sum();
}

}  // namespace nppo
