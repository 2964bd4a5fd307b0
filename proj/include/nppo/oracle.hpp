#pragma once

#include "nppo/mdp.hpp"
#include "nppo/policy.hpp"

#include <stdexcept>

namespace nppo {

struct OracleSolution {
    PolicyTable pi_star;
    Mat q_star;   // S x A, (1-gamma)-scaled
    Vec v_star;   // S
    StateDistribution nu_star;
    StateActionDistribution sigma_star;
    double l_star = 0.0;  // E_{nu*}[V*(s)]
};

/// Value iteration on the (1-gamma)-scaled Bellman optimality operator,
/// greedy policy with lowest-index tie-breaking.
inline OracleSolution solve_optimal(const FiniteMdp& mdp, double tol = 1e-12,
                                    long max_iters = 10000000) {
    const int S = mdp.n_states, A = mdp.n_actions;
    Vec v = Vec::Zero(S);
    for (long it = 0;; ++it) {
        Vec next(S);
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                const double q = (1.0 - mdp.gamma) * mdp.reward(s, a) +
                                 mdp.gamma * mdp.transition[a].row(s).dot(v);
                if (q > best) best = q;
            }
            next(s) = best;
        }
        const double diff = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (diff <= tol) break;
        if (it >= max_iters) throw std::runtime_error("solve_optimal: value iteration stalled");
    }

    OracleSolution sol;
    sol.pi_star.probs = Mat::Zero(S, A);
    for (int s = 0; s < S; ++s) {
        int best_a = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
            const double q = (1.0 - mdp.gamma) * mdp.reward(s, a) +
                             mdp.gamma * mdp.transition[a].row(s).dot(v);
            if (q > best) {
                best = q;
                best_a = a;
            }
        }
        sol.pi_star.probs(s, best_a) = 1.0;
    }
    sol.q_star = exact_q(mdp, sol.pi_star);
    sol.v_star = exact_v(sol.q_star, sol.pi_star);
    sol.nu_star = stationary_state_distribution(mdp, sol.pi_star);
    sol.sigma_star.weights = sol.nu_star.weights.asDiagonal() * sol.pi_star.probs;
    sol.l_star = sol.nu_star.weights.dot(sol.v_star);
    return sol;
}

/// L(pi) = E_{nu*}[V^pi(s)].
inline double expected_total_reward(const FiniteMdp& mdp, const PolicyTable& pi,
                                    const OracleSolution& oracle) {
    return oracle.nu_star.weights.dot(exact_v(mdp, pi));
}

inline double optimality_gap(const FiniteMdp& mdp, const PolicyTable& pi,
                             const OracleSolution& oracle) {
    return oracle.l_star - expected_total_reward(mdp, pi, oracle);
}

/// Radon-Nikodym deviation coefficients: with pi_0 uniform,
///   phi*_k = E_{sigma~_k}[ (|A| pi*(a|s) - |A| pi_k(a|s))^2 ]^{1/2},
///   psi*_k = E_{sigma_k}[ (sigma*/sigma_k - nu*/nu_k)^2 ]^{1/2}.
inline std::pair<double, double> density_ratio_coeffs(const FiniteMdp& mdp,
                                                      const PolicyTable& pi_k,
                                                      const OracleSolution& oracle) {
    const int S = mdp.n_states, A = mdp.n_actions;
    const StateDistribution nu_k = stationary_state_distribution(mdp, pi_k);

    double phi_sq = 0.0, psi_sq = 0.0;
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const double aux = nu_k.weights(s) / A;  // sigma~_k
            const double ratio_diff = A * (oracle.pi_star.probs(s, a) - pi_k.probs(s, a));
            phi_sq += aux * ratio_diff * ratio_diff;

            const double sigma_k = pi_k.probs(s, a) * nu_k.weights(s);
            if (sigma_k <= 0.0) {
                // the integrand sigma_k (sigma*/sigma_k - nu*/nu_k)^2 tends to
                // zero with sigma_k unless the optimal pair keeps mass there
                if (oracle.sigma_star.weights(s, a) > 0.0)
                    throw std::runtime_error("density_ratio_coeffs: sigma* not dominated by sigma_k");
                continue;
            }
            const double dsigma = oracle.sigma_star.weights(s, a) / sigma_k;
            const double dnu = oracle.nu_star.weights(s) / nu_k.weights(s);
            psi_sq += sigma_k * (dsigma - dnu) * (dsigma - dnu);
        }
    }
    return {std::sqrt(phi_sq), std::sqrt(psi_sq)};
}

/// pi_{k+1} proportional to exp{Q^{pi_k}/beta_k + f_k/tau_k} with the exact
/// action-value function of the policy induced by ep_k.
inline EnergyPolicy ideal_policy_from_exact_q(const FiniteMdp& mdp, const EnergyPolicy& ep_k,
                                              double beta_k) {
    const PolicyTable pi_k = to_policy_table(ep_k, mdp);
    return ideal_update(ep_k, exact_q(mdp, pi_k), beta_k);
}

}  // namespace nppo
