#pragma once

#include "nppo/learner.hpp"
#include "nppo/mdp.hpp"
#include "nppo/net.hpp"
#include "nppo/oracle.hpp"
#include "nppo/policy.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace nppo {

struct RunConfig {
    double beta = 1.0;
    int K = 50;
    int T_actor = 2000;
    int T_critic = 2000;
    int m = 512;
    double r_actor = 10.0;   // projection radius for the actor net
    double r_critic = 10.0;  // projection radius for the critic net
    std::uint64_t seed = 0;
    bool diagnostics = true;  // when off, only k/tau/beta_k/gap/kl_star are filled
};

struct Schedules {
    double tau_next;  // tau_{k+1} = beta sqrt(K) / (k+1)
    double beta_k;    // beta_k   = beta sqrt(K)
};

inline Schedules schedules(double beta, int K, int k) {
    const double bk = beta * std::sqrt(static_cast<double>(K));
    return {bk / (k + 1), bk};
}

/// Per-iteration diagnostics. The slack columns are (upper bound - quantity)
/// for the inequalities tracked by the verification harness; nonnegative
/// means the inequality held at this iteration.
struct IterationRecord {
    int k = 0;
    double tau = 0.0;     // tau_{k+1} used for this update
    double beta_k = 0.0;
    double gap = 0.0;     // L* - L(pi_k), policy entering iteration k
    double kl_star = 0.0;          // E_{nu*}[KL(pi* || pi_k)]
    double eps_pi = 0.0;           // actor fit error, RMS under sigma~_k
    double eps_q = 0.0;            // critic error vs exact Q, RMS under sigma_k
    double phi_star = 0.0;
    double psi_star = 0.0;
    double slack_l46 = 0.0;        // error propagation bound
    double slack_l47 = 0.0;        // stepwise energy-difference bound
    double slack_l52_min = 0.0;    // per-state KL >= half squared l1 (min over s)
    double slack_b1 = 0.0;         // policy perturbation bound
    double monotonicity = 0.0;     // E_{nu*}[<Q^{pi_k}, pi_k - pi*>], expected <= 0
    double M = 0.0;                // critic magnitude constant
};

struct RunResult {
    std::vector<IterationRecord> records;
    EnergyPolicy final_policy;
    double best_gap = 0.0;
};

/// One PPO run of K iterations. Each iteration restarts the actor and the
/// critic from the same frozen initialization alpha(0) drawn once from the
/// seed, fits the critic by TD and the actor by SGD on freshly sampled
/// tuples, and applies the softmax update with the scheduled temperature.
inline RunResult run(const RunConfig& cfg, const FiniteMdp& mdp) {
    if (cfg.K < 1 || cfg.T_actor < 1 || cfg.T_critic < 1 || cfg.m < 1)
        throw std::invalid_argument("run: K, T, m must be >= 1");
    if (!(cfg.beta > 0.0)) throw std::invalid_argument("run: beta must be positive");
    if (!(cfg.r_actor >= cfg.r_critic) || !(cfg.r_critic > 0.0))
        throw std::invalid_argument("run: radii must satisfy r_actor >= r_critic > 0");

    const int S = mdp.n_states, A = mdp.n_actions;
    std::mt19937_64 rng(cfg.seed);
    const TwoLayerNet init_net = TwoLayerNet::init(cfg.m, mdp.d, cfg.r_actor, rng);
    const OracleSolution oracle = solve_optimal(mdp);

    TwoLayerNet at_init = init_net;
    at_init.set_weights(init_net.init_weights());
    const Mat q0_table = net_table(at_init, mdp);
    // |Q_w| <= |Q_w0| + R pointwise inside the ball, so this dominates
    // E_{nu*}[max_a Q_w^2] for every iterate.
    double m_const = 2.0 * cfg.r_actor * cfg.r_actor;
    {
        double acc = 0.0;
        for (int s = 0; s < S; ++s) {
            const double q0max = q0_table.row(s).cwiseAbs().maxCoeff();
            acc += oracle.nu_star.weights(s) * q0max * q0max;
        }
        m_const += 2.0 * acc;
    }

    EnergyPolicy ep{EnergyFn::zero(S, A), 1.0};
    RunResult out;
    out.records.reserve(cfg.K);

    for (int k = 0; k < cfg.K; ++k) {
        const PolicyTable pi_k = to_policy_table(ep, mdp);
        const StateDistribution nu_k = stationary_state_distribution(mdp, pi_k);
        StateActionDistribution sigma_k;
        sigma_k.weights = nu_k.weights.asDiagonal() * pi_k.probs;
        StateActionDistribution sigma_aux;
        sigma_aux.weights = nu_k.weights.replicate(1, A) / A;

        const Schedules sch = schedules(cfg.beta, cfg.K, k);
        const double tau_k = ep.tau;

        const auto td_batch = sample_batch(mdp, pi_k, sigma_k, cfg.T_critic, rng);
        const LearnerOutput td =
            td_policy_evaluation(init_net.with_radius(cfg.r_critic), mdp, cfg.T_critic, td_batch);
        const Mat q_table = net_table(td.averaged_net, mdp);

        const auto sgd_batch = sample_batch(mdp, pi_k, sigma_k, cfg.T_actor, rng);
        const LearnerOutput sgd =
            sgd_policy_improvement(init_net, mdp, q_table, ep.energy.values, sch.tau_next, tau_k,
                                   sch.beta_k, cfg.T_actor, sgd_batch);
        EnergyPolicy ep_next{EnergyFn::from_net_residual(sgd.averaged_net, mdp), sch.tau_next};
        const PolicyTable pi_next = to_policy_table(ep_next, mdp);

        IterationRecord rec;
        rec.k = k;
        rec.tau = sch.tau_next;
        rec.beta_k = sch.beta_k;
        rec.gap = optimality_gap(mdp, pi_k, oracle);
        rec.kl_star = expected_kl(oracle.nu_star, oracle.pi_star, pi_k);
        rec.M = m_const;

        if (cfg.diagnostics) {
            const Mat q_exact = exact_q(mdp, pi_k);
            const auto [phi, psi] = density_ratio_coeffs(mdp, pi_k, oracle);
            rec.phi_star = phi;
            rec.psi_star = psi;

            // monotonicity: E_{nu*}[<Q^{pi_k}, pi_k - pi*>]
            for (int s = 0; s < S; ++s)
                rec.monotonicity += oracle.nu_star.weights(s) *
                                    q_exact.row(s).dot(pi_k.probs.row(s) -
                                                       oracle.pi_star.probs.row(s));

            // fit errors: actor in f-scale, critic vs exact Q
            const Mat err_f = ep_next.energy.values -
                              sch.tau_next * (q_table / sch.beta_k + ep.energy.values / tau_k);
            const Mat err_q = q_table - q_exact;
            rec.eps_pi = std::sqrt((sigma_aux.weights.array() * err_f.array().square()).sum());
            rec.eps_q = std::sqrt((sigma_k.weights.array() * err_q.array().square()).sum());

            // the same moments under nu* pi_0, the measure the Cauchy-Schwarz
            // steps of the propagation bound actually integrate over
            StateActionDistribution aux_star;
            aux_star.weights = oracle.nu_star.weights.replicate(1, A) / A;
            const double eps_pi_star =
                std::sqrt((aux_star.weights.array() * err_f.array().square()).sum());
            double phi_star_nu = 0.0;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    const double rd = A * (oracle.pi_star.probs(s, a) - pi_k.probs(s, a));
                    phi_star_nu += oracle.nu_star.weights(s) / A * rd * rd;
                }
            phi_star_nu = std::sqrt(phi_star_nu);

            // error propagation: |E_{nu*}[<log(pi_{k+1}^theta / pi_{k+1}), pi* - pi_k>]|
            const PolicyTable pi_ideal = to_policy_table(ideal_update(ep, q_exact, sch.beta_k), mdp);
            double lhs46 = 0.0;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a)
                    lhs46 += oracle.nu_star.weights(s) *
                             std::log(pi_next.probs(s, a) / pi_ideal.probs(s, a)) *
                             (oracle.pi_star.probs(s, a) - pi_k.probs(s, a));
            rec.slack_l46 = eps_pi_star * phi_star_nu / sch.tau_next +
                            rec.eps_q * psi / sch.beta_k - std::abs(lhs46);

            // stepwise energy difference in log scale
            double lhs47 = 0.0;
            const Mat log_diff =
                ep_next.energy.values / sch.tau_next - ep.energy.values / tau_k;
            for (int s = 0; s < S; ++s) {
                const double mx = log_diff.row(s).cwiseAbs().maxCoeff();
                lhs47 += oracle.nu_star.weights(s) * mx * mx;
            }
            rec.slack_l47 = 2.0 * A * eps_pi_star * eps_pi_star / (sch.tau_next * sch.tau_next) +
                            2.0 * m_const / (sch.beta_k * sch.beta_k) - lhs47;

            // per-state Pinsker slack for the consecutive policies
            double min_slack = std::numeric_limits<double>::infinity();
            for (int s = 0; s < S; ++s) {
                const double l1 = (pi_next.probs.row(s) - pi_k.probs.row(s)).cwiseAbs().sum();
                const double slack = kl(pi_next.probs.row(s), pi_k.probs.row(s)) - 0.5 * l1 * l1;
                min_slack = std::min(min_slack, slack);
            }
            rec.slack_l52_min = min_slack;

            // policy perturbation: realized update vs the ideal one with the
            // fitted critic, squared gap under sigma~_k
            const PolicyTable pi_hat = to_policy_table(ideal_update(ep, q_table, sch.beta_k), mdp);
            rec.slack_b1 = rec.eps_pi * rec.eps_pi / (16.0 * sch.tau_next * sch.tau_next) -
                           policy_gap_sq(pi_next, pi_hat, sigma_aux);
        }

        out.records.push_back(rec);
        ep = ep_next;
    }

    out.final_policy = ep;
    out.best_gap = out.records.front().gap;
    for (const auto& r : out.records) out.best_gap = std::min(out.best_gap, r.gap);
    return out;
}

}  // namespace nppo
