#pragma once

#include "nppo/mdp.hpp"
#include "nppo/net.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace nppo {

/// Projected stochastic (semi)gradient problem
///   w <- Pi_B( w - eta (u(s,a) - v(s,a) - mu u(s',a')) grad u(s,a) )
/// with mu = 0 for regression (SGD) and mu = gamma for TD.
struct MetaProblem {
    TwoLayerNet net;        // starting point; its radius is R_u
    double mu = 0.0;        // contraction factor in [0,1)
    Mat target;             // v(s,a) applied to the raw net output
    const FiniteMdp* mdp = nullptr;
    int iterations = 0;     // T
    std::optional<double> eta_override;  // rate checks always use T^{-1/2}

    double stepsize() const {
        return eta_override ? *eta_override : 1.0 / std::sqrt(static_cast<double>(iterations));
    }
};

struct StepDiagnostics {
    double residual;
    double update_norm;
    double dist_to_init;
};

struct LearnerOutput {
    TwoLayerNet averaged_net;  // weights = mean of alpha(0..T-1)
    TwoLayerNet final_net;
    std::vector<StepDiagnostics> trace;  // filled only when tracing is on
};

inline double residual(const TwoLayerNet& net, const FiniteMdp& mdp, const SampleTuple& t,
                       double mu, const Mat& v) {
    double r = net.forward(mdp.feature(t.s, t.a).transpose()) - v(t.s, t.a);
    if (mu != 0.0) r -= mu * net.forward(mdp.feature(t.s_next, t.a_next).transpose());
    return r;
}

inline void meta_step(TwoLayerNet& net, const FiniteMdp& mdp, const SampleTuple& t, double mu,
                      const Mat& v, double eta) {
    const double delta = residual(net, mdp, t, mu, v);
    net.sgd_step(mdp.feature(t.s, t.a).transpose(), delta, eta);
}

/// Runs T projected steps consuming `samples` in order and returns the
/// trajectory average over alpha(0), ..., alpha(T-1).
inline LearnerOutput run(const MetaProblem& problem, const std::vector<SampleTuple>& samples,
                         bool trace = false, std::ostream* trace_out = nullptr) {
    const int T = problem.iterations;
    if (static_cast<int>(samples.size()) < T)
        throw std::invalid_argument("meta run: fewer samples than iterations");
    const double eta = problem.stepsize();
    const FiniteMdp& mdp = *problem.mdp;

    TwoLayerNet net = problem.net;
    Mat avg = Mat::Zero(net.width(), net.input_dim());
    LearnerOutput out;
    for (int t = 0; t < T; ++t) {
        avg += net.weights();
        const SampleTuple& tup = samples[t];
        const double delta = residual(net, mdp, tup, problem.mu, problem.target);
        const Mat before = trace ? net.weights() : Mat();
        net.sgd_step(mdp.feature(tup.s, tup.a).transpose(), delta, eta);
        if (trace) {
            StepDiagnostics diag{delta, (net.weights() - before).norm(), net.dist_to_init()};
            out.trace.push_back(diag);
            if (trace_out)
                *trace_out << t << ' ' << diag.residual << ' ' << diag.update_norm << ' '
                           << diag.dist_to_init << '\n';
        }
    }
    out.final_net = net;
    out.averaged_net = problem.net;
    out.averaged_net.set_weights(avg / T);
    return out;
}

/// SGD instantiation (mu = 0): fits f toward
/// tau_{k+1} (Q_{omega_k}/beta_k + f_{theta_k}/tau_k). The actor energy is
/// the residual u_theta - u_theta0, so the raw-net target adds u_theta0 back.
inline LearnerOutput sgd_policy_improvement(const TwoLayerNet& net_f, const FiniteMdp& mdp,
                                            const Mat& q_critic, const Mat& f_k, double tau_k1,
                                            double tau_k, double beta_k, int T,
                                            const std::vector<SampleTuple>& samples) {
    if (!(tau_k1 > 0.0 && tau_k > 0.0 && beta_k > 0.0))
        throw std::invalid_argument("sgd_policy_improvement: schedules must be positive");
    TwoLayerNet at_init = net_f;
    at_init.set_weights(net_f.init_weights());
    Mat u0(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            u0(s, a) = at_init.forward(mdp.feature(s, a).transpose());

    MetaProblem problem;
    problem.net = net_f;
    problem.mu = 0.0;
    problem.target = tau_k1 * (q_critic / beta_k + f_k / tau_k) + u0;
    problem.mdp = &mdp;
    problem.iterations = T;

    // SGD consumes (s, a0) ~ sigma~_k
    std::vector<SampleTuple> relabeled(samples.begin(), samples.begin() + T);
    for (auto& t : relabeled) t.a = t.a0;
    return run(problem, relabeled);
}

/// TD instantiation (mu = gamma, v = (1-gamma) r) on (s,a,s',a') tuples.
inline LearnerOutput td_policy_evaluation(const TwoLayerNet& net_q, const FiniteMdp& mdp, int T,
                                          const std::vector<SampleTuple>& samples) {
    MetaProblem problem;
    problem.net = net_q;
    problem.mu = mdp.gamma;
    problem.target = (1.0 - mdp.gamma) * mdp.reward;
    problem.mdp = &mdp;
    problem.iterations = T;
    return run(problem, samples);
}

inline Mat net_table(const TwoLayerNet& net, const FiniteMdp& mdp) {
    Mat out(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            out(s, a) = net.forward(mdp.feature(s, a).transpose());
    return out;
}

/// Monte-Carlo variance of the stochastic update vector g = delta grad u
/// at the problem's current iterate, over tuples drawn as in Algorithm 1.
inline double empirical_update_variance(const MetaProblem& problem, const PolicyTable& pi,
                                        const StateActionDistribution& rho, int n_probes,
                                        std::mt19937_64& rng) {
    const FiniteMdp& mdp = *problem.mdp;
    const auto probes = sample_batch(mdp, pi, rho, n_probes, rng);
    Mat mean = Mat::Zero(problem.net.width(), problem.net.input_dim());
    double sum_sq = 0.0;
    for (const auto& t : probes) {
        const double delta = residual(problem.net, mdp, t, problem.mu, problem.target);
        const Mat g = delta * problem.net.grad(mdp.feature(t.s, t.a).transpose());
        mean += g;
        sum_sq += g.squaredNorm();
    }
    mean /= n_probes;
    return sum_sq / n_probes - mean.squaredNorm();
}

/// Fixed point of the projected linearized population update
/// alpha* = Pi_B(alpha* - eta gbar0(alpha*)), found by damped iteration.
/// rho weights the (s,a) pairs; the bootstrapped term averages over
/// s' ~ P(.|s,a), a' ~ pi(.|s').
inline TwoLayerNet approximate_stationary_point(const MetaProblem& problem,
                                                const StateActionDistribution& rho,
                                                const PolicyTable& pi, double tol = 1e-10,
                                                long max_iters = 100000, double damping = 0.5) {
    const FiniteMdp& mdp = *problem.mdp;
    const int S = mdp.n_states, A = mdp.n_actions, n = S * A;
    const int m = problem.net.width(), d = problem.net.input_dim();

    // Per-pair linearized gradient directions (constant in alpha).
    Eigen::MatrixXd G(n, m * d);
    const Mat& w0 = problem.net.init_weights();
    const Vec scaled = problem.net.signs() / std::sqrt(static_cast<double>(m));
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const Vec x = mdp.feature(s, a).transpose();
            const Vec pre0 = w0 * x;
            Mat g = Mat::Zero(m, d);
            for (int i = 0; i < m; ++i)
                if (pre0(i) > 0.0) g.row(i) = scaled(i) * x.transpose();
            G.row(s * A + a) = Eigen::Map<const Vec>(g.data(), m * d).transpose();
        }

    Mat next_op = Mat::Zero(n, n);  // E[u0(s',a') | s,a] as a matrix on pair space
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            for (int s2 = 0; s2 < S; ++s2)
                for (int a2 = 0; a2 < A; ++a2)
                    next_op(s * A + a, s2 * A + a2) = mdp.trans(s, a, s2) * pi.probs(s2, a2);

    Vec rho_flat(n), v_flat(n);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            rho_flat(s * A + a) = rho.weights(s, a);
            v_flat(s * A + a) = problem.target(s, a);
        }

    const Vec alpha0 = Eigen::Map<const Vec>(w0.data(), m * d);
    Vec alpha = Eigen::Map<const Vec>(problem.net.weights().data(), m * d);
    const double eta = 0.5;
    const double R = problem.net.radius();
    for (long it = 0; it < max_iters; ++it) {
        const Vec u0 = G * alpha;
        const Vec delta = u0 - v_flat - problem.mu * (next_op * u0);
        const Vec gbar = G.transpose() * rho_flat.cwiseProduct(delta);
        Vec proposed = alpha - eta * gbar;
        const double dist = (proposed - alpha0).norm();
        if (dist > R) proposed = alpha0 + (R / dist) * (proposed - alpha0);
        const Vec stepped = alpha + damping * (proposed - alpha);
        const double move = (stepped - alpha).norm();
        alpha = stepped;
        if (move <= tol) {
            TwoLayerNet out = problem.net;
            out.set_weights(Eigen::Map<const Mat>(alpha.data(), m, d));
            return out;
        }
    }
    throw std::runtime_error("approximate_stationary_point: fixed-point iteration did not converge");
}

}  // namespace nppo
