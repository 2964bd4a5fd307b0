#pragma once

#include "nppo/driver.hpp"
#include "nppo/learner.hpp"
#include "nppo/mdp.hpp"
#include "nppo/net.hpp"
#include "nppo/oracle.hpp"
#include "nppo/policy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nppo {

/// Interpretation of `value` by kind:
///   identity   - max |residual| over cases, pass when value <= tol
///   inequality - min slack over cases, pass when value >= -tol
///   rate       - fitted log-log slope, pass when value <= tol
struct CheckResult {
    std::string name;
    std::string kind;
    double value = 0.0;
    double tol = 0.0;
    bool pass = false;
};

inline CheckResult identity_check(std::string name, double max_residual, double tol) {
    return {std::move(name), "identity", max_residual, tol, max_residual <= tol};
}
inline CheckResult inequality_check(std::string name, double min_slack, double tol) {
    return {std::move(name), "inequality", min_slack, tol, min_slack >= -tol};
}
inline CheckResult rate_check(std::string name, double slope, double threshold) {
    return {std::move(name), "rate", slope, threshold, slope <= threshold};
}

inline PolicyTable random_policy(int n_states, int n_actions, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 2.0);
    EnergyPolicy ep;
    ep.tau = 1.0;
    ep.energy.values = Mat::NullaryExpr(n_states, n_actions, [&]() { return gauss(rng); });
    PolicyTable pi;
    pi.probs.resize(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        Eigen::RowVectorXd z = ep.energy.values.row(s);
        z.array() -= z.maxCoeff();
        Eigen::RowVectorXd e = z.array().exp();
        pi.probs.row(s) = e / e.sum();
    }
    return pi;
}

/// L(pi) - L(pi*) = (1-gamma)^{-1} E_{nu*}[<Q^pi, pi - pi*>], exact identity.
inline CheckResult check_performance_difference(const FiniteMdp& mdp,
                                                const std::vector<PolicyTable>& policies,
                                                double tol = 1e-10) {
    const OracleSolution oracle = solve_optimal(mdp);
    double worst = 0.0;
    for (const auto& pi : policies) {
        const Mat q = exact_q(mdp, pi);
        double inner = 0.0;
        for (int s = 0; s < mdp.n_states; ++s)
            inner += oracle.nu_star.weights(s) *
                     q.row(s).dot(pi.probs.row(s) - oracle.pi_star.probs.row(s));
        const double lhs = -optimality_gap(mdp, pi, oracle);
        worst = std::max(worst, std::abs(lhs - inner / (1.0 - mdp.gamma)));
    }
    return identity_check("performance_difference", worst, tol);
}

/// E_{nu*}[<Q^pi, pi - pi*>] <= 0 for every policy.
inline CheckResult check_one_point_monotonicity(const FiniteMdp& mdp,
                                                const std::vector<PolicyTable>& policies,
                                                double tol = 1e-12) {
    const OracleSolution oracle = solve_optimal(mdp);
    double min_slack = std::numeric_limits<double>::infinity();
    for (const auto& pi : policies) {
        const Mat q = exact_q(mdp, pi);
        double inner = 0.0;
        for (int s = 0; s < mdp.n_states; ++s)
            inner += oracle.nu_star.weights(s) *
                     q.row(s).dot(pi.probs.row(s) - oracle.pi_star.probs.row(s));
        min_slack = std::min(min_slack, -inner);
    }
    return inequality_check("one_point_monotonicity", min_slack, tol);
}

inline double min_over_records(const std::vector<IterationRecord>& records,
                               double IterationRecord::*field) {
    double out = std::numeric_limits<double>::infinity();
    for (const auto& r : records) out = std::min(out, r.*field);
    return out;
}

/// The four per-iteration inequalities tracked by the driver, evaluated as
/// min slack over a full run.
inline std::vector<CheckResult> check_run_inequalities(const std::vector<IterationRecord>& records,
                                                       double tol = 1e-10) {
    return {
        inequality_check("pinsker_descent", min_over_records(records, &IterationRecord::slack_l52_min), tol),
        inequality_check("error_propagation", min_over_records(records, &IterationRecord::slack_l46), tol),
        inequality_check("stepwise_energy", min_over_records(records, &IterationRecord::slack_l47), tol),
        inequality_check("policy_perturbation", min_over_records(records, &IterationRecord::slack_b1), tol),
    };
}

// ---- independent oracle for the closed-form KL-regularized update ----

/// Euclidean projection onto the probability simplex.
inline Vec project_to_simplex(Vec v) {
    const int n = static_cast<int>(v.size());
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    for (int i = 0; i < n; ++i) {
        css += u[i];
        const double t = (css - 1.0) / (i + 1);
        if (u[i] - t > 0.0) theta = t;
    }
    return (v.array() - theta).max(0.0).matrix();
}

/// Maximizes <q, pi> - beta KL(pi || pi_ref) over the simplex by projected
/// gradient ascent with backtracking; independent of the softmax formula.
inline Vec kl_best_response_pg(const Vec& q, const Vec& pi_ref, double beta, double tol = 1e-9,
                               long max_iters = 2000000) {
    const int n = static_cast<int>(q.size());
    const auto objective = [&](const Vec& p) {
        double out = 0.0;
        for (int a = 0; a < n; ++a) {
            out += q(a) * p(a);
            if (p(a) > 0.0) out -= beta * p(a) * std::log(p(a) / pi_ref(a));
        }
        return out;
    };
    Vec pi = Vec::Constant(n, 1.0 / n);
    double step = 1.0 / beta;
    for (long it = 0; it < max_iters; ++it) {
        Vec grad(n);
        for (int a = 0; a < n; ++a) {
            const double p = std::max(pi(a), 1e-300);
            grad(a) = q(a) - beta * (std::log(p / pi_ref(a)) + 1.0);
        }
        // fixed point of the unit-step gradient mapping == constrained optimum
        if ((project_to_simplex(pi + grad) - pi).cwiseAbs().maxCoeff() <= tol) break;
        const double f0 = objective(pi);
        Vec next;
        double eta = step;
        for (int bt = 0;; ++bt) {
            next = project_to_simplex(pi + eta * grad);
            if (objective(next) >= f0 || bt >= 60) break;
            eta *= 0.5;
        }
        step = std::min(2.0 * eta, 10.0 / beta);  // let the step recover
        pi = next;
    }
    return pi;
}

/// Checks the softmax closed form of the KL-regularized best response
/// against the projected-gradient oracle on random instances.
inline CheckResult check_closed_form_update(int n_instances, int max_actions, double tol_pg,
                                            double tol_match, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> na(2, max_actions);
    double worst = 0.0;
    for (int inst = 0; inst < n_instances; ++inst) {
        const int n = na(rng);
        Vec q = Vec::NullaryExpr(n, [&]() { return unif(rng); });
        Vec ref = Vec::NullaryExpr(n, [&]() { return 0.05 + unif(rng); });
        ref /= ref.sum();
        const double beta = 0.5 + 4.5 * unif(rng);

        Vec z = (q / beta).array() + ref.array().log();
        z.array() -= z.maxCoeff();
        Vec closed = z.array().exp();
        closed /= closed.sum();

        const Vec pg = kl_best_response_pg(q, ref, beta, tol_pg);
        worst = std::max(worst, (closed - pg).cwiseAbs().maxCoeff());
    }
    return identity_check("closed_form_update", worst, tol_match);
}

// ---- rate fitting and sweeps ----

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const int n = static_cast<int>(xs.size());
    double mx = 0.0, my = 0.0;
    std::vector<double> lx(n), ly(n);
    for (int i = 0; i < n; ++i) {
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(std::max(ys[i], 1e-300));
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return num / den;
}

struct SweepResult {
    std::vector<double> xs;
    std::vector<double> ys;                // median over seeds
    std::vector<std::vector<double>> raw;  // per x, per seed
    double slope = 0.0;
};

inline void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    const int workers = std::min(jobs, n);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (int i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

inline std::uint64_t cell_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Weighted MSE of the averaged iterate against a reference table, for
/// increasing sample sizes. `reference` is the exact solution the averaged
/// output should approach (exact Q for TD, the regression target for SGD).
inline SweepResult solver_rate_sweep(const FiniteMdp& mdp, const PolicyTable& pi, double mu,
                                     const Mat& target, const Mat& reference, int m, double radius,
                                     const std::vector<int>& Ts, int n_seeds,
                                     std::uint64_t base_seed, int jobs = 1) {
    const StateActionDistribution rho = stationary_state_action_distribution(mdp, pi);
    SweepResult out;
    out.xs.assign(Ts.begin(), Ts.end());
    out.raw.assign(Ts.size(), std::vector<double>(n_seeds, 0.0));

    const int n_cells = static_cast<int>(Ts.size()) * n_seeds;
    parallel_for(n_cells, jobs, [&](int cell) {
        const int ti = cell / n_seeds, seed_i = cell % n_seeds;
        std::mt19937_64 rng(cell_seed(base_seed, seed_i));
        MetaProblem problem;
        problem.net = TwoLayerNet::init(m, mdp.d, radius, rng);
        problem.mu = mu;
        problem.target = target;
        problem.mdp = &mdp;
        problem.iterations = Ts[ti];

        std::mt19937_64 cell_rng(cell_seed(base_seed, 1000 + cell));
        const auto samples = sample_batch(mdp, pi, rho, Ts[ti], cell_rng);
        const LearnerOutput result = run(problem, samples);
        const Mat avg_table = net_table(result.averaged_net, mdp);
        out.raw[ti][seed_i] =
            (rho.weights.array() * (avg_table - reference).array().square()).sum();
    });

    out.ys.resize(Ts.size());
    for (size_t ti = 0; ti < Ts.size(); ++ti) out.ys[ti] = median(out.raw[ti]);
    out.slope = loglog_slope(out.xs, out.ys);
    return out;
}

/// MSE of the averaged TD output against the exact action-value function.
inline SweepResult td_rate_sweep(const FiniteMdp& mdp, const PolicyTable& pi, int m, double radius,
                                 const std::vector<int>& Ts, int n_seeds, std::uint64_t base_seed,
                                 int jobs = 1) {
    return solver_rate_sweep(mdp, pi, mdp.gamma, (1.0 - mdp.gamma) * mdp.reward, exact_q(mdp, pi),
                             m, radius, Ts, n_seeds, base_seed, jobs);
}

/// MSE of the averaged SGD output against its regression target, which
/// should be representable within the projection ball.
inline SweepResult sgd_rate_sweep(const FiniteMdp& mdp, const PolicyTable& pi, const Mat& target,
                                  int m, double radius, const std::vector<int>& Ts, int n_seeds,
                                  std::uint64_t base_seed, int jobs = 1) {
    return solver_rate_sweep(mdp, pi, 0.0, target, target, m, radius, Ts, n_seeds, base_seed,
                             jobs);
}

/// E[(u - u0)^2] at the ball boundary as a function of width.
inline SweepResult linearization_sweep(const FiniteMdp& mdp, double radius,
                                       const std::vector<int>& ms, int n_nets,
                                       std::uint64_t seed, int jobs = 1) {
    const int rows = static_cast<int>(mdp.features.rows());
    const Vec weights = Vec::Constant(rows, 1.0 / rows);
    SweepResult out;
    out.xs.assign(ms.begin(), ms.end());
    out.ys.resize(ms.size());
    out.raw.assign(ms.size(), {});
    parallel_for(static_cast<int>(ms.size()), jobs, [&](int i) {
        std::mt19937_64 rng(cell_seed(seed, i));
        out.ys[i] = linearization_gap(ms[i], mdp.d, radius, mdp.features, weights, n_nets, rng);
        out.raw[i] = {out.ys[i]};
    });
    out.slope = loglog_slope(out.xs, out.ys);
    return out;
}

/// Variance of the stochastic update vector at a boundary iterate, as a
/// function of the projection radius.
inline SweepResult variance_sweep(const FiniteMdp& mdp, const PolicyTable& pi, int m,
                                  const std::vector<double>& radii, int n_probes,
                                  std::uint64_t seed, int jobs = 1) {
    const StateActionDistribution rho = stationary_state_action_distribution(mdp, pi);
    SweepResult out;
    out.xs = radii;
    out.ys.resize(radii.size());
    out.raw.assign(radii.size(), {});
    parallel_for(static_cast<int>(radii.size()), jobs, [&](int i) {
        std::mt19937_64 rng(cell_seed(seed, i));
        MetaProblem problem;
        problem.net = TwoLayerNet::init(m, mdp.d, radii[i], rng);
        problem.mu = mdp.gamma;
        problem.target = (1.0 - mdp.gamma) * mdp.reward;
        problem.mdp = &mdp;
        problem.iterations = 1;
        // boundary iterate whose function values scale with the radius:
        // perturb inside the span of the gradients at the data points
        std::normal_distribution<double> gauss(0.0, 1.0);
        Mat dir = Mat::Zero(m, mdp.d);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a)
                dir += gauss(rng) * problem.net.grad(mdp.feature(s, a).transpose());
        problem.net.set_weights(problem.net.init_weights() + (radii[i] / dir.norm()) * dir);
        out.ys[i] = empirical_update_variance(problem, pi, rho, n_probes, rng);
        out.raw[i] = {out.ys[i]};
    });
    out.slope = loglog_slope(out.xs, out.ys);
    return out;
}

/// Best optimality gap over a run, as a function of the iteration budget K.
/// Also returns the records of the largest-K run of the first seed so the
/// caller can compare the end of training against the start.
struct GlobalRateResult {
    SweepResult sweep;
    std::vector<IterationRecord> largest_k_records;
};

inline GlobalRateResult global_rate_sweep(const FiniteMdp& mdp, RunConfig base,
                                          const std::vector<int>& Ks, int n_seeds,
                                          std::uint64_t base_seed, int jobs = 1) {
    GlobalRateResult out;
    out.sweep.xs.assign(Ks.begin(), Ks.end());
    out.sweep.raw.assign(Ks.size(), std::vector<double>(n_seeds, 0.0));
    std::vector<std::vector<IterationRecord>> kept(Ks.size() * n_seeds);

    parallel_for(static_cast<int>(Ks.size()) * n_seeds, jobs, [&](int cell) {
        const int ki = cell / n_seeds, seed_i = cell % n_seeds;
        RunConfig cfg = base;
        cfg.K = Ks[ki];
        cfg.seed = cell_seed(base_seed, cell);
        const RunResult result = run(cfg, mdp);
        out.sweep.raw[ki][seed_i] = result.best_gap;
        if (ki + 1 == static_cast<int>(Ks.size()) && seed_i == 0)
            kept[cell] = result.records;
    });

    out.sweep.ys.resize(Ks.size());
    for (size_t ki = 0; ki < Ks.size(); ++ki) out.sweep.ys[ki] = median(out.sweep.raw[ki]);
    out.sweep.slope = loglog_slope(out.sweep.xs, out.sweep.ys);
    out.largest_k_records = kept[(Ks.size() - 1) * n_seeds];
    return out;
}

}  // namespace nppo
