#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace nppo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Row-stochastic table probs(s, a) = pi(a|s).
struct PolicyTable {
    Mat probs;

    int n_states() const { return static_cast<int>(probs.rows()); }
    int n_actions() const { return static_cast<int>(probs.cols()); }

    static PolicyTable uniform(int n_states, int n_actions) {
        PolicyTable pi;
        pi.probs = Mat::Constant(n_states, n_actions, 1.0 / n_actions);
        return pi;
    }
};

/// Distribution over states.
struct StateDistribution {
    Vec weights;
};

/// Distribution over (s, a) pairs, stored as an S x A table.
struct StateActionDistribution {
    Mat weights;
};

/// Finite MDP with a feature embedding of each (s, a) pair into the unit
/// ball of R^d. transition[a] is the S x S kernel for action a.
struct FiniteMdp {
    int n_states = 0;
    int n_actions = 0;
    int d = 0;
    double gamma = 0.0;
    double eps_mix = 0.0;
    Mat reward;                    // S x A
    std::vector<Mat> transition;   // per action, S x S
    Mat features;                  // (S*A) x d, row index s * n_actions + a

    double trans(int s, int a, int s2) const { return transition[a](s, s2); }

    Eigen::Ref<const Eigen::RowVectorXd> feature(int s, int a) const {
        return features.row(s * n_actions + a);
    }

    double r_max() const { return reward.cwiseAbs().maxCoeff(); }
};

inline std::vector<std::string> validate(const FiniteMdp& mdp) {
    std::vector<std::string> violations;
    if (mdp.n_states < 1 || mdp.n_actions < 1)
        violations.push_back("sizes: n_states and n_actions must be >= 1");
    if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0))
        violations.push_back("gamma: must lie in (0,1)");
    if (mdp.reward.rows() != mdp.n_states || mdp.reward.cols() != mdp.n_actions)
        violations.push_back("reward: wrong shape");
    if (static_cast<int>(mdp.transition.size()) != mdp.n_actions) {
        violations.push_back("transition: wrong number of action kernels");
        return violations;
    }
    for (int a = 0; a < mdp.n_actions; ++a) {
        const Mat& P = mdp.transition[a];
        if (P.rows() != mdp.n_states || P.cols() != mdp.n_states) {
            violations.push_back("transition: kernel " + std::to_string(a) + " has wrong shape");
            continue;
        }
        for (int s = 0; s < mdp.n_states; ++s) {
            if (P.row(s).minCoeff() < 0.0)
                violations.push_back("transition: negative entry at (s=" + std::to_string(s) +
                                     ", a=" + std::to_string(a) + ")");
            if (std::abs(P.row(s).sum() - 1.0) > 1e-12)
                violations.push_back("row stochasticity: row (s=" + std::to_string(s) +
                                     ", a=" + std::to_string(a) + ") sums to " +
                                     std::to_string(P.row(s).sum()));
            if (mdp.eps_mix > 0.0 && P.row(s).minCoeff() < mdp.eps_mix - 1e-15)
                violations.push_back("ergodicity floor: entry below eps_mix in row (s=" +
                                     std::to_string(s) + ", a=" + std::to_string(a) + ")");
        }
    }
    if (mdp.features.rows() != mdp.n_states * mdp.n_actions || mdp.features.cols() != mdp.d) {
        violations.push_back("features: wrong shape");
    } else {
        for (int i = 0; i < mdp.features.rows(); ++i)
            if (mdp.features.row(i).norm() > 1.0 + 1e-12)
                violations.push_back("features: row " + std::to_string(i) +
                                     " outside the unit ball");
    }
    if (!mdp.reward.allFinite()) violations.push_back("reward: non-finite entry");
    return violations;
}

inline void validate_policy(const FiniteMdp& mdp, const PolicyTable& pi) {
    if (pi.n_states() != mdp.n_states || pi.n_actions() != mdp.n_actions)
        throw std::invalid_argument("policy shape does not match MDP");
    for (int s = 0; s < pi.n_states(); ++s) {
        if (std::abs(pi.probs.row(s).sum() - 1.0) > 1e-12 || pi.probs.row(s).minCoeff() < 0.0)
            throw std::invalid_argument("policy row " + std::to_string(s) +
                                        " is not a probability distribution");
    }
}

/// P^pi[s][s'] = sum_a pi(a|s) P(s'|s,a).
inline Mat policy_transition(const FiniteMdp& mdp, const PolicyTable& pi) {
    validate_policy(mdp, pi);
    Mat P = Mat::Zero(mdp.n_states, mdp.n_states);
    for (int a = 0; a < mdp.n_actions; ++a)
        P += pi.probs.col(a).asDiagonal() * mdp.transition[a];
    return P;
}

/// Power iteration for the left fixed point nu P = nu.
inline StateDistribution stationary_state_distribution(const FiniteMdp& mdp,
                                                       const PolicyTable& pi,
                                                       double tol = 1e-12,
                                                       long max_iters = 1000000) {
    const Mat P = policy_transition(mdp, pi);
    Vec nu = Vec::Constant(mdp.n_states, 1.0 / mdp.n_states);
    for (long it = 0; it < max_iters; ++it) {
        Vec next = P.transpose() * nu;
        next /= next.sum();
        const double diff = (next - nu).cwiseAbs().maxCoeff();
        nu = next;
        if (diff <= tol) return StateDistribution{nu};
    }
    throw std::runtime_error("stationary distribution: power iteration did not converge "
                             "(chain may not be ergodic)");
}

/// sigma_pi(s,a) = pi(a|s) nu_pi(s).
inline StateActionDistribution stationary_state_action_distribution(const FiniteMdp& mdp,
                                                                    const PolicyTable& pi) {
    const StateDistribution nu = stationary_state_distribution(mdp, pi);
    StateActionDistribution sigma;
    sigma.weights = nu.weights.asDiagonal() * pi.probs;
    return sigma;
}

/// sigma~_k = nu_k pi_0 with pi_0 uniform.
inline StateActionDistribution auxiliary_distribution(const FiniteMdp& mdp,
                                                      const PolicyTable& pi_k) {
    const StateDistribution nu = stationary_state_distribution(mdp, pi_k);
    StateActionDistribution sigma;
    sigma.weights = nu.weights.replicate(1, mdp.n_actions) / mdp.n_actions;
    return sigma;
}

/// Q^pi with the (1-gamma) prefactor: Q = (1-gamma) r + gamma P Pi Q,
/// solved as a dense linear system over (s,a) pairs.
inline Mat exact_q(const FiniteMdp& mdp, const PolicyTable& pi) {
    validate_policy(mdp, pi);
    const int S = mdp.n_states, A = mdp.n_actions, n = S * A;
    Mat K = Mat::Identity(n, n);
    Vec b(n);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int row = s * A + a;
            b(row) = (1.0 - mdp.gamma) * mdp.reward(s, a);
            for (int s2 = 0; s2 < S; ++s2)
                for (int a2 = 0; a2 < A; ++a2)
                    K(row, s2 * A + a2) -= mdp.gamma * mdp.trans(s, a, s2) * pi.probs(s2, a2);
        }
    Eigen::PartialPivLU<Mat> lu(K);
    const Vec q = lu.solve(b);
    if ((K * q - b).cwiseAbs().maxCoeff() > 1e-10)
        throw std::runtime_error("exact_q: linear solve residual too large");
    Mat Q(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) Q(s, a) = q(s * A + a);
    return Q;
}

/// V^pi(s) = <Q^pi(s,.), pi(.|s)>.
inline Vec exact_v(const FiniteMdp& mdp, const PolicyTable& pi) {
    const Mat Q = exact_q(mdp, pi);
    return (Q.array() * pi.probs.array()).rowwise().sum();
}

inline Vec exact_v(const Mat& q, const PolicyTable& pi) {
    return (q.array() * pi.probs.array()).rowwise().sum();
}

/// One Algorithm-1 sample: (s,a) ~ sigma_k, a0 ~ pi_0(.|s),
/// s' ~ P(.|s,a), a' ~ pi_k(.|s').
struct SampleTuple {
    int s, a, a0, s_next, a_next;
};

namespace detail {
inline int draw_categorical(const double* w, int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng), acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += w[i];
        if (u <= acc) return i;
    }
    return n - 1;
}
}  // namespace detail

inline std::vector<SampleTuple> sample_batch(const FiniteMdp& mdp, const PolicyTable& pi_k,
                                             const StateActionDistribution& sigma_k, int T,
                                             std::mt19937_64& rng) {
    const int S = mdp.n_states, A = mdp.n_actions;
    std::vector<double> flat(S * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) flat[s * A + a] = sigma_k.weights(s, a);
    std::uniform_int_distribution<int> unif_action(0, A - 1);

    std::vector<SampleTuple> batch;
    batch.reserve(T);
    std::vector<double> row(S), arow(A);
    for (int t = 0; t < T; ++t) {
        const int sa = detail::draw_categorical(flat.data(), S * A, rng);
        const int s = sa / A, a = sa % A;
        const int a0 = unif_action(rng);
        for (int s2 = 0; s2 < S; ++s2) row[s2] = mdp.trans(s, a, s2);
        const int s_next = detail::draw_categorical(row.data(), S, rng);
        for (int a2 = 0; a2 < A; ++a2) arow[a2] = pi_k.probs(s_next, a2);
        const int a_next = detail::draw_categorical(arow.data(), A, rng);
        batch.push_back({s, a, a0, s_next, a_next});
    }
    return batch;
}

enum class FeatureKind { RandomUnit, OneHot };

/// Random ergodic MDP: uniform rewards in [0,1], Dirichlet-like rows mixed
/// with the uniform distribution so every entry is >= eps_mix.
inline FiniteMdp generate_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed,
                              double eps_mix = 1e-3, int d = 8,
                              FeatureKind features = FeatureKind::RandomUnit) {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("generate_mdp: sizes must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("generate_mdp: gamma must be in (0,1)");
    if (eps_mix * n_states > 1.0) throw std::invalid_argument("generate_mdp: eps_mix too large");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    FiniteMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.eps_mix = eps_mix;

    mdp.reward = Mat::NullaryExpr(n_states, n_actions, [&]() { return unif(rng); });

    const double lambda = eps_mix * n_states;
    mdp.transition.resize(n_actions);
    std::exponential_distribution<double> expo(1.0);
    for (int a = 0; a < n_actions; ++a) {
        Mat P(n_states, n_states);
        for (int s = 0; s < n_states; ++s) {
            Vec row = Vec::NullaryExpr(n_states, [&]() { return expo(rng); });
            row /= row.sum();
            P.row(s) = ((1.0 - lambda) * row.array() + eps_mix).matrix().transpose();
            P(s, s) += 1.0 - P.row(s).sum();  // absorb roundoff so validate() sees exact rows
        }
        mdp.transition[a] = P;
    }

    if (features == FeatureKind::OneHot) {
        // orthonormal rows; padding the ambient dimension beyond S*A shrinks
        // the random initial function (which scales as 1/sqrt(d)) without
        // changing the induced kernel
        mdp.d = std::max(d, n_states * n_actions);
        mdp.features = Mat::Identity(n_states * n_actions, mdp.d);
    } else {
        mdp.d = d;
        mdp.features.resize(n_states * n_actions, d);
        for (int i = 0; i < mdp.features.rows(); ++i) {
            Vec v = Vec::NullaryExpr(d, [&]() { return gauss(rng); });
            mdp.features.row(i) = (0.9 / v.norm()) * v.transpose();
        }
    }
    return mdp;
}

}  // namespace nppo
