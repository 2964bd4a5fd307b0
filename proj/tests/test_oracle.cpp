#include "nppo/oracle.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace nppo;

namespace {
// two actions with identical dynamics; action 0 pays 1, action 1 pays 0
FiniteMdp reward_only_mdp() {
    FiniteMdp mdp;
    mdp.n_states = 2;
    mdp.n_actions = 2;
    mdp.gamma = 0.9;
    mdp.eps_mix = 0.0;
    mdp.reward = Mat(2, 2);
    mdp.reward << 1.0, 0.0, 1.0, 0.0;
    Mat P(2, 2);
    P << 0.5, 0.5, 0.5, 0.5;
    mdp.transition = {P, P};
    mdp.d = 4;
    mdp.features = Mat::Identity(4, 4);
    return mdp;
}
}  // namespace

TEST_CASE("optimal policy of a reward-only MDP") {
    const FiniteMdp mdp = reward_only_mdp();
    const OracleSolution sol = solve_optimal(mdp);
    for (int s = 0; s < 2; ++s) {
        CHECK(sol.pi_star.probs(s, 0) == 1.0);
        // always collecting reward 1 gives scaled value exactly 1
        CHECK(sol.v_star(s) == Catch::Approx(1.0).epsilon(1e-10));
        CHECK(sol.q_star(s, 0) == Catch::Approx(1.0).epsilon(1e-10));
        CHECK(sol.q_star(s, 1) == Catch::Approx(1.0 - (1.0 - mdp.gamma)).epsilon(1e-10));
    }
    CHECK(sol.l_star == Catch::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("greedy tie-break picks the lowest action index") {
    FiniteMdp mdp = reward_only_mdp();
    mdp.reward << 1.0, 1.0, 1.0, 1.0;  // actions indistinguishable
    const OracleSolution sol = solve_optimal(mdp);
    CHECK(sol.pi_star.probs(0, 0) == 1.0);
    CHECK(sol.pi_star.probs(1, 0) == 1.0);
}

TEST_CASE("optimal value dominates every sampled policy") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const FiniteMdp mdp = generate_mdp(5, 3, 0.9, seed);
        const OracleSolution sol = solve_optimal(mdp);

        // Bellman optimality: V*(s) = max_a Q*(s,a)
        for (int s = 0; s < 5; ++s)
            CHECK(std::abs(sol.v_star(s) - sol.q_star.row(s).maxCoeff()) < 1e-10);

        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.01, 1.0);
        for (int rep = 0; rep < 20; ++rep) {
            PolicyTable pi = PolicyTable::uniform(5, 3);
            for (int s = 0; s < 5; ++s) {
                for (int a = 0; a < 3; ++a) pi.probs(s, a) = unif(rng);
                pi.probs.row(s) /= pi.probs.row(s).sum();
            }
            const Vec v = exact_v(mdp, pi);
            for (int s = 0; s < 5; ++s) CHECK(sol.v_star(s) >= v(s) - 1e-10);
            CHECK(optimality_gap(mdp, pi, sol) >= -1e-10);
        }
        CHECK(optimality_gap(mdp, sol.pi_star, sol) < 1e-10);
    }
}

TEST_CASE("stationary quantities of the optimal policy are consistent") {
    const FiniteMdp mdp = generate_mdp(4, 3, 0.8, 9);
    const OracleSolution sol = solve_optimal(mdp);
    CHECK(sol.nu_star.weights.sum() == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(sol.sigma_star.weights.sum() == Catch::Approx(1.0).epsilon(1e-12));
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 3; ++a)
            CHECK(sol.sigma_star.weights(s, a) ==
                  Catch::Approx(sol.nu_star.weights(s) * sol.pi_star.probs(s, a)).margin(1e-14));
    CHECK(sol.l_star == Catch::Approx(sol.nu_star.weights.dot(sol.v_star)).margin(1e-14));
}

TEST_CASE("density-ratio coefficients vanish when the policy is optimal") {
    // mix the deterministic optimum slightly so the stationary chain of pi_k
    // is the same object the coefficients integrate over
    const FiniteMdp mdp = generate_mdp(4, 2, 0.9, 10);
    const OracleSolution sol = solve_optimal(mdp);
    const auto [phi, psi] = density_ratio_coeffs(mdp, sol.pi_star, sol);
    CHECK(phi == Catch::Approx(0.0).margin(1e-9));
    CHECK(psi == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("density-ratio coefficients against a direct finite sum") {
    const FiniteMdp mdp = generate_mdp(3, 2, 0.9, 11);
    const OracleSolution sol = solve_optimal(mdp);
    PolicyTable pi = PolicyTable::uniform(3, 2);
    pi.probs << 0.6, 0.4, 0.3, 0.7, 0.5, 0.5;
    const auto [phi, psi] = density_ratio_coeffs(mdp, pi, sol);

    const StateDistribution nu_k = stationary_state_distribution(mdp, pi);
    double phi_sq = 0.0, psi_sq = 0.0;
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) {
            const double aux = nu_k.weights(s) * 0.5;
            const double diff = 2.0 * sol.pi_star.probs(s, a) - 2.0 * pi.probs(s, a);
            phi_sq += aux * diff * diff;
            const double sig = nu_k.weights(s) * pi.probs(s, a);
            const double rd = sol.nu_star.weights(s) * sol.pi_star.probs(s, a) / sig -
                              sol.nu_star.weights(s) / nu_k.weights(s);
            psi_sq += sig * rd * rd;
        }
    CHECK(phi == Catch::Approx(std::sqrt(phi_sq)).margin(1e-12));
    CHECK(psi == Catch::Approx(std::sqrt(psi_sq)).margin(1e-12));
}

TEST_CASE("ideal policy from the exact critic matches the two-step construction") {
    const FiniteMdp mdp = generate_mdp(3, 3, 0.9, 12);
    std::mt19937_64 rng(13);
    std::normal_distribution<double> gauss(0.0, 1.0);
    EnergyPolicy ep;
    ep.tau = 0.8;
    ep.energy.values = Mat::NullaryExpr(3, 3, [&]() { return gauss(rng); });
    const EnergyPolicy next = ideal_policy_from_exact_q(mdp, ep, 2.5);
    const Mat q = exact_q(mdp, to_policy_table(ep, mdp));
    const Mat want = q / 2.5 + ep.energy.values / 0.8;
    CHECK((next.energy.values - want).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(next.tau == 1.0);
}
