#include "nppo/harness.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace nppo;

TEST_CASE("simplex projection known values") {
    Vec v(2);
    v << 1.2, 0.3;
    Vec p = project_to_simplex(v);
    CHECK(p(0) == Catch::Approx(0.95).margin(1e-14));
    CHECK(p(1) == Catch::Approx(0.05).margin(1e-14));

    v << 5.0, -3.0;
    p = project_to_simplex(v);
    CHECK(p(0) == Catch::Approx(1.0).margin(1e-14));
    CHECK(p(1) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("simplex projection is the nearest feasible point") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> gauss(0.0, 2.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        Vec v = Vec::NullaryExpr(5, [&]() { return gauss(rng); });
        const Vec p = project_to_simplex(v);
        CHECK(p.minCoeff() >= 0.0);
        CHECK(p.sum() == Catch::Approx(1.0).margin(1e-12));
        CHECK((project_to_simplex(p) - p).cwiseAbs().maxCoeff() < 1e-12);
        for (int cand = 0; cand < 20; ++cand) {
            Vec q = Vec::NullaryExpr(5, [&]() { return unif(rng); });
            q /= q.sum();
            CHECK((v - p).squaredNorm() <= (v - q).squaredNorm() + 1e-12);
        }
    }
}

TEST_CASE("projected-gradient best response matches the softmax closed form") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        const int n = 3 + rep;
        Vec q = Vec::NullaryExpr(n, [&]() { return unif(rng); });
        Vec ref = Vec::NullaryExpr(n, [&]() { return 0.1 + unif(rng); });
        ref /= ref.sum();
        const double beta = 0.5 + 2.0 * unif(rng);
        Vec z = (q / beta).array() + ref.array().log();
        z.array() -= z.maxCoeff();
        Vec closed = z.array().exp();
        closed /= closed.sum();
        const Vec pg = kl_best_response_pg(q, ref, beta, 1e-10);
        CHECK((closed - pg).cwiseAbs().maxCoeff() < 1e-7);
    }
    const CheckResult suite = check_closed_form_update(20, 8, 1e-9, 1e-6, 0);
    CHECK(suite.pass);
}

TEST_CASE("log-log slope recovers exact power laws") {
    std::vector<double> xs = {2, 8, 32, 128};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(3.7 * std::pow(x, -0.5));
    CHECK(loglog_slope(xs, ys) == Catch::Approx(-0.5).margin(1e-12));
    ys.clear();
    for (double x : xs) ys.push_back(0.01 * std::pow(x, 2.0));
    CHECK(loglog_slope(xs, ys) == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("median of odd and even length samples") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(median({5.0}) == 5.0);
}

TEST_CASE("check constructors encode pass conditions") {
    CHECK(identity_check("x", 1e-12, 1e-10).pass);
    CHECK_FALSE(identity_check("x", 1e-9, 1e-10).pass);
    CHECK(inequality_check("x", -1e-12, 1e-10).pass);
    CHECK(inequality_check("x", 5.0, 1e-10).pass);
    CHECK_FALSE(inequality_check("x", -1e-9, 1e-10).pass);
    CHECK(rate_check("x", -0.5, -0.4).pass);
    CHECK_FALSE(rate_check("x", -0.3, -0.4).pass);
}

TEST_CASE("parallel_for covers every index once and propagates exceptions") {
    std::vector<int> hits(100, 0);
    parallel_for(100, 4, [&](int i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](int i) {
                                     if (i == 7) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}

TEST_CASE("cell seeds are distinct and stable") {
    CHECK(cell_seed(0, 1) != cell_seed(0, 2));
    CHECK(cell_seed(0, 1) != cell_seed(1, 1));
    CHECK(cell_seed(42, 7) == cell_seed(42, 7));
}

TEST_CASE("identity suite holds on random MDP/policy pairs") {
    std::mt19937_64 rng(3);
    const FiniteMdp mdp = generate_mdp(5, 3, 0.9, 4);
    std::vector<PolicyTable> pis;
    for (int p = 0; p < 10; ++p) pis.push_back(random_policy(5, 3, rng));
    CHECK(check_performance_difference(mdp, pis).pass);
    CHECK(check_one_point_monotonicity(mdp, pis).pass);
}

TEST_CASE("sweeps are deterministic across worker counts") {
    const FiniteMdp mdp = generate_mdp(2, 2, 0.5, 42, 1e-3, 8, FeatureKind::OneHot);
    const PolicyTable pi = PolicyTable::uniform(2, 2);
    const std::vector<int> Ts = {16, 64};
    const SweepResult a = td_rate_sweep(mdp, pi, 64, 5.0, Ts, 2, 9, 1);
    const SweepResult b = td_rate_sweep(mdp, pi, 64, 5.0, Ts, 2, 9, 4);
    REQUIRE(a.ys.size() == b.ys.size());
    for (size_t i = 0; i < a.ys.size(); ++i) CHECK(a.ys[i] == b.ys[i]);
    CHECK(a.slope == b.slope);
}

TEST_CASE("rate sweeps decrease their error measures") {
    const FiniteMdp mdp = generate_mdp(2, 2, 0.5, 42, 1e-3, 8, FeatureKind::OneHot);
    const PolicyTable pi = PolicyTable::uniform(2, 2);
    const SweepResult td = td_rate_sweep(mdp, pi, 256, 5.0, {64, 1024}, 2, 1, 1);
    CHECK(td.ys.back() < td.ys.front());
    const SweepResult lin = linearization_sweep(mdp, 5.0, {64, 1024}, 4, 2, 1);
    CHECK(lin.ys.back() < lin.ys.front());
    CHECK(lin.ys.front() > 0.0);
}
