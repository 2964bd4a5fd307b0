#include "nppo/policy.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace nppo;

TEST_CASE("softmax policy rows are distributions and shift-invariant") {
    const FiniteMdp mdp = generate_mdp(4, 3, 0.9, 1);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> gauss(0.0, 3.0);
    EnergyPolicy ep;
    ep.tau = 0.7;
    ep.energy.values = Mat::NullaryExpr(4, 3, [&]() { return gauss(rng); });
    const PolicyTable pi = to_policy_table(ep, mdp);
    for (int s = 0; s < 4; ++s) {
        CHECK(pi.probs.row(s).sum() == Catch::Approx(1.0).epsilon(1e-12));
        CHECK(pi.probs.row(s).minCoeff() > 0.0);
    }
    EnergyPolicy shifted = ep;
    for (int s = 0; s < 4; ++s) shifted.energy.values.row(s).array() += 100.0 * (s + 1);
    const PolicyTable pi2 = to_policy_table(shifted, mdp);
    CHECK((pi.probs - pi2.probs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("softmax matches the explicit two-action formula") {
    const FiniteMdp mdp = generate_mdp(1, 2, 0.9, 3);
    EnergyPolicy ep;
    ep.tau = 2.0;
    ep.energy.values = Mat(1, 2);
    ep.energy.values << 1.0, 0.0;
    const PolicyTable pi = to_policy_table(ep, mdp);
    const double want = 1.0 / (1.0 + std::exp(-0.5));
    CHECK(pi.probs(0, 0) == Catch::Approx(want).epsilon(1e-14));
}

TEST_CASE("zero energy gives the uniform policy") {
    const FiniteMdp mdp = generate_mdp(3, 4, 0.9, 4);
    const EnergyPolicy ep{EnergyFn::zero(3, 4), 1.0};
    const PolicyTable pi = to_policy_table(ep, mdp);
    CHECK((pi.probs.array() - 0.25).abs().maxCoeff() == 0.0);
}

TEST_CASE("net residual energy vanishes at initialization") {
    const FiniteMdp mdp = generate_mdp(3, 2, 0.9, 5);
    std::mt19937_64 rng(6);
    TwoLayerNet net = TwoLayerNet::init(64, mdp.d, 1.0, rng);
    const EnergyFn f0 = EnergyFn::from_net_residual(net, mdp);
    CHECK(f0.values.cwiseAbs().maxCoeff() == 0.0);

    net.sgd_step(mdp.feature(0, 0).transpose(), 1.0, 0.1);
    const EnergyFn f1 = EnergyFn::from_net_residual(net, mdp);
    TwoLayerNet at_init = net;
    at_init.set_weights(net.init_weights());
    const Eigen::VectorXd x = mdp.feature(1, 1).transpose();
    CHECK(f1.values(1, 1) == Catch::Approx(net.forward(x) - at_init.forward(x)).margin(1e-14));
}

TEST_CASE("to_policy_table validates inputs") {
    const FiniteMdp mdp = generate_mdp(2, 2, 0.9, 7);
    EnergyPolicy ep{EnergyFn::zero(2, 2), 0.0};
    CHECK_THROWS(to_policy_table(ep, mdp));
    ep.tau = 1.0;
    ep.energy.values(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(to_policy_table(ep, mdp));
    EnergyPolicy wrong{EnergyFn::zero(3, 2), 1.0};
    CHECK_THROWS(to_policy_table(wrong, mdp));
}

TEST_CASE("kl divergence basics") {
    Eigen::RowVectorXd p(3), q(3);
    p << 0.2, 0.5, 0.3;
    q << 0.2, 0.5, 0.3;
    CHECK(kl(p, q) == 0.0);
    q << 0.3, 0.4, 0.3;
    CHECK(kl(p, q) > 0.0);
    double direct = 0.0;
    for (int i = 0; i < 3; ++i) direct += p(i) * std::log(p(i) / q(i));
    CHECK(kl(p, q) == Catch::Approx(direct).margin(1e-15));
    q << 0.7, 0.3, 0.0;
    CHECK(std::isinf(kl(p, q)));
    p << 0.7, 0.3, 0.0;  // zero mass in p is fine
    CHECK(std::isfinite(kl(p, q)));
}

TEST_CASE("pinsker inequality on random rows") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unif(0.01, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        Eigen::RowVectorXd p(4), q(4);
        for (int i = 0; i < 4; ++i) {
            p(i) = unif(rng);
            q(i) = unif(rng);
        }
        p /= p.sum();
        q /= q.sum();
        const double l1 = (p - q).cwiseAbs().sum();
        CHECK(kl(p, q) >= 0.5 * l1 * l1 - 1e-14);
    }
}

TEST_CASE("expected kl weights per-state divergences") {
    const FiniteMdp mdp = generate_mdp(2, 2, 0.9, 9);
    PolicyTable p = PolicyTable::uniform(2, 2), q = PolicyTable::uniform(2, 2);
    q.probs << 0.8, 0.2, 0.5, 0.5;
    StateDistribution nu{Vec(2)};
    nu.weights << 0.25, 0.75;
    const double want = 0.25 * kl(p.probs.row(0), q.probs.row(0));
    CHECK(expected_kl(nu, p, q) == Catch::Approx(want).margin(1e-15));
}

TEST_CASE("ideal update is the multiplicative-weights step") {
    const FiniteMdp mdp = generate_mdp(4, 3, 0.9, 10);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss(0.0, 1.0);
    EnergyPolicy ep;
    ep.tau = 0.6;
    ep.energy.values = Mat::NullaryExpr(4, 3, [&]() { return gauss(rng); });
    const Mat q = Mat::NullaryExpr(4, 3, [&]() { return gauss(rng); });
    const double beta = 1.7;

    const PolicyTable pi_k = to_policy_table(ep, mdp);
    const PolicyTable pi_next = to_policy_table(ideal_update(ep, q, beta), mdp);

    // oracle built from the probabilities, not the energies:
    // pi_{k+1}(a|s) proportional to pi_k(a|s) * exp(Q(s,a)/beta)
    for (int s = 0; s < 4; ++s) {
        Eigen::RowVectorXd w =
            pi_k.probs.row(s).array() * (q.row(s).array() / beta).exp();
        w /= w.sum();
        CHECK((pi_next.probs.row(s) - w).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("ideal update maximizes the KL-regularized objective") {
    const FiniteMdp mdp = generate_mdp(3, 3, 0.9, 12);
    std::mt19937_64 rng(13);
    std::normal_distribution<double> gauss(0.0, 1.0);
    EnergyPolicy ep;
    ep.tau = 1.0;
    ep.energy.values = Mat::NullaryExpr(3, 3, [&]() { return gauss(rng); });
    const Mat q = Mat::NullaryExpr(3, 3, [&]() { return gauss(rng); });
    const double beta = 2.0;
    const PolicyTable pi_k = to_policy_table(ep, mdp);
    const PolicyTable opt = to_policy_table(ideal_update(ep, q, beta), mdp);

    std::uniform_real_distribution<double> unif(0.01, 1.0);
    const auto value = [&](const PolicyTable& pi, int s) {
        return q.row(s).dot(pi.probs.row(s)) - beta * kl(pi.probs.row(s), pi_k.probs.row(s));
    };
    for (int rep = 0; rep < 100; ++rep) {
        PolicyTable cand = opt;
        for (int s = 0; s < 3; ++s) {
            for (int a = 0; a < 3; ++a) cand.probs(s, a) = unif(rng);
            cand.probs.row(s) /= cand.probs.row(s).sum();
            CHECK(value(opt, s) >= value(cand, s) - 1e-12);
        }
    }
}

TEST_CASE("policy gap is the weighted squared difference") {
    PolicyTable a = PolicyTable::uniform(2, 2), b = PolicyTable::uniform(2, 2);
    b.probs << 0.75, 0.25, 0.5, 0.5;
    StateActionDistribution dist;
    dist.weights = Mat(2, 2);
    dist.weights << 0.4, 0.1, 0.3, 0.2;
    const double want = 0.4 * 0.0625 + 0.1 * 0.0625;
    CHECK(policy_gap_sq(a, b, dist) == Catch::Approx(want).margin(1e-15));
}
