#include "nppo/harness.hpp"
#include "nppo/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace nppo;

namespace {

FiniteMdp load_or_default(const std::string& path, std::uint64_t seed) {
    if (!path.empty()) return load_mdp(path);
    // the reference environment used throughout the check suites
    return generate_mdp(5, 3, 0.9, seed);
}

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

int finish_checks(const std::vector<CheckResult>& checks, const std::string& out_dir,
                  const Json& config) {
    print_check_table(checks, std::cout);
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        Json j = manifest("check", config, "", checks_to_json(checks));
        save_json(j, out_dir + "/checks.json");
    }
    for (const auto& c : checks)
        if (!c.pass) return 1;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-MDP PPO with two-layer ReLU actor/critic and verification suites"};
    app.require_subcommand(1);

    // ---- generate-mdp ----
    auto* gen = app.add_subcommand("generate-mdp", "generate a random ergodic MDP");
    int gen_states = 5, gen_actions = 3, gen_d = 8;
    double gen_gamma = 0.9, gen_eps = 1e-3;
    std::uint64_t gen_seed = 0;
    std::string gen_features = "random";
    std::string gen_out;
    gen->add_option("--states", gen_states, "number of states");
    gen->add_option("--actions", gen_actions, "number of actions");
    gen->add_option("--gamma", gen_gamma, "discount factor in (0,1)");
    gen->add_option("--eps-mix", gen_eps, "uniform mixing floor for transition rows");
    gen->add_option("--d", gen_d, "feature dimension (random features)");
    gen->add_option("--features", gen_features, "feature kind: random | one-hot");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output JSON path")->required();

    // ---- validate-mdp ----
    auto* val = app.add_subcommand("validate-mdp", "check an MDP file against the invariants");
    std::string val_mdp;
    val->add_option("--mdp", val_mdp, "MDP JSON path")->required();

    // ---- run ----
    auto* runc = app.add_subcommand("run", "run PPO and write per-iteration records");
    std::string run_mdp, run_out;
    RunConfig cfg;
    int run_T = 2000;
    std::uint64_t run_mdp_seed = 42;
    runc->add_option("--mdp", run_mdp, "MDP JSON path (default: reference MDP)");
    runc->add_option("--beta", cfg.beta, "penalty scale; beta_k = beta sqrt(K)");
    runc->add_option("--K", cfg.K, "outer iterations");
    runc->add_option("--T", run_T, "inner solver steps (actor and critic)");
    runc->add_option("--t-critic", cfg.T_critic, "critic steps (overrides --T for the critic)");
    runc->add_option("--m", cfg.m, "network width");
    runc->add_option("--rf", cfg.r_actor, "actor projection radius");
    runc->add_option("--rq", cfg.r_critic, "critic projection radius");
    runc->add_option("--seed", cfg.seed, "run seed");
    runc->add_option("--out", run_out, "output directory")->required();
    auto* tc_opt = runc->get_option("--t-critic");

    // ---- sweep ----
    auto* sweep = app.add_subcommand("sweep", "rate sweeps over T, m, R, or K");
    std::string sw_kind, sw_mdp, sw_out;
    int sw_m = 4096, sw_seeds = 3, sw_jobs = 1, sw_T = 4096;
    double sw_radius = 5.0, sw_beta = 1.0;
    std::uint64_t sw_seed = 0;
    sweep->add_option("--kind", sw_kind, "td | sgd | linearization | variance | global")
        ->required();
    sweep->add_option("--mdp", sw_mdp, "MDP JSON path (default depends on kind)");
    sweep->add_option("--m", sw_m, "network width");
    sweep->add_option("--rf", sw_radius, "projection radius");
    sweep->add_option("--beta", sw_beta, "penalty scale (global sweep)");
    sweep->add_option("--T", sw_T, "inner steps per iteration (global sweep)");
    sweep->add_option("--n-seeds", sw_seeds, "seeds per grid point");
    sweep->add_option("--seed", sw_seed, "base seed");
    sweep->add_option("--jobs", sw_jobs, "parallel workers");
    sweep->add_option("--out", sw_out, "output directory")->required();

    // ---- check ----
    auto* check = app.add_subcommand("check", "identity / inequality check suites");
    std::string ck_suite = "all", ck_mdp, ck_out;
    std::uint64_t ck_seed = 0;
    int ck_K = 50, ck_T = 2000, ck_m = 512;
    double ck_beta = 1.0;
    check->add_option("--suite", ck_suite, "identity | closed-form | run | all");
    check->add_option("--mdp", ck_mdp, "MDP JSON path (run suite; default: reference MDP)");
    check->add_option("--beta", ck_beta, "penalty scale (run suite)");
    check->add_option("--K", ck_K, "outer iterations (run suite)");
    check->add_option("--T", ck_T, "inner steps (run suite)");
    check->add_option("--m", ck_m, "network width (run suite)");
    check->add_option("--seed", ck_seed, "seed");
    check->add_option("--out", ck_out, "output directory for the JSON report");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const FeatureKind kind =
                gen_features == "one-hot" ? FeatureKind::OneHot : FeatureKind::RandomUnit;
            const FiniteMdp mdp =
                generate_mdp(gen_states, gen_actions, gen_gamma, gen_seed, gen_eps, gen_d, kind);
            save_mdp(mdp, gen_out);
            std::cout << "wrote " << gen_out << " hash=" << mdp_hash(mdp) << '\n';
            return 0;
        }

        if (*val) {
            Json j = load_json(val_mdp);
            FiniteMdp mdp;
            try {
                mdp = mdp_from_json(j);
            } catch (const std::exception& e) {
                std::cout << e.what() << '\n';
                return 1;
            }
            std::cout << "valid hash=" << mdp_hash(mdp) << '\n';
            return 0;
        }

        if (*runc) {
            cfg.T_actor = run_T;
            if (!*tc_opt) cfg.T_critic = run_T;
            const FiniteMdp mdp = load_or_default(run_mdp, run_mdp_seed);
            const RunResult result = run(cfg, mdp);
            ensure_dir(run_out);
            save_records_csv(result.records, run_out + "/records.csv");
            Json summary;
            summary["best_gap"] = result.best_gap;
            summary["final_gap"] = result.records.back().gap;
            save_json(manifest("run", run_config_to_json(cfg), mdp_hash(mdp), summary),
                      run_out + "/manifest.json");
            std::cout << "best_gap=" << result.best_gap << '\n';
            return 0;
        }

        if (*sweep) {
            Json config;
            config["kind"] = sw_kind;
            config["m"] = sw_m;
            config["rf"] = sw_radius;
            config["n_seeds"] = sw_seeds;
            config["seed"] = sw_seed;
            SweepResult result;
            std::string mdp_digest;
            if (sw_kind == "td" || sw_kind == "sgd") {
                const FiniteMdp mdp = sw_mdp.empty()
                                          ? generate_mdp(2, 2, 0.5, 42, 1e-3, 8, FeatureKind::OneHot)
                                          : load_mdp(sw_mdp);
                mdp_digest = mdp_hash(mdp);
                const PolicyTable pi = PolicyTable::uniform(mdp.n_states, mdp.n_actions);
                const std::vector<int> Ts = {64, 256, 1024, 4096};
                if (sw_kind == "td") {
                    result = td_rate_sweep(mdp, pi, sw_m, sw_radius, Ts, sw_seeds, sw_seed, sw_jobs);
                } else {
                    std::mt19937_64 rng(cell_seed(sw_seed, 999));
                    TwoLayerNet probe = TwoLayerNet::init(sw_m, mdp.d, sw_radius, rng);
                    std::normal_distribution<double> gauss(0.0, 1.0);
                    Mat dir = Mat::NullaryExpr(sw_m, mdp.d, [&]() { return gauss(rng); });
                    probe.set_weights(probe.init_weights() +
                                      (0.8 * sw_radius / dir.norm()) * dir);
                    const Mat target = net_table(probe, mdp);
                    result = sgd_rate_sweep(mdp, pi, target, sw_m, sw_radius, Ts, sw_seeds,
                                            sw_seed, sw_jobs);
                }
            } else if (sw_kind == "linearization") {
                const FiniteMdp mdp = load_or_default(sw_mdp, 42);
                mdp_digest = mdp_hash(mdp);
                result = linearization_sweep(mdp, sw_radius, {64, 256, 1024, 4096, 16384}, 8,
                                             sw_seed, sw_jobs);
            } else if (sw_kind == "variance") {
                const FiniteMdp mdp = load_or_default(sw_mdp, 42);
                mdp_digest = mdp_hash(mdp);
                const PolicyTable pi = PolicyTable::uniform(mdp.n_states, mdp.n_actions);
                result = variance_sweep(mdp, pi, sw_m, {1.0, 2.0, 4.0, 8.0}, 20000, sw_seed,
                                        sw_jobs);
            } else if (sw_kind == "global") {
                const FiniteMdp mdp = load_or_default(sw_mdp, 42);
                mdp_digest = mdp_hash(mdp);
                RunConfig base;
                base.beta = sw_beta;
                base.m = sw_m;
                base.T_actor = base.T_critic = sw_T;
                base.diagnostics = false;
                config["beta"] = sw_beta;
                config["T"] = sw_T;
                const GlobalRateResult gr =
                    global_rate_sweep(mdp, base, {4, 16, 64, 256}, sw_seeds, sw_seed, sw_jobs);
                result = gr.sweep;
                ensure_dir(sw_out);
                save_records_csv(gr.largest_k_records, sw_out + "/largest_k_records.csv");
            } else {
                std::cerr << "unknown sweep kind: " << sw_kind << '\n';
                return 2;
            }
            ensure_dir(sw_out);
            save_json(sweep_to_json(result), sw_out + "/sweep.json");
            save_json(manifest("sweep", config, mdp_digest), sw_out + "/manifest.json");
            std::cout << "slope=" << result.slope << '\n';
            return 0;
        }

        if (*check) {
            Json config;
            config["suite"] = ck_suite;
            config["seed"] = ck_seed;
            std::vector<CheckResult> checks;
            if (ck_suite == "identity" || ck_suite == "all") {
                std::mt19937_64 rng(cell_seed(ck_seed, 1));
                double worst_pd = 0.0, min_mono = std::numeric_limits<double>::infinity();
                for (int i = 0; i < 100; ++i) {
                    const FiniteMdp mdp = generate_mdp(2 + i % 6, 2 + i % 4, 0.5 + 0.045 * (i % 10),
                                                       cell_seed(ck_seed, 100 + i));
                    std::vector<PolicyTable> pis;
                    for (int p = 0; p < 10; ++p)
                        pis.push_back(random_policy(mdp.n_states, mdp.n_actions, rng));
                    worst_pd = std::max(worst_pd,
                                        check_performance_difference(mdp, pis).value);
                    min_mono = std::min(min_mono, check_one_point_monotonicity(mdp, pis).value);
                }
                checks.push_back(identity_check("performance_difference", worst_pd, 1e-10));
                checks.push_back(inequality_check("one_point_monotonicity", min_mono, 1e-12));
            }
            if (ck_suite == "closed-form" || ck_suite == "all")
                checks.push_back(check_closed_form_update(20, 8, 1e-9, 1e-6, ck_seed + 5));
            if (ck_suite == "run" || ck_suite == "all") {
                const FiniteMdp mdp = load_or_default(ck_mdp, 42);
                RunConfig rcfg;
                rcfg.beta = ck_beta;
                rcfg.K = ck_K;
                rcfg.T_actor = rcfg.T_critic = ck_T;
                rcfg.m = ck_m;
                rcfg.seed = ck_seed;
                const RunResult result = run(rcfg, mdp);
                for (auto& c : check_run_inequalities(result.records)) checks.push_back(c);
            }
            return finish_checks(checks, ck_out, config);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
