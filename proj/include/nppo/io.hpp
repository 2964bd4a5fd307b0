#pragma once

#include "nppo/driver.hpp"
#include "nppo/harness.hpp"
#include "nppo/mdp.hpp"
#include "nppo/net.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nppo {

using Json = nlohmann::json;

inline Json to_json(const Mat& m) {
    Json rows = Json::array();
    for (int i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Mat mat_from_json(const Json& j) {
    const int rows = static_cast<int>(j.size());
    if (rows == 0) return Mat(0, 0);
    const int cols = static_cast<int>(j.at(0).size());
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j.at(i).size()) != cols)
            throw std::runtime_error("matrix rows have inconsistent lengths");
        for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
    }
    return m;
}

inline Json mdp_to_json(const FiniteMdp& mdp) {
    Json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    j["d"] = mdp.d;
    j["gamma"] = mdp.gamma;
    j["eps_mix"] = mdp.eps_mix;
    j["reward"] = to_json(mdp.reward);
    Json trans = Json::array();
    for (const auto& P : mdp.transition) trans.push_back(to_json(P));
    j["transition"] = std::move(trans);
    j["features"] = to_json(mdp.features);
    return j;
}

inline FiniteMdp mdp_from_json(const Json& j) {
    FiniteMdp mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.d = j.at("d").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    mdp.eps_mix = j.value("eps_mix", 0.0);
    mdp.reward = mat_from_json(j.at("reward"));
    for (const auto& P : j.at("transition")) mdp.transition.push_back(mat_from_json(P));
    mdp.features = mat_from_json(j.at("features"));
    const auto violations = validate(mdp);
    if (!violations.empty()) {
        std::string msg = "invalid MDP:";
        for (const auto& v : violations) msg += "\n  " + v;
        throw std::runtime_error(msg);
    }
    return mdp;
}

inline void save_json(const Json& j, const std::string& path, int indent = 2) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(indent) << '\n';
}

inline Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return Json::parse(in);
}

inline void save_mdp(const FiniteMdp& mdp, const std::string& path) {
    save_json(mdp_to_json(mdp), path);
}

inline FiniteMdp load_mdp(const std::string& path) { return mdp_from_json(load_json(path)); }

/// FNV-1a over the compact JSON form; stable content fingerprint.
inline std::string content_hash(const Json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex << std::setfill('0') << std::setw(16) << h;
    return out.str();
}

inline std::string mdp_hash(const FiniteMdp& mdp) { return content_hash(mdp_to_json(mdp)); }

// ---- run records ----

inline const std::vector<std::string>& record_columns() {
    static const std::vector<std::string> cols = {
        "k",         "tau",       "beta_k",    "gap",          "kl_star",
        "eps_pi",    "eps_q",     "phi_star",  "psi_star",     "slack_l46",
        "slack_l47", "slack_l52_min", "slack_b1", "monotonicity", "M"};
    return cols;
}

inline void write_records_csv(const std::vector<IterationRecord>& records, std::ostream& out) {
    const auto& cols = record_columns();
    for (size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    out << std::setprecision(17);
    for (const auto& r : records) {
        out << r.k << ',' << r.tau << ',' << r.beta_k << ',' << r.gap << ',' << r.kl_star << ','
            << r.eps_pi << ',' << r.eps_q << ',' << r.phi_star << ',' << r.psi_star << ','
            << r.slack_l46 << ',' << r.slack_l47 << ',' << r.slack_l52_min << ',' << r.slack_b1
            << ',' << r.monotonicity << ',' << r.M << '\n';
    }
}

inline void save_records_csv(const std::vector<IterationRecord>& records,
                             const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_records_csv(records, out);
}

inline Json run_config_to_json(const RunConfig& cfg) {
    Json j;
    j["beta"] = cfg.beta;
    j["K"] = cfg.K;
    j["T_actor"] = cfg.T_actor;
    j["T_critic"] = cfg.T_critic;
    j["m"] = cfg.m;
    j["r_actor"] = cfg.r_actor;
    j["r_critic"] = cfg.r_critic;
    j["seed"] = cfg.seed;
    j["diagnostics"] = cfg.diagnostics;
    return j;
}

inline Json manifest(const std::string& command, const Json& config, const std::string& mdp_digest,
                     const Json& summary = Json::object()) {
    Json j;
    j["command"] = command;
    j["config"] = config;
    j["mdp_hash"] = mdp_digest;
    j["format_version"] = 1;
    j["summary"] = summary;
    return j;
}

// ---- check reports ----

inline Json check_to_json(const CheckResult& c) {
    Json j;
    j["name"] = c.name;
    j["kind"] = c.kind;
    j["value"] = c.value;
    j["tol"] = c.tol;
    j["pass"] = c.pass;
    return j;
}

inline Json checks_to_json(const std::vector<CheckResult>& checks) {
    Json arr = Json::array();
    for (const auto& c : checks) arr.push_back(check_to_json(c));
    return arr;
}

inline void print_check_table(const std::vector<CheckResult>& checks, std::ostream& out) {
    out << std::left << std::setw(28) << "check" << std::setw(12) << "kind" << std::setw(24)
        << "value" << std::setw(14) << "tol"
        << "status\n";
    for (const auto& c : checks) {
        std::ostringstream value, tol;
        value << std::setprecision(6) << c.value;
        tol << std::setprecision(3) << c.tol;
        out << std::left << std::setw(28) << c.name << std::setw(12) << c.kind << std::setw(24)
            << value.str() << std::setw(14) << tol.str() << (c.pass ? "PASS" : "FAIL") << '\n';
    }
}

inline Json sweep_to_json(const SweepResult& sweep) {
    Json j;
    j["x"] = sweep.xs;
    j["y"] = sweep.ys;
    j["raw"] = sweep.raw;
    j["slope"] = sweep.slope;
    return j;
}

// ---- net snapshots ----

inline Json net_to_json(const TwoLayerNet& net) {
    Json j;
    j["m"] = net.width();
    j["d"] = net.input_dim();
    j["radius"] = net.radius();
    Json signs = Json::array();
    for (int i = 0; i < net.width(); ++i) signs.push_back(net.signs()(i) > 0 ? 1 : -1);
    j["signs"] = std::move(signs);
    j["init_weights"] = to_json(net.init_weights());
    j["weights"] = to_json(net.weights());
    return j;
}

inline TwoLayerNet net_from_json(const Json& j) {
    const auto signs_json = j.at("signs");
    Vec signs(signs_json.size());
    for (size_t i = 0; i < signs_json.size(); ++i) signs(i) = signs_json.at(i).get<double>();
    return TwoLayerNet::from_parts(signs, mat_from_json(j.at("init_weights")),
                                   mat_from_json(j.at("weights")), j.at("radius").get<double>());
}

}  // namespace nppo
