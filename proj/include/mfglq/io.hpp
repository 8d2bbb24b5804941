#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "nash.hpp"
#include "simulate.hpp"

namespace mfglq {

using nlohmann::json;

// ---------------------------------------------------------------------------
// matrix <-> nested row-major arrays
// ---------------------------------------------------------------------------

inline json matrix_to_json(const Mat& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Mat matrix_from_json(const json& j, const std::string& name) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw config_error(name + ": expected a nested array of numbers");
    const size_t rows = j.size();
    const size_t cols = j[0].size();
    Mat M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw config_error(name + ": ragged matrix rows");
        for (size_t c = 0; c < cols; ++c) {
            if (!j[i][c].is_number())
                throw config_error(name + ": non-numeric entry");
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                j[i][c].get<double>();
        }
    }
    return M;
}

inline json vector_to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Vec vector_from_json(const json& j, const std::string& name) {
    if (!j.is_array()) throw config_error(name + ": expected an array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw config_error(name + ": non-numeric entry");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

// ---------------------------------------------------------------------------
// ScenarioConfig serialization (round-trips bit-exactly)
// ---------------------------------------------------------------------------

inline json scenario_to_json(const ScenarioConfig& cfg) {
    const ModelParams& p = cfg.params;
    json j;
    j["dims"] = {{"n", cfg.dims.n},
                 {"m1", cfg.dims.m1},
                 {"m2", cfg.dims.m2},
                 {"m3", cfg.dims.m3}};
    json& pr = j["params"];
    pr["A0"] = matrix_to_json(p.A0);
    pr["A"] = matrix_to_json(p.A);
    pr["Atilde"] = matrix_to_json(p.Atil);
    pr["C0"] = matrix_to_json(p.C0);
    pr["C"] = matrix_to_json(p.C);
    pr["Ctilde"] = matrix_to_json(p.Ctil);
    pr["E0_1"] = matrix_to_json(p.E01);
    pr["E0_2"] = matrix_to_json(p.E02);
    pr["E1"] = matrix_to_json(p.E1);
    pr["E2"] = matrix_to_json(p.E2);
    pr["F0_1"] = matrix_to_json(p.F01);
    pr["F0_2"] = matrix_to_json(p.F02);
    pr["F1"] = matrix_to_json(p.F1);
    pr["F2"] = matrix_to_json(p.F2);
    pr["B0"] = matrix_to_json(p.B0);
    pr["D0"] = matrix_to_json(p.D0);
    pr["B"] = matrix_to_json(p.B);
    pr["D"] = matrix_to_json(p.D);
    pr["Btilde"] = matrix_to_json(p.Btil);
    pr["Dtilde"] = matrix_to_json(p.Dtil);
    pr["Q0"] = matrix_to_json(p.Q0);
    pr["Q"] = matrix_to_json(p.Q);
    pr["Qtilde"] = matrix_to_json(p.Qtil);
    pr["H0w"] = matrix_to_json(p.H0w);
    pr["Hw"] = matrix_to_json(p.Hw);
    pr["Htildew"] = matrix_to_json(p.Htilw);
    pr["R0"] = matrix_to_json(p.R0);
    pr["R"] = matrix_to_json(p.R);
    pr["Rtilde"] = matrix_to_json(p.Rtil);
    pr["lambda0"] = p.lambda0;
    pr["lambda"] = p.lambda;
    pr["lambda_tilde1"] = p.ltil1;
    pr["lambda_tilde2"] = p.ltil2;
    pr["lambda_tilde3"] = p.ltil3;
    pr["T"] = p.T;
    json& in = j["initial"];
    in["mean_xi0"] = vector_to_json(cfg.initial.mean_xi0);
    in["cov_xi0"] = matrix_to_json(cfg.initial.cov_xi0);
    in["cov_xi"] = matrix_to_json(cfg.initial.cov_xi);
    in["cov_zeta"] = matrix_to_json(cfg.initial.cov_zeta);
    j["grid_steps"] = cfg.grid_steps;
    j["mc_paths"] = cfg.mc_paths;
    json pops = json::array();
    for (const auto& pp : cfg.populations) pops.push_back({pp.first, pp.second});
    j["populations"] = pops;
    j["seed"] = cfg.seed;
    return j;
}

namespace detail {

inline const json& need(const json& j, const std::string& key,
                        const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) throw config_error(ctx + ": missing field '" + key + "'");
    return *it;
}

} // namespace detail

inline ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig cfg;
    const json& dd = detail::need(j, "dims", "scenario");
    cfg.dims.n = detail::need(dd, "n", "dims").get<int>();
    cfg.dims.m1 = detail::need(dd, "m1", "dims").get<int>();
    cfg.dims.m2 = detail::need(dd, "m2", "dims").get<int>();
    cfg.dims.m3 = detail::need(dd, "m3", "dims").get<int>();
    if (cfg.dims.n < 1 || cfg.dims.m1 < 1 || cfg.dims.m2 < 1 || cfg.dims.m3 < 1)
        throw config_error("dims: all dimensions must be >= 1");
    const json& pr = detail::need(j, "params", "scenario");
    ModelParams& p = cfg.params;
    auto M = [&](const char* k) { return matrix_from_json(detail::need(pr, k, "params"), k); };
    p.A0 = M("A0");
    p.A = M("A");
    p.Atil = M("Atilde");
    p.C0 = M("C0");
    p.C = M("C");
    p.Ctil = M("Ctilde");
    p.E01 = M("E0_1");
    p.E02 = M("E0_2");
    p.E1 = M("E1");
    p.E2 = M("E2");
    p.F01 = M("F0_1");
    p.F02 = M("F0_2");
    p.F1 = M("F1");
    p.F2 = M("F2");
    p.B0 = M("B0");
    p.D0 = M("D0");
    p.B = M("B");
    p.D = M("D");
    p.Btil = M("Btilde");
    p.Dtil = M("Dtilde");
    p.Q0 = M("Q0");
    p.Q = M("Q");
    p.Qtil = M("Qtilde");
    p.H0w = M("H0w");
    p.Hw = M("Hw");
    p.Htilw = M("Htildew");
    p.R0 = M("R0");
    p.R = M("R");
    p.Rtil = M("Rtilde");
    p.lambda0 = detail::need(pr, "lambda0", "params").get<double>();
    p.lambda = detail::need(pr, "lambda", "params").get<double>();
    p.ltil1 = detail::need(pr, "lambda_tilde1", "params").get<double>();
    p.ltil2 = detail::need(pr, "lambda_tilde2", "params").get<double>();
    p.ltil3 = detail::need(pr, "lambda_tilde3", "params").get<double>();
    p.T = detail::need(pr, "T", "params").get<double>();
    const json& in = detail::need(j, "initial", "scenario");
    cfg.initial.mean_xi0 = vector_from_json(detail::need(in, "mean_xi0", "initial"),
                                            "mean_xi0");
    cfg.initial.cov_xi0 = matrix_from_json(detail::need(in, "cov_xi0", "initial"),
                                           "cov_xi0");
    cfg.initial.cov_xi = matrix_from_json(detail::need(in, "cov_xi", "initial"),
                                          "cov_xi");
    cfg.initial.cov_zeta = matrix_from_json(detail::need(in, "cov_zeta", "initial"),
                                            "cov_zeta");
    cfg.grid_steps = detail::need(j, "grid_steps", "scenario").get<int>();
    cfg.mc_paths = detail::need(j, "mc_paths", "scenario").get<int>();
    cfg.populations.clear();
    for (const auto& pp : detail::need(j, "populations", "scenario")) {
        if (!pp.is_array() || pp.size() != 2)
            throw config_error("populations: expected [N_l, N_f] pairs");
        cfg.populations.emplace_back(pp[0].get<int>(), pp[1].get<int>());
    }
    cfg.seed = detail::need(j, "seed", "scenario").get<uint64_t>();
    if (cfg.grid_steps < 1) throw config_error("grid_steps must be >= 1");
    if (cfg.mc_paths < 1) throw config_error("mc_paths must be >= 1");
    return cfg;
}

/// FNV-1a hash of the canonical (sorted-key) JSON dump; identifies a scenario
/// in every output artifact.
inline std::string scenario_hash(const ScenarioConfig& cfg) {
    const std::string s = scenario_to_json(cfg).dump();
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// CSV / JSON artifact writers
// ---------------------------------------------------------------------------

inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// MatrixPath CSV: header comment with scenario hash and seed, then one row
/// per grid point (t, entries row-major, 17 significant digits).
inline std::string matrix_path_csv(const MatrixPath& path, const std::string& hash,
                                   uint64_t seed, const std::string& name) {
    std::string out = "# scenario_hash=" + hash + " seed=" + std::to_string(seed) +
                      " field=" + name + "\n";
    const Eigen::Index r = path[0].rows(), c = path[0].cols();
    out += "t";
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index jj = 0; jj < c; ++jj)
            out += "," + name + "_" + std::to_string(i) + "_" + std::to_string(jj);
    out += "\n";
    for (int k = 0; k <= path.grid.K; ++k) {
        out += format_g17(path.grid.points[static_cast<size_t>(k)]);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index jj = 0; jj < c; ++jj)
                out += "," + format_g17(path[k](i, jj));
        out += "\n";
    }
    return out;
}

inline std::string vector_path_csv(const VectorPath& path, const std::string& hash,
                                   uint64_t seed, const std::string& name) {
    std::string out = "# scenario_hash=" + hash + " seed=" + std::to_string(seed) +
                      " field=" + name + "\n";
    const Eigen::Index r = path[0].size();
    out += "t";
    for (Eigen::Index i = 0; i < r; ++i) out += "," + name + "_" + std::to_string(i);
    out += "\n";
    for (int k = 0; k <= path.grid.K; ++k) {
        out += format_g17(path.grid.points[static_cast<size_t>(k)]);
        for (Eigen::Index i = 0; i < r; ++i) out += "," + format_g17(path[k](i));
        out += "\n";
    }
    return out;
}

inline json population_result_json(const PopulationResult& r,
                                   const std::string& hash) {
    json j;
    j["scenario_hash"] = hash;
    j["N_l"] = r.N_l;
    j["N_f"] = r.N_f;
    j["seed"] = r.seed;
    j["costs"] = {{"J0", r.J0}, {"Jl_mean", r.Jl_mean}, {"Jf_mean", r.Jf_mean}};
    j["gaps"] = {{"gap_major", r.gap0},
                 {"gap_minor", r.gapl},
                 {"gap_follower", r.gapf},
                 {"sup_dev_minor", r.sup_dev_minor},
                 {"sup_dev_follower", r.sup_dev_follower}};
    return j;
}

inline json scaling_study_json(const ScalingStudy& s, const std::string& hash) {
    json j;
    j["scenario_hash"] = hash;
    j["seed"] = s.seed;
    j["replications"] = s.replications;
    json recs = json::array();
    for (const auto& r : s.records)
        recs.push_back({{"N_l", r.N_l},
                        {"N_f", r.N_f},
                        {"metric", r.metric},
                        {"estimate", r.estimate},
                        {"stderr", r.se}});
    j["records"] = recs;
    json slopes = json::array();
    for (const auto& f : s.slopes)
        slopes.push_back({{"metric", f.metric},
                          {"slope", f.slope},
                          {"slope_se", f.slope_se},
                          {"intercept", f.intercept}});
    j["slopes"] = slopes;
    return j;
}

/// Tidy CSV of the scaling records: N_l,N_f,metric,estimate,stderr.
inline std::string scaling_study_csv(const ScalingStudy& s, const std::string& hash) {
    std::string out = "# scenario_hash=" + hash + " seed=" + std::to_string(s.seed) +
                      "\nN_l,N_f,metric,estimate,stderr\n";
    for (const auto& r : s.records)
        out += std::to_string(r.N_l) + "," + std::to_string(r.N_f) + "," + r.metric +
               "," + format_g17(r.estimate) + "," + format_g17(r.se) + "\n";
    return out;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open output file: " + path);
    out << content;
    if (!out) throw config_error("failed writing output file: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open file: " + path);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

} // namespace mfglq
