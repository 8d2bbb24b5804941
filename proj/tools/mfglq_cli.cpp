// Command-line front end for the mean-field LQ Stackelberg-Nash solver.
//
// Subcommands: validate, riccati, meanfield, simulate, scaling, example51.
// Every flag can also be supplied through an MFGLQ_* environment variable.
// Exit codes: 0 success, 2 configuration error, 3 model validation failure,
// 4 solver breakdown (Riccati blow-up), 5 numerical error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include <mfglq/mfglq.hpp>

namespace fs = std::filesystem;
using namespace mfglq;

namespace {

struct Options {
    std::string scenario_path;
    std::string out_dir = ".";
    int grid_steps = 0; // 0: keep the scenario's value
    uint64_t seed = 0;
    bool seed_given = false;
    std::string populations; // "10x10,100x100"
    int replications = 100;
    int threads = 1; // reserved: execution is currently single-threaded
};

std::vector<std::pair<int, int>> parse_populations(const std::string& s) {
    std::vector<std::pair<int, int>> out;
    size_t pos = 0;
    while (pos < s.size()) {
        size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        const std::string tok = s.substr(pos, comma - pos);
        int nl = 0, nf = 0;
        if (std::sscanf(tok.c_str(), "%dx%d", &nl, &nf) != 2 || nl < 1 || nf < 1)
            throw config_error("bad population entry '" + tok +
                               "' (expected <N_l>x<N_f>)");
        out.emplace_back(nl, nf);
        pos = comma + 1;
    }
    if (out.empty()) throw config_error("empty population list");
    return out;
}

void add_common(CLI::App* sc, Options& o, bool scenario_required) {
    auto* s = sc->add_option("--scenario", o.scenario_path,
                             "path to a scenario JSON file")
                  ->envname("MFGLQ_SCENARIO");
    if (scenario_required) s->required();
    sc->add_option("--out", o.out_dir, "output directory (created if missing)")
        ->envname("MFGLQ_OUT");
    sc->add_option("--grid-steps", o.grid_steps,
                   "override the scenario's time-grid steps")
        ->envname("MFGLQ_GRID_STEPS");
    sc->add_option("--seed", o.seed, "override the scenario's RNG seed")
        ->envname("MFGLQ_SEED")
        ->each([&o](const std::string&) { o.seed_given = true; });
    sc->add_option("--populations", o.populations,
                   "override population sizes, e.g. 10x10,100x100")
        ->envname("MFGLQ_POPULATIONS");
    sc->add_option("--replications", o.replications,
                   "replications per population in the scaling study")
        ->envname("MFGLQ_REPLICATIONS");
    sc->add_option("--threads", o.threads,
                   "worker threads (reserved; runs are single-threaded)")
        ->envname("MFGLQ_THREADS");
}

ScenarioConfig load_scenario(const Options& o) {
    json j;
    try {
        j = json::parse(read_file(o.scenario_path));
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("scenario JSON parse error: ") + e.what());
    }
    ScenarioConfig cfg = scenario_from_json(j);
    if (o.grid_steps > 0) cfg.grid_steps = o.grid_steps;
    if (o.seed_given) cfg.seed = o.seed;
    if (!o.populations.empty())
        cfg.populations = parse_populations(o.populations);
    return cfg;
}

std::vector<Violation> all_violations(const ScenarioConfig& cfg) {
    std::vector<Violation> v = validate_params(cfg.params, cfg.dims);
    check_initial_law(v, cfg.initial, cfg.dims.n);
    return v;
}

void require_valid(const ScenarioConfig& cfg) {
    const auto v = all_violations(cfg);
    if (!v.empty())
        throw validation_error(v.front().field + ": " + v.front().message);
}

std::string out_path(const Options& o, const std::string& name) {
    fs::create_directories(o.out_dir);
    return (fs::path(o.out_dir) / name).string();
}

// ---------------------------------------------------------------------------
// subcommand actions
// ---------------------------------------------------------------------------

int cmd_validate(const Options& o) {
    const ScenarioConfig cfg = load_scenario(o);
    const auto v = all_violations(cfg);
    json report;
    report["scenario_hash"] = scenario_hash(cfg);
    report["seed"] = cfg.seed;
    report["valid"] = v.empty();
    report["violations"] = json::array();
    for (const Violation& viol : v)
        report["violations"].push_back(
            {{"field", viol.field}, {"message", viol.message}});
    write_file(out_path(o, "validation.json"), report.dump(2) + "\n");
    if (!v.empty()) {
        std::fprintf(stderr, "validation failed: %s: %s\n",
                     v.front().field.c_str(), v.front().message.c_str());
        return 3;
    }
    std::printf("scenario %s valid\n", scenario_hash(cfg).c_str());
    return 0;
}

int cmd_riccati(const Options& o) {
    const ScenarioConfig cfg = load_scenario(o);
    require_valid(cfg);
    const std::string hash = scenario_hash(cfg);
    const CCBlocks b = assemble_cc_blocks(cfg.params, cfg.dims, cfg.initial);
    TimeGrid grid(cfg.params.T, cfg.grid_steps);
    const RiccatiPair pair = solve_cc_riccati(b, grid);
    write_file(out_path(o, "P.csv"), matrix_path_csv(pair.P, hash, cfg.seed, "P"));
    write_file(out_path(o, "Pi.csv"),
               matrix_path_csv(pair.Pi, hash, cfg.seed, "Pi"));
    std::printf("riccati: wrote P.csv, Pi.csv (%d steps, hash %s)\n", grid.K,
                hash.c_str());
    return 0;
}

int cmd_meanfield(const Options& o) {
    const ScenarioConfig cfg = load_scenario(o);
    require_valid(cfg);
    const std::string hash = scenario_hash(cfg);
    const CCSystem sys = build_cc_system(cfg);
    write_file(out_path(o, "EX.csv"),
               vector_path_csv(sys.mf.EX, hash, cfg.seed, "EX"));
    write_file(out_path(o, "EY.csv"),
               vector_path_csv(sys.mf.EY, hash, cfg.seed, "EY"));
    write_file(out_path(o, "EZ.csv"),
               vector_path_csv(sys.mf.EZ, hash, cfg.seed, "EZ"));
    write_file(out_path(o, "G_major.csv"),
               matrix_path_csv(sys.gains.G_major, hash, cfg.seed, "G_major"));
    write_file(out_path(o, "G_minor.csv"),
               matrix_path_csv(sys.gains.G_minor, hash, cfg.seed, "G_minor"));
    write_file(out_path(o, "G_follower.csv"),
               matrix_path_csv(sys.gains.G_follower, hash, cfg.seed,
                               "G_follower"));
    std::printf("meanfield: wrote EX/EY/EZ and gain CSVs (hash %s)\n",
                hash.c_str());
    return 0;
}

int cmd_simulate(const Options& o) {
    const ScenarioConfig cfg = load_scenario(o);
    require_valid(cfg);
    const std::string hash = scenario_hash(cfg);
    const CCSystem sys = build_cc_system(cfg);

    const LimitingCosts lc = limiting_costs(sys, cfg.mc_paths, cfg.seed);
    json lim;
    lim["scenario_hash"] = hash;
    lim["seed"] = cfg.seed;
    lim["paths"] = lc.paths;
    lim["J0"] = lc.J0;
    lim["Jl"] = lc.Jl;
    lim["Jf"] = lc.Jf;
    lim["se0"] = lc.se0;
    lim["sel"] = lc.sel;
    lim["sef"] = lc.sef;
    write_file(out_path(o, "limiting_costs.json"), lim.dump(2) + "\n");

    for (const auto& [nl, nf] : cfg.populations) {
        const PopulationResult pr = simulate_population(sys, nl, nf, cfg.seed);
        const std::string name = "population_" + std::to_string(nl) + "x" +
                                 std::to_string(nf) + ".json";
        write_file(out_path(o, name),
                   population_result_json(pr, hash).dump(2) + "\n");
    }
    std::printf("simulate: %d limit paths, %zu population runs (hash %s)\n",
                lc.paths, cfg.populations.size(), hash.c_str());
    return 0;
}

int cmd_scaling(const Options& o) {
    const ScenarioConfig cfg = load_scenario(o);
    require_valid(cfg);
    const std::string hash = scenario_hash(cfg);
    const CCSystem sys = build_cc_system(cfg);
    const ScalingStudy st =
        run_scaling_study(sys, cfg.populations, o.replications, cfg.seed);
    write_file(out_path(o, "scaling.json"),
               scaling_study_json(st, hash).dump(2) + "\n");
    write_file(out_path(o, "scaling.csv"), scaling_study_csv(st, hash));
    std::printf("scaling: %zu populations x %d replications (hash %s)\n",
                cfg.populations.size(), st.replications, hash.c_str());
    return 0;
}

int cmd_example51(const Options& o) {
    ScenarioConfig cfg = make_example51_scenario();
    if (o.grid_steps > 0) cfg.grid_steps = o.grid_steps;
    if (o.seed_given) cfg.seed = o.seed;
    const std::string hash = scenario_hash(cfg);
    const CCSystem sys = build_cc_system(cfg);

    // closed form of the analytic special case (see README for the sign
    // convention): P = diag(0, T-t, T-t, t-T) and Pi supported on three
    // entries with slope -lambda_tilde2.
    const double T = cfg.params.T, lt = cfg.params.ltil2;
    double err_P = 0.0, err_Pi = 0.0;
    for (int k = 0; k <= sys.grid.K; ++k) {
        const double t = sys.grid.points[static_cast<size_t>(k)];
        Mat Pc = Mat::Zero(4, 4), Pic = Mat::Zero(4, 4);
        Pc(1, 1) = T - t;
        Pc(2, 2) = T - t;
        Pc(3, 3) = t - T;
        Pic(2, 1) = -lt * (T - t);
        Pic(2, 2) = lt * (T - t);
        Pic(3, 3) = -lt * (T - t);
        err_P = std::max(err_P,
                         (sys.riccati.P[k] - Pc).cwiseAbs().maxCoeff());
        err_Pi = std::max(err_Pi,
                          (sys.riccati.Pi[k] - Pic).cwiseAbs().maxCoeff());
    }

    BrownianBundle bundle(sys.grid, cfg.seed);
    double ctrl_sup = 0.0;
    for (int pth = 0; pth < 50; ++pth) {
        const CCPathResult path =
            simulate_stacked_cc(sys, bundle, static_cast<uint64_t>(pth));
        for (int k = 0; k <= sys.grid.K; ++k)
            ctrl_sup = std::max(
                {ctrl_sup, path.u_major[k].cwiseAbs().maxCoeff(),
                 path.u_minor[k].cwiseAbs().maxCoeff(),
                 path.u_follower[k].cwiseAbs().maxCoeff()});
    }

    const bool p_ok = err_P <= 1e-8 && err_Pi <= 1e-8;
    const bool u_ok = ctrl_sup <= 1e-12;
    json rep;
    rep["scenario_hash"] = hash;
    rep["seed"] = cfg.seed;
    rep["grid_steps"] = sys.grid.K;
    rep["max_abs_P_error"] = err_P;
    rep["max_abs_Pi_error"] = err_Pi;
    rep["closed_form_riccati"] = p_ok ? "PASS" : "FAIL";
    rep["control_sup"] = ctrl_sup;
    rep["controls_identically_zero"] = u_ok ? "PASS" : "FAIL";
    write_file(out_path(o, "example51_report.json"), rep.dump(2) + "\n");
    write_file(out_path(o, "P.csv"),
               matrix_path_csv(sys.riccati.P, hash, cfg.seed, "P"));
    write_file(out_path(o, "Pi.csv"),
               matrix_path_csv(sys.riccati.Pi, hash, cfg.seed, "Pi"));

    std::printf("closed-form Riccati: %s (max|P - P_closed| = %.3e, "
                "max|Pi - Pi_closed| = %.3e)\n",
                p_ok ? "PASS" : "FAIL", err_P, err_Pi);
    std::printf("controls == 0: %s (sup |u| = %.3e)\n", u_ok ? "PASS" : "FAIL",
                ctrl_sup);
    if (!(p_ok && u_ok)) {
        std::fprintf(stderr, "example51 report failed\n");
        return 5;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"decentralized Stackelberg-Nash solver for the LQ "
                 "major/minor-leader/follower mean-field game"};
    app.require_subcommand(1);
    Options o;

    CLI::App* sc_validate =
        app.add_subcommand("validate", "check model invariants");
    CLI::App* sc_riccati =
        app.add_subcommand("riccati", "solve the consistency Riccati system");
    CLI::App* sc_meanfield =
        app.add_subcommand("meanfield", "solve the mean field and gains");
    CLI::App* sc_simulate =
        app.add_subcommand("simulate", "Monte-Carlo limit and population runs");
    CLI::App* sc_scaling =
        app.add_subcommand("scaling", "population scaling study");
    CLI::App* sc_example51 =
        app.add_subcommand("example51", "built-in analytic special case");
    add_common(sc_validate, o, true);
    add_common(sc_riccati, o, true);
    add_common(sc_meanfield, o, true);
    add_common(sc_simulate, o, true);
    add_common(sc_scaling, o, true);
    add_common(sc_example51, o, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (o.threads < 1) throw config_error("--threads must be >= 1");
        if (sc_validate->parsed()) return cmd_validate(o);
        if (sc_riccati->parsed()) return cmd_riccati(o);
        if (sc_meanfield->parsed()) return cmd_meanfield(o);
        if (sc_simulate->parsed()) return cmd_simulate(o);
        if (sc_scaling->parsed()) return cmd_scaling(o);
        if (sc_example51->parsed()) return cmd_example51(o);
        throw config_error("no subcommand selected");
    } catch (const config_error& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const validation_error& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 3;
    } catch (const breakdown_error& e) {
        std::fprintf(stderr, "solver breakdown: %s\n", e.what());
        return 4;
    } catch (const numerical_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 5;
    }
}
