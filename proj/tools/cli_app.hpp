#pragma once
// Command implementations shared by the l0bnb executable and the tests.
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>
#include <CLI11.hpp>
#include <json.hpp>
#include <l0bnb/bnb.hpp>
#include <l0bnb/data_pipeline.hpp>

namespace l0bnb::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { exit_ok = 0, exit_error = 1, exit_limit = 2 };

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

/// Verbosity from L0BNB_LOG (quiet|info|debug or 0|1|2); info when unset.
inline LogLevel log_level_from_env()
{
    const char* v = std::getenv("L0BNB_LOG");
    if (v == nullptr) return LogLevel::info;
    const std::string s(v);
    if (s == "quiet" || s == "0" || s == "off") return LogLevel::quiet;
    if (s == "debug" || s == "2") return LogLevel::debug;
    return LogLevel::info;
}

struct RunConfig
{
    std::string command;
    std::string input;
    std::string response;     // CSV column name; last column when empty
    std::string lambda0 = "auto";
    double lambda0_fraction = 0.5; // "auto" lambda0 = fraction * lambda0_max
    double lambda2 = 0.01;
    std::string big_m = "auto";
    SolverSettings settings;
    std::string screening = "auto";
    std::string branching = "strong";
    std::string output;       // stdout when empty
    std::string trace;        // JSON lines, one per node
    bool omit_timing = false;
    // path
    std::vector<double> grid;
    int path_points = 10;
    double path_min_fraction = 0.01;
    // gen
    SynthSpec synth;
    std::string correlation = "constant";
    std::string truth_output;
    // bench
    std::vector<int> only;
    LogLevel log = LogLevel::info;
};

inline double resolve_big_m(const std::string& s)
{
    if (s == "auto" || s == "inf" || s == "infinity") return infinity;
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw config_error("--big-m expects a number or 'auto', got '" + s + "'");
    }
    if (used != s.size()) throw config_error("--big-m expects a number or 'auto', got '" + s + "'");
    return v;
}

inline double resolve_lambda0(const std::string& s, double fraction, const Dataset& data, double lambda2)
{
    if (s == "auto") {
        if (!(fraction > 0)) throw config_error("--lambda0-fraction must be positive");
        return fraction * lambda0_max(data, lambda2);
    }
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw config_error("--lambda0 expects a number or 'auto', got '" + s + "'");
    }
    if (used != s.size()) throw config_error("--lambda0 expects a number or 'auto', got '" + s + "'");
    return v;
}

/// Copies the string-valued enum flags into the solver settings.
inline SolverSettings resolved_settings(const RunConfig& cfg)
{
    SolverSettings s = cfg.settings;
    if (cfg.screening == "auto") s.screening = ScreeningMode::automatic;
    else if (cfg.screening == "on") s.screening = ScreeningMode::on;
    else if (cfg.screening == "off") s.screening = ScreeningMode::off;
    else throw config_error("--screening must be auto, on or off");
    if (cfg.branching == "strong") s.branching = BranchingRule::strong;
    else if (cfg.branching == "frac") s.branching = BranchingRule::max_fractional;
    else throw config_error("--branching must be strong or frac");
    s.validate();
    return s;
}

inline json number_or_inf(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline json settings_echo(const RunConfig& cfg, const SolverSettings& s, const PenaltyParams& params)
{
    json j;
    j["lambda0"] = params.lambda0;
    j["lambda2"] = params.lambda2;
    j["big_m"] = number_or_inf(params.big_m);
    j["regime"] = to_string(params.regime());
    j["gap"] = s.rel_gap_target;
    j["int_tol"] = s.int_tol;
    j["pd_tol"] = s.pd_tol;
    j["time_limit"] = number_or_inf(s.time_limit);
    j["nodes_limit"] = s.node_limit;
    j["screening"] = cfg.screening;
    j["branching"] = cfg.branching;
    j["workers"] = s.workers;
    j["seed"] = s.seed;
    return j;
}

/// Support listing with normalized and original-unit coefficients, plus the intercept.
inline json support_json(const SparseCoefs& beta, const Dataset& data)
{
    json support = json::array();
    double intercept = data.centered ? data.y_mean : 0.0;
    for (const auto& [i, v] : beta) {
        const double orig = data.to_original_units(i, v);
        support.push_back({{"index", i}, {"coef", orig}, {"coef_normalized", v}});
        if (data.centered) intercept -= orig * data.column_means[i];
    }
    return {{"support", support}, {"intercept", intercept}};
}

inline json outcome_json(const BnBOutcome& out, const Dataset& data, bool omit_timing)
{
    json j;
    j["objective"] = out.objective;
    j["lower_bound"] = out.lower_bound;
    j["rel_gap"] = out.rel_gap;
    j["status"] = to_string(out.status);
    const json s = support_json(out.beta, data);
    j["support_size"] = out.beta.size();
    j["support"] = s["support"];
    j["intercept"] = s["intercept"];
    j["nodes_explored"] = out.nodes_explored;
    j["max_depth"] = out.max_depth;
    j["incumbent_updates"] = out.incumbent_updates;
    if (!omit_timing) j["wall_time_s"] = out.wall_time_s;
    return j;
}

inline Dataset load_normalized(const RunConfig& cfg)
{
    if (cfg.input.empty()) throw config_error("an input dataset is required");
    return normalize(load_dataset(cfg.input, cfg.response));
}

inline void write_output(const RunConfig& cfg, const json& j)
{
    const std::string text = j.dump(2) + "\n";
    if (cfg.output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(cfg.output, std::ios::binary);
    if (!os) throw io_error("cannot open " + cfg.output + " for writing");
    os << text;
    if (!os) throw io_error("write failed for " + cfg.output);
}

/// Node trace callback that appends one JSON object per node to `os`.
inline std::function<void(const NodeTrace&)> trace_writer(std::ostream& os)
{
    return [&os](const NodeTrace& t) {
        json j;
        j["node"] = t.node_id;
        j["depth"] = t.depth;
        j["lower_bound"] = t.lower_bound;
        j["primal"] = t.primal;
        j["branch_variable"] = t.branch_variable;
        j["upper_bound"] = t.upper_bound;
        j["global_lower_bound"] = t.global_lower_bound;
        j["gap"] = number_or_inf(t.gap);
        j["status"] = t.status;
        os << j.dump() << '\n';
    };
}

inline int run_fit(const RunConfig& cfg, std::ostream& log = std::cerr)
{
    const Dataset data = load_normalized(cfg);
    const PenaltyParams params(resolve_lambda0(cfg.lambda0, cfg.lambda0_fraction, data, cfg.lambda2), cfg.lambda2,
                               resolve_big_m(cfg.big_m));
    SolverSettings s = resolved_settings(cfg);
    std::ofstream trace_os;
    if (!cfg.trace.empty()) {
        trace_os.open(cfg.trace);
        if (!trace_os) throw io_error("cannot open " + cfg.trace + " for writing");
        s.trace = trace_writer(trace_os);
    }
    if (cfg.log >= LogLevel::debug) {
        log << "fit: n=" << data.n() << " p=" << data.p() << " lambda0=" << params.lambda0
            << " lambda2=" << params.lambda2 << " M=" << params.big_m << " regime=" << to_string(params.regime())
            << '\n';
    }
    const BnBOutcome out = solve(data, params, s);
    json j = outcome_json(out, data, cfg.omit_timing);
    j["settings_echo"] = settings_echo(cfg, s, params);
    write_output(cfg, j);
    if (cfg.log >= LogLevel::info) {
        log << "fit: objective " << out.objective << ", gap " << out.rel_gap << ", " << out.nodes_explored
            << " nodes, " << to_string(out.status) << '\n';
    }
    return out.status == Termination::gap_met ? exit_ok : exit_limit;
}

/// lambda0 values for a path: the explicit grid, or geometric fractions of lambda0_max; sorted decreasing.
inline std::vector<double> path_grid(const RunConfig& cfg, const Dataset& data)
{
    std::vector<double> grid = cfg.grid;
    if (grid.empty()) {
        if (cfg.path_points < 1) throw config_error("--points must be at least 1");
        if (!(cfg.path_min_fraction > 0 && cfg.path_min_fraction <= 1)) {
            throw config_error("--min-fraction must lie in (0, 1]");
        }
        const double top = lambda0_max(data, cfg.lambda2);
        for (int k = 0; k < cfg.path_points; ++k) {
            const double t = cfg.path_points == 1 ? 0.0 : static_cast<double>(k) / (cfg.path_points - 1);
            grid.push_back(top * std::pow(cfg.path_min_fraction, t));
        }
    }
    std::sort(grid.begin(), grid.end(), std::greater<>());
    return grid;
}

inline int run_path(const RunConfig& cfg, std::ostream& log = std::cerr)
{
    const Dataset data = load_normalized(cfg);
    const double big_m = resolve_big_m(cfg.big_m);
    const SolverSettings s = resolved_settings(cfg);
    const std::vector<double> grid = path_grid(cfg, data);
    json records = json::array();
    std::optional<SparseCoefs> warm;
    bool limited = false;
    for (double lambda0 : grid) {
        const PenaltyParams params(lambda0, cfg.lambda2, big_m);
        const BnBOutcome out = solve(data, params, s, warm);
        warm = out.beta;
        limited = limited || out.status != Termination::gap_met;
        json r = outcome_json(out, data, cfg.omit_timing);
        r["lambda0"] = lambda0;
        records.push_back(std::move(r));
        if (cfg.log >= LogLevel::info) {
            log << "path: lambda0 " << lambda0 << ", support " << out.beta.size() << ", objective "
                << out.objective << ", gap " << out.rel_gap << '\n';
        }
    }
    json j;
    j["path"] = records;
    j["settings_echo"] = settings_echo(cfg, s, PenaltyParams(grid.front(), cfg.lambda2, big_m));
    j["settings_echo"].erase("lambda0");
    write_output(cfg, j);
    return limited ? exit_limit : exit_ok;
}

inline bool has_suffix(const std::string& s, const std::string& suffix)
{
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Writes a synthetic dataset (CSV when the name ends in .csv, binary otherwise).
inline int run_gen(const RunConfig& cfg, std::ostream& log = std::cerr)
{
    if (cfg.output.empty()) throw config_error("gen needs --output");
    SynthSpec spec = cfg.synth;
    if (cfg.correlation == "constant") spec.correlation = Correlation::constant;
    else if (cfg.correlation == "block") spec.correlation = Correlation::block_exp_decay;
    else throw config_error("--correlation must be constant or block");
    spec.seed = cfg.settings.seed;
    const SyntheticData g = generate(spec);
    if (has_suffix(cfg.output, ".csv")) write_csv_dataset(cfg.output, g.raw);
    else write_binary_dataset(cfg.output, g.raw);
    if (!cfg.truth_output.empty()) {
        json t;
        json coefs = json::array();
        for (const auto& [i, v] : g.true_beta) coefs.push_back({{"index", i}, {"coef", v}});
        t["true_beta"] = coefs;
        t["sigma2"] = g.sigma2;
        std::ofstream os(cfg.truth_output);
        if (!os) throw io_error("cannot open " + cfg.truth_output + " for writing");
        os << t.dump(2) << '\n';
    }
    if (cfg.log >= LogLevel::info) {
        log << "gen: wrote " << spec.n << "x" << spec.p << " to " << cfg.output << '\n';
    }
    return exit_ok;
}

/// Registers the solver flags shared by fit and path.
inline void add_solver_flags(CLI::App* sub, RunConfig& cfg)
{
    sub->add_option("input", cfg.input, "dataset (CSV or L0BB binary)")->required();
    sub->add_option("--response", cfg.response, "CSV response column name (default: last column)");
    sub->add_option("--lambda2", cfg.lambda2, "ridge penalty")->capture_default_str();
    sub->add_option("--big-m", cfg.big_m, "box bound M, or auto for no bound")->capture_default_str();
    sub->add_option("--gap", cfg.settings.rel_gap_target, "relative gap target")->capture_default_str();
    sub->add_option("--int-tol", cfg.settings.int_tol, "integrality tolerance")->capture_default_str();
    sub->add_option("--pd-tol", cfg.settings.pd_tol, "primal-dual tolerance")->capture_default_str();
    sub->add_option("--time-limit", cfg.settings.time_limit, "seconds per solve");
    sub->add_option("--nodes-limit", cfg.settings.node_limit, "nodes per solve");
    sub->add_option("--screening", cfg.screening, "gradient screening")
        ->check(CLI::IsMember({"auto", "on", "off"}))
        ->capture_default_str();
    sub->add_option("--branching", cfg.branching, "branching rule")
        ->check(CLI::IsMember({"strong", "frac"}))
        ->capture_default_str();
    sub->add_option("--workers", cfg.settings.workers, "parallel node workers")->capture_default_str();
    sub->add_option("--seed", cfg.settings.seed, "random seed")->capture_default_str();
    sub->add_option("--output,-o", cfg.output, "result JSON (stdout when omitted)");
    sub->add_flag("--omit-timing", cfg.omit_timing, "leave wall-clock fields out of the JSON");
}

/// Builds the command-line parser; the chosen subcommand name lands in cfg.command.
inline void configure(CLI::App& app, RunConfig& cfg)
{
    app.require_subcommand(1);

    auto* fit = app.add_subcommand("fit", "solve one (lambda0, lambda2, M) to the gap target");
    add_solver_flags(fit, cfg);
    fit->add_option("--lambda0", cfg.lambda0, "l0 penalty, or auto")->capture_default_str();
    fit->add_option("--lambda0-fraction", cfg.lambda0_fraction, "auto lambda0 as a fraction of lambda0_max")
        ->capture_default_str();
    fit->add_option("--trace", cfg.trace, "write one JSON line per node to this file");
    fit->callback([&cfg] { cfg.command = "fit"; });

    auto* path = app.add_subcommand("path", "solve a decreasing lambda0 grid with warm starts");
    add_solver_flags(path, cfg);
    path->add_option("--grid", cfg.grid, "explicit lambda0 values")->delimiter(',');
    path->add_option("--points", cfg.path_points, "grid size when --grid is absent")->capture_default_str();
    path->add_option("--min-fraction", cfg.path_min_fraction, "smallest lambda0 as a fraction of lambda0_max")
        ->capture_default_str();
    path->callback([&cfg] { cfg.command = "path"; });

    auto* gen = app.add_subcommand("gen", "write a synthetic dataset");
    gen->add_option("--n", cfg.synth.n, "rows")->capture_default_str();
    gen->add_option("--p", cfg.synth.p, "columns")->capture_default_str();
    gen->add_option("--k", cfg.synth.k_true, "planted support size")->capture_default_str();
    gen->add_option("--rho", cfg.synth.rho, "correlation")->capture_default_str();
    gen->add_option("--correlation", cfg.correlation, "constant or block")
        ->check(CLI::IsMember({"constant", "block"}))
        ->capture_default_str();
    gen->add_option("--snr", cfg.synth.snr, "signal-to-noise ratio")->capture_default_str();
    gen->add_option("--seed", cfg.settings.seed, "random seed")->capture_default_str();
    gen->add_option("--output,-o", cfg.output, "output file (.csv for CSV, otherwise binary)")->required();
    gen->add_option("--truth", cfg.truth_output, "write the planted coefficients as JSON");
    gen->callback([&cfg] { cfg.command = "gen"; });

    auto* bench = app.add_subcommand("bench", "run the acceptance suite");
    bench->add_option("--only", cfg.only, "criterion numbers to run")->delimiter(',');
    bench->callback([&cfg] { cfg.command = "bench"; });
}

/// Runs fit/path/gen with error handling; bench is dispatched by the caller.
inline int dispatch(const RunConfig& cfg, std::ostream& log = std::cerr)
{
    try {
        if (cfg.command == "fit") return run_fit(cfg, log);
        if (cfg.command == "path") return run_path(cfg, log);
        if (cfg.command == "gen") return run_gen(cfg, log);
        throw config_error("unknown command '" + cfg.command + "'");
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return exit_error;
    }
}

} // namespace l0bnb::cli
