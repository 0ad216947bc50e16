#pragma once

// End-to-end experiment driver: a flat key=value configuration selects a
// target, a partition, a decoder policy, and a bound mode; running it builds
// the net, certifies every level, and writes the artifacts (CSV reports plus
// JSON net/parameter/summary files) into an output directory.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "net.hpp"
#include "partition.hpp"
#include "targets.hpp"

namespace mgnet {

struct ExperimentConfig {
    std::string target = "ramp";  ///< catalog name, or grid:<path> for a sampled file
    int d = 1;
    int N = 2;
    int L = 3;
    double p = 2.0;
    double delta = 0.0;  ///< 0: default gap; > 0: explicit gap width
    double eta = 0.0;    ///< > 0: search for a gap meeting this transition budget
    std::string decoder = "table";  ///< "table" or "sine"
    double fit_eps = 1e-3;
    bool fall_back = true;
    int fit_w_candidates = 256;
    std::int64_t fit_n_max = 10'000'000;
    std::string bound = "modulus";  ///< "modulus" or "holder"
    double alpha = 0.0;             ///< holder-mode override
    double lambda = 0.0;            ///< holder-mode override
    double quad_rel = 0.05;
    std::string out_dir = "out";
    std::uint64_t seed = 0x6d676e6574ull;
    int sweep_min = 1;
    int sweep_max = 0;  ///< >= sweep_min enables depth sweeps
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double parse_double_value(const std::string& value) {
    if (value == "inf" || value == "infinity" || value == "Inf") return INFINITY;
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters in '" + value + "'");
    return v;
}

inline long long parse_int_value(const std::string& value) {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters in '" + value + "'");
    return v;
}

inline bool parse_bool_value(const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw std::invalid_argument("expected a boolean, got '" + value + "'");
}

}  // namespace detail

/// Applies one key=value setting. Unknown keys and malformed values throw
/// std::invalid_argument.
inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
    using detail::parse_bool_value;
    using detail::parse_double_value;
    using detail::parse_int_value;
    if (key == "target") cfg.target = value;
    else if (key == "d") cfg.d = static_cast<int>(parse_int_value(value));
    else if (key == "N") cfg.N = static_cast<int>(parse_int_value(value));
    else if (key == "L") cfg.L = static_cast<int>(parse_int_value(value));
    else if (key == "p") cfg.p = parse_double_value(value);
    else if (key == "delta") cfg.delta = parse_double_value(value);
    else if (key == "eta") cfg.eta = parse_double_value(value);
    else if (key == "decoder") cfg.decoder = value;
    else if (key == "fit_eps") cfg.fit_eps = parse_double_value(value);
    else if (key == "fall_back") cfg.fall_back = parse_bool_value(value);
    else if (key == "fit_w_candidates") cfg.fit_w_candidates = static_cast<int>(parse_int_value(value));
    else if (key == "fit_n_max") cfg.fit_n_max = parse_int_value(value);
    else if (key == "bound") cfg.bound = value;
    else if (key == "alpha") cfg.alpha = parse_double_value(value);
    else if (key == "lambda") cfg.lambda = parse_double_value(value);
    else if (key == "quad_rel") cfg.quad_rel = parse_double_value(value);
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int_value(value));
    else if (key == "sweep_min") cfg.sweep_min = static_cast<int>(parse_int_value(value));
    else if (key == "sweep_max") cfg.sweep_max = static_cast<int>(parse_int_value(value));
    else throw std::invalid_argument("unknown key '" + key + "'");
}

/// Reads a flat key=value file ('#' starts a comment). Errors carry the file
/// name and line number.
inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        const auto fail = [&](const std::string& msg) -> void {
            throw std::runtime_error("config " + path + " line " + std::to_string(lineno) +
                                     ": " + msg);
        };
        if (eq == std::string::npos) fail("expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) fail("empty key");
        try {
            apply_config_entry(cfg, key, value);
        } catch (const std::exception& e) {
            fail(e.what());
        }
    }
    return cfg;
}

/// Resolves "grid:<path>" to a sampled target, anything else to the catalog.
inline TargetFunction resolve_target(const std::string& name, int d, double p) {
    if (name.rfind("grid:", 0) == 0) {
        TargetFunction f = load_target_grid(name.substr(5), p);
        if (f.dimension != d)
            throw std::invalid_argument("target grid has dimension " +
                                        std::to_string(f.dimension) + ", experiment wants " +
                                        std::to_string(d));
        return f;
    }
    return make_target(name, d, p);
}

/// The gap search ran out of candidates without meeting the budget.
struct GapSearchFailure : std::runtime_error {
    DeltaSearchResult search;
    explicit GapSearchFailure(DeltaSearchResult found)
        : std::runtime_error("gap search exhausted its candidates without meeting the budget"
                             " (worst overshoot " +
                             std::to_string(found.worst_excess) + ")"),
          search(found) {}
};

struct ExperimentResult {
    ExperimentConfig config;
    PartitionConfig partition;
    TargetFunction target;
    MultigradeNet net;
    BoundReport report;
    bool used_delta_search = false;
    DeltaSearchResult delta_search;
    std::vector<std::string> files_written;
};

namespace detail {

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg,
                                             const PartitionConfig& part) {
    nlohmann::ordered_json j{{"schema", "experiment-params/1"},
                             {"target", cfg.target},
                             {"d", cfg.d},
                             {"N", cfg.N},
                             {"L", cfg.L},
                             {"delta", part.delta},
                             {"eta", cfg.eta},
                             {"decoder", cfg.decoder},
                             {"fit_eps", cfg.fit_eps},
                             {"fall_back", cfg.fall_back},
                             {"bound", cfg.bound},
                             {"alpha", cfg.alpha},
                             {"lambda", cfg.lambda},
                             {"quad_rel", cfg.quad_rel},
                             {"seed", cfg.seed},
                             {"width", stack_width(part)},
                             {"parameters", count_parameters(part)}};
    if (std::isinf(cfg.p))
        j["p"] = "inf";
    else
        j["p"] = cfg.p;
    return j;
}

inline void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline DecoderOptions decoder_options_from(const ExperimentConfig& cfg) {
    DecoderOptions opts;
    if (cfg.decoder == "sine")
        opts.mode = DecoderMode::sine;
    else if (cfg.decoder == "table")
        opts.mode = DecoderMode::table;
    else
        throw std::invalid_argument("decoder must be 'table' or 'sine', got '" + cfg.decoder +
                                    "'");
    opts.eps = cfg.fit_eps;
    opts.fall_back_to_table = cfg.fall_back;
    opts.budget.w_candidates = cfg.fit_w_candidates;
    opts.budget.n_max = cfg.fit_n_max;
    return opts;
}

inline VerifyOptions verify_options_from(const ExperimentConfig& cfg) {
    VerifyOptions opts;
    if (cfg.bound == "holder")
        opts.mode = BoundMode::holder;
    else if (cfg.bound == "modulus")
        opts.mode = BoundMode::modulus;
    else
        throw std::invalid_argument("bound must be 'modulus' or 'holder', got '" + cfg.bound +
                                    "'");
    opts.quad_rel = cfg.quad_rel;
    opts.alpha_override = cfg.alpha;
    opts.lambda_override = cfg.lambda;
    return opts;
}

/// Builds the partition, running the gap search when a budget is set.
inline PartitionConfig resolve_partition(const ExperimentConfig& cfg, const TargetFunction& f,
                                         bool* used_search, DeltaSearchResult* search) {
    PartitionConfig part{cfg.d, cfg.N, cfg.L,
                         cfg.delta > 0.0 ? cfg.delta : PartitionConfig::default_delta(cfg.N, cfg.L)};
    if (cfg.delta <= 0.0 && cfg.eta > 0.0) {
        const DeltaSearchResult found = choose_delta(f.eval, cfg.d, cfg.N, cfg.L, cfg.p,
                                                     cfg.eta, norm_engine_for(cfg.d));
        if (!found.ok) throw GapSearchFailure(found);
        part.delta = found.delta;
        if (used_search) *used_search = true;
        if (search) *search = found;
    }
    part.validate();
    return part;
}

}  // namespace detail

/// Builds and certifies one experiment, writing bound_report.csv,
/// modulus.csv (modulus mode), net.json, params.json, and summary.json into
/// config.out_dir.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_files = true) {
    ExperimentResult result;
    result.config = cfg;
    result.target = resolve_target(cfg.target, cfg.d, cfg.p);
    result.partition = detail::resolve_partition(cfg, result.target, &result.used_delta_search,
                                                 &result.delta_search);

    CellAverageEngine engine = CellAverageEngine::for_dimension(cfg.d);
    engine.seed = cfg.seed;
    result.net = build_net(result.target, result.partition, engine,
                           detail::decoder_options_from(cfg));
    result.report = verify_bounds(result.net, result.target, detail::verify_options_from(cfg));

    if (!write_files) return result;
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const auto emit = [&](const std::string& name) {
        result.files_written.push_back((fs::path(cfg.out_dir) / name).string());
        return result.files_written.back();
    };

    write_bound_report_csv(emit("bound_report.csv"), result.report);
    if (!result.report.moduli.empty()) write_modulus_csv(emit("modulus.csv"), result.report.moduli);

    nlohmann::ordered_json jnet;
    to_json(jnet, result.net);
    detail::write_json_file(emit("net.json"), jnet);
    detail::write_json_file(emit("params.json"),
                            detail::config_to_json(cfg, result.partition));

    nlohmann::ordered_json summary{{"schema", "experiment-summary/1"},
                                   {"target", result.target.name},
                                   {"passed", result.report.passed},
                                   {"mode", to_string(result.report.mode)},
                                   {"delta", result.partition.delta}};
    if (std::isinf(cfg.p))
        summary["p"] = "inf";
    else
        summary["p"] = cfg.p;
    if (result.used_delta_search) {
        summary["delta_search"] = {{"trials", result.delta_search.trials},
                                   {"margin", result.delta_search.margin}};
    }
    summary["levels"] = nlohmann::ordered_json::array();
    for (const BoundRow& row : result.report.rows) {
        summary["levels"].push_back({{"level", row.level},
                                     {"error", row.error},
                                     {"bound", row.bound},
                                     {"tolerance", row.tolerance},
                                     {"margin", row.margin},
                                     {"pass", row.pass}});
    }
    summary["achieved_eps"] = nlohmann::ordered_json::array();
    summary["sup_bounds"] = nlohmann::ordered_json::array();
    for (const GradeTerm& term : result.net.grades) {
        summary["achieved_eps"].push_back(term.achieved_eps);
        summary["sup_bounds"].push_back(term.sup_bound);
    }
    detail::write_json_file(emit("summary.json"), summary);
    return result;
}

// --- Depth sweeps ---------------------------------------------------------------

struct SweepRow {
    int L = 0;
    std::int64_t parameters = 0;
    double delta = 0.0;
    double error = 0.0;      ///< deepest level's measured error
    double bound = 0.0;      ///< deepest level's certified bound
    double tolerance = 0.0;
    double margin = 0.0;
    bool pass = false;       ///< the whole report at this depth
};

struct SweepResult {
    std::vector<SweepRow> rows;
    bool passed = false;
    std::string csv_path;
};

/// Runs the experiment at every depth in [sweep_min, sweep_max] and records
/// the deepest level's certificate per depth in sweep.csv. An explicit delta
/// is reused across depths (and must stay valid for the largest); otherwise
/// each depth takes its own default gap.
inline SweepResult run_sweep(const ExperimentConfig& cfg, bool write_files = true) {
    if (cfg.sweep_max < cfg.sweep_min)
        throw std::invalid_argument("sweep: need sweep_max >= sweep_min");
    if (cfg.sweep_min < 0) throw std::invalid_argument("sweep: need sweep_min >= 0");

    SweepResult result;
    result.passed = true;
    for (int depth = cfg.sweep_min; depth <= cfg.sweep_max; ++depth) {
        ExperimentConfig step = cfg;
        step.L = depth;
        const ExperimentResult run = run_experiment(step, false);
        const BoundRow& deepest = run.report.rows.back();
        SweepRow row;
        row.L = depth;
        row.parameters = count_parameters(run.partition);
        row.delta = run.partition.delta;
        row.error = deepest.error;
        row.bound = deepest.bound;
        row.tolerance = deepest.tolerance;
        row.margin = deepest.margin;
        row.pass = run.report.passed;
        result.passed = result.passed && row.pass;
        result.rows.push_back(row);
    }

    if (write_files) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.out_dir);
        result.csv_path = (fs::path(cfg.out_dir) / "sweep.csv").string();
        std::ofstream out(result.csv_path);
        if (!out) throw std::runtime_error("cannot open for writing: " + result.csv_path);
        out << "# schema: sweep/1\n";
        out << "L,parameters,delta,error,bound,tolerance,margin,pass\n";
        for (const SweepRow& row : result.rows) {
            out << row.L << ',' << row.parameters << ',' << detail::csv_double(row.delta) << ','
                << detail::csv_double(row.error) << ',' << detail::csv_double(row.bound) << ','
                << detail::csv_double(row.tolerance) << ',' << detail::csv_double(row.margin)
                << ',' << (row.pass ? 1 : 0) << '\n';
        }
        if (!out) throw std::runtime_error("write failed: " + result.csv_path);
    }
    return result;
}

}  // namespace mgnet
