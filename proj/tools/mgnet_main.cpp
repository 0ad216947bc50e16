// mgnet: build fixed-width multigrade nets, certify their level-by-level
// accuracy, estimate smoothness moduli, sweep depth, and export weights.
//
// Exit codes: 0 success; 1 a build or certification failed honestly;
// 2 usage or configuration error; 3 unexpected runtime failure.

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mgnet/mgnet.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailedCheck = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void print_report(const mgnet::BoundReport& report) {
    std::printf("level   error        bound        tolerance    margin      pass\n");
    for (const mgnet::BoundRow& row : report.rows) {
        std::printf("%-7d %-12s %-12s %-12s %-11s %s\n", row.level, fmt(row.error).c_str(),
                    fmt(row.bound).c_str(), fmt(row.tolerance).c_str(), fmt(row.margin).c_str(),
                    row.pass ? "yes" : "NO");
    }
}

void print_files(const std::vector<std::string>& files) {
    for (const std::string& f : files) std::printf("wrote %s\n", f.c_str());
}

// Pre-scan for --config so flag values always override file values.
mgnet::ExperimentConfig load_base_config(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") return mgnet::parse_config_file(argv[i + 1]);
    }
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.rfind("--config=", 0) == 0) return mgnet::parse_config_file(arg.substr(9));
    }
    return mgnet::ExperimentConfig{};
}

std::string p_as_string(double p) { return std::isinf(p) ? "inf" : fmt(p); }

void add_common_options(CLI::App* cmd, mgnet::ExperimentConfig& cfg, std::string& p_text) {
    static std::string config_path;  // parsed up front by load_base_config
    cmd->add_option("--config", config_path, "key=value configuration file (flags override it)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--target", cfg.target, "catalog target name, or grid:<path>");
    cmd->add_option("-d,--dimension", cfg.d, "input dimension");
    cmd->add_option("-N,--subdivisions", cfg.N, "cells per axis refined at each level");
    cmd->add_option("-L,--depth", cfg.L, "number of refinement levels");
    cmd->add_option("-p,--exponent", p_text, "norm exponent (a number, or inf)");
    cmd->add_option("--delta", cfg.delta, "explicit gap width (0: default)");
    cmd->add_option("--eta", cfg.eta, "gap-mass budget enabling the gap search");
    cmd->add_option("--decoder", cfg.decoder, "grade storage: table or sine")
        ->check(CLI::IsMember({"table", "sine"}));
    cmd->add_option("--fit-eps", cfg.fit_eps, "per-level decoder fit tolerance");
    cmd->add_flag("--no-fallback", "fail the build instead of degrading to tables");
    cmd->add_option("--fit-w-candidates", cfg.fit_w_candidates, "inner-frequency attempts");
    cmd->add_option("--fit-n-max", cfg.fit_n_max, "phase-wrap search ceiling");
    cmd->add_option("--bound", cfg.bound, "certificate mode: modulus or holder")
        ->check(CLI::IsMember({"modulus", "holder"}));
    cmd->add_option("--alpha", cfg.alpha, "holder exponent override");
    cmd->add_option("--lambda", cfg.lambda, "holder constant override");
    cmd->add_option("--quad-rel", cfg.quad_rel, "quadrature slack fraction");
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_option("--seed", cfg.seed, "sampling seed");
}

void finish_config(CLI::App* cmd, mgnet::ExperimentConfig& cfg, const std::string& p_text) {
    if (!p_text.empty()) cfg.p = mgnet::detail::parse_double_value(p_text);
    if (cmd->count("--no-fallback") > 0) cfg.fall_back = false;
}

int run_build(const mgnet::ExperimentConfig& cfg) {
    const mgnet::TargetFunction f = mgnet::resolve_target(cfg.target, cfg.d, cfg.p);
    bool used_search = false;
    mgnet::DeltaSearchResult search;
    const mgnet::PartitionConfig part =
        mgnet::detail::resolve_partition(cfg, f, &used_search, &search);
    mgnet::CellAverageEngine engine = mgnet::CellAverageEngine::for_dimension(cfg.d);
    engine.seed = cfg.seed;
    const mgnet::MultigradeNet net =
        mgnet::build_net(f, part, engine, mgnet::detail::decoder_options_from(cfg));

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    nlohmann::ordered_json jnet;
    to_json(jnet, net);
    const std::string net_path = (fs::path(cfg.out_dir) / "net.json").string();
    mgnet::detail::write_json_file(net_path, jnet);
    const std::string params_path = (fs::path(cfg.out_dir) / "params.json").string();
    mgnet::detail::write_json_file(params_path, mgnet::detail::config_to_json(cfg, part));

    std::printf("built %s: d=%d N=%d L=%d delta=%s p=%s\n", f.name.c_str(), part.d, part.N,
                part.L, fmt(part.delta).c_str(), p_as_string(cfg.p).c_str());
    if (used_search)
        std::printf("gap search: %d trials, margin %s\n", search.trials,
                    fmt(search.margin).c_str());
    std::printf("width %d, parameters %lld\n", mgnet::stack_width(part),
                static_cast<long long>(mgnet::count_parameters(part)));
    for (const mgnet::GradeTerm& term : net.grades)
        std::printf("level %d: %s, sup %s, fit error %s\n", term.level,
                    to_string(term.mode).c_str(), fmt(term.sup_bound).c_str(),
                    fmt(term.achieved_eps).c_str());
    std::printf("wrote %s\nwrote %s\n", net_path.c_str(), params_path.c_str());
    return kExitOk;
}

int run_verify(const mgnet::ExperimentConfig& cfg) {
    const mgnet::ExperimentResult result = mgnet::run_experiment(cfg);
    std::printf("target %s, p=%s, %s bounds, delta=%s\n", result.target.name.c_str(),
                p_as_string(cfg.p).c_str(), to_string(result.report.mode).c_str(),
                fmt(result.partition.delta).c_str());
    print_report(result.report);
    print_files(result.files_written);
    if (!result.report.passed) {
        std::fprintf(stderr, "certification FAILED: a level exceeded bound + tolerance\n");
        return kExitFailedCheck;
    }
    std::printf("certification passed at every level\n");
    return kExitOk;
}

int run_modulus(const mgnet::ExperimentConfig& cfg) {
    const mgnet::TargetFunction f = mgnet::resolve_target(cfg.target, cfg.d, cfg.p);
    const mgnet::CellAverageEngine engine = mgnet::norm_engine_for(cfg.d);
    std::vector<mgnet::ModulusEstimate> estimates;
    for (int level = 0; level <= cfg.L; ++level) {
        const double t = std::pow(static_cast<double>(cfg.N), -static_cast<double>(level));
        estimates.push_back(mgnet::estimate_modulus(f, t, mgnet::ModulusPlan{}, engine));
        std::printf("t=%-12s omega>=%s\n", fmt(t).c_str(), fmt(estimates.back().omega).c_str());
    }
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const std::string path = (fs::path(cfg.out_dir) / "modulus.csv").string();
    mgnet::write_modulus_csv(path, estimates);
    std::printf("wrote %s\n", path.c_str());
    return kExitOk;
}

int run_sweep_cmd(const mgnet::ExperimentConfig& cfg) {
    const mgnet::SweepResult sweep = mgnet::run_sweep(cfg);
    std::printf("L       parameters   error        bound        pass\n");
    for (const mgnet::SweepRow& row : sweep.rows)
        std::printf("%-7d %-12lld %-12s %-12s %s\n", row.L, static_cast<long long>(row.parameters),
                    fmt(row.error).c_str(), fmt(row.bound).c_str(), row.pass ? "yes" : "NO");
    std::printf("wrote %s\n", sweep.csv_path.c_str());
    if (!sweep.passed) {
        std::fprintf(stderr, "sweep FAILED: a depth missed its certificate\n");
        return kExitFailedCheck;
    }
    return kExitOk;
}

int run_export(const mgnet::ExperimentConfig& cfg) {
    mgnet::ExperimentConfig build_cfg = cfg;
    build_cfg.decoder = "sine";
    build_cfg.fall_back = false;  // export needs every grade compressed
    const mgnet::TargetFunction f = mgnet::resolve_target(cfg.target, cfg.d, cfg.p);
    const mgnet::PartitionConfig part =
        mgnet::detail::resolve_partition(build_cfg, f, nullptr, nullptr);
    mgnet::CellAverageEngine engine = mgnet::CellAverageEngine::for_dimension(cfg.d);
    engine.seed = cfg.seed;
    const mgnet::MultigradeNet net =
        mgnet::build_net(f, part, engine, mgnet::detail::decoder_options_from(build_cfg));
    const mgnet::ReluLayerStack stack = mgnet::export_weights(net);

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    nlohmann::ordered_json j;
    to_json(j, stack);
    const std::string path = (fs::path(cfg.out_dir) / "weights.json").string();
    mgnet::detail::write_json_file(path, j);
    std::printf("exported stack: width %d, layers %zu, heads %zu, parameters %lld\n",
                stack.width, stack.layers.size(), stack.heads.size(),
                static_cast<long long>(count_parameters(stack)));
    std::printf("wrote %s\n", path.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fixed-width multigrade network toolkit"};
    app.require_subcommand(1);

    mgnet::ExperimentConfig cfg;
    try {
        cfg = load_base_config(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    std::string p_text;

    CLI::App* build = app.add_subcommand("build", "build a net and write net.json");
    CLI::App* verify = app.add_subcommand("verify", "build, certify every level, write reports");
    CLI::App* modulus = app.add_subcommand("modulus", "estimate the smoothness modulus");
    CLI::App* sweep = app.add_subcommand("sweep", "certify across a range of depths");
    CLI::App* exportw = app.add_subcommand("export-weights", "emit the fixed-width stack");
    for (CLI::App* cmd : {build, verify, modulus, sweep, exportw})
        add_common_options(cmd, cfg, p_text);
    sweep->add_option("--sweep-min", cfg.sweep_min, "first depth");
    sweep->add_option("--sweep-max", cfg.sweep_max, "last depth");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        CLI::App* active = app.get_subcommands().front();
        finish_config(active, cfg, p_text);
        if (active == build) return run_build(cfg);
        if (active == verify) return run_verify(cfg);
        if (active == modulus) return run_modulus(cfg);
        if (active == sweep) return run_sweep_cmd(cfg);
        return run_export(cfg);
    } catch (const mgnet::BuildFailure& e) {
        std::fprintf(stderr, "build failed: %s\n", e.what());
        return kExitFailedCheck;
    } catch (const mgnet::GapSearchFailure& e) {
        std::fprintf(stderr, "gap search failed: %s\n", e.what());
        return kExitFailedCheck;
    } catch (const mgnet::UnsupportedModeError& e) {
        std::fprintf(stderr, "export failed: %s\n", e.what());
        return kExitFailedCheck;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}
