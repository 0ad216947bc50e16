#pragma once

// Constructive multigrade networks. Grade l stores one constant per level-l
// cell: the cell average of the residual left by grades 0..l-1. Residuals
// never re-integrate the network, since every earlier grade is constant on
// each deeper cell; the stored value is the target's cell average minus the
// ancestors' constants. Readouts are prefix sums of grade terms, and when
// every grade is held in compressed nested-sine form, the whole construction
// exports to one fixed-width stack of width 2dN + d + 2.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "decoder.hpp"
#include "encoder.hpp"
#include "partition.hpp"
#include "targets.hpp"
#include "weights.hpp"

namespace mgnet {

enum class DecoderMode { table, sine };

inline std::string to_string(DecoderMode m) {
    return m == DecoderMode::table ? "table" : "sine";
}

inline DecoderMode decoder_mode_from_string(const std::string& s) {
    if (s == "table") return DecoderMode::table;
    if (s == "sine") return DecoderMode::sine;
    throw std::invalid_argument("decoder mode: unknown name '" + s + "'");
}

struct DecoderOptions {
    DecoderMode mode = DecoderMode::table;
    double eps = 1e-3;  ///< per-level fit tolerance for compressed grades
    FitBudget budget;
    bool fall_back_to_table = true;  ///< degrade to a table when a fit fails
};

/// One grade: a constant per cell at its level, stored either as a table or
/// as a fitted nested-sine decoder.
struct GradeTerm {
    int level = 0;
    DecoderMode mode = DecoderMode::table;
    SineDecoder sine;    // valid when mode == sine
    TableDecoder table;  // valid when mode == table
    double sup_bound = 0.0;     ///< max over cells of |constant|
    double achieved_eps = 0.0;  ///< certified table error (0 for exact tables)

    double value(std::int64_t k) const {
        return mode == DecoderMode::sine ? sine.value(k) : table.value(k);
    }

    /// Continuous extension used between cells; matches the exported network
    /// for compressed grades and interpolates linearly in k for tables.
    double value_at(double k) const {
        return mode == DecoderMode::sine ? sine.value_at(k) : table.value_at(k);
    }

    std::int64_t cells() const {
        return mode == DecoderMode::sine ? sine.table_size : table.table_size();
    }
};

struct MultigradeNet {
    PartitionConfig config;
    double p = 2.0;  ///< norm exponent the build targeted (INFINITY allowed)
    std::string target_name;
    CellAverageEngine engine;
    std::vector<GradeTerm> grades;  ///< one per level, 0..L
};

/// Fit failure carrying everything built before the failing level.
struct BuildFailure : std::runtime_error {
    MultigradeNet partial;
    int failed_level = 0;
    FitOutcome outcome;

    static std::string describe(int level, const FitOutcome& out) {
        char best[32];
        std::snprintf(best, sizeof best, "%.3g", out.best_eps);
        return "build: decoder fit failed at level " + std::to_string(level) +
               " (best error " + best + ")";
    }

    BuildFailure(MultigradeNet net, int level, FitOutcome out)
        : std::runtime_error(describe(level, out)),
          partial(std::move(net)),
          failed_level(level),
          outcome(std::move(out)) {}
};

struct UnsupportedModeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat index of the level-t ancestor of a (possibly deeper) cell.
inline std::int64_t ancestor_index(const PartitionConfig& cfg, const CellLabel& label, int t) {
    if (t < 0 || t > label.level) throw std::out_of_range("ancestor_index: level out of range");
    const std::int64_t shrink = ipow64(cfg.N, label.level - t);
    CellLabel anc{t, label.coords};
    for (std::int64_t& c : anc.coords) c /= shrink;
    return label_to_index(cfg, anc);
}

/// Value of the level-`upto` readout on the interior of the given cell, via
/// the exact integer ancestor path (the readout is constant there).
inline double cell_constant(const MultigradeNet& net, int upto, const CellLabel& label) {
    if (upto < 0 || upto >= static_cast<int>(net.grades.size()))
        throw std::out_of_range("cell_constant: level out of range");
    if (label.level < upto)
        throw std::invalid_argument("cell_constant: cell is coarser than the readout level");
    double acc = 0.0;
    for (int t = 0; t <= upto; ++t)
        acc += net.grades[t].value(ancestor_index(net.config, label, t));
    return acc;
}

/// Build the net for a target: per level, average the residual over every
/// cell and store the table (optionally compressed into a nested-sine fit).
inline MultigradeNet build_net(const TargetFunction& f, const PartitionConfig& cfg,
                               const CellAverageEngine& engine,
                               const DecoderOptions& opts = DecoderOptions{}) {
    cfg.validate();
    engine.validate();
    if (!f.eval) throw std::invalid_argument("build: target has no evaluator");
    if (f.dimension != cfg.d) throw std::invalid_argument("build: target dimension mismatch");

    MultigradeNet net{cfg, f.p, f.name, engine, {}};
    for (int level = 0; level <= cfg.L; ++level) {
        const std::int64_t count = cfg.cube_count(level);
        std::vector<double> residuals(static_cast<std::size_t>(count));
        for (std::int64_t k = 1; k <= count; ++k) {
            const CellLabel label = index_to_label(cfg, level, k);
            const double avg = cell_average(f.eval, cell_box(cfg, label), engine);
            const double prior = level == 0 ? 0.0 : cell_constant(net, level - 1, label);
            residuals[static_cast<std::size_t>(k - 1)] = avg - prior;
        }

        GradeTerm term;
        term.level = level;
        if (opts.mode == DecoderMode::sine) {
            FitOutcome fit = fit_two_sine(residuals, opts.eps, opts.budget);
            if (fit.ok) {
                term.mode = DecoderMode::sine;
                term.sine = fit.decoder;
                term.achieved_eps = fit.decoder.achieved_eps;
            } else if (opts.fall_back_to_table) {
                term.mode = DecoderMode::table;
                term.table.values = std::move(residuals);
            } else {
                throw BuildFailure(std::move(net), level, std::move(fit));
            }
        } else {
            term.table.values = std::move(residuals);
        }
        for (std::int64_t k = 1; k <= count; ++k)
            term.sup_bound = std::max(term.sup_bound, std::fabs(term.value(k)));
        net.grades.push_back(std::move(term));
    }
    return net;
}

/// The ramp recursion's anchors at every level, evaluated in floating point
/// exactly as the exported network does (level 0 is the zero anchor).
inline std::vector<std::vector<double>> anchor_path(const PartitionConfig& cfg,
                                                    std::span<const double> x) {
    const StepProxy proxy{cfg.N, cfg.delta};
    std::vector<std::vector<double>> anchors;
    anchors.reserve(cfg.L + 1);
    anchors.emplace_back(cfg.d, 0.0);
    for (int level = 1; level <= cfg.L; ++level)
        anchors.push_back(apply_h(proxy, level, x, anchors.back()));
    return anchors;
}

/// Fractional flat cell index from an anchor: 1 + sum_i N^{l i} y_i. Integer
/// exactly when the anchor is a true cell anchor.
inline double fractional_index(const PartitionConfig& cfg, int level,
                               std::span<const double> y) {
    cfg.require_level(level);
    const double per = static_cast<double>(cfg.cells_per_axis(level));
    double k = 1.0;
    double mult = 1.0;
    for (int i = 0; i < cfg.d; ++i) {
        mult *= per;
        k += mult * y[i];
    }
    return k;
}

/// Single grade term at a point (continuous, network-faithful semantics).
inline double grade_value(const MultigradeNet& net, int level, std::span<const double> x) {
    if (level < 0 || level >= static_cast<int>(net.grades.size()))
        throw std::out_of_range("grade_value: level out of range");
    const auto anchors = anchor_path(net.config, x);
    const double k = fractional_index(net.config, level, anchors[level]);
    return net.grades[level].value_at(k);
}

/// All intermediate readouts at once: entry l is the level-l readout, the
/// sum of grade terms 0..l.
inline std::vector<double> readout_all(const MultigradeNet& net, std::span<const double> x) {
    const auto anchors = anchor_path(net.config, x);
    std::vector<double> out;
    out.reserve(net.grades.size());
    double acc = 0.0;
    for (const GradeTerm& term : net.grades) {
        acc += term.value_at(fractional_index(net.config, term.level, anchors[term.level]));
        out.push_back(acc);
    }
    return out;
}

/// The level-l readout at a point.
inline double readout(const MultigradeNet& net, int level, std::span<const double> x) {
    if (level < 0 || level >= static_cast<int>(net.grades.size()))
        throw std::out_of_range("readout: level out of range");
    return readout_all(net, x)[static_cast<std::size_t>(level)];
}

/// Fixed architecture width of the exported stack: 2dN + d + 2.
inline int stack_width(const PartitionConfig& cfg) { return 2 * cfg.d * cfg.N + cfg.d + 2; }

/// Parameter count of the exported architecture: the input layer holds
/// W(d+1) scalars and each of the L+1 square layers plus its head holds
/// (W+1)^2, so the total is affine in the depth L.
inline std::int64_t count_parameters(const PartitionConfig& cfg) {
    const std::int64_t w = stack_width(cfg);
    return static_cast<std::int64_t>(cfg.L + 1) * (w + 1) * (w + 1) + w * (cfg.d + 1);
}

inline std::int64_t count_parameters(const MultigradeNet& net) {
    return count_parameters(net.config);
}

/// Smallest depth m >= 1 with (2d+1) * lambda * N^{-alpha m} <= eps.
inline int depth_for_accuracy(double alpha, double lambda, int d, int N, double eps) {
    if (!(alpha > 0.0) || !(lambda > 0.0) || !(eps > 0.0))
        throw std::invalid_argument("depth: alpha, lambda, eps must be positive");
    if (d < 1 || N < 2) throw std::invalid_argument("depth: need d >= 1 and N >= 2");
    const double need =
        std::log((2.0 * d + 1.0) * lambda / eps) / (std::log(static_cast<double>(N)) * alpha);
    const auto m = static_cast<int>(std::ceil(need - 1e-9));
    return std::max(1, m);
}

/// Export the whole construction as one fixed-width stack. Requires every
/// grade in compressed form: layer s refines the anchors, a sine channel
/// forms sin(w_s k_s) from them, a second sine channel wraps it once more,
/// and head l taps that channel after layer l+1 with weight u_l. The level-l
/// readout is the sum of head values 0..l.
inline ReluLayerStack export_weights(const MultigradeNet& net) {
    const PartitionConfig& cfg = net.config;
    for (const GradeTerm& term : net.grades)
        if (term.mode != DecoderMode::sine)
            throw UnsupportedModeError(
                "export: level " + std::to_string(term.level) +
                " is stored as a table; weight export needs compressed grades");
    if (static_cast<int>(net.grades.size()) != cfg.L + 1)
        throw std::invalid_argument("export: net is missing grades");

    const int d = cfg.d;
    const int N = cfg.N;
    const int width = stack_width(cfg);
    constexpr int s1 = 0;  // inner sine channel: sin(w_s * k_s)
    constexpr int s2 = 1;  // outer sine channel: sin(v_{s-1} * sin(...))
    const int x0 = 2;
    const int y0 = 2 + d;
    const detail::RampLayout ramps{d, N, 2 + 2 * d};
    // Channels beyond the ramps stay zero; the width budget reserves them.

    ReluLayerStack stack;
    stack.input_dim = d;
    stack.width = width;

    AffineLayer input = AffineLayer::zeros(width, d);
    detail::fill_input_rows(input, cfg, x0, ramps);
    input.bias[s1] = net.grades[0].sine.w;  // k_0 = 1 always
    input.activations[s1] = Activation::sine;
    stack.layers.push_back(std::move(input));

    for (int s = 1; s <= cfg.L + 1; ++s) {
        AffineLayer layer = AffineLayer::zeros(width, width);
        detail::fill_refinement_rows(layer, cfg, s, x0, y0, ramps);
        if (s <= cfg.L) {
            // sin(w_s k_s) with k_s expressed through the incoming state.
            const double w_s = net.grades[s].sine.w;
            const double level_scale = static_cast<double>(ipow64(N, s));
            double axis_scale = 1.0;
            for (int i = 0; i < d; ++i) {
                axis_scale *= level_scale;  // N^{s (i+1)}
                layer.at(s1, y0 + i) = w_s * axis_scale;
                const double fold = w_s * axis_scale / (level_scale * cfg.delta);
                for (int j = 1; j < N; ++j) {
                    layer.at(s1, ramps.up(i, j)) = fold;
                    layer.at(s1, ramps.down(i, j)) = -fold;
                }
            }
            layer.bias[s1] = w_s;
            layer.activations[s1] = Activation::sine;
        }
        layer.at(s2, s1) = net.grades[s - 1].sine.v;
        layer.activations[s2] = Activation::sine;
        stack.layers.push_back(std::move(layer));
    }

    for (int level = 0; level <= cfg.L; ++level) {
        OutputHead head = OutputHead::zeros(level + 1, 1, width);
        head.at(0, s2, width) = net.grades[level].sine.u;
        stack.heads.push_back(std::move(head));
    }

    stack.validate();
    return stack;
}

// --- JSON serialization -----------------------------------------------------

inline void to_json(nlohmann::ordered_json& j, const MultigradeNet& net) {
    j = nlohmann::ordered_json{{"schema", "multigrade-net/1"},
                               {"target", net.target_name},
                               {"config",
                                {{"d", net.config.d},
                                 {"N", net.config.N},
                                 {"L", net.config.L},
                                 {"delta", net.config.delta}}},
                               {"engine",
                                {{"scheme", net.engine.scheme == AverageScheme::tensor_grid
                                                ? "tensor_grid"
                                                : "monte_carlo"},
                                 {"points_per_axis", net.engine.points_per_axis},
                                 {"sample_count", net.engine.sample_count},
                                 {"seed", net.engine.seed}}}};
    if (std::isinf(net.p))
        j["p"] = "inf";
    else
        j["p"] = net.p;
    j["grades"] = nlohmann::ordered_json::array();
    for (const GradeTerm& term : net.grades) {
        nlohmann::ordered_json jt{{"level", term.level},
                                  {"mode", to_string(term.mode)},
                                  {"sup_bound", term.sup_bound},
                                  {"achieved_eps", term.achieved_eps}};
        if (term.mode == DecoderMode::sine) {
            jt["sine"] = {{"u", term.sine.u},
                          {"v", term.sine.v},
                          {"w", term.sine.w},
                          {"achieved_eps", term.sine.achieved_eps},
                          {"table_size", term.sine.table_size}};
        } else {
            jt["table"] = term.table.values;
        }
        j["grades"].push_back(std::move(jt));
    }
}

inline void from_json(const nlohmann::ordered_json& j, MultigradeNet& net) {
    if (j.at("schema").get<std::string>() != "multigrade-net/1")
        throw std::runtime_error("net: unsupported schema");
    net.target_name = j.value("target", std::string{});
    const auto& jc = j.at("config");
    net.config = PartitionConfig{jc.at("d").get<int>(), jc.at("N").get<int>(),
                                 jc.at("L").get<int>(), jc.at("delta").get<double>()};
    net.config.validate();
    const auto& je = j.at("engine");
    net.engine.scheme = je.at("scheme").get<std::string>() == "tensor_grid"
                            ? AverageScheme::tensor_grid
                            : AverageScheme::monte_carlo;
    net.engine.points_per_axis = je.at("points_per_axis").get<int>();
    net.engine.sample_count = je.at("sample_count").get<int>();
    net.engine.seed = je.at("seed").get<std::uint64_t>();
    net.p = j.at("p").is_string() ? INFINITY : j.at("p").get<double>();
    net.grades.clear();
    for (const auto& jt : j.at("grades")) {
        GradeTerm term;
        term.level = jt.at("level").get<int>();
        term.mode = decoder_mode_from_string(jt.at("mode").get<std::string>());
        term.sup_bound = jt.at("sup_bound").get<double>();
        term.achieved_eps = jt.at("achieved_eps").get<double>();
        if (term.mode == DecoderMode::sine) {
            const auto& js = jt.at("sine");
            term.sine = SineDecoder{js.at("u").get<double>(), js.at("v").get<double>(),
                                    js.at("w").get<double>(), js.at("achieved_eps").get<double>(),
                                    js.at("table_size").get<std::int64_t>()};
        } else {
            term.table.values = jt.at("table").get<std::vector<double>>();
        }
        net.grades.push_back(std::move(term));
    }
}

}  // namespace mgnet
