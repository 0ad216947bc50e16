#pragma once

// Numerical certification: L^p norms, smoothness-modulus estimation from
// samples, and level-by-level verification that every intermediate readout
// of a built net stays within its guaranteed distance of the target. All
// checks are honest about their numerics: quadrature slack, decoder fit
// error, and the mass of the transition gaps enter an explicit tolerance
// column, never the bound itself.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "net.hpp"
#include "partition.hpp"
#include "quadrature.hpp"
#include "targets.hpp"

namespace mgnet {

/// Quadrature resolution used for norms and error sweeps, by dimension.
inline CellAverageEngine norm_engine_for(int d) {
    CellAverageEngine engine;
    engine.seed = 0x6e6f726d5f656e67ull;
    if (d <= 1) {
        engine.points_per_axis = 4096;
    } else if (d == 2) {
        engine.points_per_axis = 256;
    } else if (d == 3) {
        engine.points_per_axis = 64;
    } else {
        engine.scheme = AverageScheme::monte_carlo;
        engine.sample_count = 32768;
    }
    return engine;
}

/// ||f||_{L^p(box)}; p = INFINITY gives the max over quadrature nodes.
template <typename F>
double lp_norm(F&& f, const Box& box, double p, const CellAverageEngine& engine) {
    if (std::isinf(p)) {
        double sup = 0.0;
        visit_nodes(box, engine,
                    [&](std::span<const double> x) { sup = std::max(sup, std::fabs(f(x))); });
        return sup;
    }
    if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: need p >= 1 or p = inf");
    const double integral =
        integrate([&](std::span<const double> x) { return std::pow(std::fabs(f(x)), p); },
                  box, engine);
    return std::pow(std::max(integral, 0.0), 1.0 / p);
}

/// Norm over a union of disjoint boxes.
template <typename F>
double lp_norm(F&& f, const std::vector<Box>& boxes, double p,
               const CellAverageEngine& engine) {
    if (std::isinf(p)) {
        double sup = 0.0;
        for (const Box& box : boxes) sup = std::max(sup, lp_norm(f, box, p, engine));
        return sup;
    }
    if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: need p >= 1 or p = inf");
    long double total = 0.0L;
    for (const Box& box : boxes) {
        const double part = lp_norm(f, box, p, engine);
        total += std::pow(static_cast<long double>(part), static_cast<long double>(p));
    }
    return static_cast<double>(std::pow(total, 1.0L / static_cast<long double>(p)));
}

// --- Smoothness modulus ------------------------------------------------------

struct ModulusPlan {
    int extra_directions = 8;  ///< random unit shift directions beyond +-e_i
    int magnitudes = 8;        ///< shift radii probed per direction
    std::uint64_t seed = 0x6d6f64756c7573ull;

    void validate() const {
        if (extra_directions < 0) throw std::invalid_argument("modulus: extra_directions < 0");
        if (magnitudes < 1) throw std::invalid_argument("modulus: magnitudes < 1");
    }
};

struct ModulusEstimate {
    double t = 0.0;
    double omega = 0.0;        ///< estimated smoothness modulus at radius t
    bool lower_bound = true;   ///< sampled over finitely many shifts
    std::vector<double> radii;   ///< probed radii, ascending
    std::vector<double> values;  ///< running max of the shift norms per radius
};

/// Sample-based estimate of omega_{f,p}(t): the max over sampled shift
/// vectors s, |s| <= t, of ||f(.+s) - f(.)||_{L^p} over the overlap of the
/// unit cube with its shifted copy. Always a lower estimate of the true sup.
inline ModulusEstimate estimate_modulus(const TargetFunction& f, double t,
                                        const ModulusPlan& plan,
                                        const CellAverageEngine& engine) {
    plan.validate();
    engine.validate();
    if (!f.eval) throw std::invalid_argument("modulus: target has no evaluator");
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("modulus: need t > 0");
    if (!std::isinf(f.p) && !(f.p >= 1.0))
        throw std::invalid_argument("modulus: need p >= 1 or p = inf");

    const int d = f.dimension;
    std::vector<std::vector<double>> directions;
    for (int i = 0; i < d; ++i) {
        std::vector<double> e(d, 0.0);
        e[static_cast<std::size_t>(i)] = 1.0;
        directions.push_back(e);
        e[static_cast<std::size_t>(i)] = -1.0;
        directions.push_back(std::move(e));
    }
    std::uint64_t state = plan.seed;
    for (int k = 0; k < plan.extra_directions; ++k) {
        std::vector<double> u(d);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& c : u) {
                // Standard normal via Box-Muller: isotropic after normalizing.
                const double a = std::max(detail::uniform01(state), 1e-300);
                const double b = detail::uniform01(state);
                c = std::sqrt(-2.0 * std::log(a)) * std::cos(kTwoPi * b);
                norm += c * c;
            }
        } while (norm < 1e-12);
        norm = std::sqrt(norm);
        for (double& c : u) c /= norm;
        directions.push_back(std::move(u));
    }

    ModulusEstimate est;
    est.t = t;
    est.radii.resize(static_cast<std::size_t>(plan.magnitudes));
    est.values.assign(static_cast<std::size_t>(plan.magnitudes), 0.0);
    std::vector<double> shifted(d);
    for (int j = 1; j <= plan.magnitudes; ++j) {
        const double r = t * static_cast<double>(j) / static_cast<double>(plan.magnitudes);
        est.radii[static_cast<std::size_t>(j - 1)] = r;
        double best = 0.0;
        for (const auto& dir : directions) {
            Box overlap;
            overlap.lo.resize(d);
            overlap.hi.resize(d);
            bool empty = false;
            for (int i = 0; i < d; ++i) {
                const double s = r * dir[static_cast<std::size_t>(i)];
                overlap.lo[static_cast<std::size_t>(i)] = std::max(0.0, -s);
                overlap.hi[static_cast<std::size_t>(i)] = std::min(1.0, 1.0 - s);
                if (!(overlap.lo[static_cast<std::size_t>(i)] <
                      overlap.hi[static_cast<std::size_t>(i)]))
                    empty = true;
            }
            if (empty) continue;
            const auto difference = [&](std::span<const double> x) {
                for (int i = 0; i < d; ++i)
                    shifted[static_cast<std::size_t>(i)] =
                        x[static_cast<std::size_t>(i)] + r * dir[static_cast<std::size_t>(i)];
                return f.eval(shifted) - f.eval(x);
            };
            best = std::max(best, lp_norm(difference, overlap, f.p, engine));
        }
        est.values[static_cast<std::size_t>(j - 1)] = best;
    }
    for (std::size_t j = 1; j < est.values.size(); ++j)
        est.values[j] = std::max(est.values[j], est.values[j - 1]);
    est.omega = est.values.back();
    return est;
}

// --- Bound verification ------------------------------------------------------

enum class BoundMode { modulus, holder };

inline std::string to_string(BoundMode m) {
    return m == BoundMode::modulus ? "modulus" : "holder";
}

struct VerifyOptions {
    BoundMode mode = BoundMode::modulus;
    double quad_rel = 0.05;        ///< quadrature slack, as a fraction of the bound
    double modulus_safety = 1.10;  ///< inflates the sampled (lower) modulus estimate
    ModulusPlan modulus_plan;
    double alpha_override = 0.0;   ///< > 0 replaces the target's exponent
    double lambda_override = 0.0;  ///< > 0 replaces the target's constant
    std::optional<CellAverageEngine> norm_engine;  ///< default: norm_engine_for(d)
};

struct BoundRow {
    int level = 0;
    double error = 0.0;      ///< measured ||f - readout_level||_p on the unit cube
    double bound = 0.0;      ///< (2d+1) * smoothness term at scale N^{-level}
    double tolerance = 0.0;  ///< explicit numerical allowance (see BoundReport)
    double margin = 0.0;     ///< bound + tolerance - error
    bool pass = false;
    double transition_mass = 0.0;  ///< cumulative gap mass through this level
};

/// Level-by-level certificate. tolerance = quad_rel * bound + accumulated
/// decoder fit error + (sup|f| + accumulated grade sup) * mass^{1/p}, where
/// mass is the total measure of the transition gaps through that level: the
/// guarantee constrains cell interiors, and the gaps can contribute at most
/// the full deviation on their own mass.
struct BoundReport {
    std::string target;
    double p = 2.0;
    BoundMode mode = BoundMode::modulus;
    double alpha = 0.0;                   // holder mode
    double lambda = 0.0;                  // holder mode
    std::vector<ModulusEstimate> moduli;  // modulus mode, one per level
    std::vector<BoundRow> rows;
    bool passed = false;
};

/// Total gap mass through a level: sum over levels 0..l of the mass of the
/// level's transition region.
inline double cumulative_transition_mass(const PartitionConfig& cfg, int level) {
    double total = 0.0;
    for (int t = 0; t <= level; ++t) total += transition_mass(cfg, t);
    return std::min(total, 1.0);
}

inline BoundReport verify_bounds(const MultigradeNet& net, const TargetFunction& f,
                                 const VerifyOptions& opts = VerifyOptions{}) {
    const PartitionConfig& cfg = net.config;
    if (!f.eval) throw std::invalid_argument("verify: target has no evaluator");
    if (f.dimension != cfg.d) throw std::invalid_argument("verify: dimension mismatch");
    const bool same_p = (std::isinf(f.p) && std::isinf(net.p)) || f.p == net.p;
    if (!same_p)
        throw std::invalid_argument("verify: target exponent differs from the build exponent");
    if (static_cast<int>(net.grades.size()) != cfg.L + 1)
        throw std::invalid_argument("verify: net is missing grades");
    if (!(opts.quad_rel >= 0.0)) throw std::invalid_argument("verify: quad_rel < 0");
    if (!(opts.modulus_safety >= 1.0))
        throw std::invalid_argument("verify: modulus_safety < 1");

    const double p = net.p;
    const CellAverageEngine engine =
        opts.norm_engine ? *opts.norm_engine : norm_engine_for(cfg.d);
    engine.validate();

    BoundReport report;
    report.target = f.name;
    report.p = p;
    report.mode = opts.mode;

    double alpha = 0.0;
    double lambda = 0.0;
    if (opts.mode == BoundMode::holder) {
        alpha = opts.alpha_override > 0.0 ? opts.alpha_override : f.regularity.alpha;
        lambda = opts.lambda_override > 0.0 ? opts.lambda_override : f.regularity.lambda;
        if (!(alpha > 0.0) || !(lambda > 0.0))
            throw std::invalid_argument(
                "verify: target has no smoothness data; pass alpha/lambda overrides");
        report.alpha = alpha;
        report.lambda = lambda;
    }

    // One sweep over the unit cube accumulates every level's error at once.
    const int levels = cfg.L + 1;
    std::vector<long double> acc(static_cast<std::size_t>(levels), 0.0L);
    std::vector<double> sup(static_cast<std::size_t>(levels), 0.0);
    double sup_f = 0.0;
    const Box cube = Box::unit(cfg.d);
    const std::int64_t nodes =
        visit_nodes(cube, engine, [&](std::span<const double> x) {
            const double fx = f.eval(x);
            sup_f = std::max(sup_f, std::fabs(fx));
            const auto phi = readout_all(net, x);
            for (int l = 0; l < levels; ++l) {
                const double diff = std::fabs(fx - phi[static_cast<std::size_t>(l)]);
                if (std::isinf(p)) {
                    sup[static_cast<std::size_t>(l)] =
                        std::max(sup[static_cast<std::size_t>(l)], diff);
                } else {
                    acc[static_cast<std::size_t>(l)] +=
                        std::pow(static_cast<long double>(diff), static_cast<long double>(p));
                }
            }
        });

    const double factor = 2.0 * cfg.d + 1.0;
    double eps_sum = 0.0;
    double sup_sum = 0.0;
    report.passed = true;
    for (int l = 0; l < levels; ++l) {
        BoundRow row;
        row.level = l;
        row.error = std::isinf(p)
                        ? sup[static_cast<std::size_t>(l)]
                        : static_cast<double>(std::pow(
                              acc[static_cast<std::size_t>(l)] / static_cast<long double>(nodes),
                              1.0L / static_cast<long double>(p)));
        const double scale = std::pow(static_cast<double>(cfg.N), -static_cast<double>(l));
        if (opts.mode == BoundMode::holder) {
            row.bound = factor * lambda * std::pow(scale, alpha);
        } else {
            ModulusEstimate est = estimate_modulus(f, scale, opts.modulus_plan, engine);
            row.bound = factor * opts.modulus_safety * est.omega;
            report.moduli.push_back(std::move(est));
        }
        eps_sum += net.grades[static_cast<std::size_t>(l)].achieved_eps;
        sup_sum += net.grades[static_cast<std::size_t>(l)].sup_bound;
        row.transition_mass = cumulative_transition_mass(cfg, l);
        const double mass_term = std::isinf(p)
                                     ? (row.transition_mass > 0.0 ? 1.0 : 0.0)
                                     : std::pow(row.transition_mass, 1.0 / p);
        row.tolerance = opts.quad_rel * row.bound + eps_sum + (sup_f + sup_sum) * mass_term;
        row.margin = row.bound + row.tolerance - row.error;
        row.pass = row.error <= row.bound + row.tolerance;
        report.passed = report.passed && row.pass;
        report.rows.push_back(row);
    }
    return report;
}

// --- Average-oscillation inequality check ------------------------------------

struct OscillationCheck {
    double lhs = 0.0;   ///< integral over Q of |f - A_Q(f)|^p
    double rhs = 0.0;   ///< averaged one-axis shift energy at scale s
    double slack = 0.0; ///< rhs + allowance - lhs
    bool pass = false;
};

/// Numerically checks that the p-th power oscillation of f around its box
/// average is controlled by axis-shift differences at scale s: the estimate
/// that drives the per-level accuracy guarantee. Finite p only.
inline OscillationCheck check_oscillation_inequality(const TargetFunction& f, const Box& box,
                                                     double s, int h_points = 48) {
    if (!f.eval) throw std::invalid_argument("oscillation: target has no evaluator");
    if (std::isinf(f.p)) throw std::invalid_argument("oscillation: finite p only");
    if (!(f.p >= 1.0)) throw std::invalid_argument("oscillation: need p >= 1");
    if (!(s > 0.0)) throw std::invalid_argument("oscillation: need s > 0");
    if (h_points < 1) throw std::invalid_argument("oscillation: need h_points >= 1");
    box.validate();
    const int d = f.dimension;
    if (static_cast<int>(box.lo.size()) != d)
        throw std::invalid_argument("oscillation: box dimension mismatch");

    CellAverageEngine engine;
    engine.points_per_axis = d <= 1 ? 2048 : (d == 2 ? 128 : 32);
    if (d > 3) {
        engine.scheme = AverageScheme::monte_carlo;
        engine.sample_count = 32768;
    }

    const double p = f.p;
    const double avg = cell_average(f.eval, box, engine);
    OscillationCheck check;
    check.lhs = integrate(
        [&](std::span<const double> x) { return std::pow(std::fabs(f.eval(x) - avg), p); },
        box, engine);

    std::vector<double> shifted(d);
    const double step = 2.0 * s / static_cast<double>(h_points);
    long double outer = 0.0L;
    for (int k = 0; k < h_points; ++k) {
        const double h = -s + (static_cast<double>(k) + 0.5) * step;
        for (int i = 0; i < d; ++i) {
            Box overlap = box;
            overlap.lo[static_cast<std::size_t>(i)] =
                std::max(box.lo[static_cast<std::size_t>(i)],
                         box.lo[static_cast<std::size_t>(i)] - h);
            overlap.hi[static_cast<std::size_t>(i)] =
                std::min(box.hi[static_cast<std::size_t>(i)],
                         box.hi[static_cast<std::size_t>(i)] - h);
            if (!(overlap.lo[static_cast<std::size_t>(i)] <
                  overlap.hi[static_cast<std::size_t>(i)]))
                continue;
            const double inner = integrate(
                [&](std::span<const double> x) {
                    for (int j = 0; j < d; ++j) shifted[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j)];
                    shifted[static_cast<std::size_t>(i)] += h;
                    return std::pow(std::fabs(f.eval(shifted) - f.eval(x)), p);
                },
                overlap, engine);
            outer += static_cast<long double>(inner) * static_cast<long double>(step);
        }
    }
    check.rhs =
        static_cast<double>(std::pow(static_cast<double>(d), p - 1.0) / s * static_cast<double>(outer));
    const double allowance = 1e-6 + 5e-3 * (check.lhs + check.rhs);
    check.slack = check.rhs + allowance - check.lhs;
    check.pass = check.lhs <= check.rhs + allowance;
    return check;
}

// --- Per-cell diagnostics ------------------------------------------------------

struct CellAverageStats {
    int level = 0;
    std::int64_t cells = 0;
    double min_value = 0.0;  ///< smallest cell average of the target
    double max_value = 0.0;
    double mean_value = 0.0;
    double max_abs_residual = 0.0;  ///< worst |target average - readout constant|
};

/// Recomputes every cell average at a level and compares it with the net's
/// readout constant there. For exact tables the residual is zero; for
/// compressed grades it is within the accumulated fit tolerance.
inline CellAverageStats piecewise_average_diagnostic(const MultigradeNet& net,
                                                     const TargetFunction& f, int level) {
    const PartitionConfig& cfg = net.config;
    cfg.require_level(level);
    if (!f.eval) throw std::invalid_argument("diagnostic: target has no evaluator");
    if (f.dimension != cfg.d) throw std::invalid_argument("diagnostic: dimension mismatch");
    if (level >= static_cast<int>(net.grades.size()))
        throw std::out_of_range("diagnostic: level beyond the net's depth");

    CellAverageStats stats;
    stats.level = level;
    stats.cells = cfg.cube_count(level);
    long double mean = 0.0L;
    for (std::int64_t k = 1; k <= stats.cells; ++k) {
        const CellLabel label = index_to_label(cfg, level, k);
        const double avg = cell_average(f.eval, cell_box(cfg, label), net.engine);
        const double constant = cell_constant(net, level, label);
        if (k == 1) {
            stats.min_value = stats.max_value = avg;
        } else {
            stats.min_value = std::min(stats.min_value, avg);
            stats.max_value = std::max(stats.max_value, avg);
        }
        mean += avg;
        stats.max_abs_residual = std::max(stats.max_abs_residual, std::fabs(avg - constant));
    }
    stats.mean_value = static_cast<double>(mean / static_cast<long double>(stats.cells));
    return stats;
}

// --- Verification on a rescaled box -------------------------------------------

struct RescaleReport {
    Box box;
    double side_factor = 0.0;    ///< longest box side
    double volume_factor = 0.0;  ///< vol(box)^{1/p}, 1 when p = inf
    MultigradeNet net;           ///< built for the pulled-back target
    BoundReport unit_report;     ///< certificate in pulled-back coordinates
    std::vector<BoundRow> box_rows;  ///< holder mode: rows scaled back to the box
};

/// Certifies a target living on an arbitrary axis-aligned box by pulling it
/// back to the unit cube, building there, and rescaling the certificate. In
/// holder mode the pulled-back constant picks up (longest side)^alpha and the
/// box-space errors and bounds scale by vol(box)^{1/p}; in modulus mode the
/// certificate is reported in pulled-back coordinates directly.
inline RescaleReport box_rescale_verify(const TargetFunction& f, const Box& box,
                                        const PartitionConfig& cfg,
                                        const CellAverageEngine& engine,
                                        const DecoderOptions& decoder_opts = DecoderOptions{},
                                        const VerifyOptions& verify_opts = VerifyOptions{}) {
    box.validate();
    if (!(box.volume() > 0.0)) throw std::invalid_argument("rescale: box has no volume");
    if (f.dimension != cfg.d || static_cast<int>(box.lo.size()) != cfg.d)
        throw std::invalid_argument("rescale: dimension mismatch");
    if (!f.eval) throw std::invalid_argument("rescale: target has no evaluator");

    const int d = cfg.d;
    double longest = 0.0;
    for (int i = 0; i < d; ++i) longest = std::max(longest, box.side(i));

    TargetFunction pulled;
    pulled.name = f.name + "@box";
    pulled.dimension = d;
    pulled.p = f.p;
    const Box domain = box;
    const auto outer_eval = f.eval;
    pulled.eval = [outer_eval, domain, d](std::span<const double> u) {
        std::vector<double> x(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i)
            x[static_cast<std::size_t>(i)] =
                domain.lo[static_cast<std::size_t>(i)] +
                domain.side(i) * u[static_cast<std::size_t>(i)];
        return outer_eval(x);
    };

    VerifyOptions inner_opts = verify_opts;
    if (verify_opts.mode == BoundMode::holder) {
        double alpha = verify_opts.alpha_override > 0.0 ? verify_opts.alpha_override
                                                        : f.regularity.alpha;
        double lambda = verify_opts.lambda_override > 0.0 ? verify_opts.lambda_override
                                                          : f.regularity.lambda;
        if (!(alpha > 0.0) || !(lambda > 0.0))
            throw std::invalid_argument(
                "rescale: target has no smoothness data; pass alpha/lambda overrides");
        // |g(u) - g(v)| = |f(Tu) - f(Tv)| <= lambda |Tu - Tv|^alpha
        //              <= lambda (longest side)^alpha |u - v|^alpha.
        pulled.regularity = HolderRegularity{alpha, lambda * std::pow(longest, alpha)};
        inner_opts.alpha_override = pulled.regularity.alpha;
        inner_opts.lambda_override = pulled.regularity.lambda;
    }

    RescaleReport report;
    report.box = box;
    report.side_factor = longest;
    report.volume_factor = std::isinf(f.p) ? 1.0 : std::pow(box.volume(), 1.0 / f.p);
    report.net = build_net(pulled, cfg, engine, decoder_opts);
    report.unit_report = verify_bounds(report.net, pulled, inner_opts);
    if (verify_opts.mode == BoundMode::holder) {
        for (BoundRow row : report.unit_report.rows) {
            row.error *= report.volume_factor;
            row.bound *= report.volume_factor;
            row.tolerance *= report.volume_factor;
            row.margin = row.bound + row.tolerance - row.error;
            report.box_rows.push_back(row);
        }
    } else {
        report.box_rows = report.unit_report.rows;
    }
    return report;
}

// --- CSV output ----------------------------------------------------------------

namespace detail {

inline std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

}  // namespace detail

inline void write_bound_report_csv(const std::string& path, const BoundReport& report) {
    std::ofstream out = detail::open_csv(path);
    out << "# schema: bound-report/1\n";
    out << "# target: " << report.target << "\n";
    out << "# p: " << (std::isinf(report.p) ? std::string("inf") : detail::csv_double(report.p))
        << "\n";
    out << "# mode: " << to_string(report.mode) << "\n";
    if (report.mode == BoundMode::holder)
        out << "# alpha: " << detail::csv_double(report.alpha)
            << " lambda: " << detail::csv_double(report.lambda) << "\n";
    out << "level,error,bound,tolerance,margin,transition_mass,pass\n";
    for (const BoundRow& row : report.rows) {
        out << row.level << ',' << detail::csv_double(row.error) << ','
            << detail::csv_double(row.bound) << ',' << detail::csv_double(row.tolerance) << ','
            << detail::csv_double(row.margin) << ',' << detail::csv_double(row.transition_mass)
            << ',' << (row.pass ? 1 : 0) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_modulus_csv(const std::string& path,
                              const std::vector<ModulusEstimate>& estimates) {
    std::ofstream out = detail::open_csv(path);
    out << "# schema: modulus-estimate/1\n";
    out << "t,radius,value\n";
    for (const ModulusEstimate& est : estimates) {
        for (std::size_t j = 0; j < est.radii.size(); ++j)
            out << detail::csv_double(est.t) << ',' << detail::csv_double(est.radii[j]) << ','
                << detail::csv_double(est.values[j]) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace mgnet
