#pragma once

// Grade-constant decoders. A table decoder stores one value per cell; a
// compressed decoder replays the table through two nested sines,
//   g(k) = u * sin(v * sin(w * k)),   k = 1..K,
// found by a randomized sieve: draw inner frequencies w, convert each cell's
// admissible values into phase windows for the outer argument, enumerate
// wrap counts at the loosest pivot cell in ascending |n|, filter candidates
// by window membership, and certify the first candidate whose directly
// evaluated worst-case error beats the requested tolerance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "quadrature.hpp"

namespace mgnet {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Compressed decoder: value at cell k is u * sin(v * sin(w * k)).
struct SineDecoder {
    double u = 0.0;
    double v = 0.0;
    double w = 0.0;
    double achieved_eps = 0.0;    ///< certified worst-case table error
    std::int64_t table_size = 0;  ///< number of cells covered

    double value_at(double k) const { return u * std::sin(v * std::sin(w * k)); }

    double value(std::int64_t k) const {
        if (k < 1 || k > table_size) throw std::out_of_range("decoder: cell index out of range");
        return value_at(static_cast<double>(k));
    }
};

/// Plain stored table, 1-indexed by cell.
struct TableDecoder {
    std::vector<double> values;

    std::int64_t table_size() const { return static_cast<std::int64_t>(values.size()); }

    double value(std::int64_t k) const {
        if (k < 1 || k > table_size()) throw std::out_of_range("decoder: cell index out of range");
        return values[static_cast<std::size_t>(k - 1)];
    }

    /// Continuous extension: clamped piecewise-linear interpolation in k.
    double value_at(double k) const {
        if (values.empty()) throw std::out_of_range("decoder: empty table");
        if (k <= 1.0) return values.front();
        const double top = static_cast<double>(values.size());
        if (k >= top) return values.back();
        const double base = std::floor(k);
        const auto idx = static_cast<std::size_t>(base) - 1;
        const double t = k - base;
        return values[idx] * (1.0 - t) + values[idx + 1] * t;
    }
};

/// Search effort for the sieve.
struct FitBudget {
    int w_candidates = 256;           ///< inner frequencies to try
    std::int64_t n_max = 10'000'000;  ///< wrap counts scanned per direction
    std::uint64_t seed = 0x73696e65ull;

    void validate() const {
        if (w_candidates < 1) throw std::invalid_argument("fit: needs at least one frequency");
        if (n_max < 0) throw std::invalid_argument("fit: wrap budget must be >= 0");
    }
};

struct FitOutcome {
    bool ok = false;
    SineDecoder decoder;  ///< certified fit when ok; best attempt otherwise
    double best_eps = std::numeric_limits<double>::infinity();
    std::int64_t candidates_tested = 0;  ///< wrap candidates enumerated
    int w_tried = 0;                     ///< inner frequencies scanned
};

namespace detail {

/// Closed arc on the phase circle, stored as start in [0, 2pi) plus length.
struct PhaseArc {
    double start = 0.0;
    double len = -1.0;  // negative marks an unused slot

    bool active() const { return len >= 0.0; }

    bool contains(double theta) const {
        double diff = theta - start;
        if (diff < 0.0) diff += kTwoPi;
        return diff <= len;
    }

    double center() const {
        double c = start + 0.5 * len;
        if (c >= kTwoPi) c -= kTwoPi;
        return c;
    }
};

/// Admissible outer-argument phases for one cell: the preimage under sine of
/// the value slab |u sin(phi) - y| < eps, as a primary arc plus its mirror.
/// `full` marks cells whose slab already covers every phase.
struct PhaseWindow {
    bool full = false;
    PhaseArc arcs[2];

    bool contains(double theta) const {
        return full || arcs[0].contains(theta) || (arcs[1].active() && arcs[1].contains(theta));
    }
};

inline double wrap_phase(double phi) {
    double t = std::fmod(phi, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    return t;
}

inline PhaseWindow make_phase_window(double u, double y, double eps) {
    PhaseWindow win;
    const double reach = eps / u;
    const double r = y / u;
    if (r - reach <= -1.0 && r + reach >= 1.0) {
        win.full = true;
        return win;
    }
    const double lo = std::max(r - reach, -1.0);
    const double hi = std::min(r + reach, 1.0);
    const double a = std::asin(lo);
    const double b = std::asin(hi);
    win.arcs[0] = PhaseArc{wrap_phase(a), b - a};
    win.arcs[1] = PhaseArc{wrap_phase(M_PI - b), b - a};
    return win;
}

}  // namespace detail

/// Fit the nested-sine decoder to a table of cell values with worst-case
/// error below eps. Deterministic for a fixed budget.
inline FitOutcome fit_two_sine(const std::vector<double>& values, double eps,
                               const FitBudget& budget = FitBudget{}) {
    if (values.empty()) throw std::invalid_argument("fit: table must be nonempty");
    if (!(eps > 0.0)) throw std::invalid_argument("fit: tolerance must be positive");
    budget.validate();
    const auto K = static_cast<std::int64_t>(values.size());

    FitOutcome out;
    double u = 0.0;
    for (double y : values) {
        if (!std::isfinite(y)) throw std::invalid_argument("fit: table values must be finite");
        u = std::max(u, std::fabs(y));
    }

    if (u == 0.0) {  // the zero table is reproduced exactly by v = 0
        out.ok = true;
        out.decoder = SineDecoder{0.0, 0.0, 1.0, 0.0, K};
        out.best_eps = 0.0;
        return out;
    }

    const auto direct_error = [&](const SineDecoder& dec) {
        double err = 0.0;
        for (std::int64_t k = 1; k <= K; ++k)
            err = std::max(err, std::fabs(dec.value_at(static_cast<double>(k)) -
                                          values[static_cast<std::size_t>(k - 1)]));
        return err;
    };
    const auto consider = [&](SineDecoder dec) {
        const double err = direct_error(dec);
        if (err < out.best_eps) {
            out.best_eps = err;
            dec.achieved_eps = err;
            out.decoder = dec;
        }
        return err < eps;
    };

    std::uint64_t rng = budget.seed;
    std::vector<double> inner(K);
    std::vector<detail::PhaseWindow> windows(K);
    std::vector<std::int64_t> order;  // constrained cells, most restrictive first

    for (int attempt = 0; attempt < budget.w_candidates; ++attempt) {
        const double w = 0.1 + detail::uniform01(rng) * (M_PI - 0.2);
        bool degenerate = false;
        for (std::int64_t k = 1; k <= K && !degenerate; ++k) {
            inner[k - 1] = std::sin(w * static_cast<double>(k));
            degenerate = std::fabs(inner[k - 1]) < 1e-6;
        }
        if (degenerate) continue;  // an uncontrollable cell: resample
        ++out.w_tried;

        std::int64_t pivot = -1;
        for (std::int64_t k = 1; k <= K; ++k) {
            windows[k - 1] = detail::make_phase_window(u, values[k - 1], eps);
            if (!windows[k - 1].full &&
                (pivot < 0 || std::fabs(inner[k - 1]) < std::fabs(inner[pivot - 1])))
                pivot = k;
        }
        if (pivot < 0) {  // every cell tolerates any phase; emit the flat decoder
            if (consider(SineDecoder{u, 0.0, w, 0.0, K})) {
                out.ok = true;
                return out;
            }
            continue;
        }

        order.clear();
        for (std::int64_t k = 1; k <= K; ++k)
            if (k != pivot && !windows[k - 1].full) order.push_back(k);
        std::sort(order.begin(), order.end(), [&windows](std::int64_t a, std::int64_t b) {
            return windows[a - 1].arcs[0].len < windows[b - 1].arcs[0].len;
        });

        const double s_pivot = inner[pivot - 1];
        const std::int64_t gate = order.empty() ? -1 : order.front();
        const double gate_scale = gate < 0 ? 0.0 : inner[gate - 1] / s_pivot;

        const auto full_check = [&](double v) {
            for (std::int64_t k : order) {
                if (k == gate) continue;
                if (!windows[k - 1].contains(detail::wrap_phase(v * inner[k - 1]))) return false;
            }
            return true;
        };

        for (int arc_id = 0; arc_id < 2; ++arc_id) {
            const detail::PhaseArc& arc = windows[pivot - 1].arcs[arc_id];
            if (!arc.active()) continue;
            const double center = arc.center();
            // Phase of the gating cell advances by a fixed step per wrap, so
            // track it incrementally in both scan directions.
            const double step = gate < 0 ? 0.0 : detail::wrap_phase(kTwoPi * gate_scale);
            double theta_up = gate < 0 ? 0.0 : detail::wrap_phase(center * gate_scale);
            double theta_down = theta_up;
            for (std::int64_t n = 0; n <= budget.n_max; ++n) {
                for (int dir = 0; dir < (n == 0 ? 1 : 2); ++dir) {
                    const double theta = dir == 0 ? theta_up : theta_down;
                    ++out.candidates_tested;
                    if (gate >= 0 && !windows[gate - 1].contains(theta)) continue;
                    const double signed_n = dir == 0 ? static_cast<double>(n)
                                                     : -static_cast<double>(n);
                    const double v = (center + kTwoPi * signed_n) / s_pivot;
                    if (gate >= 0 && !full_check(v)) continue;
                    if (consider(SineDecoder{u, v, w, 0.0, K})) {
                        out.ok = true;
                        return out;
                    }
                }
                theta_up += step;
                if (theta_up >= kTwoPi) theta_up -= kTwoPi;
                theta_down -= step;
                if (theta_down < 0.0) theta_down += kTwoPi;
            }
        }
    }
    return out;
}

/// Round-off fragility of a fitted decoder: the outer argument can reach |v|,
/// so a one-ulp wobble there moves the phase by about |v| * machine epsilon.
struct DecoderConditioning {
    double max_outer_arg = 0.0;
    double ulp_sensitivity = 0.0;
    bool flagged = false;
};

inline DecoderConditioning decoder_conditioning_report(const SineDecoder& dec) {
    DecoderConditioning rep;
    rep.max_outer_arg = std::fabs(dec.v);
    rep.ulp_sensitivity = rep.max_outer_arg * std::numeric_limits<double>::epsilon();
    rep.flagged = rep.ulp_sensitivity > 1e-9;
    return rep;
}

}  // namespace mgnet
