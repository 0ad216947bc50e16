#pragma once

// Shrunken dyadic-style partitions of the unit cube. At refinement level l
// each axis of [0,1] is split into N^l closed intervals
//   I_{l,j} = [ j/N^l , (j+1)/N^l - delta ],
// all sharing one gap width delta, and cells are tensor products of these.
// The complement of the cells at level l (the union of gap slabs) is the
// transition region for that level.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadrature.hpp"

namespace mgnet {

/// Integer power with overflow detection.
inline std::int64_t ipow64(std::int64_t base, int exp) {
    if (base < 0 || exp < 0) throw std::invalid_argument("ipow64: negative input");
    std::int64_t r = 1;
    for (int i = 0; i < exp; ++i) {
        if (base != 0 && r > (std::int64_t{1} << 62) / base)
            throw std::overflow_error("ipow64: result exceeds 2^62");
        r *= base;
    }
    return r;
}

/// Geometry parameters: dimension d, branching factor N per axis per level,
/// deepest level L, and the shared gap width delta.
struct PartitionConfig {
    int d = 1;
    int N = 2;
    int L = 1;
    double delta = 0.0;

    /// Gap width used when none is requested: 1e-3 * N^{-L}.
    static double default_delta(int N, int L) {
        return 1e-3 / static_cast<double>(ipow64(N, L));
    }

    static PartitionConfig make(int d, int N, int L) {
        PartitionConfig c{d, N, L, default_delta(N, L)};
        c.validate();
        return c;
    }

    void validate() const {
        if (d < 1) throw std::invalid_argument("partition: dimension must be >= 1");
        if (N < 2) throw std::invalid_argument("partition: branching factor must be >= 2");
        if (L < 0) throw std::invalid_argument("partition: depth must be >= 0");
        ipow64(N, d * L);  // cell labels must fit in int64
        const double cap = 0.5 / static_cast<double>(ipow64(N, L));
        if (!(delta > 0.0) || !(delta < cap))
            throw std::invalid_argument("partition: gap width must lie in (0, 1/(2 N^L))");
    }

    std::int64_t cells_per_axis(int level) const { return ipow64(N, level); }

    std::int64_t cube_count(int level) const { return ipow64(N, d * level); }

    /// Side length of a level-l cell: N^{-l} - delta.
    double side(int level) const {
        return 1.0 / static_cast<double>(cells_per_axis(level)) - delta;
    }

    void require_level(int level) const {
        if (level < 0 || level > L)
            throw std::out_of_range("partition: level outside [0, L]");
    }
};

/// A cell at some level, identified by its per-axis interval numbers.
struct CellLabel {
    int level = 0;
    std::vector<std::int64_t> coords;

    bool operator==(const CellLabel&) const = default;
};

/// Flat cell index in [1, N^{dl}]: 1 + sum_i coords[i] * (N^l)^i.
inline std::int64_t label_to_index(const PartitionConfig& cfg, const CellLabel& label) {
    cfg.require_level(label.level);
    if (static_cast<int>(label.coords.size()) != cfg.d)
        throw std::invalid_argument("label_to_index: coordinate count must equal dimension");
    const std::int64_t per_axis = cfg.cells_per_axis(label.level);
    std::int64_t k = 0, stride = 1;
    for (int i = 0; i < cfg.d; ++i) {
        const std::int64_t b = label.coords[i];
        if (b < 0 || b >= per_axis) throw std::out_of_range("label_to_index: coordinate out of range");
        k += b * stride;
        stride *= per_axis;
    }
    return k + 1;
}

inline CellLabel index_to_label(const PartitionConfig& cfg, int level, std::int64_t index) {
    cfg.require_level(level);
    const std::int64_t count = cfg.cube_count(level);
    if (index < 1 || index > count) throw std::out_of_range("index_to_label: index out of range");
    const std::int64_t per_axis = cfg.cells_per_axis(level);
    CellLabel label{level, std::vector<std::int64_t>(cfg.d, 0)};
    std::int64_t rem = index - 1;
    for (int i = 0; i < cfg.d; ++i) {
        label.coords[i] = rem % per_axis;
        rem /= per_axis;
    }
    return label;
}

/// The closed box occupied by a cell.
inline Box cell_box(const PartitionConfig& cfg, const CellLabel& label) {
    cfg.require_level(label.level);
    if (static_cast<int>(label.coords.size()) != cfg.d)
        throw std::invalid_argument("cell_box: coordinate count must equal dimension");
    const double scale = 1.0 / static_cast<double>(cfg.cells_per_axis(label.level));
    const double len = cfg.side(label.level);
    Box box{std::vector<double>(cfg.d), std::vector<double>(cfg.d)};
    const std::int64_t per_axis = cfg.cells_per_axis(label.level);
    for (int i = 0; i < cfg.d; ++i) {
        const std::int64_t b = label.coords[i];
        if (b < 0 || b >= per_axis) throw std::out_of_range("cell_box: coordinate out of range");
        box.lo[i] = static_cast<double>(b) * scale;
        box.hi[i] = box.lo[i] + len;
    }
    return box;
}

/// Cell containing x at the given level, or nullopt when x falls in a gap
/// slab (or outside the unit cube).
inline std::optional<CellLabel> locate_cell(const PartitionConfig& cfg, int level,
                                            std::span<const double> x) {
    cfg.require_level(level);
    if (static_cast<int>(x.size()) != cfg.d)
        throw std::invalid_argument("locate_cell: point dimension mismatch");
    const std::int64_t per_axis = cfg.cells_per_axis(level);
    const double scale = 1.0 / static_cast<double>(per_axis);
    const double len = cfg.side(level);
    CellLabel label{level, std::vector<std::int64_t>(cfg.d, 0)};
    for (int i = 0; i < cfg.d; ++i) {
        const double xi = x[i];
        if (!(xi >= 0.0) || !(xi <= 1.0)) return std::nullopt;
        const std::int64_t guess =
            static_cast<std::int64_t>(std::floor(xi * static_cast<double>(per_axis)));
        bool found = false;
        for (std::int64_t j = guess - 1; j <= guess + 1 && !found; ++j) {
            if (j < 0 || j >= per_axis) continue;
            const double lo = static_cast<double>(j) * scale;
            if (xi >= lo && xi <= lo + len) {
                label.coords[i] = j;
                found = true;
            }
        }
        if (!found) return std::nullopt;
    }
    return label;
}

/// Lebesgue measure of the level-l transition region: 1 - (1 - N^l delta)^d.
inline double transition_mass(const PartitionConfig& cfg, int level) {
    cfg.require_level(level);
    const double gap_per_axis = static_cast<double>(cfg.cells_per_axis(level)) * cfg.delta;
    return 1.0 - std::pow(1.0 - gap_per_axis, cfg.d);
}

/// Outcome of the gap-width search.
struct DeltaSearchResult {
    double delta = 0.0;   ///< last candidate tried (the accepted one when ok)
    bool ok = false;
    int trials = 0;
    double margin = 0.0;        ///< eta minus the worst per-level budget when ok
    double worst_excess = 0.0;  ///< worst budget overshoot at the final candidate when !ok
};

/// Shrink the gap width geometrically until, at every level l in [1, L], the
/// mass of f on the transition region plus a worst-case correction term fits
/// under the budget eta:
///   ||f||_{L^p(Omega_l)} + (L+1) * M * |Omega_l|^{1/p} <= eta,
/// with M = 2^{d+2} (d+1) N^{dL} ||f||_{L^p([0,1]^d)}. Candidates start at
/// 1/(4 N^L) and divide by 10; the search stops below 1e-14.
inline DeltaSearchResult choose_delta(const RealFn& f, int d, int N, int L, double p,
                                      double eta, const CellAverageEngine& engine) {
    if (!(eta > 0.0)) throw std::invalid_argument("choose_delta: budget must be positive");
    if (!(p >= 1.0) || std::isinf(p))
        throw std::invalid_argument("choose_delta: exponent must be finite and >= 1");
    PartitionConfig probe{d, N, L, 0.0};
    probe.delta = 0.25 / static_cast<double>(ipow64(N, L));  // also runs overflow checks
    probe.validate();

    DeltaSearchResult result;
    if (L == 0) {  // no transition regions to control
        result.delta = probe.delta;
        result.ok = true;
        result.trials = 1;
        result.margin = eta;
        return result;
    }

    const Box domain = Box::unit(d);
    const RealFn abs_p = [&f, p](std::span<const double> x) {
        return std::pow(std::fabs(f(x)), p);
    };
    const double full_mass = integrate(abs_p, domain, engine);
    const double full_norm = std::pow(std::max(full_mass, 0.0), 1.0 / p);
    const double big_m = std::pow(2.0, d + 2) * (d + 1) *
                         static_cast<double>(ipow64(N, d * L)) * full_norm;

    double delta = probe.delta;
    while (true) {
        ++result.trials;
        result.delta = delta;
        PartitionConfig cfg{d, N, L, delta};
        double worst = -eta;  // tracks max over levels of (lhs - eta)
        for (int level = 1; level <= L; ++level) {
            double cube_mass = 0.0;
            const std::int64_t count = cfg.cube_count(level);
            for (std::int64_t k = 1; k <= count; ++k) {
                const Box q = cell_box(cfg, index_to_label(cfg, level, k));
                cube_mass += integrate(abs_p, q, engine);
            }
            const double omega_mass = std::max(full_mass - cube_mass, 0.0);
            const double lhs = std::pow(omega_mass, 1.0 / p) +
                               (L + 1) * big_m * std::pow(transition_mass(cfg, level), 1.0 / p);
            worst = std::max(worst, lhs - eta);
        }
        if (worst <= 0.0) {
            result.ok = true;
            result.margin = -worst;
            return result;
        }
        result.worst_excess = worst;
        delta /= 10.0;
        if (delta < 1e-14) return result;
    }
}

/// Exact decimal expansion of a finite double (every binary64 value has one).
/// Integers render with no point; fractional values render in full, e.g.
/// 0.1 expands to its 55-digit literal value.
inline std::string exact_decimal(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("exact_decimal: value must be finite");
    if (x == 0.0) return "0";
    const bool negative = x < 0.0;
    int e2 = 0;
    const double m = std::frexp(std::fabs(x), &e2);
    auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));  // exact: 53-bit significand
    e2 -= 53;
    while (mant % 2 == 0 && e2 < 0) {
        mant /= 2;
        ++e2;
    }
    std::vector<int> digits;  // little-endian decimal digits
    for (std::int64_t t = mant; t > 0; t /= 10) digits.push_back(static_cast<int>(t % 10));
    auto mul_small = [&digits](int k) {
        int carry = 0;
        for (int& dgt : digits) {
            const int v = dgt * k + carry;
            dgt = v % 10;
            carry = v / 10;
        }
        while (carry > 0) {
            digits.push_back(carry % 10);
            carry /= 10;
        }
    };
    int point = 0;  // digits after the decimal point
    if (e2 >= 0) {
        for (int i = 0; i < e2; ++i) mul_small(2);
    } else {
        point = -e2;
        for (int i = 0; i < point; ++i) mul_small(5);
    }
    std::string out;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it)
        out.push_back(static_cast<char>('0' + *it));
    if (point > 0) {
        if (static_cast<int>(out.size()) <= point)
            out.insert(0, std::string(point + 1 - out.size(), '0'));
        out.insert(out.size() - point, ".");
    }
    return negative ? "-" + out : out;
}

}  // namespace mgnet
