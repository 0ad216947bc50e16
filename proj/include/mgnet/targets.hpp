#pragma once

// A small catalog of benchmark target functions on the unit cube with their
// known smoothness data, plus a loader for tabulated targets stored as
// plain-text grids with multilinear interpolation.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "quadrature.hpp"

namespace mgnet {

/// Smoothness certificate: the averaged oscillation at scale t is bounded by
/// lambda * t^alpha. alpha == 0 means no certificate is available.
struct HolderRegularity {
    double alpha = 0.0;
    double lambda = 0.0;

    bool known() const { return alpha > 0.0 && lambda > 0.0; }
};

/// A target bound to one norm exponent p (use INFINITY for the sup norm).
struct TargetFunction {
    std::string name;
    int dimension = 1;
    double p = 2.0;
    RealFn eval;
    HolderRegularity regularity;                  ///< valid for this p
    std::function<double(double)> exact_modulus;  ///< t -> omega(t); may be empty
};

/// Catalog entry: a family over p, instantiated on demand.
struct CatalogEntry {
    std::string name;
    std::string summary;
    int dimension = 1;
    RealFn eval;
    std::function<HolderRegularity(double)> regularity_for;
    std::function<std::function<double(double)>(double)> modulus_for;

    TargetFunction instantiate(double p) const {
        if (!(p >= 1.0)) throw std::invalid_argument("target: norm exponent must be >= 1");
        TargetFunction f;
        f.name = name;
        f.dimension = dimension;
        f.p = p;
        f.eval = eval;
        f.regularity = regularity_for ? regularity_for(p) : HolderRegularity{};
        f.exact_modulus = modulus_for ? modulus_for(p) : std::function<double(double)>{};
        return f;
    }
};

/// Benchmark targets on [0,1]^d.
inline std::vector<CatalogEntry> target_catalog(int d) {
    if (d < 1) throw std::invalid_argument("target catalog: dimension must be >= 1");
    std::vector<CatalogEntry> catalog;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    {  // First coordinate: the canonical Lipschitz ramp.
        CatalogEntry entry;
        entry.name = "ramp";
        entry.summary = "first coordinate x1";
        entry.dimension = d;
        entry.eval = [](std::span<const double> x) { return x[0]; };
        entry.regularity_for = [](double) { return HolderRegularity{1.0, 1.0}; };
        entry.modulus_for = [](double p) -> std::function<double(double)> {
            if (std::isinf(p)) {
                return [](double t) { return std::min(t, 1.0); };
            }
            // sup over |h| <= t of h * (1-h)^(1/p), maximized at h = p/(p+1).
            return [p](double t) {
                const double s = std::min(std::min(t, 1.0), p / (p + 1.0));
                return s * std::pow(1.0 - s, 1.0 / p);
            };
        };
        catalog.push_back(std::move(entry));
    }
    {  // Coordinate mean: Lipschitz with constant 1/sqrt(d).
        CatalogEntry entry;
        entry.name = "mean";
        entry.summary = "average of the coordinates";
        entry.dimension = d;
        entry.eval = [d](std::span<const double> x) {
            double acc = 0.0;
            for (int i = 0; i < d; ++i) acc += x[i];
            return acc / static_cast<double>(d);
        };
        entry.regularity_for = [inv_sqrt_d](double) { return HolderRegularity{1.0, inv_sqrt_d}; };
        entry.modulus_for = [inv_sqrt_d](double p) -> std::function<double(double)> {
            if (!std::isinf(p)) return {};
            return [inv_sqrt_d](double t) { return std::min(t * inv_sqrt_d, 1.0); };
        };
        catalog.push_back(std::move(entry));
    }
    {  // Half-space indicator: jump across x1 = 1/2.
        CatalogEntry entry;
        entry.name = "indicator";
        entry.summary = "indicator of x1 > 1/2";
        entry.dimension = d;
        entry.eval = [](std::span<const double> x) { return x[0] > 0.5 ? 1.0 : 0.0; };
        entry.regularity_for = [](double p) {
            if (std::isinf(p)) return HolderRegularity{};  // discontinuous in sup norm
            return HolderRegularity{1.0 / p, 1.0};
        };
        entry.modulus_for = [](double p) -> std::function<double(double)> {
            if (std::isinf(p)) {
                return [](double t) { return t > 0.0 ? 1.0 : 0.0; };
            }
            return [p](double t) { return std::pow(std::min(t, 0.5), 1.0 / p); };
        };
        catalog.push_back(std::move(entry));
    }
    {  // Narrow radial tent around the center, slope 10.
        CatalogEntry entry;
        entry.name = "tent";
        entry.summary = "radial spike of width 0.1 at the center";
        entry.dimension = d;
        entry.eval = [d](std::span<const double> x) {
            double r2 = 0.0;
            for (int i = 0; i < d; ++i) {
                const double dx = x[i] - 0.5;
                r2 += dx * dx;
            }
            return std::max(0.0, 1.0 - 10.0 * std::sqrt(r2));
        };
        entry.regularity_for = [](double) { return HolderRegularity{1.0, 10.0}; };
        entry.modulus_for = [](double p) -> std::function<double(double)> {
            if (!std::isinf(p)) return {};
            return [](double t) { return std::min(10.0 * t, 1.0); };
        };
        catalog.push_back(std::move(entry));
    }
    {  // Two full waves along the first axis.
        CatalogEntry entry;
        entry.name = "oscillatory";
        entry.summary = "sin(4 pi x1)";
        entry.dimension = d;
        entry.eval = [](std::span<const double> x) { return std::sin(4.0 * M_PI * x[0]); };
        entry.regularity_for = [](double) { return HolderRegularity{1.0, 4.0 * M_PI}; };
        entry.modulus_for = [](double p) -> std::function<double(double)> {
            if (!std::isinf(p)) return {};
            return [](double t) {
                return t >= 0.25 ? 2.0 : 2.0 * std::sin(2.0 * M_PI * t);
            };
        };
        catalog.push_back(std::move(entry));
    }
    {  // Square-root cusp: genuinely Holder-1/2.
        CatalogEntry entry;
        entry.name = "holder";
        entry.summary = "sqrt(|x1 - 1/2|)";
        entry.dimension = d;
        entry.eval = [](std::span<const double> x) { return std::sqrt(std::fabs(x[0] - 0.5)); };
        entry.regularity_for = [](double) { return HolderRegularity{0.5, 1.0}; };
        entry.modulus_for = [](double p) -> std::function<double(double)> {
            if (!std::isinf(p)) return {};
            return [](double t) { return std::sqrt(std::min(t, 0.5)); };
        };
        catalog.push_back(std::move(entry));
    }
    return catalog;
}

inline TargetFunction make_target(const std::string& name, int d, double p) {
    for (const CatalogEntry& entry : target_catalog(d))
        if (entry.name == name) return entry.instantiate(p);
    std::string names;
    for (const CatalogEntry& entry : target_catalog(d))
        names += (names.empty() ? "" : ", ") + entry.name;
    throw std::invalid_argument("target: unknown name '" + name + "' (available: " + names + ")");
}

namespace detail {

struct GridToken {
    std::string text;
    int line = 0;
};

inline std::vector<GridToken> tokenize_grid_file(const std::string& path, std::istream& in) {
    std::vector<GridToken> tokens;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) tokens.push_back(GridToken{tok, line_no});
    }
    if (tokens.empty())
        throw std::runtime_error("grid file '" + path + "': no data found");
    return tokens;
}

[[noreturn]] inline void grid_fail(const std::string& path, int line, const std::string& msg) {
    throw std::runtime_error("grid file '" + path + "' line " + std::to_string(line) + ": " + msg);
}

}  // namespace detail

/// Load a tabulated target from a whitespace-separated text file:
/// the dimension d, then d per-axis resolutions (each >= 2), then the node
/// values in row-major order with the last axis fastest. Nodes are spaced
/// uniformly over [0,1] per axis and evaluation is multilinear, clamped at
/// the boundary. '#' starts a comment.
inline TargetFunction load_target_grid(const std::string& path, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("target: norm exponent must be >= 1");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("grid file '" + path + "': cannot open");
    const auto tokens = detail::tokenize_grid_file(path, in);

    std::size_t pos = 0;
    const auto take = [&](const char* what) -> const detail::GridToken& {
        if (pos >= tokens.size()) {
            const int line = tokens.back().line;
            detail::grid_fail(path, line, std::string("missing ") + what);
        }
        return tokens[pos++];
    };
    const auto parse_int = [&](const char* what) {
        const detail::GridToken& tok = take(what);
        try {
            std::size_t used = 0;
            const long long v = std::stoll(tok.text, &used);
            if (used != tok.text.size()) throw std::invalid_argument("trailing junk");
            return v;
        } catch (const std::exception&) {
            detail::grid_fail(path, tok.line,
                              std::string("expected an integer ") + what + ", got '" + tok.text + "'");
        }
    };
    const auto parse_double = [&](const char* what) {
        const detail::GridToken& tok = take(what);
        try {
            std::size_t used = 0;
            const double v = std::stod(tok.text, &used);
            if (used != tok.text.size()) throw std::invalid_argument("trailing junk");
            return v;
        } catch (const std::exception&) {
            detail::grid_fail(path, tok.line,
                              std::string("expected a number ") + what + ", got '" + tok.text + "'");
        }
    };

    const long long d_raw = parse_int("dimension");
    if (d_raw < 1 || d_raw > 16)
        detail::grid_fail(path, tokens[0].line, "dimension must lie in [1, 16]");
    const int d = static_cast<int>(d_raw);

    auto resolution = std::make_shared<std::vector<std::int64_t>>();
    std::int64_t total = 1;
    for (int i = 0; i < d; ++i) {
        const long long n = parse_int("axis resolution");
        if (n < 2) detail::grid_fail(path, tokens[pos - 1].line, "axis resolution must be >= 2");
        resolution->push_back(n);
        total *= n;
        if (total > (std::int64_t{1} << 28))
            detail::grid_fail(path, tokens[pos - 1].line, "grid is too large");
    }

    auto data = std::make_shared<std::vector<double>>();
    data->reserve(static_cast<std::size_t>(total));
    for (std::int64_t i = 0; i < total; ++i) data->push_back(parse_double("grid value"));
    if (pos != tokens.size())
        detail::grid_fail(path, tokens[pos].line,
                          "unexpected extra data '" + tokens[pos].text + "'");

    TargetFunction f;
    f.name = "grid:" + path;
    f.dimension = d;
    f.p = p;
    f.eval = [d, resolution, data](std::span<const double> x) {
        if (static_cast<int>(x.size()) != d)
            throw std::invalid_argument("grid target: point dimension mismatch");
        // Per-axis cell index and fraction, clamped to the boundary.
        std::vector<std::int64_t> base(d);
        std::vector<double> frac(d);
        for (int i = 0; i < d; ++i) {
            const std::int64_t n = (*resolution)[i];
            double t = std::min(std::max(x[i], 0.0), 1.0) * static_cast<double>(n - 1);
            auto b = static_cast<std::int64_t>(std::floor(t));
            if (b > n - 2) b = n - 2;
            base[i] = b;
            frac[i] = t - static_cast<double>(b);
        }
        double acc = 0.0;
        for (std::uint32_t corner = 0; corner < (1u << d); ++corner) {
            double weight = 1.0;
            std::int64_t idx = 0;
            for (int i = 0; i < d; ++i) {
                const bool hi = (corner >> i) & 1u;
                weight *= hi ? frac[i] : 1.0 - frac[i];
                idx = idx * (*resolution)[i] + base[i] + (hi ? 1 : 0);
            }
            acc += weight * (*data)[static_cast<std::size_t>(idx)];
        }
        return acc;
    };
    return f;
}

}  // namespace mgnet
