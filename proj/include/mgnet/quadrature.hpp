#pragma once

// Deterministic quadrature primitives: axis-aligned boxes, midpoint tensor
// grids, and seeded Monte Carlo sampling. Everything downstream (cell
// averages, norms, modulus estimates) is built on these.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mgnet {

using RealFn = std::function<double(std::span<const double>)>;

/// Axis-aligned box given by per-axis lower and upper bounds.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    int dim() const { return static_cast<int>(lo.size()); }

    double side(int axis) const { return hi[axis] - lo[axis]; }

    double volume() const {
        double v = 1.0;
        for (int i = 0; i < dim(); ++i) v *= side(i);
        return v;
    }

    bool contains(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != dim()) return false;
        for (int i = 0; i < dim(); ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }

    void validate() const {
        if (lo.size() != hi.size() || lo.empty())
            throw std::invalid_argument("box: bounds must be nonempty and of equal dimension");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] <= hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
                throw std::invalid_argument("box: bounds must be finite with lo <= hi");
    }

    static Box unit(int d) {
        return Box{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    }
};

enum class AverageScheme { tensor_grid, monte_carlo };

/// Quadrature policy for cell averages and integrals. The tensor-grid scheme
/// uses a midpoint rule with `points_per_axis` nodes per axis; the
/// Monte Carlo scheme draws `sample_count` uniform points from a generator
/// seeded deterministically by `seed` and the box bounds.
struct CellAverageEngine {
    AverageScheme scheme = AverageScheme::tensor_grid;
    int points_per_axis = 8;
    int sample_count = 4096;
    std::uint64_t seed = 0x6d676e6574ull;

    /// Default engine: midpoint tensor grid up to dimension 3, Monte Carlo above.
    static CellAverageEngine for_dimension(int d) {
        CellAverageEngine e;
        if (d > 3) e.scheme = AverageScheme::monte_carlo;
        return e;
    }

    void validate() const {
        if (points_per_axis < 1) throw std::invalid_argument("engine: points_per_axis must be >= 1");
        if (sample_count < 1) throw std::invalid_argument("engine: sample_count must be >= 1");
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Uniform double in [0, 1) from 53 random bits; identical on every platform.
inline double uniform01(std::uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

/// Mix a box's raw bounds into a seed so distinct cells get distinct,
/// reproducible sample streams.
inline std::uint64_t mix_box_seed(std::uint64_t seed, const Box& box) {
    std::uint64_t h = seed ^ 0xcbf29ce484222325ull;
    auto absorb = [&h](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h ^= bits;
        h *= 0x100000001b3ull;
    };
    for (double v : box.lo) absorb(v);
    for (double v : box.hi) absorb(v);
    return h;
}

}  // namespace detail

/// Enumerate the engine's quadrature nodes on the box in a deterministic
/// order and hand each one to the visitor. Returns the node count. All nodes
/// carry equal weight volume/count.
template <typename Visitor>
std::int64_t visit_nodes(const Box& box, const CellAverageEngine& engine, Visitor&& visit) {
    box.validate();
    engine.validate();
    const int d = box.dim();
    std::vector<double> x(d);

    if (engine.scheme == AverageScheme::tensor_grid) {
        const int n = engine.points_per_axis;
        const double inv = 1.0 / static_cast<double>(n);
        std::int64_t total = 1;
        for (int i = 0; i < d; ++i) {
            total *= n;
            if (total > (std::int64_t{1} << 40))
                throw std::invalid_argument("visit_nodes: tensor grid too large");
        }
        std::vector<int> idx(d, 0);
        for (std::int64_t c = 0; c < total; ++c) {
            for (int i = 0; i < d; ++i)
                x[i] = box.lo[i] + box.side(i) * ((2 * idx[i] + 1) * 0.5 * inv);
            visit(std::span<const double>(x));
            for (int i = d - 1; i >= 0; --i) {
                if (++idx[i] < n) break;
                idx[i] = 0;
            }
        }
        return total;
    }

    std::uint64_t state = detail::mix_box_seed(engine.seed, box);
    for (int s = 0; s < engine.sample_count; ++s) {
        for (int i = 0; i < d; ++i)
            x[i] = box.lo[i] + box.side(i) * detail::uniform01(state);
        visit(std::span<const double>(x));
    }
    return engine.sample_count;
}

/// Integral of f over the box; nodes accumulate in extended precision.
inline double integrate(const RealFn& f, const Box& box, const CellAverageEngine& engine) {
    box.validate();
    const double vol = box.volume();
    if (vol == 0.0) return 0.0;
    long double acc = 0.0L;
    const std::int64_t count =
        visit_nodes(box, engine, [&](std::span<const double> x) { acc += f(x); });
    return static_cast<double>(acc / static_cast<long double>(count)) * vol;
}

/// Mean value of f over a box of positive volume.
inline double cell_average(const RealFn& f, const Box& box, const CellAverageEngine& engine) {
    box.validate();
    const double vol = box.volume();
    if (vol <= 0.0) throw std::domain_error("cell_average: box has zero volume");
    return integrate(f, box, engine) / vol;
}

}  // namespace mgnet
