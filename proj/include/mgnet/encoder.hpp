#pragma once

// Cell-index encoding. A sawtooth step proxy built from 2(N-1) ReLU ramps
// recovers, level by level, the per-axis digits of the cell containing a
// point; stacking the recursion yields a fixed-width ReLU network whose
// heads emit the cell anchor (lower-left corner) at every level.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "partition.hpp"
#include "weights.hpp"

namespace mgnet {

/// Piecewise-linear surrogate for floor on [0, N-1]: the value is the integer
/// j on every plateau [j, j+1-delta] and climbs linearly across the gaps.
struct StepProxy {
    int N = 2;
    double delta = 1e-3;

    void validate() const {
        if (N < 2) throw std::invalid_argument("step proxy: N must be >= 2");
        if (!(delta > 0.0) || !(delta < 1.0))
            throw std::invalid_argument("step proxy: delta must lie in (0, 1)");
    }
};

/// Ramp-sum form: (1/delta) * sum_j [relu(x - (j - delta)) - relu(x - j)].
inline double step_value(const StepProxy& proxy, double x) {
    proxy.validate();
    double acc = 0.0;
    for (int j = 1; j < proxy.N; ++j) {
        const double up = std::max(x - (static_cast<double>(j) - proxy.delta), 0.0);
        const double down = std::max(x - static_cast<double>(j), 0.0);
        acc += (up - down) / proxy.delta;
    }
    return acc;
}

/// One refinement step: from the level-(l-1) anchor y, produce the level-l
/// anchor y + N^{-l} * h(N^l (x - y)) componentwise.
inline std::vector<double> apply_h(const StepProxy& proxy, int level,
                                   std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("apply_h: dimension mismatch");
    if (level < 1) throw std::invalid_argument("apply_h: level must be >= 1");
    const double scale = static_cast<double>(ipow64(proxy.N, level));
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = y[i] + step_value(proxy, scale * (x[i] - y[i])) / scale;
    return out;
}

/// Like apply_h, but reports nullopt when any coordinate lands on a climbing
/// segment of the proxy, where the emitted digit is not an integer.
inline std::optional<std::vector<double>> apply_h_checked(const StepProxy& proxy, int level,
                                                          std::span<const double> x,
                                                          std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("apply_h: dimension mismatch");
    if (level < 1) throw std::invalid_argument("apply_h: level must be >= 1");
    const double scale = static_cast<double>(ipow64(proxy.N, level));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = scale * (x[i] - y[i]);
        if (a <= 0.0 || a >= static_cast<double>(proxy.N) - 1.0) continue;
        const double frac = a - std::floor(a);
        if (frac > 1.0 - proxy.delta) return std::nullopt;
    }
    return apply_h(proxy, level, x, y);
}

/// Anchors of the cells containing x at every level down to the deepest one
/// where x still avoids the gaps.
struct EncodeResult {
    int deepest = -1;                          ///< deepest located level; -1 if none
    std::vector<CellLabel> labels;             ///< labels[t], t = 0..deepest
    std::vector<std::vector<double>> anchors;  ///< anchors[t][i] = coords[i] * N^{-t}
};

/// Exact anchor of the level cell containing x, or nullopt inside a gap.
/// Digits come from interval membership, so anchors are quotients of exact
/// integers rather than accumulated ramp arithmetic.
inline std::optional<std::vector<double>> encode(const PartitionConfig& cfg, int level,
                                                 std::span<const double> x) {
    const auto label = locate_cell(cfg, level, x);
    if (!label) return std::nullopt;
    const double scale = static_cast<double>(cfg.cells_per_axis(level));
    std::vector<double> anchor(cfg.d);
    for (int i = 0; i < cfg.d; ++i)
        anchor[i] = static_cast<double>(label->coords[i]) / scale;
    return anchor;
}

inline EncodeResult encode_all(const PartitionConfig& cfg, std::span<const double> x) {
    EncodeResult result;
    for (int level = 0; level <= cfg.L; ++level) {
        const auto label = locate_cell(cfg, level, x);
        if (!label) break;
        const double scale = static_cast<double>(cfg.cells_per_axis(level));
        std::vector<double> anchor(cfg.d);
        for (int i = 0; i < cfg.d; ++i)
            anchor[i] = static_cast<double>(label->coords[i]) / scale;
        result.labels.push_back(*label);
        result.anchors.push_back(std::move(anchor));
        result.deepest = level;
    }
    return result;
}

namespace detail {

/// Channel layout shared by the encoder stack and the full exported nets:
/// per axis i, ramps come in up/down pairs for j = 1..N-1.
struct RampLayout {
    int d = 0;
    int N = 0;
    int base = 0;  // first ramp channel

    int up(int axis, int j) const { return base + axis * 2 * (N - 1) + 2 * (j - 1); }
    int down(int axis, int j) const { return up(axis, j) + 1; }
    int count() const { return 2 * d * (N - 1); }
};

/// Write the rows that advance one refinement step at stack layer s >= 1:
/// carry x, fold the incoming ramps into the anchor channels, and (while
/// more levels remain) emit the ramp pre-activations for the next level.
/// `x0`/`y0` are the x and anchor channel offsets.
inline void fill_refinement_rows(AffineLayer& layer, const PartitionConfig& cfg, int s, int x0,
                                 int y0, const RampLayout& ramps) {
    const int d = cfg.d;
    const int N = cfg.N;
    const double level_scale = static_cast<double>(ipow64(N, s));
    for (int i = 0; i < d; ++i) {
        layer.at(x0 + i, x0 + i) = 1.0;  // carry the input coordinates
        layer.at(y0 + i, y0 + i) = 1.0;  // anchor: previous value ...
        if (s <= cfg.L) {                // ... plus the digit from the incoming ramps
            const double fold = 1.0 / (level_scale * cfg.delta);
            for (int j = 1; j < N; ++j) {
                layer.at(y0 + i, ramps.up(i, j)) = fold;
                layer.at(y0 + i, ramps.down(i, j)) = -fold;
            }
        }
        if (s <= cfg.L - 1) {  // ramps for the next level, in terms of the new anchor
            const double next_scale = level_scale * N;
            for (int j = 1; j < N; ++j) {
                for (int flavor = 0; flavor < 2; ++flavor) {
                    const int row = flavor == 0 ? ramps.up(i, j) : ramps.down(i, j);
                    layer.at(row, x0 + i) = next_scale;
                    layer.at(row, y0 + i) = -next_scale;
                    for (int jj = 1; jj < N; ++jj) {
                        layer.at(row, ramps.up(i, jj)) = -static_cast<double>(N) / cfg.delta;
                        layer.at(row, ramps.down(i, jj)) = static_cast<double>(N) / cfg.delta;
                    }
                    layer.bias[row] =
                        flavor == 0 ? -(static_cast<double>(j) - cfg.delta) : -static_cast<double>(j);
                }
            }
        }
    }
}

/// Write the input layer rows (columns are the d raw inputs): embed x and,
/// when at least one refinement level exists, the first level's ramps.
inline void fill_input_rows(AffineLayer& layer, const PartitionConfig& cfg, int x0,
                            const RampLayout& ramps) {
    for (int i = 0; i < cfg.d; ++i) {
        layer.at(x0 + i, i) = 1.0;
        if (cfg.L >= 1) {
            for (int j = 1; j < cfg.N; ++j) {
                layer.at(ramps.up(i, j), i) = static_cast<double>(cfg.N);
                layer.bias[ramps.up(i, j)] = -(static_cast<double>(j) - cfg.delta);
                layer.at(ramps.down(i, j), i) = static_cast<double>(cfg.N);
                layer.bias[ramps.down(i, j)] = -static_cast<double>(j);
            }
        }
    }
}

}  // namespace detail

/// ReLU-only stack of width 2dN whose head for level l reads the state after
/// layer l-1 and outputs the d-dimensional level-l anchor (head 0 is the zero
/// map, matching the level-0 anchor).
inline ReluLayerStack build_encoder_stack(const PartitionConfig& cfg) {
    cfg.validate();
    const int d = cfg.d;
    const int N = cfg.N;
    const int width = 2 * d * N;
    const int x0 = 0;
    const int y0 = d;
    const detail::RampLayout ramps{d, N, 2 * d};

    ReluLayerStack stack;
    stack.input_dim = d;
    stack.width = width;

    AffineLayer input = AffineLayer::zeros(width, d);
    detail::fill_input_rows(input, cfg, x0, ramps);
    stack.layers.push_back(std::move(input));

    for (int s = 1; s <= cfg.L - 1; ++s) {
        AffineLayer layer = AffineLayer::zeros(width, width);
        detail::fill_refinement_rows(layer, cfg, s, x0, y0, ramps);
        stack.layers.push_back(std::move(layer));
    }

    for (int level = 0; level <= cfg.L; ++level) {
        OutputHead head = OutputHead::zeros(level == 0 ? 0 : level - 1, d, width);
        if (level >= 1) {
            const double fold = 1.0 / (static_cast<double>(ipow64(N, level)) * cfg.delta);
            for (int i = 0; i < d; ++i) {
                head.at(i, y0 + i, width) = 1.0;
                for (int j = 1; j < N; ++j) {
                    head.at(i, ramps.up(i, j), width) = fold;
                    head.at(i, ramps.down(i, j), width) = -fold;
                }
            }
        }
        stack.heads.push_back(std::move(head));
    }

    stack.validate();
    return stack;
}

}  // namespace mgnet
