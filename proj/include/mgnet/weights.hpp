#pragma once

// A small container format for fixed-width feed-forward networks whose rows
// may use ReLU, sine, or identity activations, plus affine output heads that
// tap intermediate states. Networks serialize to and from JSON losslessly.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace mgnet {

enum class Activation { relu, sine, identity };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sine: return "sine";
        case Activation::identity: return "identity";
    }
    throw std::invalid_argument("activation: unknown tag");
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "sine") return Activation::sine;
    if (s == "identity") return Activation::identity;
    throw std::invalid_argument("activation: unknown name '" + s + "'");
}

inline double apply_activation(Activation a, double v) {
    switch (a) {
        case Activation::relu: return v > 0.0 ? v : 0.0;
        case Activation::sine: return std::sin(v);
        case Activation::identity: return v;
    }
    throw std::invalid_argument("activation: unknown tag");
}

/// One affine layer with a per-row activation choice.
struct AffineLayer {
    int rows = 0;
    int cols = 0;
    std::vector<double> weights;  // row-major, rows x cols
    std::vector<double> bias;     // rows
    std::vector<Activation> activations;  // rows

    static AffineLayer zeros(int rows, int cols, Activation fill = Activation::relu) {
        AffineLayer l;
        l.rows = rows;
        l.cols = cols;
        l.weights.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        l.bias.assign(rows, 0.0);
        l.activations.assign(rows, fill);
        return l;
    }

    double& at(int r, int c) { return weights[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return weights[static_cast<std::size_t>(r) * cols + c]; }

    void validate() const {
        if (rows < 1 || cols < 1) throw std::invalid_argument("layer: empty shape");
        if (weights.size() != static_cast<std::size_t>(rows) * cols)
            throw std::invalid_argument("layer: weight count does not match shape");
        if (bias.size() != static_cast<std::size_t>(rows))
            throw std::invalid_argument("layer: bias count does not match rows");
        if (activations.size() != static_cast<std::size_t>(rows))
            throw std::invalid_argument("layer: activation count does not match rows");
    }

    std::vector<double> apply(std::span<const double> in) const {
        if (static_cast<int>(in.size()) != cols)
            throw std::invalid_argument("layer: input size does not match columns");
        std::vector<double> out(rows);
        for (int r = 0; r < rows; ++r) {
            double acc = bias[r];
            const double* wr = weights.data() + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) acc += wr[c] * in[c];
            out[r] = apply_activation(activations[r], acc);
        }
        return out;
    }
};

/// Affine readout tapping the post-activation state of one layer.
struct OutputHead {
    int layer = 0;  // index into the stack's states
    int rows = 1;
    std::vector<double> weights;  // row-major, rows x width
    std::vector<double> bias;     // rows

    static OutputHead zeros(int layer, int rows, int width) {
        OutputHead h;
        h.layer = layer;
        h.rows = rows;
        h.weights.assign(static_cast<std::size_t>(rows) * width, 0.0);
        h.bias.assign(rows, 0.0);
        return h;
    }

    double& at(int r, int c, int width) {
        return weights[static_cast<std::size_t>(r) * width + c];
    }

    std::vector<double> apply(std::span<const double> state) const {
        const int width = static_cast<int>(state.size());
        if (weights.size() != static_cast<std::size_t>(rows) * width)
            throw std::invalid_argument("head: weight count does not match state width");
        std::vector<double> out(rows);
        for (int r = 0; r < rows; ++r) {
            double acc = bias[r];
            const double* wr = weights.data() + static_cast<std::size_t>(r) * width;
            for (int c = 0; c < width; ++c) acc += wr[c] * state[c];
            out[r] = acc;
        }
        return out;
    }
};

/// Fixed-width stack: layers[0] maps input_dim -> width, later layers map
/// width -> width, and heads read intermediate states.
struct ReluLayerStack {
    int input_dim = 0;
    int width = 0;
    std::vector<AffineLayer> layers;
    std::vector<OutputHead> heads;

    void validate() const {
        if (input_dim < 1) throw std::invalid_argument("stack: input dimension must be >= 1");
        if (width < 1) throw std::invalid_argument("stack: width must be >= 1");
        if (layers.empty()) throw std::invalid_argument("stack: needs at least one layer");
        for (std::size_t t = 0; t < layers.size(); ++t) {
            layers[t].validate();
            const int expect_cols = (t == 0) ? input_dim : width;
            if (layers[t].cols != expect_cols || layers[t].rows != width)
                throw std::invalid_argument("stack: layer shape mismatch at index " +
                                            std::to_string(t));
        }
        for (const OutputHead& h : heads) {
            if (h.layer < 0 || h.layer >= static_cast<int>(layers.size()))
                throw std::invalid_argument("stack: head reads a missing layer");
            if (h.rows < 1 || h.weights.size() != static_cast<std::size_t>(h.rows) * width ||
                h.bias.size() != static_cast<std::size_t>(h.rows))
                throw std::invalid_argument("stack: head shape mismatch");
        }
    }

    /// Post-activation state after each layer; entry t corresponds to layers[t].
    std::vector<std::vector<double>> activations_after(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != input_dim)
            throw std::invalid_argument("stack: input dimension mismatch");
        std::vector<std::vector<double>> states;
        states.reserve(layers.size());
        std::vector<double> cur(x.begin(), x.end());
        for (const AffineLayer& layer : layers) {
            cur = layer.apply(cur);
            states.push_back(cur);
        }
        return states;
    }

    /// Every head value in order, from a single forward pass.
    std::vector<std::vector<double>> head_values(std::span<const double> x) const {
        const auto states = activations_after(x);
        std::vector<std::vector<double>> out;
        out.reserve(heads.size());
        for (const OutputHead& h : heads) out.push_back(h.apply(states[h.layer]));
        return out;
    }
};

/// Total scalar parameter count: weights and biases of all layers and heads.
inline std::int64_t count_parameters(const ReluLayerStack& stack) {
    std::int64_t n = 0;
    for (const AffineLayer& l : stack.layers)
        n += static_cast<std::int64_t>(l.rows) * (l.cols + 1);
    for (const OutputHead& h : stack.heads)
        n += static_cast<std::int64_t>(h.rows) * (stack.width + 1);
    return n;
}

// --- JSON serialization -----------------------------------------------------

inline void to_json(nlohmann::ordered_json& j, const AffineLayer& l) {
    std::vector<std::string> acts;
    acts.reserve(l.activations.size());
    for (Activation a : l.activations) acts.push_back(to_string(a));
    j = nlohmann::ordered_json{{"rows", l.rows},
                               {"cols", l.cols},
                               {"weights", l.weights},
                               {"bias", l.bias},
                               {"activations", acts}};
}

inline void from_json(const nlohmann::ordered_json& j, AffineLayer& l) {
    l.rows = j.at("rows").get<int>();
    l.cols = j.at("cols").get<int>();
    l.weights = j.at("weights").get<std::vector<double>>();
    l.bias = j.at("bias").get<std::vector<double>>();
    l.activations.clear();
    for (const auto& name : j.at("activations"))
        l.activations.push_back(activation_from_string(name.get<std::string>()));
    l.validate();
}

inline void to_json(nlohmann::ordered_json& j, const OutputHead& h) {
    j = nlohmann::ordered_json{
        {"layer", h.layer}, {"rows", h.rows}, {"weights", h.weights}, {"bias", h.bias}};
}

inline void from_json(const nlohmann::ordered_json& j, OutputHead& h) {
    h.layer = j.at("layer").get<int>();
    h.rows = j.at("rows").get<int>();
    h.weights = j.at("weights").get<std::vector<double>>();
    h.bias = j.at("bias").get<std::vector<double>>();
}

inline void to_json(nlohmann::ordered_json& j, const ReluLayerStack& stack) {
    j = nlohmann::ordered_json{{"schema", "relu-layer-stack/1"},
                               {"input_dim", stack.input_dim},
                               {"width", stack.width}};
    j["layers"] = nlohmann::ordered_json::array();
    for (const AffineLayer& l : stack.layers) {
        nlohmann::ordered_json jl;
        to_json(jl, l);
        j["layers"].push_back(std::move(jl));
    }
    j["heads"] = nlohmann::ordered_json::array();
    for (const OutputHead& h : stack.heads) {
        nlohmann::ordered_json jh;
        to_json(jh, h);
        j["heads"].push_back(std::move(jh));
    }
}

inline void from_json(const nlohmann::ordered_json& j, ReluLayerStack& stack) {
    const std::string schema = j.at("schema").get<std::string>();
    if (schema != "relu-layer-stack/1")
        throw std::runtime_error("stack: unsupported schema '" + schema + "'");
    stack.input_dim = j.at("input_dim").get<int>();
    stack.width = j.at("width").get<int>();
    stack.layers.clear();
    for (const auto& jl : j.at("layers")) {
        AffineLayer l;
        from_json(jl, l);
        stack.layers.push_back(std::move(l));
    }
    stack.heads.clear();
    for (const auto& jh : j.at("heads")) {
        OutputHead h;
        from_json(jh, h);
        stack.heads.push_back(std::move(h));
    }
    stack.validate();
}

}  // namespace mgnet
