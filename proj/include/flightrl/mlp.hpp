// Small fully-connected network: forward with cache, reverse-mode gradients, Adam with
// weight-only L2, global-norm gradient clipping, soft target updates and a text format.
//
// Batches are column-major: an input batch is in_dim x N, one sample per column.
#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flightrl/autopilot.hpp"
#include "flightrl/error.hpp"
#include "flightrl/textio.hpp"

namespace flightrl::nn {

enum class Activation { relu, tanh, identity };

inline const char *to_string(Activation a) {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
    }
    return "?";
}

inline std::optional<Activation> parse_activation(const std::string &s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "identity") return Activation::identity;
    return std::nullopt;
}

struct Layer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd biases;   // out
    Activation activation = Activation::identity;

    Eigen::Index in() const { return weights.cols(); }
    Eigen::Index out() const { return weights.rows(); }
};

struct MlpParameters {
    std::vector<Layer> layers;

    Eigen::Index input_size() const { return layers.empty() ? 0 : layers.front().in(); }
    Eigen::Index output_size() const { return layers.empty() ? 0 : layers.back().out(); }

    bool finite() const {
        for (const auto &l : layers) {
            if (!l.weights.allFinite() || !l.biases.allFinite()) return false;
        }
        return true;
    }

    bool same_shape(const MlpParameters &o) const {
        if (layers.size() != o.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].in() != o.layers[i].in() || layers[i].out() != o.layers[i].out()) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const MlpParameters &a, const MlpParameters &b) {
        if (!a.same_shape(b)) return false;
        for (std::size_t i = 0; i < a.layers.size(); ++i) {
            if (a.layers[i].activation != b.layers[i].activation ||
                a.layers[i].weights != b.layers[i].weights ||
                a.layers[i].biases != b.layers[i].biases) {
                return false;
            }
        }
        return true;
    }
};

/// Hidden layers use relu, the last layer uses `output`. Weights and biases are drawn
/// uniformly from +-1/sqrt(fan_in).
template <typename Rng>
MlpParameters make_mlp(const std::vector<int> &sizes, Activation output, Rng &rng) {
    if (sizes.size() < 2) throw ContractViolation("make_mlp: need at least input and output sizes");
    MlpParameters p;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        if (sizes[i] < 1 || sizes[i + 1] < 1) throw ContractViolation("make_mlp: sizes must be >= 1");
        Layer l;
        l.activation = (i + 2 == sizes.size()) ? output : Activation::relu;
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[i]));
        std::uniform_real_distribution<double> u(-bound, bound);
        l.weights.resize(sizes[i + 1], sizes[i]);
        l.biases.resize(sizes[i + 1]);
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = u(rng);
        }
        for (Eigen::Index r = 0; r < l.biases.size(); ++r) l.biases(r) = u(rng);
        p.layers.push_back(std::move(l));
    }
    return p;
}

/// Same shapes and activations as `like`, every parameter zero.
inline MlpParameters zeros_like(const MlpParameters &like) {
    MlpParameters p = like;
    for (auto &l : p.layers) {
        l.weights.setZero();
        l.biases.setZero();
    }
    return p;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> outputs; // post-activation output of each layer
};

namespace detail {

inline void activate(Eigen::MatrixXd &z, Activation a) {
    switch (a) {
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
    case Activation::identity: break;
    }
}

// dL/dz from dL/dy, expressed through the activation output y.
inline void activation_backward(Eigen::MatrixXd &grad, const Eigen::MatrixXd &y, Activation a) {
    switch (a) {
    case Activation::relu: grad = (y.array() > 0.0).select(grad, 0.0); break;
    case Activation::tanh: grad = (grad.array() * (1.0 - y.array().square())).matrix(); break;
    case Activation::identity: break;
    }
}

} // namespace detail

inline Eigen::MatrixXd forward(const MlpParameters &p, const Eigen::MatrixXd &x,
                               ForwardCache *cache = nullptr) {
    if (p.layers.empty()) throw ContractViolation("forward: empty network");
    if (x.rows() != p.input_size()) {
        throw ContractViolation("forward: input has " + std::to_string(x.rows()) +
                                " rows, network expects " + std::to_string(p.input_size()));
    }
    if (cache) {
        cache->inputs.clear();
        cache->outputs.clear();
    }
    Eigen::MatrixXd h = x;
    for (const auto &l : p.layers) {
        if (cache) cache->inputs.push_back(h);
        Eigen::MatrixXd z = l.weights * h;
        z.colwise() += l.biases;
        detail::activate(z, l.activation);
        if (cache) cache->outputs.push_back(z);
        h = std::move(z);
    }
    return h;
}

inline Eigen::VectorXd forward(const MlpParameters &p, const Eigen::VectorXd &x) {
    return forward(p, Eigen::MatrixXd(x)).col(0);
}

struct LayerGradient {
    Eigen::MatrixXd weights;
    Eigen::VectorXd biases;
};

struct GradientSet {
    std::vector<LayerGradient> layers;

    double squared_norm() const {
        double s = 0.0;
        for (const auto &l : layers) s += l.weights.squaredNorm() + l.biases.squaredNorm();
        return s;
    }
    double norm() const { return std::sqrt(squared_norm()); }

    bool finite() const {
        for (const auto &l : layers) {
            if (!l.weights.allFinite() || !l.biases.allFinite()) return false;
        }
        return true;
    }

    void scale(double s) {
        for (auto &l : layers) {
            l.weights *= s;
            l.biases *= s;
        }
    }
};

inline GradientSet zero_gradients(const MlpParameters &p) {
    GradientSet g;
    for (const auto &l : p.layers) {
        g.layers.push_back({Eigen::MatrixXd::Zero(l.out(), l.in()), Eigen::VectorXd::Zero(l.out())});
    }
    return g;
}

struct BackwardResult {
    GradientSet grads;
    Eigen::MatrixXd input_gradient;  // in_dim x N
};

/// Vector-Jacobian product through the network for a batch. Parameter gradients are
/// summed over the batch columns; scale output_gradient for a mean.
inline BackwardResult backward(const MlpParameters &p, const ForwardCache &cache,
                               const Eigen::MatrixXd &output_gradient) {
    if (cache.inputs.size() != p.layers.size() || cache.outputs.size() != p.layers.size()) {
        throw ContractViolation("backward: cache does not belong to this network");
    }
    const auto &last = cache.outputs.back();
    if (output_gradient.rows() != last.rows() || output_gradient.cols() != last.cols()) {
        throw ContractViolation("backward: output gradient shape mismatch");
    }

    BackwardResult res;
    res.grads.layers.resize(p.layers.size());
    Eigen::MatrixXd g = output_gradient;
    for (std::size_t k = p.layers.size(); k-- > 0;) {
        const Layer &l = p.layers[k];
        detail::activation_backward(g, cache.outputs[k], l.activation);
        res.grads.layers[k].weights = g * cache.inputs[k].transpose();
        res.grads.layers[k].biases = g.rowwise().sum();
        g = l.weights.transpose() * g;
    }
    res.input_gradient = std::move(g);
    return res;
}

// ---------------------------------------------------------------------------
// Optimisation
// ---------------------------------------------------------------------------

/// Rescales so the global L2 norm is at most bound. Returns the norm before clipping.
inline double clip_gradients(GradientSet &g, double bound) {
    if (!(bound > 0.0)) throw ContractViolation("clip_gradients: bound must be > 0");
    const double n = g.norm();
    if (n > bound) g.scale(bound / n);
    return n;
}

/// Adds the gradient of l2 * sum(W^2) to every weight gradient. Biases are left alone.
inline void add_l2(GradientSet &g, const MlpParameters &p, double l2) {
    if (l2 == 0.0) return;
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        g.layers[k].weights += 2.0 * l2 * p.layers[k].weights;
    }
}

struct AdamState {
    GradientSet m;
    GradientSet v;
    long long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline AdamState make_adam(const MlpParameters &p) {
    AdamState s;
    s.m = zero_gradients(p);
    s.v = zero_gradients(p);
    return s;
}

/// One optimiser update: L2 term, optional global-norm clip, then Adam with bias
/// correction. `grads` is consumed.
inline void adam_step(MlpParameters &p, AdamState &s, GradientSet grads, double learning_rate,
                      double l2, std::optional<double> clip = std::nullopt) {
    if (grads.layers.size() != p.layers.size() || s.m.layers.size() != p.layers.size()) {
        throw ContractViolation("adam_step: shape mismatch");
    }
    add_l2(grads, p, l2);
    if (clip) clip_gradients(grads, *clip);

    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    auto update = [&](auto &param, auto &m, auto &v, const auto &g) {
        m = s.beta1 * m + (1.0 - s.beta1) * g;
        v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
        param.array() -= learning_rate * (m.array() / c1) /
                         ((v.array() / c2).sqrt() + s.epsilon);
    };
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        update(p.layers[k].weights, s.m.layers[k].weights, s.v.layers[k].weights,
               grads.layers[k].weights);
        update(p.layers[k].biases, s.m.layers[k].biases, s.v.layers[k].biases,
               grads.layers[k].biases);
    }
}

/// target := tau * source + (1 - tau) * target
inline void soft_update(MlpParameters &target, const MlpParameters &source, double tau) {
    if (!target.same_shape(source)) throw ContractViolation("soft_update: shape mismatch");
    if (!(tau > 0.0 && tau <= 1.0)) throw ContractViolation("soft_update: tau must lie in (0, 1]");
    for (std::size_t k = 0; k < target.layers.size(); ++k) {
        auto &t = target.layers[k];
        const auto &s = source.layers[k];
        t.weights = tau * s.weights + (1.0 - tau) * t.weights;
        t.biases = tau * s.biases + (1.0 - tau) * t.biases;
    }
}

struct GainLimits {
    double k_dc = 3.0;
    double k_a = 0.05;
    double k_i = 100.0;
    double k_g = 2.0;
};

/// Maps a tanh-range actor output onto autopilot gains.
inline GainSet scale_actor_output(const Eigen::Ref<const Eigen::VectorXd> &raw,
                                  const GainLimits &lim = {}) {
    if (raw.size() != 4) throw ContractViolation("scale_actor_output: expected 4 components");
    return {raw(0) * lim.k_dc, raw(1) * lim.k_a, raw(2) * lim.k_i, raw(3) * lim.k_g};
}

// ---------------------------------------------------------------------------
// Text format
//
//   mlpv1 <n_layers>
//   <out> <in> <activation>      per layer, followed by
//   <weights, row-major>         one line
//   <biases>                     one line
// ---------------------------------------------------------------------------

inline constexpr const char *kMlpMagic = "mlpv1";

inline void write_mlp(std::ostream &out, const MlpParameters &p) {
    out << kMlpMagic << ' ' << p.layers.size() << '\n';
    for (const auto &l : p.layers) {
        out << l.out() << ' ' << l.in() << ' ' << to_string(l.activation) << '\n';
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
                if (r != 0 || c != 0) out << ' ';
                out << textio::format_double(l.weights(r, c));
            }
        }
        out << '\n';
        for (Eigen::Index r = 0; r < l.biases.size(); ++r) {
            if (r != 0) out << ' ';
            out << textio::format_double(l.biases(r));
        }
        out << '\n';
    }
}

/// Reads one network from the reader's current position.
inline MlpParameters read_mlp(textio::LineReader &r) {
    const auto header = r.expect_tokens("mlp header");
    if (header[0] != kMlpMagic) r.fail("unsupported network format '" + header[0] + "'");
    if (header.size() != 2) r.fail("malformed network header");
    const long long n = r.to_int(header[1]);
    if (n < 1 || n > 1000) r.fail("layer count out of range");

    MlpParameters p;
    Eigen::Index prev_out = -1;
    for (long long k = 0; k < n; ++k) {
        const auto shape = r.expect_tokens("layer shape");
        if (shape.size() != 3) r.fail("layer shape needs '<out> <in> <activation>'");
        const long long out = r.to_int(shape[0]);
        const long long in = r.to_int(shape[1]);
        if (out < 1 || in < 1 || out > 100000 || in > 100000) r.fail("layer size out of range");
        if (prev_out >= 0 && in != prev_out) r.fail("layer input size does not chain");
        const auto act = parse_activation(shape[2]);
        if (!act) r.fail("unknown activation '" + shape[2] + "'");

        Layer l;
        l.activation = *act;
        l.weights.resize(out, in);
        l.biases.resize(out);
        const auto w = r.expect_tokens("weights");
        if (static_cast<long long>(w.size()) != out * in) r.fail("wrong number of weights");
        for (long long i = 0; i < out * in; ++i) l.weights(i / in, i % in) = r.to_double(w[i]);
        const auto b = r.expect_tokens("biases");
        if (static_cast<long long>(b.size()) != out) r.fail("wrong number of biases");
        for (long long i = 0; i < out; ++i) l.biases(i) = r.to_double(b[i]);
        if (!l.weights.allFinite() || !l.biases.allFinite()) r.fail("non-finite parameter");
        prev_out = out;
        p.layers.push_back(std::move(l));
    }
    return p;
}

inline MlpParameters read_mlp(std::istream &in, const std::string &source = "network") {
    textio::LineReader r(in, source);
    MlpParameters p = read_mlp(r);
    std::vector<std::string> extra;
    if (r.next_tokens(extra)) r.fail("trailing data after network");
    return p;
}

} // namespace flightrl::nn
