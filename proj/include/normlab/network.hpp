#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "normlab/errors.hpp"
#include "normlab/linalg.hpp"
#include "normlab/rng.hpp"

namespace normlab {

/// Gaussian weight initialization schemes. Each fixes a per-layer variance
/// from the layer's fan-in and fan-out.
enum class InitScheme {
    kHeFanOut, ///< 2 / fan_out
    kHeFanIn,  ///< 2 / fan_in
    kGlorot,   ///< 2 / (fan_in + fan_out), Gaussian rather than uniform
};

inline double init_variance(InitScheme scheme, std::size_t fan_in, std::size_t fan_out)
{
    detail::require(fan_in > 0 && fan_out > 0, "init_variance: fan sizes must be positive");
    switch (scheme) {
    case InitScheme::kHeFanOut:
        return 2.0 / static_cast<double>(fan_out);
    case InitScheme::kHeFanIn:
        return 2.0 / static_cast<double>(fan_in);
    case InitScheme::kGlorot:
        return 2.0 / static_cast<double>(fan_in + fan_out);
    }
    throw InvalidArgument("init_variance: unknown scheme");
}

inline std::string_view to_string(InitScheme scheme)
{
    switch (scheme) {
    case InitScheme::kHeFanOut:
        return "he";
    case InitScheme::kHeFanIn:
        return "he-fanin";
    case InitScheme::kGlorot:
        return "glorot";
    }
    return "unknown";
}

inline InitScheme parse_init_scheme(std::string_view name)
{
    if (name == "he") {
        return InitScheme::kHeFanOut;
    }
    if (name == "he-fanin") {
        return InitScheme::kHeFanIn;
    }
    if (name == "glorot") {
        return InitScheme::kGlorot;
    }
    throw InvalidArgument("unknown init scheme '" + std::string(name) + "' (expected he, he-fanin or glorot)");
}

/// Architecture of a ReLU stack plus its classification head.
/// widths = [n_0, n_1, ..., n_L], n_0 being the input dimension.
struct NetworkConfig {
    std::vector<std::size_t> widths;
    std::size_t num_classes = 1;
    std::uint64_t seed = 0;

    void validate() const
    {
        detail::require(widths.size() >= 2, "NetworkConfig: need at least an input and one layer width");
        for (std::size_t w : widths) {
            detail::require(w >= 1, "NetworkConfig: widths must be positive");
        }
        detail::require(num_classes >= 1, "NetworkConfig: num_classes must be positive");
    }

    std::size_t depth() const { return widths.size() - 1; }
};

class ReluNet;
ReluNet init_network(const NetworkConfig& config, InitScheme scheme, RngState rng);

/// Zero-bias ReLU stack a^l = W^l h^{l-1} + b^l, h^l = ReLU(a^l), followed by
/// a linear head producing logits. Immutable once built.
class ReluNet {
public:
    /// Builds a net from explicit weights. Biases are zero; shapes must chain.
    ReluNet(std::vector<Matrix> weights, Matrix head)
        : weights_(std::move(weights))
        , head_(std::move(head))
    {
        detail::require(!weights_.empty(), "ReluNet: need at least one layer");
        widths_.push_back(static_cast<std::size_t>(weights_.front().cols()));
        for (const Matrix& w : weights_) {
            detail::require(w.rows() > 0 && w.cols() > 0, "ReluNet: empty weight matrix");
            detail::require(static_cast<std::size_t>(w.cols()) == widths_.back(), "ReluNet: weight shapes do not chain");
            widths_.push_back(static_cast<std::size_t>(w.rows()));
            biases_.push_back(Vector::Zero(w.rows()));
        }
        detail::require(head_.rows() > 0 && static_cast<std::size_t>(head_.cols()) == widths_.back(),
                        "ReluNet: head must have n_L columns");
    }

    std::size_t depth() const { return weights_.size(); }
    const std::vector<std::size_t>& widths() const { return widths_; }
    std::size_t input_dim() const { return widths_.front(); }
    std::size_t num_classes() const { return static_cast<std::size_t>(head_.rows()); }

    /// W^l for l in [1, depth].
    const Matrix& weight(std::size_t layer) const { return weights_.at(layer - 1); }
    const Vector& bias(std::size_t layer) const { return biases_.at(layer - 1); }
    const std::vector<Matrix>& weights() const { return weights_; }
    const std::vector<Vector>& biases() const { return biases_; }
    const Matrix& head() const { return head_; }

private:
    std::vector<Matrix> weights_;
    std::vector<Vector> biases_;
    Matrix head_;
    std::vector<std::size_t> widths_;
};

/// Layer l draws from sub-stream derive(rng, l) and the head from
/// derive(rng, L + 1), so each layer's weights depend only on its own shape.
inline ReluNet init_network(const NetworkConfig& config, InitScheme scheme, RngState rng)
{
    config.validate();
    std::vector<Matrix> weights;
    weights.reserve(config.depth());
    for (std::size_t l = 1; l <= config.depth(); ++l) {
        const std::size_t fan_in = config.widths[l - 1];
        const std::size_t fan_out = config.widths[l];
        weights.push_back(gaussian_matrix(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in),
                                          init_variance(scheme, fan_in, fan_out), derive(rng, l)));
    }
    const std::size_t top = config.widths.back();
    Matrix head = gaussian_matrix(static_cast<Eigen::Index>(config.num_classes), static_cast<Eigen::Index>(top),
                                  init_variance(scheme, top, config.num_classes), derive(rng, config.depth() + 1));
    return ReluNet(std::move(weights), std::move(head));
}

/// Uses RngState{config.seed, 0}.
inline ReluNet init_network(const NetworkConfig& config, InitScheme scheme)
{
    return init_network(config, scheme, RngState{config.seed, 0});
}

struct ForwardTrace {
    Vector input;
    std::vector<Vector> preacts; ///< a^1 .. a^L
    std::vector<Vector> acts;    ///< h^1 .. h^L
    Vector logits;

    /// h^l with h^0 = input.
    const Vector& activation(std::size_t layer) const { return layer == 0 ? input : acts.at(layer - 1); }
};

inline ForwardTrace forward(const ReluNet& net, const Vector& x)
{
    if (static_cast<std::size_t>(x.size()) != net.input_dim()) {
        throw InvalidArgument("forward: input has dimension " + std::to_string(x.size()) + ", expected " +
                              std::to_string(net.input_dim()));
    }
    ForwardTrace trace;
    trace.input = x;
    trace.preacts.reserve(net.depth());
    trace.acts.reserve(net.depth());
    const Vector* h = &trace.input;
    for (std::size_t l = 1; l <= net.depth(); ++l) {
        Vector a = net.weight(l) * (*h) + net.bias(l);
        trace.acts.push_back(a.cwiseMax(0.0));
        trace.preacts.push_back(std::move(a));
        h = &trace.acts.back();
    }
    trace.logits = net.head() * (*h);
    return trace;
}

struct HeadGradient {
    double loss = 0.0;
    Vector delta; ///< dloss/da^L
};

/// Softmax cross-entropy on the logits. delta is the derivative of the loss
/// with respect to the top pre-activation a^L, i.e. the head residual
/// head^T (softmax - onehot) passed through the ReLU gate 1(a^L > 0).
inline HeadGradient head_loss_grad(const ForwardTrace& trace, const ReluNet& net, std::size_t label)
{
    if (label >= net.num_classes()) {
        throw InvalidArgument("head_loss_grad: label " + std::to_string(label) + " out of range for " +
                              std::to_string(net.num_classes()) + " classes");
    }
    const Vector& z = trace.logits;
    const double zmax = z.maxCoeff();
    const Vector shifted = z.array() - zmax;
    const double log_partition = std::log(shifted.array().exp().sum());
    Vector residual = (shifted.array() - log_partition).exp();
    residual[static_cast<Eigen::Index>(label)] -= 1.0;

    HeadGradient out;
    out.loss = log_partition - shifted[static_cast<Eigen::Index>(label)];
    const Vector dh = net.head().transpose() * residual;
    out.delta = (trace.preacts.back().array() > 0.0).select(dh, 0.0);
    return out;
}

/// Weight gradient dloss/dW^l = diag(da^l) M(h^{l-1}): every row i is
/// da^l_i * h^{l-1}. Stored in factored form; entries are formed on demand.
struct OuterProduct {
    Vector row_scale; ///< da^l
    Vector row;       ///< h^{l-1}

    Eigen::Index rows() const { return row_scale.size(); }
    Eigen::Index cols() const { return row.size(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return row_scale[i] * row[j]; }

    Matrix to_dense() const
    {
        Matrix out(rows(), cols());
        for (Eigen::Index i = 0; i < rows(); ++i) {
            out.row(i) = row_scale[i] * row.transpose();
        }
        return out;
    }

    /// Frobenius norm accumulated entry by entry, row-major, exactly as
    /// norm(to_dense()) would, without materializing the matrix.
    double frobenius_norm() const
    {
        double total = 0.0;
        for (Eigen::Index i = 0; i < rows(); ++i) {
            total += (row_scale[i] * row).squaredNorm();
        }
        return std::sqrt(total);
    }
};

struct GradientTrace {
    Vector delta;                ///< dloss/da^L
    std::vector<Vector> da;      ///< dloss/da^l, l = 1..L
    std::vector<OuterProduct> dW; ///< dloss/dW^l, l = 1..L
    std::optional<double> loss;  ///< set when produced from a label
};

/// Backpropagates delta = dloss/da^L through the ReLU stack:
///   da^L = delta
///   da^l = 1(a^l > 0) * (W^{l+1}^T da^{l+1})
///   dW^l = da^l (h^{l-1})^T
/// The gate at a^l == 0 is taken as 0.
inline GradientTrace backward(const ReluNet& net, const ForwardTrace& trace, const Vector& delta)
{
    const std::size_t depth = net.depth();
    detail::require(trace.preacts.size() == depth && trace.acts.size() == depth,
                    "backward: trace depth does not match the network");
    detail::require(static_cast<std::size_t>(delta.size()) == net.widths().back(),
                    "backward: delta must have dimension n_L");
    GradientTrace grads;
    grads.delta = delta;
    grads.da.resize(depth);
    grads.dW.resize(depth);
    grads.da[depth - 1] = delta;
    for (std::size_t l = depth - 1; l >= 1; --l) {
        const Vector back = net.weight(l + 1).transpose() * grads.da[l];
        const Vector& a = trace.preacts[l - 1];
        grads.da[l - 1] = (a.array() > 0.0).select(back, 0.0);
    }
    for (std::size_t l = 1; l <= depth; ++l) {
        grads.dW[l - 1] = OuterProduct{grads.da[l - 1], trace.activation(l - 1)};
    }
    return grads;
}

/// Forward, head and backward for one labelled sample.
inline GradientTrace loss_and_gradients(const ReluNet& net, const ForwardTrace& trace, std::size_t label)
{
    HeadGradient head = head_loss_grad(trace, net, label);
    GradientTrace grads = backward(net, trace, head.delta);
    grads.loss = head.loss;
    return grads;
}

struct LayerRatios {
    double act = 0.0;  ///< ||h^l|| / ||x||
    double grad = 0.0; ///< ||dW^l||_F / (||delta|| ||x||)
};

/// Per-layer activation and weight-gradient norm ratios, l = 1..L.
inline std::vector<LayerRatios> norm_ratios(const ForwardTrace& trace, const GradientTrace& grads)
{
    const double x_norm = norm(trace.input);
    const double delta_norm = norm(grads.delta);
    if (x_norm == 0.0) {
        throw DegenerateInput("norm_ratios: input has zero norm");
    }
    if (delta_norm == 0.0) {
        throw DegenerateInput("norm_ratios: delta has zero norm");
    }
    detail::require(trace.acts.size() == grads.dW.size(), "norm_ratios: trace and gradients disagree on depth");
    std::vector<LayerRatios> out(trace.acts.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].act = norm(trace.acts[i]) / x_norm;
        out[i].grad = grads.dW[i].frobenius_norm() / (delta_norm * x_norm);
    }
    return out;
}

} // namespace normlab
