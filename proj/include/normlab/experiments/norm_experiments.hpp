#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "normlab/bounds.hpp"
#include "normlab/errors.hpp"
#include "normlab/experiments/summary.hpp"
#include "normlab/linalg.hpp"
#include "normlab/network.hpp"
#include "normlab/parallel.hpp"
#include "normlab/rng.hpp"

namespace normlab::experiments {

// Streams. A net's weights are keyed by its architecture and sample i's
// input/label by i alone, so experiments that share an architecture and seed
// see the same nets and the same data.

inline RngState network_rng(std::uint64_t seed, const std::vector<std::size_t>& widths)
{
    std::uint64_t stream = stream_label("network");
    for (std::size_t w : widths) {
        stream = derive_stream(stream, w);
    }
    return {seed, stream};
}

inline RngState data_rng(std::uint64_t seed)
{
    return {seed, stream_label("data")};
}

/// Input x_i ~ N(0, I_{n_0}) and label y_i ~ U{0..K-1}.
struct LabelledInput {
    Vector x;
    std::size_t label = 0;
};

inline LabelledInput sample_input(std::uint64_t seed, std::size_t index, std::size_t input_dim, std::size_t num_classes)
{
    const RngState base = data_rng(seed);
    LabelledInput out;
    out.x = gaussian_vector(static_cast<Eigen::Index>(input_dim), 1.0, derive(base, "input", index));
    Generator gen(derive(base, "label", index));
    out.label = static_cast<std::size_t>(gen.uniform_int(0, static_cast<std::int64_t>(num_classes) - 1));
    return out;
}

/// Per-sample layer ratios of `net` over samples 0..count-1.
inline std::vector<std::vector<LayerRatios>> probe_ratios(const ReluNet& net, std::uint64_t seed, std::size_t count,
                                                          std::size_t workers)
{
    return parallel_map(count, workers, [&](std::size_t i) {
        const LabelledInput sample = sample_input(seed, i, net.input_dim(), net.num_classes());
        const ForwardTrace trace = forward(net, sample.x);
        const GradientTrace grads = loss_and_gradients(net, trace, sample.label);
        return norm_ratios(trace, grads);
    });
}

inline std::vector<std::size_t> uniform_widths(std::size_t input_dim, std::size_t width, std::size_t depth)
{
    std::vector<std::size_t> widths(depth + 1, width);
    widths.front() = input_dim;
    return widths;
}

// ---------------------------------------------------------------------------
// Activation and gradient norm ratios per layer.

struct NormPerLayerConfig {
    std::size_t depth = 10;
    std::size_t input_dim = 500;
    std::size_t num_classes = 20;
    std::size_t samples = 200;
    std::vector<std::size_t> widths{100, 500, 2000};
    std::vector<InitScheme> schemes{InitScheme::kHeFanOut, InitScheme::kGlorot};
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    static NormPerLayerConfig desk() { return {}; }

    static NormPerLayerConfig paper()
    {
        NormPerLayerConfig c;
        c.samples = 2000;
        c.widths = {100, 500, 2000, 4060};
        return c;
    }

    void validate() const
    {
        detail::require(depth >= 1 && input_dim >= 1 && num_classes >= 1 && samples >= 1,
                        "norm-per-layer: counts must be positive");
        detail::require(!widths.empty() && !schemes.empty(), "norm-per-layer: need widths and init schemes");
        for (std::size_t w : widths) {
            detail::require(w >= 1, "norm-per-layer: widths must be positive");
        }
    }

    nlohmann::json to_json() const
    {
        nlohmann::json schemes_json = nlohmann::json::array();
        for (InitScheme s : schemes) {
            schemes_json.push_back(std::string(to_string(s)));
        }
        return {{"experiment", "norm_per_layer"}, {"depth", depth},     {"input_dim", input_dim},
                {"num_classes", num_classes},     {"samples", samples}, {"widths", widths},
                {"init", schemes_json},           {"seed", seed}};
    }
};

struct NormPerLayerResult {
    SummaryTable activations; ///< metric "act_ratio:<init>:w<width>", keyed by layer
    SummaryTable gradients;   ///< metric "grad_ratio:<init>:w<width>", keyed by layer

    /// Both tables' rows in one table, activations first.
    SummaryTable combined() const
    {
        SummaryTable out{activations.config, activations.rows};
        out.rows.insert(out.rows.end(), gradients.rows.begin(), gradients.rows.end());
        return out;
    }
};

inline std::string series_name(const std::string& metric, InitScheme scheme, std::size_t width)
{
    return metric + ":" + std::string(to_string(scheme)) + ":w" + std::to_string(width);
}

inline void append_layer_rows(SummaryTable& table, const std::string& metric,
                              const std::vector<std::vector<LayerRatios>>& samples, bool gradient)
{
    const std::size_t depth = samples.front().size();
    std::vector<double> values(samples.size());
    for (std::size_t l = 0; l < depth; ++l) {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            values[i] = gradient ? samples[i][l].grad : samples[i][l].act;
        }
        const MeanStd s = mean_std(values);
        table.rows.push_back({metric, static_cast<std::int64_t>(l + 1), s.mean, s.std, s.count});
    }
}

inline NormPerLayerResult run_norm_per_layer(const NormPerLayerConfig& config)
{
    config.validate();
    NormPerLayerResult result;
    result.activations.config = config.to_json();
    result.gradients.config = config.to_json();
    for (InitScheme scheme : config.schemes) {
        for (std::size_t width : config.widths) {
            NetworkConfig net_config{uniform_widths(config.input_dim, width, config.depth), config.num_classes,
                                     config.seed};
            const ReluNet net = init_network(net_config, scheme, network_rng(config.seed, net_config.widths));
            const auto samples = probe_ratios(net, config.seed, config.samples, config.workers);
            append_layer_rows(result.activations, series_name("act_ratio", scheme, width), samples, false);
            append_layer_rows(result.gradients, series_name("grad_ratio", scheme, width), samples, true);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Empirical distortion of one ReLU layer against the width predicted by the
// single-layer bound.

struct BoundTightnessConfig {
    std::vector<std::size_t> widths{500, 1000, 1500, 2000, 2500, 3000, 3500, 4000};
    std::size_t input_dim = 500;
    std::size_t num_classes = 20;
    std::size_t samples = 500;
    double delta = 0.05;
    double multiplier = 2.0;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    static BoundTightnessConfig desk() { return {}; }

    static BoundTightnessConfig paper()
    {
        BoundTightnessConfig c;
        c.samples = 2000;
        return c;
    }

    void validate() const
    {
        detail::require(!widths.empty(), "bound-tightness: need widths");
        for (std::size_t w : widths) {
            detail::require(w >= 1, "bound-tightness: widths must be positive");
        }
        detail::require(input_dim >= 1 && num_classes >= 1 && samples >= 1, "bound-tightness: counts must be positive");
        detail::require(delta > 0.0 && delta < 1.0, "bound-tightness: delta must lie in (0, 1)");
    }

    nlohmann::json to_json() const
    {
        return {{"experiment", "bound_tightness"}, {"widths", widths}, {"input_dim", input_dim},
                {"num_classes", num_classes},      {"samples", samples}, {"delta", delta},
                {"multiplier", multiplier},        {"seed", seed}};
    }
};

/// He-initialized net whose every matrix is the top-left block of a fixed
/// Gaussian field, so a narrower net is a sub-network of a wider one. All
/// widths then share their common units, which removes the independent
/// per-width noise from comparisons across widths.
inline ReluNet nested_network(const std::vector<std::size_t>& widths, std::size_t num_classes, std::uint64_t seed)
{
    NetworkConfig config{widths, num_classes, seed};
    config.validate();
    const RngState field{seed, stream_label("nested-network")};
    std::vector<Matrix> weights;
    for (std::size_t l = 1; l < widths.size(); ++l) {
        weights.push_back(gaussian_block(static_cast<Eigen::Index>(widths[l]), static_cast<Eigen::Index>(widths[l - 1]),
                                         init_variance(InitScheme::kHeFanOut, widths[l - 1], widths[l]),
                                         derive(field, l)));
    }
    Matrix head = gaussian_block(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(widths.back()),
                                 init_variance(InitScheme::kHeFanOut, widths.back(), num_classes),
                                 derive(field, widths.size()));
    return ReluNet(std::move(weights), std::move(head));
}

/// Rows keyed by width:
///   eps_fwd, eps_bwd        mean |1 - ratio| (unsquared norms)
///   eps_sq_fwd, eps_sq_bwd  mean |1 - ratio^2| (squared norms, the bound's quantity)
///   eps_theory              solve_epsilon(width, delta, multiplier)
///
/// Nets come from nested_network, so all widths share their leading units.
/// Forward: one ReLU layer [n_0, w]; ratio = ||h^1|| / ||x||.
/// Backward: two layers [n_0, w, w]; ratio = ||dW^1||_F / (||delta|| ||x||),
/// which is the backward map of layer 2 applied to delta (on one layer the
/// ratio is identically 1).
inline SummaryTable run_bound_tightness(const BoundTightnessConfig& config)
{
    config.validate();
    SummaryTable table;
    table.config = config.to_json();
    auto add = [&](const std::string& metric, std::size_t width, const std::vector<double>& values) {
        const MeanStd s = mean_std(values);
        table.rows.push_back({metric, static_cast<std::int64_t>(width), s.mean, s.std, s.count});
    };
    for (std::size_t width : config.widths) {
        const double theory =
            bounds::solve_epsilon(static_cast<std::int64_t>(width), config.delta, config.multiplier);
        table.rows.push_back({"eps_theory", static_cast<std::int64_t>(width), theory, 0.0, 1});

        for (const bool backward_pass : {false, true}) {
            std::vector<std::size_t> widths{config.input_dim, width};
            if (backward_pass) {
                widths.push_back(width);
            }
            const ReluNet net = nested_network(widths, config.num_classes, config.seed);
            const auto samples = probe_ratios(net, config.seed, config.samples, config.workers);
            std::vector<double> eps(samples.size());
            std::vector<double> eps_sq(samples.size());
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const double r = backward_pass ? samples[i][0].grad : samples[i][0].act;
                eps[i] = std::abs(1.0 - r);
                eps_sq[i] = std::abs(1.0 - r * r);
            }
            add(backward_pass ? "eps_bwd" : "eps_fwd", width, eps);
            add(backward_pass ? "eps_sq_bwd" : "eps_sq_fwd", width, eps_sq);
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Gradient ratios when layer widths vary around a base width.

struct WidthVariationConfig {
    std::size_t depth = 20;
    std::size_t base_width = 1000;
    std::vector<std::size_t> variations{1, 200, 500};
    std::size_t input_dim = 500;
    std::size_t num_classes = 20;
    std::size_t samples = 200;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    static WidthVariationConfig desk() { return {}; }

    static WidthVariationConfig paper()
    {
        WidthVariationConfig c;
        c.samples = 1000;
        return c;
    }

    void validate() const
    {
        detail::require(depth >= 1 && input_dim >= 1 && num_classes >= 1 && samples >= 1,
                        "width-variation: counts must be positive");
        detail::require(!variations.empty(), "width-variation: need at least one variation");
        for (std::size_t v : variations) {
            detail::require(v < base_width, "width-variation: variation must be smaller than the base width");
        }
    }

    nlohmann::json to_json() const
    {
        return {{"experiment", "width_variation"}, {"depth", depth},     {"base_width", base_width},
                {"variations", variations},        {"input_dim", input_dim}, {"num_classes", num_classes},
                {"samples", samples},              {"seed", seed}};
    }
};

/// Hidden widths n_1..n_L drawn independently from U{base - v, ..., base + v}.
inline std::vector<std::size_t> sample_widths(const WidthVariationConfig& config, std::size_t variation)
{
    Generator gen(derive(RngState{config.seed, stream_label("widths")}, variation));
    std::vector<std::size_t> widths{config.input_dim};
    const auto lo = static_cast<std::int64_t>(config.base_width - variation);
    const auto hi = static_cast<std::int64_t>(config.base_width + variation);
    for (std::size_t l = 0; l < config.depth; ++l) {
        widths.push_back(static_cast<std::size_t>(gen.uniform_int(lo, hi)));
    }
    return widths;
}

/// Rows:
///   grad_ratio:v<v>     keyed by layer, statistics over samples
///   grad_ratio_pooled   keyed by v, statistics over all samples and layers
inline SummaryTable run_width_variation(const WidthVariationConfig& config)
{
    config.validate();
    SummaryTable table;
    table.config = config.to_json();
    nlohmann::json architectures = nlohmann::json::object();
    std::vector<SummaryRow> pooled_rows;
    for (std::size_t v : config.variations) {
        NetworkConfig net_config{sample_widths(config, v), config.num_classes, config.seed};
        architectures["v" + std::to_string(v)] = net_config.widths;
        const ReluNet net = init_network(net_config, InitScheme::kHeFanOut, network_rng(config.seed, net_config.widths));
        const auto samples = probe_ratios(net, config.seed, config.samples, config.workers);
        append_layer_rows(table, "grad_ratio:v" + std::to_string(v), samples, true);

        std::vector<double> pooled;
        pooled.reserve(samples.size() * config.depth);
        for (const auto& sample : samples) {
            for (const auto& layer : sample) {
                pooled.push_back(layer.grad);
            }
        }
        const MeanStd s = mean_std(pooled);
        pooled_rows.push_back({"grad_ratio_pooled", static_cast<std::int64_t>(v), s.mean, s.std, s.count});
    }
    table.rows.insert(table.rows.end(), pooled_rows.begin(), pooled_rows.end());
    table.config["architectures"] = architectures;
    return table;
}

} // namespace normlab::experiments
