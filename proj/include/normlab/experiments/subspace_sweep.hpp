#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "normlab/bounds.hpp"
#include "normlab/errors.hpp"
#include "normlab/experiments/norm_experiments.hpp"
#include "normlab/experiments/summary.hpp"
#include "normlab/linalg.hpp"
#include "normlab/network.hpp"
#include "normlab/parallel.hpp"
#include "normlab/rng.hpp"

namespace normlab::experiments {

/// Max squared-norm distortion over many inputs x = B z confined to a random
/// d-dimensional subspace, at the width the subspace bound asks for (capped)
/// and optionally at smaller widths.
struct SubspaceSweepConfig {
    std::size_t subspace_dim = 5;
    std::size_t input_dim = 200;
    double epsilon = 0.5;
    double delta = 0.05;
    std::size_t depth = 3;
    /// The bound's width is replaced by this cap when larger; 0 disables the cap.
    std::size_t width_cap = 4000;
    /// Additional widths to sweep, for contrast with the bound's width.
    std::vector<std::size_t> extra_widths{1000};
    std::size_t num_inputs = 100000;
    std::size_t batch = 1000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    static SubspaceSweepConfig desk() { return {}; }

    /// d = 10, eps = 0.3, one layer at the full bound width.
    static SubspaceSweepConfig paper()
    {
        SubspaceSweepConfig c;
        c.subspace_dim = 10;
        c.epsilon = 0.3;
        c.depth = 1;
        c.width_cap = 0;
        c.extra_widths = {4000};
        c.batch = 100;
        return c;
    }

    void validate() const
    {
        detail::require(subspace_dim >= 1, "subspace: d must be positive");
        detail::require(subspace_dim <= input_dim, "subspace: d must not exceed the input dimension");
        detail::require(epsilon > 0.0 && epsilon < 1.0, "subspace: epsilon must lie in (0, 1)");
        detail::require(delta > 0.0 && delta < 1.0, "subspace: delta must lie in (0, 1)");
        detail::require(depth >= 1 && num_inputs >= 1 && batch >= 1, "subspace: counts must be positive");
        for (std::size_t w : extra_widths) {
            detail::require(w >= 1, "subspace: widths must be positive");
        }
    }

    std::size_t bound_width() const
    {
        return static_cast<std::size_t>(bounds::subspace_min_width(static_cast<std::int64_t>(subspace_dim), epsilon,
                                                                   delta, static_cast<std::int64_t>(depth)));
    }

    std::size_t tested_width() const
    {
        const std::size_t w = bound_width();
        return width_cap == 0 ? w : std::min(w, width_cap);
    }

    /// Sorted, de-duplicated widths to sweep.
    std::vector<std::size_t> sweep_widths() const
    {
        std::vector<std::size_t> out = extra_widths;
        out.push_back(tested_width());
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    nlohmann::json to_json() const
    {
        return {{"experiment", "subspace_sweep"},
                {"d", subspace_dim},
                {"input_dim", input_dim},
                {"epsilon", epsilon},
                {"delta", delta},
                {"depth", depth},
                {"width_cap", width_cap},
                {"extra_widths", extra_widths},
                {"num_inputs", num_inputs},
                {"batch", batch},
                {"seed", seed},
                {"bound_width", bound_width()},
                {"tested_width", tested_width()}};
    }
};

inline Matrix subspace_basis(const SubspaceSweepConfig& config)
{
    return orthonormal_basis(static_cast<Eigen::Index>(config.input_dim), static_cast<Eigen::Index>(config.subspace_dim),
                             RngState{config.seed, stream_label("subspace-basis")});
}

inline ReluNet subspace_network(const SubspaceSweepConfig& config, std::size_t width)
{
    NetworkConfig net_config{uniform_widths(config.input_dim, width, config.depth), 1, config.seed};
    return init_network(net_config, InitScheme::kHeFanOut, network_rng(config.seed, net_config.widths));
}

/// Coefficients z of inputs [first, first + count) as columns of a d x count matrix.
inline Matrix subspace_coefficients(const SubspaceSweepConfig& config, std::size_t first, std::size_t count)
{
    Matrix z(static_cast<Eigen::Index>(config.subspace_dim), static_cast<Eigen::Index>(count));
    const RngState base{config.seed, stream_label("subspace-inputs")};
    for (std::size_t k = 0; k < count; ++k) {
        z.col(static_cast<Eigen::Index>(k)) =
            gaussian_vector(static_cast<Eigen::Index>(config.subspace_dim), 1.0, derive(base, first + k));
    }
    return z;
}

namespace detail {

struct LayerExtremes {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    double sum_sq = 0.0;
    std::uint64_t violations = 0;
};

} // namespace detail

/// Rows per swept width w, keyed by layer:
///   sq_ratio:w<w>            mean/std of ||h^l||^2 / ||x||^2 over inputs
///   sq_ratio_min:w<w>        smallest ratio (in the mean column)
///   sq_ratio_max:w<w>        largest ratio
///   max_sq_distortion:w<w>   max |ratio - 1|
///   band_violations:w<w>     inputs outside [(1-eps)^l, (1+eps)^l] (in the mean column)
inline SummaryTable run_subspace_sweep(const SubspaceSweepConfig& config)
{
    config.validate();
    SummaryTable table;
    table.config = config.to_json();
    const Matrix basis = subspace_basis(config);
    const std::size_t batches = (config.num_inputs + config.batch - 1) / config.batch;

    for (std::size_t width : config.sweep_widths()) {
        const ReluNet net = subspace_network(config, width);
        const auto partials = parallel_map(batches, config.workers, [&](std::size_t b) {
            const std::size_t first = b * config.batch;
            const std::size_t count = std::min(config.batch, config.num_inputs - first);
            Eigen::MatrixXd h = basis * subspace_coefficients(config, first, count);
            const Eigen::RowVectorXd x_sq = h.colwise().squaredNorm();
            std::vector<detail::LayerExtremes> layers(config.depth);
            for (std::size_t l = 1; l <= config.depth; ++l) {
                h = (net.weight(l) * h).cwiseMax(0.0);
                const Eigen::RowVectorXd h_sq = h.colwise().squaredNorm();
                const double lower = std::pow(1.0 - config.epsilon, static_cast<double>(l));
                const double upper = std::pow(1.0 + config.epsilon, static_cast<double>(l));
                auto& acc = layers[l - 1];
                for (Eigen::Index k = 0; k < h_sq.size(); ++k) {
                    const double r = h_sq[k] / x_sq[k];
                    acc.min = std::min(acc.min, r);
                    acc.max = std::max(acc.max, r);
                    acc.sum += r;
                    acc.sum_sq += r * r;
                    acc.violations += (r < lower || r > upper) ? 1 : 0;
                }
            }
            return layers;
        });

        std::vector<detail::LayerExtremes> totals(config.depth);
        for (const auto& batch : partials) {
            for (std::size_t l = 0; l < config.depth; ++l) {
                totals[l].min = std::min(totals[l].min, batch[l].min);
                totals[l].max = std::max(totals[l].max, batch[l].max);
                totals[l].sum += batch[l].sum;
                totals[l].sum_sq += batch[l].sum_sq;
                totals[l].violations += batch[l].violations;
            }
        }
        const std::string suffix = ":w" + std::to_string(width);
        const auto n = static_cast<double>(config.num_inputs);
        const auto count = static_cast<std::uint64_t>(config.num_inputs);
        for (std::size_t l = 0; l < config.depth; ++l) {
            const auto key = static_cast<std::int64_t>(l + 1);
            const auto& t = totals[l];
            const double mean = t.sum / n;
            const double var = config.num_inputs > 1 ? std::max(0.0, (t.sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
            table.rows.push_back({"sq_ratio" + suffix, key, mean, std::sqrt(var), count});
            table.rows.push_back({"sq_ratio_min" + suffix, key, t.min, 0.0, count});
            table.rows.push_back({"sq_ratio_max" + suffix, key, t.max, 0.0, count});
            table.rows.push_back(
                {"max_sq_distortion" + suffix, key, std::max(t.max - 1.0, 1.0 - t.min), 0.0, count});
            table.rows.push_back({"band_violations" + suffix, key, static_cast<double>(t.violations), 0.0, count});
        }
    }
    return table;
}

} // namespace normlab::experiments
