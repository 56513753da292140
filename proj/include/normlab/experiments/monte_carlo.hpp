#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "normlab/bounds.hpp"
#include "normlab/errors.hpp"
#include "normlab/experiments/summary.hpp"
#include "normlab/linalg.hpp"
#include "normlab/network.hpp"
#include "normlab/parallel.hpp"
#include "normlab/rng.hpp"

namespace normlab::mc {

/// How a trial realizes R u for a Gaussian matrix R with i.i.d. entries.
enum class Sampling {
    /// Draw every entry of R and form the products.
    kDense,
    /// Draw R restricted to span{u_k}. For fixed u the rows of R u are i.i.d.
    /// N(0, var ||u||^2), and for a pair (u1, u2) each row of (R u1, R u2) is a
    /// bivariate normal with covariance var * Gram(u1, u2). Same law as kDense
    /// at O(m) instead of O(m n) draws per trial.
    kMarginal,
};

/// Choice of the second vector in the inner-product check.
enum class PairMode {
    kIndependent, ///< u2 drawn independently of u1
    kIdentical,   ///< u2 = u1
    kSecondZero,  ///< u2 = 0
};

struct Options {
    Sampling sampling = Sampling::kMarginal;
    /// Use u = e_1 instead of a fresh Gaussian direction each trial.
    bool fixed_direction = false;
    PairMode pair = PairMode::kIndependent;
    std::size_t workers = 1;
};

namespace detail {

struct TrialOutcome {
    double ratio = 0.0;
    double error = 0.0;
    bool violated = false;
};

inline Vector draw_direction(Eigen::Index n, bool fixed, Generator& gen)
{
    Vector u = Vector::Zero(n);
    if (fixed) {
        u[0] = 1.0;
        return u;
    }
    do {
        for (Eigen::Index j = 0; j < n; ++j) {
            u[j] = gen.normal();
        }
    } while (u.squaredNorm() == 0.0);
    return u;
}

inline McReport reduce(const std::vector<TrialOutcome>& outcomes, std::optional<double> bound, bool with_error)
{
    McReport report;
    report.trials = outcomes.size();
    std::vector<double> ratios;
    ratios.reserve(outcomes.size());
    double error_sum = 0.0;
    for (const auto& o : outcomes) {
        ratios.push_back(o.ratio);
        report.violation_count += o.violated ? 1 : 0;
        error_sum += o.error;
    }
    const MeanStd stats = mean_std(ratios);
    report.mean_ratio = stats.mean;
    report.ratio_stderr = stats.std / std::sqrt(static_cast<double>(outcomes.size()));
    report.violation_rate = static_cast<double>(report.violation_count) / static_cast<double>(report.trials);
    if (with_error) {
        report.mean_error = error_sum / static_cast<double>(outcomes.size());
    }
    report.theoretical_bound = bound;
    report.bound_satisfied = !bound || report.violation_rate <= bound_with_slack(*bound, report.trials);
    return report;
}

inline void check_common(std::int64_t m, std::int64_t n, double epsilon, std::int64_t trials)
{
    ::normlab::detail::require(m >= 1 && n >= 1, "mc: m and n must be positive");
    ::normlab::detail::require(trials >= 1, "mc: trials must be positive");
    ::normlab::detail::require(epsilon > 0.0 && epsilon < 1.0, "mc: epsilon must lie in (0, 1)");
}

} // namespace detail

/// v = ReLU(R u) with R_ij ~ N(0, 2/m). Reports the mean of ||v||^2/||u||^2 and
/// the fraction of trials with | ||v||^2 - ||u||^2 | > eps ||u||^2, compared
/// against 2 exp(-m phi(eps)).
inline McReport forward_layer(std::int64_t m, std::int64_t n, double epsilon, std::int64_t trials, RngState rng,
                              const Options& options = {})
{
    detail::check_common(m, n, epsilon, trials);
    const double sd = std::sqrt(2.0 / static_cast<double>(m));
    auto trial = [&](std::size_t t) {
        Generator gen(derive(rng, t));
        const Vector u = detail::draw_direction(n, options.fixed_direction, gen);
        const double u_sq = u.squaredNorm();
        const double u_norm = std::sqrt(u_sq);
        double v_sq = 0.0;
        for (std::int64_t i = 0; i < m; ++i) {
            double proj = 0.0;
            if (options.sampling == Sampling::kDense) {
                for (std::int64_t j = 0; j < n; ++j) {
                    proj += sd * gen.normal() * u[j];
                }
            } else {
                proj = sd * u_norm * gen.normal();
            }
            if (proj > 0.0) {
                v_sq += proj * proj;
            }
        }
        const double ratio = v_sq / u_sq;
        return detail::TrialOutcome{ratio, 0.0, std::abs(ratio - 1.0) > epsilon};
    };
    const auto outcomes = parallel_map(static_cast<std::size_t>(trials), options.workers, trial);
    return detail::reduce(outcomes, bounds::single_layer_failure_prob(m, epsilon).probability, false);
}

/// v = (R u) * z with R_ij ~ N(0, 1/(p m)) and z_i ~ Bernoulli(p). The bound
/// 2 exp(-m phi(eps)) is only attached for p = 0.5.
inline McReport backward_layer(std::int64_t m, std::int64_t n, double p, double epsilon, std::int64_t trials,
                               RngState rng, const Options& options = {})
{
    detail::check_common(m, n, epsilon, trials);
    ::normlab::detail::require(p > 0.0 && p <= 1.0, "mc: p must lie in (0, 1]");
    const double sd = std::sqrt(1.0 / (p * static_cast<double>(m)));
    auto trial = [&](std::size_t t) {
        Generator gen(derive(rng, t));
        const Vector u = detail::draw_direction(n, options.fixed_direction, gen);
        const double u_sq = u.squaredNorm();
        const double u_norm = std::sqrt(u_sq);
        double v_sq = 0.0;
        for (std::int64_t i = 0; i < m; ++i) {
            double proj = 0.0;
            if (options.sampling == Sampling::kDense) {
                for (std::int64_t j = 0; j < n; ++j) {
                    proj += sd * gen.normal() * u[j];
                }
            } else {
                proj = sd * u_norm * gen.normal();
            }
            if (gen.bernoulli(p)) {
                v_sq += proj * proj;
            }
        }
        const double ratio = v_sq / u_sq;
        return detail::TrialOutcome{ratio, 0.0, std::abs(ratio - 1.0) > epsilon};
    };
    const auto outcomes = parallel_map(static_cast<std::size_t>(trials), options.workers, trial);
    std::optional<double> bound;
    if (p == 0.5) {
        bound = bounds::single_layer_failure_prob(m, epsilon).probability;
    }
    return detail::reduce(outcomes, bound, false);
}

/// v_k = (R u_k) * z for unit u_1, u_2 sharing R_ij ~ N(0, 2/m) and
/// z_i ~ Bernoulli(0.5). Violation: |<v1, v2> - <u1, u2>| > eps. Bound: 4 exp(-m phi(eps)).
inline McReport masked_inner_product(std::int64_t m, std::int64_t n, std::int64_t trials, double epsilon,
                                     RngState rng, const Options& options = {})
{
    detail::check_common(m, n, epsilon, trials);
    const double sd = std::sqrt(1.0 / (0.5 * static_cast<double>(m)));
    auto trial = [&](std::size_t t) {
        Generator gen(derive(rng, t));
        Vector u1 = detail::draw_direction(n, options.fixed_direction, gen);
        u1 /= norm(u1);
        Vector u2 = Vector::Zero(n);
        switch (options.pair) {
        case PairMode::kIndependent:
            u2 = detail::draw_direction(n, false, gen);
            u2 /= norm(u2);
            break;
        case PairMode::kIdentical:
            u2 = u1;
            break;
        case PairMode::kSecondZero:
            break;
        }
        const double target = u1.dot(u2);

        // Coordinates of u1, u2 in an orthonormal basis of their span.
        const double c1x = norm(u1);
        const double c2x = target / c1x;
        const double c2y = std::sqrt(std::max(0.0, u2.squaredNorm() - c2x * c2x));

        double inner = 0.0;
        double v1_sq = 0.0;
        for (std::int64_t i = 0; i < m; ++i) {
            double p1 = 0.0;
            double p2 = 0.0;
            if (options.sampling == Sampling::kDense) {
                for (std::int64_t j = 0; j < n; ++j) {
                    const double r = sd * gen.normal();
                    p1 += r * u1[j];
                    p2 += r * u2[j];
                }
            } else {
                const double g1 = sd * gen.normal();
                const double g2 = sd * gen.normal();
                p1 = c1x * g1;
                p2 = c2x * g1 + c2y * g2;
            }
            if (gen.bernoulli(0.5)) {
                inner += p1 * p2;
                v1_sq += p1 * p1;
            }
        }
        const double error = inner - target;
        return detail::TrialOutcome{v1_sq / u1.squaredNorm(), error, std::abs(error) > epsilon};
    };
    const auto outcomes = parallel_map(static_cast<std::size_t>(trials), options.workers, trial);
    return detail::reduce(outcomes, bounds::inner_product_failure_prob(m, epsilon).probability, true);
}

/// Fraction of freshly initialized nets (fixed input, resampled weights) in
/// which each unit's pre-activation is strictly positive.
struct GateFrequencies {
    std::uint64_t trials = 0;
    std::vector<Vector> per_layer; ///< layer l-1 holds the n_l unit frequencies

    double stderr_at_half() const { return std::sqrt(0.25 / static_cast<double>(trials)); }
};

inline GateFrequencies gate_frequency(const NetworkConfig& config, const Vector& x, std::int64_t trials,
                                      RngState rng, InitScheme scheme = InitScheme::kHeFanOut,
                                      std::size_t workers = 1)
{
    config.validate();
    ::normlab::detail::require(trials >= 1, "gate_frequency: trials must be positive");
    ::normlab::detail::require(static_cast<std::size_t>(x.size()) == config.widths.front(),
                               "gate_frequency: input dimension mismatch");
    using Counts = std::vector<std::vector<std::uint8_t>>;
    auto trial = [&](std::size_t t) {
        const ReluNet net = init_network(config, scheme, derive(rng, t));
        const ForwardTrace trace = forward(net, x);
        Counts gates(net.depth());
        for (std::size_t l = 0; l < net.depth(); ++l) {
            const Vector& a = trace.preacts[l];
            gates[l].resize(static_cast<std::size_t>(a.size()));
            for (Eigen::Index i = 0; i < a.size(); ++i) {
                gates[l][static_cast<std::size_t>(i)] = a[i] > 0.0 ? 1 : 0;
            }
        }
        return gates;
    };
    const auto outcomes = parallel_map(static_cast<std::size_t>(trials), workers, trial);

    GateFrequencies out;
    out.trials = static_cast<std::uint64_t>(trials);
    for (std::size_t l = 1; l <= config.depth(); ++l) {
        std::vector<std::uint64_t> counts(config.widths[l], 0);
        for (const auto& gates : outcomes) {
            for (std::size_t i = 0; i < counts.size(); ++i) {
                counts[i] += gates[l - 1][i];
            }
        }
        Vector freq(static_cast<Eigen::Index>(counts.size()));
        for (std::size_t i = 0; i < counts.size(); ++i) {
            freq[static_cast<Eigen::Index>(i)] = static_cast<double>(counts[i]) / static_cast<double>(trials);
        }
        out.per_layer.push_back(std::move(freq));
    }
    return out;
}

/// Same, with the input drawn from N(0, I) on sub-stream "input".
inline GateFrequencies gate_frequency(const NetworkConfig& config, std::int64_t trials, RngState rng,
                                      InitScheme scheme = InitScheme::kHeFanOut, std::size_t workers = 1)
{
    config.validate();
    const Vector x = gaussian_vector(static_cast<Eigen::Index>(config.widths.front()), 1.0, derive(rng, "input"));
    return gate_frequency(config, x, trials, derive(rng, "nets"), scheme, workers);
}

} // namespace normlab::mc
