#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "normlab/errors.hpp"

namespace normlab::bounds {

/// A failure probability, clamped to [0, 1]. `vacuous` is set when the
/// unclamped expression is >= 1 and so carries no information.
struct BoundResult {
    double probability = 1.0;
    bool vacuous = true;
    double unclamped = 1.0;
};

namespace detail {

inline void require_epsilon(double epsilon, const char* who)
{
    if (!(epsilon >= 0.0 && epsilon < 1.0)) {
        throw InvalidArgument(std::string(who) + ": epsilon must lie in [0, 1), got " + std::to_string(epsilon));
    }
}

inline void require_delta(double delta, const char* who)
{
    if (!(delta > 0.0 && delta < 1.0)) {
        throw InvalidArgument(std::string(who) + ": delta must lie in (0, 1), got " + std::to_string(delta));
    }
}

inline BoundResult clamp(double value)
{
    return {value >= 1.0 ? 1.0 : value, value >= 1.0, value};
}

} // namespace detail

/// Chernoff rate phi(eps) = eps/4 + ln(2 / (1 + sqrt(1 + eps))).
///
/// Evaluated as eps/4 - log1p(eps / (2 (1 + sqrt(1 + eps)))), which is the
/// same quantity without the cancellation in 1 + sqrt(1 + eps) - 2.
inline double rate_phi(double epsilon)
{
    detail::require_epsilon(epsilon, "rate_phi");
    const double root = std::sqrt(1.0 + epsilon);
    return 0.25 * epsilon - std::log1p(epsilon / (2.0 * (1.0 + root)));
}

/// Single ReLU layer of width m: P(squared-norm distortion > eps) <= 2 exp(-m phi(eps)).
inline BoundResult single_layer_failure_prob(std::int64_t m, double epsilon)
{
    ::normlab::detail::require(m >= 1, "single_layer_failure_prob: m must be positive");
    return detail::clamp(2.0 * std::exp(-static_cast<double>(m) * rate_phi(epsilon)));
}

/// Deep forward pass over N samples: sum_l 2 N exp(-n_l phi(eps)).
/// `widths` holds n_1 .. n_L (the input dimension is not part of the bound).
inline BoundResult deep_forward_failure_prob(std::span<const std::int64_t> widths, std::int64_t num_samples,
                                             double epsilon)
{
    ::normlab::detail::require(!widths.empty(), "deep_forward_failure_prob: need at least one layer");
    ::normlab::detail::require(num_samples >= 1, "deep_forward_failure_prob: N must be positive");
    const double phi = rate_phi(epsilon);
    double total = 0.0;
    for (std::int64_t n : widths) {
        ::normlab::detail::require(n >= 1, "deep_forward_failure_prob: widths must be positive");
        total += 2.0 * static_cast<double>(num_samples) * std::exp(-static_cast<double>(n) * phi);
    }
    return detail::clamp(total);
}

/// Gradient norm equality on a uniform-width net: 4 N L exp(-n phi(eps)).
inline BoundResult gradient_failure_prob(std::int64_t width, std::int64_t depth, std::int64_t num_samples,
                                         double epsilon)
{
    ::normlab::detail::require(width >= 1, "gradient_failure_prob: width must be positive");
    ::normlab::detail::require(depth >= 1, "gradient_failure_prob: depth must be positive");
    ::normlab::detail::require(num_samples >= 0, "gradient_failure_prob: N must be non-negative");
    const double phi = rate_phi(epsilon);
    return detail::clamp(4.0 * static_cast<double>(num_samples) * static_cast<double>(depth) *
                         std::exp(-static_cast<double>(width) * phi));
}

/// Masked inner-product preservation: 4 exp(-m phi(eps)).
inline BoundResult inner_product_failure_prob(std::int64_t m, double epsilon)
{
    ::normlab::detail::require(m >= 1, "inner_product_failure_prob: m must be positive");
    return detail::clamp(4.0 * std::exp(-static_cast<double>(m) * rate_phi(epsilon)));
}

/// Smallest eps with multiplier * exp(-m phi(eps)) <= delta, i.e. the root of
/// phi(eps) = ln(multiplier / delta) / m, by bisection on (0, 1).
///
/// Returns 0 when multiplier <= delta. Throws NoRoot when even eps -> 1 does
/// not bring the bound down to delta.
inline double solve_epsilon(std::int64_t m, double delta, double multiplier = 2.0, double tolerance = 1e-12)
{
    ::normlab::detail::require(m >= 1, "solve_epsilon: m must be positive");
    detail::require_delta(delta, "solve_epsilon");
    ::normlab::detail::require(multiplier > 0.0, "solve_epsilon: multiplier must be positive");
    if (multiplier <= delta) {
        return 0.0;
    }
    const double target = std::log(multiplier / delta) / static_cast<double>(m);
    double lo = 0.0;
    double hi = 1.0;
    // phi is continuous on [0, 1]; evaluate the closed end directly.
    const double phi_at_one = 0.25 - std::log1p(1.0 / (2.0 * (1.0 + std::sqrt(2.0))));
    if (phi_at_one < target) {
        throw NoRoot("solve_epsilon: no eps in (0, 1) reaches delta=" + std::to_string(delta) +
                     " at m=" + std::to_string(m));
    }
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (rate_phi(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return hi;
}

/// Grid spacing Delta = min{eps / (3 sqrt d), sqrt(eps) / (sqrt(3) d)}.
inline double grid_delta(std::int64_t d, double epsilon)
{
    ::normlab::detail::require(d >= 1, "grid_delta: d must be positive");
    detail::require_epsilon(epsilon, "grid_delta");
    ::normlab::detail::require(epsilon > 0.0, "grid_delta: epsilon must be positive");
    const double dd = static_cast<double>(d);
    return std::fmin(epsilon / (3.0 * std::sqrt(dd)), std::sqrt(epsilon) / (std::sqrt(3.0) * dd));
}

/// Width that makes every layer of a depth-L net preserve squared norms of
/// all inputs in a d-dimensional subspace within eps, with probability 1 - delta:
///   ceil((d ln(2/Delta) + ln(4L/delta)) / phi(eps/3)).
/// L = 1 gives the single-layer statement.
inline std::int64_t subspace_min_width(std::int64_t d, double epsilon, double delta, std::int64_t depth = 1)
{
    ::normlab::detail::require(d >= 1, "subspace_min_width: d must be positive");
    detail::require_epsilon(epsilon, "subspace_min_width");
    ::normlab::detail::require(epsilon > 0.0, "subspace_min_width: epsilon must be positive");
    detail::require_delta(delta, "subspace_min_width");
    ::normlab::detail::require(depth >= 1, "subspace_min_width: depth must be positive");
    const double spacing = grid_delta(d, epsilon);
    const double numerator = static_cast<double>(d) * std::log(2.0 / spacing) +
                             std::log(4.0 * static_cast<double>(depth) / delta);
    return static_cast<std::int64_t>(std::ceil(numerator / rate_phi(epsilon / 3.0)));
}

} // namespace normlab::bounds
