#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "normlab/errors.hpp"

namespace normlab {

struct SummaryRow {
    std::string metric;
    std::int64_t layer_or_width = 0;
    double mean = 0.0;
    double std = 0.0;
    std::uint64_t count = 0;

    friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

/// Rows of (metric, layer or width, mean, std, count) plus the config that
/// produced them.
struct SummaryTable {
    nlohmann::json config = nlohmann::json::object();
    std::vector<SummaryRow> rows;

    std::vector<SummaryRow> series(const std::string& metric) const
    {
        std::vector<SummaryRow> out;
        for (const auto& row : rows) {
            if (row.metric == metric) {
                out.push_back(row);
            }
        }
        return out;
    }

    const SummaryRow& at(const std::string& metric, std::int64_t key) const
    {
        for (const auto& row : rows) {
            if (row.metric == metric && row.layer_or_width == key) {
                return row;
            }
        }
        throw InvalidArgument("SummaryTable: no row " + metric + "@" + std::to_string(key));
    }

    /// Metric names in first-appearance order.
    std::vector<std::string> metrics() const
    {
        std::vector<std::string> out;
        for (const auto& row : rows) {
            if (std::find(out.begin(), out.end(), row.metric) == out.end()) {
                out.push_back(row.metric);
            }
        }
        return out;
    }

    friend bool operator==(const SummaryTable&, const SummaryTable&) = default;
};

/// Outcome of a Monte Carlo check of one concentration statement.
struct McReport {
    std::uint64_t trials = 0;
    std::uint64_t violation_count = 0;
    double violation_rate = 0.0;
    /// Mean of ||v||^2 / ||u||^2 (for the inner-product check: of the first vector).
    double mean_ratio = 0.0;
    double ratio_stderr = 0.0;
    /// Mean signed error <v1, v2> - <u1, u2>; inner-product check only.
    std::optional<double> mean_error;
    /// Closed-form failure probability, when one applies to the configuration.
    std::optional<double> theoretical_bound;
    /// violation_rate <= bound + 3 sqrt(bound / T); true when no bound applies.
    bool bound_satisfied = true;
};

/// Mean and sample standard deviation, accumulated in index order.
struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    std::uint64_t count = 0;
};

inline MeanStd mean_std(std::span<const double> values)
{
    MeanStd out;
    out.count = values.size();
    if (values.empty()) {
        return out;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) {
            sq += (v - out.mean) * (v - out.mean);
        }
        out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return out;
}

/// Allowed slack for an empirical rate against a probability bound.
inline double bound_with_slack(double bound, std::uint64_t trials)
{
    return bound + 3.0 * std::sqrt(bound / static_cast<double>(trials));
}

} // namespace normlab
