#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "normlab/bounds.hpp"
#include "normlab/errors.hpp"
#include "normlab/experiments/monte_carlo.hpp"
#include "normlab/experiments/norm_experiments.hpp"
#include "normlab/experiments/subspace_sweep.hpp"
#include "normlab/io/svg.hpp"
#include "normlab/io/table_io.hpp"
#include "normlab/parallel.hpp"

namespace normlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitInternal = 2;

namespace detail {

/// Values from --config, overridden by flags given on the command line.
class Settings {
public:
    explicit Settings(nlohmann::json file = nlohmann::json::object())
        : file_(std::move(file))
    {
        if (!file_.is_object()) {
            throw InvalidArgument("config file must hold a JSON object");
        }
    }

    template <typename T>
    std::optional<T> get(const std::string& key, const CLI::Option* flag, const T& flag_value) const
    {
        if (flag != nullptr && flag->count() > 0) {
            return flag_value;
        }
        if (file_.contains(key)) {
            try {
                return file_.at(key).get<T>();
            } catch (const nlohmann::json::exception& e) {
                throw InvalidArgument("config key '" + key + "': " + e.what());
            }
        }
        return std::nullopt;
    }

    template <typename T>
    void apply(const std::string& key, const CLI::Option* flag, const T& flag_value, T& target) const
    {
        if (auto v = get<T>(key, flag, flag_value)) {
            target = *v;
        }
    }

private:
    nlohmann::json file_;
};

struct Common {
    std::uint64_t seed = 0;
    std::string out;
    std::string format;
    std::string preset = "desk";
    std::string config_path;
    std::size_t workers = 0;
    bool no_clobber = false;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* format_opt = nullptr;
    CLI::Option* preset_opt = nullptr;
    CLI::Option* workers_opt = nullptr;
};

inline void add_common(CLI::App* app, Common& c, bool experiment)
{
    c.seed_opt = app->add_option("--seed", c.seed, "Random seed (default 0)");
    app->add_option("--out", c.out, "Output path (default: stdout)");
    c.format_opt = app->add_option("--format", c.format, experiment ? "csv, json or svg" : "text, csv or json");
    app->add_option("--config", c.config_path, "JSON config file; flags override its values");
    app->add_flag("--no-clobber", c.no_clobber, "Fail instead of overwriting --out");
    if (experiment) {
        c.preset_opt = app->add_option("--preset", c.preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
        c.workers_opt = app->add_option("--workers", c.workers, "Worker threads (results do not depend on it)");
    }
}

inline Settings load_settings(const Common& c)
{
    if (c.config_path.empty()) {
        return Settings{};
    }
    const std::string text = io::read_text(c.config_path);
    try {
        return Settings{nlohmann::json::parse(text)};
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("config file " + c.config_path + ": " + e.what());
    }
}

inline void emit(const std::string& text, const Common& c, std::ostream& out)
{
    if (c.out.empty()) {
        out << text;
        return;
    }
    io::write_text(text, io::OutputSpec{c.out, io::Format::kCsv, !c.no_clobber});
}

inline std::string resolve_format(const Common& c, const Settings& s, const std::string& fallback)
{
    return s.get<std::string>("format", c.format_opt, c.format).value_or(fallback);
}

inline void require_epsilon(double eps)
{
    if (!(eps >= 0.0 && eps < 1.0)) {
        throw InvalidArgument("--eps must lie in [0, 1)");
    }
}

inline void require_delta(double delta)
{
    if (!(delta > 0.0 && delta < 1.0)) {
        throw InvalidArgument("--delta must lie in (0, 1)");
    }
}

inline std::string scalar_output(const std::string& format, const nlohmann::json& fields, const std::string& text)
{
    if (format == "text") {
        return text + "\n";
    }
    if (format == "json") {
        return fields.dump() + "\n";
    }
    if (format == "csv") {
        std::string header;
        std::string values;
        for (const auto& [key, value] : fields.items()) {
            header += (header.empty() ? "" : ",") + key;
            values += (values.empty() ? "" : ",") +
                      (value.is_number_float() ? io::format_double(value.get<double>()) : value.dump());
        }
        return header + "\n" + values + "\n";
    }
    if (format == "svg") {
        throw InvalidArgument("--format svg is only available for fig1, fig2, fig3 and subspace");
    }
    throw InvalidArgument("unknown --format '" + format + "'");
}

inline std::string short_number(double v)
{
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.6g", v);
    return buffer;
}

inline std::string table_output(const std::string& format, const SummaryTable& table,
                                const std::vector<io::Panel>& panels)
{
    const io::Format f = io::parse_format(format);
    switch (f) {
    case io::Format::kCsv:
        return io::to_csv(table);
    case io::Format::kJson:
        return io::to_json(table);
    case io::Format::kSvg:
        return io::render_svg(panels);
    }
    return {};
}

inline std::vector<InitScheme> parse_schemes(const std::vector<std::string>& names)
{
    std::vector<InitScheme> out;
    for (const auto& n : names) {
        out.push_back(parse_init_scheme(n));
    }
    return out;
}

} // namespace detail

/// Runs one subcommand. Returns 0 on success, 1 on validation errors
/// (bad flags, out-of-range values) and 2 on internal or I/O errors.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    using namespace detail;
    CLI::App app{"Norm preservation laboratory for He-initialized deep ReLU networks"};
    app.require_subcommand(1, 1);
    app.fallthrough(false);

    // bounds ---------------------------------------------------------------
    Common bounds_common;
    std::string bound_kind = "single";
    std::int64_t bound_m = 0;
    std::int64_t bound_n = 0;
    std::int64_t bound_depth = 1;
    std::int64_t bound_samples = 1;
    double bound_eps = 0.0;
    auto* bounds_cmd = app.add_subcommand("bounds", "Failure probability of a norm-preservation bound");
    add_common(bounds_cmd, bounds_common, false);
    auto* kind_opt = bounds_cmd->add_option("--kind", bound_kind, "single, forward, gradient or inner")
                         ->check(CLI::IsMember({"single", "forward", "gradient", "inner"}));
    auto* m_opt = bounds_cmd->add_option("--m", bound_m, "Layer width (single, inner)");
    auto* n_opt = bounds_cmd->add_option("--n", bound_n, "Uniform hidden width (forward, gradient)");
    auto* depth_opt = bounds_cmd->add_option("--depth", bound_depth, "Depth L (forward, gradient)");
    auto* samples_opt = bounds_cmd->add_option("--samples", bound_samples, "Dataset size N (forward, gradient)");
    auto* eps_opt = bounds_cmd->add_option("--eps", bound_eps, "Distortion epsilon in [0, 1)");

    // solve-eps ------------------------------------------------------------
    Common solve_common;
    std::int64_t solve_m = 0;
    double solve_delta = 0.05;
    double solve_multiplier = 2.0;
    auto* solve_cmd = app.add_subcommand("solve-eps", "Epsilon at which the single-layer bound equals delta");
    add_common(solve_cmd, solve_common, false);
    auto* solve_m_opt = solve_cmd->add_option("--m", solve_m, "Layer width");
    auto* solve_delta_opt = solve_cmd->add_option("--delta", solve_delta, "Failure probability in (0, 1)");
    auto* solve_mult_opt = solve_cmd->add_option("--multiplier", solve_multiplier, "Bound prefactor (default 2)");

    // min-width ------------------------------------------------------------
    Common width_common;
    std::int64_t width_d = 1;
    double width_eps = 0.0;
    double width_delta = 0.05;
    std::int64_t width_depth = 1;
    auto* width_cmd = app.add_subcommand("min-width", "Width that preserves norms on a d-dimensional subspace");
    add_common(width_cmd, width_common, false);
    auto* width_d_opt = width_cmd->add_option("--d", width_d, "Subspace dimension");
    auto* width_eps_opt = width_cmd->add_option("--eps", width_eps, "Distortion epsilon in (0, 1)");
    auto* width_delta_opt = width_cmd->add_option("--delta", width_delta, "Failure probability in (0, 1)");
    auto* width_depth_opt = width_cmd->add_option("--depth", width_depth, "Depth L (default 1)");

    // mc -------------------------------------------------------------------
    Common mc_common;
    std::string mc_check = "forward";
    std::int64_t mc_m = 1000;
    std::int64_t mc_n = 500;
    double mc_eps = 0.1;
    double mc_p = 0.5;
    std::int64_t mc_trials = 10000;
    std::int64_t mc_depth = 3;
    std::string mc_sampling = "marginal";
    auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo check of a single-layer concentration statement");
    add_common(mc_cmd, mc_common, false);
    auto* check_opt = mc_cmd->add_option("--check", mc_check, "forward, backward, inner or gates")
                          ->check(CLI::IsMember({"forward", "backward", "inner", "gates"}));
    auto* mc_m_opt = mc_cmd->add_option("--m", mc_m, "Output width m (default 1000)");
    auto* mc_n_opt = mc_cmd->add_option("--n", mc_n, "Input dimension n (default 500)");
    auto* mc_eps_opt = mc_cmd->add_option("--eps", mc_eps, "Distortion epsilon in (0, 1)");
    auto* mc_p_opt = mc_cmd->add_option("--p", mc_p, "Mask probability for --check backward (default 0.5)");
    auto* mc_trials_opt = mc_cmd->add_option("--trials", mc_trials, "Number of trials (default 10000)");
    auto* mc_depth_opt = mc_cmd->add_option("--depth", mc_depth, "Depth for --check gates (default 3)");
    auto* mc_sampling_opt = mc_cmd->add_option("--sampling", mc_sampling, "dense or marginal")
                                ->check(CLI::IsMember({"dense", "marginal"}));
    std::size_t mc_workers = 0;
    auto* mc_workers_opt = mc_cmd->add_option("--workers", mc_workers, "Worker threads");

    // fig1 -----------------------------------------------------------------
    Common fig1_common;
    std::int64_t fig1_depth = 0;
    std::int64_t fig1_samples = 0;
    std::vector<std::size_t> fig1_widths;
    std::vector<std::string> fig1_init;
    auto* fig1_cmd = app.add_subcommand("fig1", "Activation and gradient norm ratios per layer");
    add_common(fig1_cmd, fig1_common, true);
    auto* fig1_depth_opt = fig1_cmd->add_option("--depth", fig1_depth, "Number of ReLU layers");
    auto* fig1_samples_opt = fig1_cmd->add_option("--samples", fig1_samples, "Number of input samples");
    auto* fig1_widths_opt = fig1_cmd->add_option("--widths", fig1_widths, "Uniform hidden widths to compare");
    auto* fig1_init_opt = fig1_cmd->add_option("--init", fig1_init, "he, he-fanin and/or glorot");

    // fig2 -----------------------------------------------------------------
    Common fig2_common;
    std::int64_t fig2_samples = 0;
    std::vector<std::size_t> fig2_widths;
    double fig2_delta = 0.05;
    auto* fig2_cmd = app.add_subcommand("fig2", "Empirical versus predicted single-layer distortion");
    add_common(fig2_cmd, fig2_common, true);
    auto* fig2_samples_opt = fig2_cmd->add_option("--samples", fig2_samples, "Number of input samples");
    auto* fig2_widths_opt = fig2_cmd->add_option("--widths", fig2_widths, "Layer widths");
    auto* fig2_delta_opt = fig2_cmd->add_option("--delta", fig2_delta, "Failure probability for the prediction");

    // fig3 -----------------------------------------------------------------
    Common fig3_common;
    std::int64_t fig3_depth = 0;
    std::int64_t fig3_samples = 0;
    std::int64_t fig3_base = 0;
    std::vector<std::size_t> fig3_v;
    auto* fig3_cmd = app.add_subcommand("fig3", "Gradient ratios under non-uniform layer widths");
    add_common(fig3_cmd, fig3_common, true);
    auto* fig3_depth_opt = fig3_cmd->add_option("--depth", fig3_depth, "Number of ReLU layers");
    auto* fig3_samples_opt = fig3_cmd->add_option("--samples", fig3_samples, "Number of input samples");
    auto* fig3_base_opt = fig3_cmd->add_option("--n", fig3_base, "Base width");
    auto* fig3_v_opt = fig3_cmd->add_option("--v", fig3_v, "Width variations");

    // subspace -------------------------------------------------------------
    Common sub_common;
    std::int64_t sub_d = 0;
    std::int64_t sub_n = 0;
    double sub_eps = 0.0;
    double sub_delta = 0.0;
    std::int64_t sub_depth = 0;
    std::int64_t sub_samples = 0;
    std::int64_t sub_cap = 0;
    std::vector<std::size_t> sub_widths;
    auto* sub_cmd = app.add_subcommand("subspace", "Max distortion over inputs confined to a random subspace");
    add_common(sub_cmd, sub_common, true);
    auto* sub_d_opt = sub_cmd->add_option("--d", sub_d, "Subspace dimension");
    auto* sub_n_opt = sub_cmd->add_option("--n", sub_n, "Input dimension");
    auto* sub_eps_opt = sub_cmd->add_option("--eps", sub_eps, "Distortion epsilon in (0, 1)");
    auto* sub_delta_opt = sub_cmd->add_option("--delta", sub_delta, "Failure probability in (0, 1)");
    auto* sub_depth_opt = sub_cmd->add_option("--depth", sub_depth, "Number of ReLU layers");
    auto* sub_samples_opt = sub_cmd->add_option("--samples", sub_samples, "Number of subspace inputs");
    auto* sub_cap_opt = sub_cmd->add_option("--m", sub_cap, "Cap on the tested width (0: no cap)");
    auto* sub_widths_opt = sub_cmd->add_option("--widths", sub_widths, "Extra widths to sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitValidation;
    }

    try {
        if (bounds_cmd->parsed()) {
            const Settings s = load_settings(bounds_common);
            s.apply("kind", kind_opt, bound_kind, bound_kind);
            s.apply("m", m_opt, bound_m, bound_m);
            s.apply("n", n_opt, bound_n, bound_n);
            s.apply("depth", depth_opt, bound_depth, bound_depth);
            s.apply("samples", samples_opt, bound_samples, bound_samples);
            s.apply("eps", eps_opt, bound_eps, bound_eps);
            const std::string format = resolve_format(bounds_common, s, "text");
            require_epsilon(bound_eps);
            bounds::BoundResult r;
            if (bound_kind == "single") {
                r = bounds::single_layer_failure_prob(bound_m, bound_eps);
            } else if (bound_kind == "inner") {
                r = bounds::inner_product_failure_prob(bound_m, bound_eps);
            } else if (bound_kind == "forward") {
                ::normlab::detail::require(bound_depth >= 1, "--depth must be positive");
                const std::vector<std::int64_t> widths(static_cast<std::size_t>(bound_depth), bound_n);
                r = bounds::deep_forward_failure_prob(widths, bound_samples, bound_eps);
            } else if (bound_kind == "gradient") {
                r = bounds::gradient_failure_prob(bound_n, bound_depth, bound_samples, bound_eps);
            } else {
                throw InvalidArgument("unknown --kind '" + bound_kind + "'");
            }
            const nlohmann::json fields{
                {"probability", r.probability}, {"vacuous", r.vacuous}, {"unclamped", r.unclamped}};
            std::string text = short_number(r.probability);
            if (r.vacuous) {
                text += " (vacuous)";
            }
            emit(scalar_output(format, fields, text), bounds_common, out);
        } else if (solve_cmd->parsed()) {
            const Settings s = load_settings(solve_common);
            s.apply("m", solve_m_opt, solve_m, solve_m);
            s.apply("delta", solve_delta_opt, solve_delta, solve_delta);
            s.apply("multiplier", solve_mult_opt, solve_multiplier, solve_multiplier);
            const std::string format = resolve_format(solve_common, s, "text");
            require_delta(solve_delta);
            const double eps = bounds::solve_epsilon(solve_m, solve_delta, solve_multiplier);
            emit(scalar_output(format, {{"epsilon", eps}}, short_number(eps)), solve_common, out);
        } else if (width_cmd->parsed()) {
            const Settings s = load_settings(width_common);
            s.apply("d", width_d_opt, width_d, width_d);
            s.apply("eps", width_eps_opt, width_eps, width_eps);
            s.apply("delta", width_delta_opt, width_delta, width_delta);
            s.apply("depth", width_depth_opt, width_depth, width_depth);
            const std::string format = resolve_format(width_common, s, "text");
            require_epsilon(width_eps);
            require_delta(width_delta);
            const std::int64_t w = bounds::subspace_min_width(width_d, width_eps, width_delta, width_depth);
            emit(scalar_output(format, {{"min_width", w}}, std::to_string(w)), width_common, out);
        } else if (mc_cmd->parsed()) {
            const Settings s = load_settings(mc_common);
            s.apply("check", check_opt, mc_check, mc_check);
            s.apply("m", mc_m_opt, mc_m, mc_m);
            s.apply("n", mc_n_opt, mc_n, mc_n);
            s.apply("eps", mc_eps_opt, mc_eps, mc_eps);
            s.apply("p", mc_p_opt, mc_p, mc_p);
            s.apply("trials", mc_trials_opt, mc_trials, mc_trials);
            s.apply("depth", mc_depth_opt, mc_depth, mc_depth);
            s.apply("sampling", mc_sampling_opt, mc_sampling, mc_sampling);
            s.apply("seed", mc_common.seed_opt, mc_common.seed, mc_common.seed);
            s.apply("workers", mc_workers_opt, mc_workers, mc_workers);
            const std::string format = resolve_format(mc_common, s, "text");
            if (format == "svg") {
                throw InvalidArgument("--format svg is only available for fig1, fig2, fig3 and subspace");
            }
            const RngState rng{mc_common.seed, stream_label("mc-" + mc_check)};
            const std::size_t workers = mc_workers == 0 ? default_workers() : mc_workers;
            if (mc_check == "gates") {
                ::normlab::detail::require(mc_depth >= 1 && mc_m >= 1 && mc_n >= 1, "gates: sizes must be positive");
                NetworkConfig config{std::vector<std::size_t>(static_cast<std::size_t>(mc_depth) + 1,
                                                              static_cast<std::size_t>(mc_m)),
                                     1, mc_common.seed};
                config.widths.front() = static_cast<std::size_t>(mc_n);
                const auto freq = mc::gate_frequency(config, mc_trials, rng, InitScheme::kHeFanOut, workers);
                double lo = 1.0;
                double hi = 0.0;
                for (const auto& layer : freq.per_layer) {
                    lo = std::min(lo, layer.minCoeff());
                    hi = std::max(hi, layer.maxCoeff());
                }
                const double tol = 5.0 * freq.stderr_at_half();
                const nlohmann::json fields{{"trials", freq.trials},
                                            {"min_frequency", lo},
                                            {"max_frequency", hi},
                                            {"within_5_stderr", lo >= 0.5 - tol && hi <= 0.5 + tol}};
                emit(scalar_output(format, fields, fields.dump(2)), mc_common, out);
            } else {
                require_epsilon(mc_eps);
                mc::Options options;
                options.sampling = mc_sampling == "dense" ? mc::Sampling::kDense : mc::Sampling::kMarginal;
                options.workers = workers;
                McReport report;
                if (mc_check == "forward") {
                    report = mc::forward_layer(mc_m, mc_n, mc_eps, mc_trials, rng, options);
                } else if (mc_check == "backward") {
                    report = mc::backward_layer(mc_m, mc_n, mc_p, mc_eps, mc_trials, rng, options);
                } else {
                    report = mc::masked_inner_product(mc_m, mc_n, mc_trials, mc_eps, rng, options);
                }
                nlohmann::json fields{{"trials", report.trials},
                                      {"violation_count", report.violation_count},
                                      {"violation_rate", report.violation_rate},
                                      {"mean_ratio", report.mean_ratio},
                                      {"ratio_stderr", report.ratio_stderr},
                                      {"bound_satisfied", report.bound_satisfied}};
                fields["theoretical_bound"] =
                    report.theoretical_bound ? nlohmann::json(*report.theoretical_bound) : nlohmann::json();
                if (report.mean_error) {
                    fields["mean_error"] = *report.mean_error;
                }
                emit(scalar_output(format, fields, fields.dump(2)), mc_common, out);
            }
        } else if (fig1_cmd->parsed()) {
            const Settings s = load_settings(fig1_common);
            std::string preset = fig1_common.preset;
            s.apply("preset", fig1_common.preset_opt, fig1_common.preset, preset);
            auto config = preset == "paper" ? experiments::NormPerLayerConfig::paper()
                                            : experiments::NormPerLayerConfig::desk();
            s.apply("seed", fig1_common.seed_opt, fig1_common.seed, config.seed);
            if (auto v = s.get<std::int64_t>("depth", fig1_depth_opt, fig1_depth)) {
                ::normlab::detail::require(*v >= 1, "--depth must be positive");
                config.depth = static_cast<std::size_t>(*v);
            }
            if (auto v = s.get<std::int64_t>("samples", fig1_samples_opt, fig1_samples)) {
                ::normlab::detail::require(*v >= 1, "--samples must be positive");
                config.samples = static_cast<std::size_t>(*v);
            }
            s.apply("widths", fig1_widths_opt, fig1_widths, config.widths);
            if (auto v = s.get<std::vector<std::string>>("init", fig1_init_opt, fig1_init)) {
                config.schemes = parse_schemes(*v);
            }
            std::size_t workers = fig1_common.workers;
            s.apply("workers", fig1_common.workers_opt, fig1_common.workers, workers);
            config.workers = workers == 0 ? default_workers() : workers;
            const std::string format = resolve_format(fig1_common, s, "csv");
            io::parse_format(format);
            config.validate();

            const auto result = experiments::run_norm_per_layer(config);
            std::vector<io::Panel> panels{
                io::panel_from_table(result.activations, result.activations.metrics(), "Activation norm ratio",
                                     "layer", "||h^l|| / ||x||"),
                io::panel_from_table(result.gradients, result.gradients.metrics(), "Weight gradient norm ratio",
                                     "layer", "||dW^l||_F / (||delta|| ||x||)")};
            panels[0].reference = 1.0;
            panels[1].reference = 1.0;
            emit(table_output(format, result.combined(), panels), fig1_common, out);
        } else if (fig2_cmd->parsed()) {
            const Settings s = load_settings(fig2_common);
            std::string preset = fig2_common.preset;
            s.apply("preset", fig2_common.preset_opt, fig2_common.preset, preset);
            auto config = preset == "paper" ? experiments::BoundTightnessConfig::paper()
                                            : experiments::BoundTightnessConfig::desk();
            s.apply("seed", fig2_common.seed_opt, fig2_common.seed, config.seed);
            if (auto v = s.get<std::int64_t>("samples", fig2_samples_opt, fig2_samples)) {
                ::normlab::detail::require(*v >= 1, "--samples must be positive");
                config.samples = static_cast<std::size_t>(*v);
            }
            s.apply("widths", fig2_widths_opt, fig2_widths, config.widths);
            s.apply("delta", fig2_delta_opt, fig2_delta, config.delta);
            require_delta(config.delta);
            std::size_t workers = fig2_common.workers;
            s.apply("workers", fig2_common.workers_opt, fig2_common.workers, workers);
            config.workers = workers == 0 ? default_workers() : workers;
            const std::string format = resolve_format(fig2_common, s, "csv");
            io::parse_format(format);
            config.validate();

            const auto table = experiments::run_bound_tightness(config);
            std::vector<io::Panel> panels{
                io::panel_from_table(table, {"eps_fwd", "eps_sq_fwd", "eps_theory"}, "Forward distortion", "width",
                                     "epsilon"),
                io::panel_from_table(table, {"eps_bwd", "eps_sq_bwd", "eps_theory"}, "Backward distortion", "width",
                                     "epsilon")};
            emit(table_output(format, table, panels), fig2_common, out);
        } else if (fig3_cmd->parsed()) {
            const Settings s = load_settings(fig3_common);
            std::string preset = fig3_common.preset;
            s.apply("preset", fig3_common.preset_opt, fig3_common.preset, preset);
            auto config = preset == "paper" ? experiments::WidthVariationConfig::paper()
                                            : experiments::WidthVariationConfig::desk();
            s.apply("seed", fig3_common.seed_opt, fig3_common.seed, config.seed);
            if (auto v = s.get<std::int64_t>("depth", fig3_depth_opt, fig3_depth)) {
                ::normlab::detail::require(*v >= 1, "--depth must be positive");
                config.depth = static_cast<std::size_t>(*v);
            }
            if (auto v = s.get<std::int64_t>("samples", fig3_samples_opt, fig3_samples)) {
                ::normlab::detail::require(*v >= 1, "--samples must be positive");
                config.samples = static_cast<std::size_t>(*v);
            }
            if (auto v = s.get<std::int64_t>("n", fig3_base_opt, fig3_base)) {
                ::normlab::detail::require(*v >= 1, "--n must be positive");
                config.base_width = static_cast<std::size_t>(*v);
            }
            s.apply("v", fig3_v_opt, fig3_v, config.variations);
            std::size_t workers = fig3_common.workers;
            s.apply("workers", fig3_common.workers_opt, fig3_common.workers, workers);
            config.workers = workers == 0 ? default_workers() : workers;
            const std::string format = resolve_format(fig3_common, s, "csv");
            io::parse_format(format);
            config.validate();

            const auto table = experiments::run_width_variation(config);
            std::vector<std::string> metrics;
            for (std::size_t v : config.variations) {
                metrics.push_back("grad_ratio:v" + std::to_string(v));
            }
            std::vector<io::Panel> panels{io::panel_from_table(table, metrics, "Gradient norm ratio vs width variation",
                                                               "layer", "||dW^l||_F / (||delta|| ||x||)")};
            panels[0].reference = 1.0;
            emit(table_output(format, table, panels), fig3_common, out);
        } else if (sub_cmd->parsed()) {
            const Settings s = load_settings(sub_common);
            std::string preset = sub_common.preset;
            s.apply("preset", sub_common.preset_opt, sub_common.preset, preset);
            auto config = preset == "paper" ? experiments::SubspaceSweepConfig::paper()
                                            : experiments::SubspaceSweepConfig::desk();
            s.apply("seed", sub_common.seed_opt, sub_common.seed, config.seed);
            auto positive = [](std::int64_t v, const char* flag) {
                ::normlab::detail::require(v >= 1, std::string(flag) + " must be positive");
                return static_cast<std::size_t>(v);
            };
            if (auto v = s.get<std::int64_t>("d", sub_d_opt, sub_d)) {
                config.subspace_dim = positive(*v, "--d");
            }
            if (auto v = s.get<std::int64_t>("n", sub_n_opt, sub_n)) {
                config.input_dim = positive(*v, "--n");
            }
            s.apply("eps", sub_eps_opt, sub_eps, config.epsilon);
            s.apply("delta", sub_delta_opt, sub_delta, config.delta);
            require_epsilon(config.epsilon);
            require_delta(config.delta);
            if (auto v = s.get<std::int64_t>("depth", sub_depth_opt, sub_depth)) {
                config.depth = positive(*v, "--depth");
            }
            if (auto v = s.get<std::int64_t>("samples", sub_samples_opt, sub_samples)) {
                config.num_inputs = positive(*v, "--samples");
            }
            if (auto v = s.get<std::int64_t>("m", sub_cap_opt, sub_cap)) {
                ::normlab::detail::require(*v >= 0, "--m must be non-negative");
                config.width_cap = static_cast<std::size_t>(*v);
            }
            s.apply("widths", sub_widths_opt, sub_widths, config.extra_widths);
            std::size_t workers = sub_common.workers;
            s.apply("workers", sub_common.workers_opt, sub_common.workers, workers);
            config.workers = workers == 0 ? default_workers() : workers;
            const std::string format = resolve_format(sub_common, s, "csv");
            io::parse_format(format);
            config.validate();

            const auto table = experiments::run_subspace_sweep(config);
            std::vector<std::string> metrics;
            for (std::size_t w : config.sweep_widths()) {
                metrics.push_back("max_sq_distortion:w" + std::to_string(w));
            }
            std::vector<io::Panel> panels{io::panel_from_table(table, metrics, "Max squared-norm distortion on a subspace",
                                                               "layer", "max | ||h^l||^2 / ||x||^2 - 1 |")};
            emit(table_output(format, table, panels), sub_common, out);
        }
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NoRoot& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DegenerateInput& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const io::IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitOk;
}

} // namespace normlab::cli
