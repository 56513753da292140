#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "normlab/cli.hpp"

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args)
{
    args.insert(args.begin(), "normlab");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    CliRun r;
    r.code = normlab::cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

TEST(Cli, SingleLayerBound)
{
    const CliRun r = run({"bounds", "--kind", "single", "--m", "4000", "--eps", "0.1"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "0.0571957\n");
}

TEST(Cli, VacuousBoundIsFlagged)
{
    const CliRun r = run({"bounds", "--kind", "gradient", "--n", "1000", "--depth", "20", "--samples", "1000", "--eps",
                       "0.3"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "1 (vacuous)\n");
    const CliRun j = run({"bounds", "--kind", "gradient", "--n", "1000", "--depth", "20", "--samples", "1000", "--eps",
                       "0.3", "--format", "json"});
    const auto doc = nlohmann::json::parse(j.out);
    EXPECT_TRUE(doc.at("vacuous").get<bool>());
    EXPECT_NEAR(doc.at("unclamped").get<double>(), 56.2834973987, 1e-8);
}

TEST(Cli, ForwardBoundCsv)
{
    const CliRun r = run({"bounds", "--kind", "forward", "--n", "4000", "--depth", "10", "--samples", "2000", "--eps",
                       "0.2", "--format", "csv"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out.rfind("probability,unclamped,vacuous\n0.0534984", 0), 0u);
}

TEST(Cli, SolveEpsilonAndMinWidth)
{
    EXPECT_EQ(run({"solve-eps", "--m", "4000", "--delta", "0.05"}).out, "0.101924\n");
    EXPECT_EQ(run({"min-width", "--d", "10", "--eps", "0.3", "--delta", "0.05", "--depth", "1"}).out, "51601\n");
}

TEST(Cli, ValidationErrorsExitWithOne)
{
    EXPECT_EQ(run({"bounds", "--kind", "single", "--m", "100", "--eps", "1.5"}).code, 1);
    EXPECT_EQ(run({"bounds", "--kind", "nope"}).code, 1);
    EXPECT_EQ(run({"solve-eps", "--m", "10", "--delta", "0.05"}).code, 1);
    EXPECT_EQ(run({"min-width", "--d", "0", "--eps", "0.3"}).code, 1);
    EXPECT_EQ(run({"bounds", "--m", "100", "--eps", "0.1", "--format", "svg"}).code, 1);
    EXPECT_EQ(run({"fig1", "--preset", "huge"}).code, 1);
    EXPECT_EQ(run({"fig1", "--init", "xavier", "--samples", "1"}).code, 1);
    EXPECT_EQ(run({}).code, 1);
    const CliRun r = run({"frobnicate"});
    EXPECT_EQ(r.code, 1);
    EXPECT_FALSE(r.err.empty());
}

TEST(Cli, HelpExitsZero)
{
    const CliRun r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("fig1"), std::string::npos);
}

TEST(Cli, MonteCarloJson)
{
    const CliRun r = run({"mc", "--check", "forward", "--m", "200", "--n", "50", "--trials", "300", "--eps", "0.3",
                       "--format", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = nlohmann::json::parse(r.out);
    EXPECT_EQ(doc.at("trials").get<int>(), 300);
    EXPECT_TRUE(doc.contains("theoretical_bound"));
    const CliRun gates = run({"mc", "--check", "gates", "--m", "20", "--n", "10", "--depth", "2", "--trials", "200",
                           "--format", "json"});
    ASSERT_EQ(gates.code, 0) << gates.err;
    EXPECT_TRUE(nlohmann::json::parse(gates.out).contains("min_frequency"));
}

std::vector<std::string> tiny_fig1(const std::string& format)
{
    return {"fig1", "--depth", "3", "--samples", "5", "--widths", "20", "30", "--format", format, "--workers", "2"};
}

TEST(Cli, FigureRunsAreByteIdentical)
{
    const CliRun a = run(tiny_fig1("csv"));
    const CliRun b = run(tiny_fig1("csv"));
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(a.out.rfind("# config: ", 0), 0u);
    const auto table = normlab::io::parse_csv(a.out);
    EXPECT_EQ(table.rows.size(), 2u * 2u * 2u * 3u);

    const CliRun svg = run(tiny_fig1("svg"));
    ASSERT_EQ(svg.code, 0) << svg.err;
    EXPECT_EQ(svg.out.rfind("<svg", 0), 0u);
}

TEST(Cli, ConfigFileValuesAreOverriddenByFlags)
{
    const auto path = std::filesystem::temp_directory_path() / "normlab_cli_config.json";
    {
        std::ofstream f(path);
        f << R"({"depth": 2, "samples": 4, "widths": [16], "init": ["he"], "seed": 5})";
    }
    const CliRun from_file = run({"fig1", "--config", path.string()});
    ASSERT_EQ(from_file.code, 0) << from_file.err;
    const auto t1 = normlab::io::parse_csv(from_file.out);
    EXPECT_EQ(t1.config.at("depth"), 2);
    EXPECT_EQ(t1.config.at("seed"), 5);

    const CliRun overridden = run({"fig1", "--config", path.string(), "--depth", "3"});
    const auto t2 = normlab::io::parse_csv(overridden.out);
    EXPECT_EQ(t2.config.at("depth"), 3);
    EXPECT_EQ(t2.config.at("samples"), 4);
    std::filesystem::remove(path);

    EXPECT_EQ(run({"fig1", "--config", "/nonexistent/config.json"}).code, 2);
}

TEST(Cli, OutputFileAndNoClobber)
{
    const auto path = std::filesystem::temp_directory_path() / "normlab_cli_out.json";
    std::filesystem::remove(path);
    const std::vector<std::string> args{"fig2", "--samples", "3", "--widths", "1000", "--format", "json", "--out",
                                        path.string(), "--no-clobber"};
    ASSERT_EQ(run(args).code, 0);
    EXPECT_TRUE(std::filesystem::exists(path));
    const auto table = normlab::io::parse_json(normlab::io::read_text(path));
    EXPECT_EQ(table.config.at("experiment"), "bound_tightness");
    EXPECT_EQ(run(args).code, 2);
    std::filesystem::remove(path);
}

TEST(Cli, Fig3AndSubspaceSmallRuns)
{
    const CliRun f3 = run({"fig3", "--depth", "3", "--samples", "4", "--n", "40", "--v", "1", "10"});
    ASSERT_EQ(f3.code, 0) << f3.err;
    EXPECT_EQ(normlab::io::parse_csv(f3.out).series("grad_ratio_pooled").size(), 2u);
    const CliRun sub = run({"subspace", "--d", "2", "--n", "20", "--eps", "0.5", "--depth", "2", "--samples", "50",
                         "--m", "100", "--widths", "40", "--format", "svg"});
    ASSERT_EQ(sub.code, 0) << sub.err;
    EXPECT_EQ(sub.out.rfind("<svg", 0), 0u);
}

} // namespace
