#include <cmath>

#include <gtest/gtest.h>

#include "normlab/experiments/monte_carlo.hpp"

namespace {

using normlab::RngState;
namespace mc = normlab::mc;

void expect_mean_one(const normlab::McReport& r)
{
    EXPECT_NEAR(r.mean_ratio, 1.0, 5.0 * r.ratio_stderr);
}

TEST(ForwardLayer, MeanRatioIsOne)
{
    const auto r = mc::forward_layer(300, 100, 0.2, 4000, RngState{1, 0});
    expect_mean_one(r);
    EXPECT_EQ(r.trials, 4000u);
    ASSERT_TRUE(r.theoretical_bound.has_value());
    EXPECT_DOUBLE_EQ(*r.theoretical_bound, normlab::bounds::single_layer_failure_prob(300, 0.2).probability);
    EXPECT_TRUE(r.bound_satisfied);
}

TEST(ForwardLayer, FixedBasisDirectionBehavesLikeRandomDirection)
{
    mc::Options fixed;
    fixed.fixed_direction = true;
    const auto a = mc::forward_layer(200, 50, 0.2, 4000, RngState{2, 0}, fixed);
    const auto b = mc::forward_layer(200, 50, 0.2, 4000, RngState{2, 1});
    expect_mean_one(a);
    const double pooled = std::sqrt(a.ratio_stderr * a.ratio_stderr + b.ratio_stderr * b.ratio_stderr);
    EXPECT_NEAR(a.mean_ratio, b.mean_ratio, 5.0 * pooled);
}

TEST(ForwardLayer, DenseAndMarginalSamplingAgree)
{
    mc::Options dense;
    dense.sampling = mc::Sampling::kDense;
    const auto d = mc::forward_layer(100, 40, 0.3, 3000, RngState{3, 0}, dense);
    const auto m = mc::forward_layer(100, 40, 0.3, 3000, RngState{3, 1});
    const double pooled = std::sqrt(d.ratio_stderr * d.ratio_stderr + m.ratio_stderr * m.ratio_stderr);
    EXPECT_NEAR(d.mean_ratio, m.mean_ratio, 5.0 * pooled);
    const double rate_se = std::sqrt(0.25 / 3000.0);
    EXPECT_NEAR(d.violation_rate, m.violation_rate, 5.0 * std::sqrt(2.0) * rate_se);
}

TEST(ForwardLayer, WorkerCountDoesNotChangeResult)
{
    mc::Options one;
    mc::Options four;
    four.workers = 4;
    const auto a = mc::forward_layer(120, 30, 0.2, 500, RngState{4, 0}, one);
    const auto b = mc::forward_layer(120, 30, 0.2, 500, RngState{4, 0}, four);
    EXPECT_EQ(a.mean_ratio, b.mean_ratio);
    EXPECT_EQ(a.violation_count, b.violation_count);
}

TEST(ForwardLayer, RejectsBadArguments)
{
    EXPECT_THROW(mc::forward_layer(0, 10, 0.1, 10, {}), normlab::InvalidArgument);
    EXPECT_THROW(mc::forward_layer(10, 10, 1.0, 10, {}), normlab::InvalidArgument);
    EXPECT_THROW(mc::forward_layer(10, 10, 0.1, 0, {}), normlab::InvalidArgument);
}

TEST(BackwardLayer, MeanRatioIsOneForAnyMaskRate)
{
    for (double p : {0.2, 0.5}) {
        const auto r = mc::backward_layer(300, 100, p, 0.2, 4000, RngState{5, 0});
        expect_mean_one(r);
        EXPECT_EQ(r.theoretical_bound.has_value(), p == 0.5);
    }
}

TEST(BackwardLayer, FullMaskIsPlainGaussianProjection)
{
    const auto r = mc::backward_layer(400, 50, 1.0, 0.2, 3000, RngState{6, 0});
    expect_mean_one(r);
    // ||R u||^2 / ||u||^2 ~ chi^2_m / m has standard deviation sqrt(2/m).
    EXPECT_NEAR(r.ratio_stderr * std::sqrt(3000.0), std::sqrt(2.0 / 400.0), 0.1 * std::sqrt(2.0 / 400.0));
}

TEST(BackwardLayer, DenseAndMarginalSamplingAgree)
{
    mc::Options dense;
    dense.sampling = mc::Sampling::kDense;
    const auto d = mc::backward_layer(100, 40, 0.5, 0.3, 3000, RngState{7, 0}, dense);
    const auto m = mc::backward_layer(100, 40, 0.5, 0.3, 3000, RngState{7, 1});
    const double pooled = std::sqrt(d.ratio_stderr * d.ratio_stderr + m.ratio_stderr * m.ratio_stderr);
    EXPECT_NEAR(d.mean_ratio, m.mean_ratio, 5.0 * pooled);
}

TEST(InnerProduct, MeanErrorIsZero)
{
    const auto r = mc::masked_inner_product(400, 100, 4000, 0.2, RngState{8, 0});
    ASSERT_TRUE(r.mean_error.has_value());
    // Var <v1, v2> <= 2 (||u1||^2 ||u2||^2 + <u1,u2>^2) / m <= 4/m, so the standard error is at most 2/sqrt(m T).
    EXPECT_NEAR(*r.mean_error, 0.0, 5.0 * 2.0 / std::sqrt(400.0 * 4000.0));
    EXPECT_TRUE(r.bound_satisfied);
}

TEST(InnerProduct, IdenticalVectorsReduceToSquaredNorm)
{
    mc::Options same;
    same.pair = mc::PairMode::kIdentical;
    const auto r = mc::masked_inner_product(300, 60, 3000, 0.2, RngState{9, 0}, same);
    expect_mean_one(r);
    EXPECT_NEAR(*r.mean_error, r.mean_ratio - 1.0, 1e-6);
}

TEST(InnerProduct, ZeroSecondVectorNeverViolates)
{
    mc::Options zero;
    zero.pair = mc::PairMode::kSecondZero;
    const auto r = mc::masked_inner_product(50, 20, 500, 0.1, RngState{10, 0}, zero);
    EXPECT_EQ(r.violation_count, 0u);
    EXPECT_EQ(*r.mean_error, 0.0);
}

TEST(InnerProduct, DenseAndMarginalSamplingAgree)
{
    mc::Options dense;
    dense.sampling = mc::Sampling::kDense;
    const auto d = mc::masked_inner_product(100, 30, 3000, 0.3, RngState{11, 0}, dense);
    const auto m = mc::masked_inner_product(100, 30, 3000, 0.3, RngState{11, 1});
    const double se = 2.0 / std::sqrt(100.0 * 3000.0);
    EXPECT_NEAR(*d.mean_error, *m.mean_error, 5.0 * std::sqrt(2.0) * se);
    const double pooled = std::sqrt(d.ratio_stderr * d.ratio_stderr + m.ratio_stderr * m.ratio_stderr);
    EXPECT_NEAR(d.mean_ratio, m.mean_ratio, 5.0 * pooled);
}

TEST(GateFrequency, UnitsFireHalfTheTime)
{
    const normlab::NetworkConfig config{{30, 40, 40}, 3, 0};
    const auto f = mc::gate_frequency(config, 2000, RngState{12, 0});
    ASSERT_EQ(f.per_layer.size(), 2u);
    const double tol = 5.0 * f.stderr_at_half();
    for (const auto& layer : f.per_layer) {
        EXPECT_EQ(layer.size(), 40);
        EXPECT_GE(layer.minCoeff(), 0.5 - tol);
        EXPECT_LE(layer.maxCoeff(), 0.5 + tol);
    }
}

TEST(GateFrequency, ZeroInputNeverFires)
{
    const normlab::NetworkConfig config{{5, 6}, 2, 0};
    const auto f = mc::gate_frequency(config, normlab::Vector::Zero(5), 50, RngState{13, 0});
    EXPECT_TRUE(f.per_layer[0].isZero(0.0));
}

TEST(GateFrequency, RejectsInputOfWrongSize)
{
    const normlab::NetworkConfig config{{5, 6}, 2, 0};
    EXPECT_THROW(mc::gate_frequency(config, normlab::Vector::Zero(4), 10, RngState{}), normlab::InvalidArgument);
}

} // namespace
