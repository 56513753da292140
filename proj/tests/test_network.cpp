#include <cmath>
#include <cstddef>
#include <vector>

#include <gtest/gtest.h>

#include "normlab/network.hpp"

namespace {

using normlab::ForwardTrace;
using normlab::InitScheme;
using normlab::Matrix;
using normlab::NetworkConfig;
using normlab::ReluNet;
using normlab::RngState;
using normlab::Vector;

double sample_variance(const Matrix& w)
{
    const double n = static_cast<double>(w.size());
    const double mean = w.sum() / n;
    return w.array().square().sum() / n - mean * mean;
}

TEST(InitVariance, Formulas)
{
    EXPECT_DOUBLE_EQ(normlab::init_variance(InitScheme::kHeFanOut, 300, 200), 2.0 / 200.0);
    EXPECT_DOUBLE_EQ(normlab::init_variance(InitScheme::kHeFanIn, 300, 200), 2.0 / 300.0);
    EXPECT_DOUBLE_EQ(normlab::init_variance(InitScheme::kGlorot, 300, 200), 2.0 / 500.0);
}

TEST(InitScheme, NamesRoundTrip)
{
    for (auto s : {InitScheme::kHeFanOut, InitScheme::kHeFanIn, InitScheme::kGlorot}) {
        EXPECT_EQ(normlab::parse_init_scheme(normlab::to_string(s)), s);
    }
    EXPECT_THROW(normlab::parse_init_scheme("xavier"), normlab::InvalidArgument);
}

class InitNetwork : public ::testing::TestWithParam<InitScheme> {};

TEST_P(InitNetwork, EmpiricalVarianceWithinFivePercent)
{
    const NetworkConfig config{{300, 200, 400}, 10, 0};
    const ReluNet net = normlab::init_network(config, GetParam(), RngState{17, 0});
    for (std::size_t l = 1; l <= net.depth(); ++l) {
        const double expected = normlab::init_variance(GetParam(), config.widths[l - 1], config.widths[l]);
        EXPECT_NEAR(sample_variance(net.weight(l)) / expected, 1.0, 0.05) << "layer " << l;
        EXPECT_TRUE(net.bias(l).isZero(0.0));
    }
    const double head_expected = normlab::init_variance(GetParam(), 400, 10);
    EXPECT_NEAR(sample_variance(net.head()) / head_expected, 1.0, 0.05);
}

INSTANTIATE_TEST_SUITE_P(AllSchemes, InitNetwork,
                         ::testing::Values(InitScheme::kHeFanOut, InitScheme::kHeFanIn, InitScheme::kGlorot));

TEST(InitNetwork, SameSeedSameWeights)
{
    const NetworkConfig config{{20, 30, 30}, 4, 5};
    const ReluNet a = normlab::init_network(config, InitScheme::kHeFanOut);
    const ReluNet b = normlab::init_network(config, InitScheme::kHeFanOut);
    for (std::size_t l = 1; l <= a.depth(); ++l) {
        EXPECT_EQ(a.weight(l), b.weight(l));
    }
    EXPECT_EQ(a.head(), b.head());
}

TEST(NetworkConfig, Validation)
{
    EXPECT_THROW((NetworkConfig{{10}, 2, 0}).validate(), normlab::InvalidArgument);
    EXPECT_THROW((NetworkConfig{{10, 0}, 2, 0}).validate(), normlab::InvalidArgument);
    EXPECT_THROW((NetworkConfig{{10, 5}, 0, 0}).validate(), normlab::InvalidArgument);
}

ReluNet hand_net()
{
    Matrix w1(2, 2);
    w1 << 1.0, -1.0, 2.0, 1.0;
    Matrix w2(1, 2);
    w2 << 1.0, 1.0;
    Matrix head(2, 1);
    head << 1.0, -1.0;
    return ReluNet({w1, w2}, head);
}

TEST(Forward, HandComputedActivations)
{
    const ReluNet net = hand_net();
    Vector x(2);
    x << 1.0, 2.0;
    const ForwardTrace t = normlab::forward(net, x);
    ASSERT_EQ(t.acts.size(), 2u);
    EXPECT_DOUBLE_EQ(t.preacts[0][0], -1.0);
    EXPECT_DOUBLE_EQ(t.preacts[0][1], 4.0);
    EXPECT_DOUBLE_EQ(t.acts[0][0], 0.0);
    EXPECT_DOUBLE_EQ(t.acts[0][1], 4.0);
    EXPECT_DOUBLE_EQ(t.acts[1][0], 4.0);
    EXPECT_DOUBLE_EQ(t.logits[0], 4.0);
    EXPECT_DOUBLE_EQ(t.logits[1], -4.0);
    EXPECT_EQ(t.activation(0), x);
}

TEST(Forward, DimensionMismatchThrows)
{
    EXPECT_THROW(normlab::forward(hand_net(), Vector::Ones(3)), normlab::InvalidArgument);
}

TEST(Forward, ZeroInputGivesZeroActivations)
{
    const ReluNet net = normlab::init_network({{8, 6, 6}, 3, 1}, InitScheme::kHeFanOut);
    const ForwardTrace t = normlab::forward(net, Vector::Zero(8));
    for (const Vector& h : t.acts) {
        EXPECT_TRUE(h.isZero(0.0));
    }
}

TEST(Forward, PositivelyHomogeneous)
{
    const ReluNet net = normlab::init_network({{12, 16, 16, 16}, 4, 2}, InitScheme::kHeFanOut);
    const Vector x = normlab::gaussian_vector(12, 1.0, RngState{8, 8});
    const ForwardTrace a = normlab::forward(net, x);
    const ForwardTrace b = normlab::forward(net, 3.5 * x);
    for (std::size_t l = 0; l < a.acts.size(); ++l) {
        EXPECT_TRUE(b.acts[l].isApprox(3.5 * a.acts[l], 1e-13));
    }
}

TEST(HeadLoss, ZeroHeadGivesLogK)
{
    for (std::size_t k : {2u, 5u, 20u}) {
        const ReluNet net({Matrix::Identity(3, 3)}, Matrix::Zero(static_cast<Eigen::Index>(k), 3));
        const ForwardTrace t = normlab::forward(net, Vector::Ones(3));
        EXPECT_NEAR(normlab::head_loss_grad(t, net, 0).loss, std::log(static_cast<double>(k)), 1e-15);
    }
}

TEST(HeadLoss, StableForLargeLogits)
{
    Matrix head(2, 1);
    head << 1e4, -1e4;
    const ReluNet net({Matrix::Ones(1, 1)}, head);
    const ForwardTrace t = normlab::forward(net, Vector::Ones(1));
    const auto good = normlab::head_loss_grad(t, net, 0);
    const auto bad = normlab::head_loss_grad(t, net, 1);
    EXPECT_NEAR(good.loss, 0.0, 1e-12);
    EXPECT_NEAR(bad.loss, 2e4, 1e-9);
    EXPECT_TRUE(std::isfinite(bad.delta[0]));
}

TEST(HeadLoss, DeltaVanishesWhenLastLayerIsInactive)
{
    Matrix w(3, 2);
    w << -1.0, 0.0, 0.0, -1.0, -1.0, -1.0;
    const ReluNet net({w}, Matrix::Ones(4, 3));
    Vector x(2);
    x << 1.0, 1.0;
    const ForwardTrace t = normlab::forward(net, x);
    const auto g = normlab::loss_and_gradients(net, t, 1);
    EXPECT_TRUE(g.delta.isZero(0.0));
    EXPECT_DOUBLE_EQ(g.dW[0].frobenius_norm(), 0.0);
}

TEST(HeadLoss, LabelOutOfRangeThrows)
{
    const ReluNet net = hand_net();
    const ForwardTrace t = normlab::forward(net, Vector::Ones(2));
    EXPECT_THROW(normlab::head_loss_grad(t, net, 2), normlab::InvalidArgument);
}

double loss_at(const std::vector<Matrix>& weights, const Matrix& head, const Vector& x, std::size_t label)
{
    const ReluNet net(weights, head);
    return normlab::head_loss_grad(normlab::forward(net, x), net, label).loss;
}

TEST(Backward, MatchesCentralFiniteDifferences)
{
    const ReluNet net = normlab::init_network({{10, 20, 20, 20}, 5, 3}, InitScheme::kHeFanOut);
    const Vector x = normlab::gaussian_vector(10, 1.0, RngState{3, 99});
    const std::size_t label = 2;
    const auto grads = normlab::loss_and_gradients(net, normlab::forward(net, x), label);

    constexpr double kStep = 1e-5;
    double worst = 0.0;
    std::vector<Matrix> weights = net.weights();
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const Matrix analytic = grads.dW[l].to_dense();
        for (Eigen::Index i = 0; i < weights[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < weights[l].cols(); ++j) {
                const double saved = weights[l](i, j);
                weights[l](i, j) = saved + kStep;
                const double up = loss_at(weights, net.head(), x, label);
                weights[l](i, j) = saved - kStep;
                const double down = loss_at(weights, net.head(), x, label);
                weights[l](i, j) = saved;
                const double fd = (up - down) / (2.0 * kStep);
                const double scale = std::max({std::abs(fd), std::abs(analytic(i, j)), 1e-9});
                worst = std::max(worst, std::abs(fd - analytic(i, j)) / scale);
            }
        }
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Backward, DeltaMatchesFiniteDifferencesInLastPreactivation)
{
    // Perturbing the last ReLU layer's bias moves a^L directly.
    const ReluNet net = normlab::init_network({{6, 9, 7}, 4, 4}, InitScheme::kHeFanOut);
    const Vector x = normlab::gaussian_vector(6, 1.0, RngState{4, 4});
    const ForwardTrace t = normlab::forward(net, x);
    const auto head = normlab::head_loss_grad(t, net, 3);
    auto loss_for = [&](const Vector& a_last) {
        const Vector h = a_last.cwiseMax(0.0);
        const Vector z = net.head() * h;
        const double zmax = z.maxCoeff();
        return zmax + std::log((z.array() - zmax).exp().sum()) - z[3];
    };
    for (Eigen::Index i = 0; i < t.preacts.back().size(); ++i) {
        Vector up = t.preacts.back();
        Vector down = up;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        EXPECT_NEAR((loss_for(up) - loss_for(down)) / 2e-6, head.delta[i], 1e-8);
    }
}

TEST(Backward, GradientFactorsIntoOuterProduct)
{
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const ReluNet net = normlab::init_network({{15, 25, 25, 25}, 6, trial}, InitScheme::kHeFanOut);
        const Vector x = normlab::gaussian_vector(15, 1.0, RngState{trial, 1});
        const ForwardTrace t = normlab::forward(net, x);
        const auto g = normlab::loss_and_gradients(net, t, trial % 6);
        for (std::size_t l = 1; l <= net.depth(); ++l) {
            const double dense = g.dW[l - 1].to_dense().norm();
            const double factored = g.da[l - 1].norm() * t.activation(l - 1).norm();
            EXPECT_NEAR(dense, factored, 1e-12 * std::max(factored, 1e-300));
            EXPECT_NEAR(g.dW[l - 1].frobenius_norm(), factored, 1e-12 * std::max(factored, 1e-300));
        }
    }
}

TEST(NormRatios, FirstLayerGradRatioOfSingleLayerNetIsOne)
{
    const ReluNet net = normlab::init_network({{7, 11}, 3, 6}, InitScheme::kHeFanOut);
    const Vector x = normlab::gaussian_vector(7, 1.0, RngState{6, 6});
    const ForwardTrace t = normlab::forward(net, x);
    const auto g = normlab::loss_and_gradients(net, t, 0);
    if (g.delta.norm() > 0.0) {
        EXPECT_NEAR(normlab::norm_ratios(t, g)[0].grad, 1.0, 1e-14);
    }
}

TEST(NormRatios, ZeroInputIsDegenerate)
{
    const ReluNet net = normlab::init_network({{4, 5}, 2, 0}, InitScheme::kHeFanOut);
    const ForwardTrace t = normlab::forward(net, Vector::Zero(4));
    const auto g = normlab::backward(net, t, Vector::Ones(5));
    EXPECT_THROW(normlab::norm_ratios(t, g), normlab::DegenerateInput);
}

} // namespace
