#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "gradient_check.hpp"
#include "tcwv/mlp.hpp"
#include "tcwv/rng.hpp"

namespace {

using tcwv::Activation;

tcwv::MlpParams build_net(const std::vector<tcwv::LayerSpec>& specs,
                          const std::vector<std::vector<double>>& weights,
                          const std::vector<std::vector<double>>& biases) {
    tcwv::MlpParams params;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        tcwv::Layer layer;
        layer.spec = specs[k];
        layer.weights = weights[k];
        layer.biases = biases[k];
        params.layers.push_back(layer);
    }
    return params;
}

TEST(Relu, ClampsAndPasses) {
    EXPECT_EQ(tcwv::relu(-1.0), 0.0);
    EXPECT_EQ(tcwv::relu(0.0), 0.0);
    EXPECT_EQ(tcwv::relu(2.5), 2.5);
}

TEST(Relu, DerivativeIsStepWithZeroAtOrigin) {
    EXPECT_EQ(tcwv::relu_derivative(3.0), 1.0);
    EXPECT_EQ(tcwv::relu_derivative(-0.5), 0.0);
    EXPECT_EQ(tcwv::relu_derivative(0.0), 0.0);
}

TEST(Forward, ZeroNetworkPredictsZero) {
    const auto params = build_net({{9, 4, Activation::relu}, {4, 1, Activation::linear}},
                                  {std::vector<double>(36, 0.0), std::vector<double>(4, 0.0)},
                                  {std::vector<double>(4, 0.0), {0.0}});
    const std::vector<double> x = {1, -2, 3, -4, 5, -6, 7, -8, 9};
    EXPECT_EQ(tcwv::forward(params, x).prediction, 0.0);
}

TEST(Forward, SingleAffineLayer) {
    const auto params = build_net({{1, 1, Activation::linear}}, {{2.0}}, {{1.0}});
    const std::vector<double> x = {3.0};
    EXPECT_EQ(tcwv::forward(params, x).prediction, 7.0);
}

TEST(Forward, TwoLayerHandComposition) {
    const auto params = build_net({{1, 1, Activation::relu}, {1, 1, Activation::linear}},
                                  {{1.0}, {3.0}}, {{-2.0}, {0.0}});
    const std::vector<double> x = {5.0};
    const tcwv::ForwardResult result = tcwv::forward(params, x);
    EXPECT_EQ(result.prediction, 9.0);
    EXPECT_EQ(result.trace.pre_activations[0][0], 3.0);
    EXPECT_EQ(result.trace.activations[0][0], 3.0);
    EXPECT_EQ(result.trace.activations[1][0], 9.0);
}

TEST(Forward, TraceActivationsMatchPreActivations) {
    const auto params = tcwv::make_mlp({{9, 8, Activation::relu}, {8, 1, Activation::linear}}, 21);
    tcwv::Rng rng(22);
    std::vector<double> x(9);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    const tcwv::ForwardResult result = tcwv::forward(params, x);
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        for (std::size_t j = 0; j < result.trace.activations[k].size(); ++j) {
            EXPECT_EQ(result.trace.activations[k][j],
                      tcwv::activate(params.layers[k].spec.activation, result.trace.pre_activations[k][j]));
        }
    }
}

TEST(Forward, RejectsWrongInputSize) {
    const auto params = tcwv::make_mlp({{9, 4, Activation::relu}, {4, 1, Activation::linear}}, 1);
    const std::vector<double> x = {1.0, 2.0};
    EXPECT_THROW(tcwv::forward(params, x), tcwv::schema_error);
    EXPECT_THROW(tcwv::forward_value(params, x), tcwv::schema_error);
}

TEST(Forward, ValueVariantIsBitwiseIdentical) {
    const auto params = tcwv::make_mlp({{9, 64, Activation::relu}, {64, 32, Activation::relu},
                                        {32, 1, Activation::linear}}, 77);
    tcwv::Rng rng(78);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> x(9);
        for (double& v : x) v = rng.uniform(-3.0, 3.0);
        EXPECT_EQ(tcwv::forward(params, x).prediction, tcwv::forward_value(params, x));
    }
}

TEST(Forward, RepeatedCallsAreBitwiseIdentical) {
    const auto params = tcwv::make_mlp({{9, 16, Activation::relu}, {16, 1, Activation::linear}}, 5);
    const std::vector<double> x = {0.3, -1.2, 0.8, 2.1, -0.4, 1.6, -2.2, 0.05, -0.9};
    const double first = tcwv::forward(params, x).prediction;
    for (int i = 0; i < 10; ++i) EXPECT_EQ(tcwv::forward(params, x).prediction, first);
}

TEST(Forward, ZeroInputZeroBiasGivesZeroEverywhere) {
    auto params = tcwv::make_mlp({{9, 8, Activation::relu}, {8, 1, Activation::linear}}, 9);
    for (auto& layer : params.layers) {
        for (double& b : layer.biases) b = 0.0;
    }
    const std::vector<double> x(9, 0.0);
    const tcwv::ForwardResult result = tcwv::forward(params, x);
    for (const auto& layer_act : result.trace.activations) {
        for (double a : layer_act) EXPECT_EQ(a, 0.0);
    }
}

TEST(Forward, ReluLayerIsPositivelyHomogeneous) {
    auto params = tcwv::make_mlp({{9, 1, Activation::relu}}, 13);
    params.layers[0].biases[0] = 0.0;
    tcwv::Rng rng(14);
    std::vector<double> x(9);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const double base = tcwv::forward_value(params, x);
    // Power-of-two scales commute with rounding, so equality is exact.
    for (double c : {0.5, 2.0, 4.0}) {
        std::vector<double> scaled(9);
        for (std::size_t i = 0; i < 9; ++i) scaled[i] = c * x[i];
        EXPECT_EQ(tcwv::forward_value(params, scaled), c * base);
    }
    std::vector<double> tripled(9);
    for (std::size_t i = 0; i < 9; ++i) tripled[i] = 3.0 * x[i];
    EXPECT_NEAR(tcwv::forward_value(params, tripled), 3.0 * base, 1e-12 * std::abs(base) + 1e-15);
}

TEST(MakeMlp, HeUniformBoundsAndZeroBiases) {
    const auto params = tcwv::make_mlp({{9, 64, Activation::relu}, {64, 32, Activation::relu},
                                        {32, 1, Activation::linear}}, 123);
    for (const tcwv::Layer& layer : params.layers) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.spec.input_dim));
        for (double w : layer.weights) {
            EXPECT_GE(w, -bound);
            EXPECT_LT(w, bound);
        }
        for (double b : layer.biases) EXPECT_EQ(b, 0.0);
    }
    EXPECT_EQ(params.parameter_count(), 9u * 64 + 64 + 64 * 32 + 32 + 32 + 1);
}

TEST(MakeMlp, SeedReproducesNetworkExactly) {
    const auto a = tcwv::make_mlp({{9, 16, Activation::relu}, {16, 1, Activation::linear}}, 2024);
    const auto b = tcwv::make_mlp({{9, 16, Activation::relu}, {16, 1, Activation::linear}}, 2024);
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        EXPECT_EQ(a.layers[k].weights, b.layers[k].weights);
        EXPECT_EQ(a.layers[k].biases, b.layers[k].biases);
    }
}

TEST(MakeMlp, RejectsBrokenChains) {
    EXPECT_THROW(tcwv::make_mlp({}, 0), tcwv::schema_error);
    EXPECT_THROW(tcwv::make_mlp({{9, 0, Activation::relu}}, 0), tcwv::schema_error);
    EXPECT_THROW(tcwv::make_mlp({{9, 4, Activation::relu}, {5, 1, Activation::linear}}, 0),
                 tcwv::schema_error);
}

TEST(BatchLoss, HandValues) {
    const std::vector<double> a = {1.0, 2.0, 3.0};
    EXPECT_EQ(tcwv::batch_loss(a, a), 0.0);
    const std::vector<double> p1 = {1.0}, t1 = {3.0};
    EXPECT_EQ(tcwv::batch_loss(p1, t1), 4.0);
    const std::vector<double> p2 = {0.0, 2.0}, t2 = {1.0, 2.0};
    EXPECT_EQ(tcwv::batch_loss(p2, t2), 0.5);
}

TEST(BatchLoss, NonNegativeAndZeroOnlyOnPerfect) {
    tcwv::Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p(5), t(5);
        for (int i = 0; i < 5; ++i) {
            p[i] = rng.uniform(-10.0, 10.0);
            t[i] = rng.uniform(-10.0, 10.0);
        }
        const double loss = tcwv::batch_loss(p, t);
        EXPECT_GE(loss, 0.0);
        if (loss == 0.0) EXPECT_EQ(p, t);
    }
}

TEST(BatchLoss, RejectsEmptyAndMismatched) {
    const std::vector<double> empty;
    const std::vector<double> one = {1.0};
    EXPECT_THROW(tcwv::batch_loss(empty, empty), tcwv::numeric_error);
    EXPECT_THROW(tcwv::batch_loss(one, empty), tcwv::schema_error);
}

TEST(OutputGradient, HandValues) {
    EXPECT_EQ(tcwv::output_gradient(4.0, 4.0, 1), 0.0);
    EXPECT_EQ(tcwv::output_gradient(5.0, 3.0, 1), -4.0);
    EXPECT_EQ(tcwv::output_gradient(5.0, 3.0, 2), -2.0);
}

TEST(Backward, ZeroUpstreamGradientZeroesEverything) {
    const auto params = tcwv::make_mlp({{9, 8, Activation::relu}, {8, 1, Activation::linear}}, 41);
    tcwv::Rng rng(42);
    std::vector<double> x(9);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const tcwv::ForwardResult fwd = tcwv::forward(params, x);
    const tcwv::GradientSet grads = tcwv::backward(params, fwd.trace, 0.0);
    for (const auto& layer : grads.layers) {
        for (double g : layer.weights) EXPECT_EQ(g, 0.0);
        for (double g : layer.biases) EXPECT_EQ(g, 0.0);
    }
}

TEST(Backward, SingleAffineLayerHandGradients) {
    const auto params = build_net({{1, 1, Activation::linear}}, {{2.0}}, {{1.0}});
    const std::vector<double> x = {3.0};
    const tcwv::ForwardResult fwd = tcwv::forward(params, x);
    const tcwv::GradientSet grads = tcwv::backward(params, fwd.trace, 1.0);
    EXPECT_EQ(grads.layers[0].weights[0], 3.0);
    EXPECT_EQ(grads.layers[0].biases[0], 1.0);
}

TEST(Backward, RejectsMismatchedTrace) {
    const auto params = tcwv::make_mlp({{9, 8, Activation::relu}, {8, 1, Activation::linear}}, 51);
    const auto other = tcwv::make_mlp({{9, 4, Activation::relu}, {4, 1, Activation::linear}}, 52);
    std::vector<double> x(9, 0.5);
    const tcwv::ForwardResult fwd = tcwv::forward(other, x);
    EXPECT_THROW(tcwv::backward(params, fwd.trace, 1.0), tcwv::schema_error);
}

TEST(Batch, SingletonMatchesSingleBackward) {
    const auto params = tcwv::make_mlp({{9, 8, Activation::relu}, {8, 1, Activation::linear}}, 61);
    tcwv::Rng rng(62);
    std::vector<double> x(9);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const double target = 0.7;
    const tcwv::Sample sample{x, target};
    const tcwv::BatchGradients batch = tcwv::accumulate_batch_gradients(params, std::span(&sample, 1));
    const tcwv::ForwardResult fwd = tcwv::forward(params, x);
    const tcwv::GradientSet single =
        tcwv::backward(params, fwd.trace, tcwv::output_gradient(target, fwd.prediction, 1));
    for (std::size_t k = 0; k < single.layers.size(); ++k) {
        EXPECT_EQ(batch.grads.layers[k].weights, single.layers[k].weights);
        EXPECT_EQ(batch.grads.layers[k].biases, single.layers[k].biases);
    }
    const double d = fwd.prediction - target;
    EXPECT_EQ(batch.loss, d * d);
}

TEST(Batch, PerfectPredictionsGiveZeroGradientsAndLoss) {
    const auto params = build_net({{1, 1, Activation::linear}}, {{2.0}}, {{0.0}});
    const std::vector<double> x1 = {1.0}, x2 = {-3.0};
    const std::vector<tcwv::Sample> samples = {{x1, 2.0}, {x2, -6.0}};
    const tcwv::BatchGradients batch = tcwv::accumulate_batch_gradients(params, samples);
    EXPECT_EQ(batch.loss, 0.0);
    EXPECT_EQ(batch.grads.layers[0].weights[0], 0.0);
    EXPECT_EQ(batch.grads.layers[0].biases[0], 0.0);
}

TEST(Batch, TwoSampleHandSum) {
    // Network y = 2x. Samples (x=1, y_n=3) and (x=2, y_n=1).
    // Residuals: y(1)=2 vs 3 and y(2)=4 vs 1.
    // Per-sample dJ/dY with B=2: -2(3-2)/2 = -1 and -2(1-4)/2 = 3.
    // Weight grads: -1*1 + 3*2 = 5; bias grads: -1 + 3 = 2.
    // Loss: ((3-2)^2 + (1-4)^2)/2 = 5.
    const auto params = build_net({{1, 1, Activation::linear}}, {{2.0}}, {{0.0}});
    const std::vector<double> x1 = {1.0}, x2 = {2.0};
    const std::vector<tcwv::Sample> samples = {{x1, 3.0}, {x2, 1.0}};
    const tcwv::BatchGradients batch = tcwv::accumulate_batch_gradients(params, samples);
    EXPECT_EQ(batch.grads.layers[0].weights[0], 5.0);
    EXPECT_EQ(batch.grads.layers[0].biases[0], 2.0);
    EXPECT_EQ(batch.loss, 5.0);
}

TEST(Batch, RejectsEmpty) {
    const auto params = build_net({{1, 1, Activation::linear}}, {{2.0}}, {{0.0}});
    EXPECT_THROW(tcwv::accumulate_batch_gradients(params, {}), tcwv::numeric_error);
}

TEST(Gradients, MatchCentralDifferencesOnFullStack) {
    const auto specs = std::vector<tcwv::LayerSpec>{
        {9, 64, Activation::relu}, {64, 32, Activation::relu}, {32, 1, Activation::linear}};
    for (std::uint64_t seed : {101ull, 202ull, 303ull}) {
        const auto params = tcwv::make_mlp(specs, seed);
        tcwv::Rng rng(seed + 1000);
        std::vector<double> x(9);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        const double target = rng.uniform(-3.0, 3.0);
        const auto check = tcwv_test::check_gradients(params, x, target, 1e-6, 1e-8);
        EXPECT_EQ(check.checked, params.parameter_count());
        EXPECT_LT(check.worst_relative, 1e-5) << "seed " << seed;
    }
}

}  // namespace
