#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "tcwv/eval.hpp"
#include "tcwv/train.hpp"

namespace {

tcwv::SampleTable small_synth(std::size_t n, double noise, std::uint64_t seed) {
    tcwv::SynthConfig config;
    config.n_samples = n;
    config.noise_std = noise;
    config.seed = seed;
    return tcwv::synth_generate(config);
}

double validation_r2(const tcwv::TrainResult& result, const tcwv::RunConfig& config,
                     const tcwv::SampleTable& table) {
    const auto [train_part, test_part] = tcwv::shuffle_split(table, config.split);
    const tcwv::SampleTable scaled = tcwv::apply_stats(test_part, result.stats);
    std::vector<double> predictions(test_part.rows());
    for (std::size_t r = 0; r < test_part.rows(); ++r) {
        predictions[r] = tcwv::forward_value(result.params, scaled.row(r));
    }
    const tcwv::Metrics m = tcwv::compute_metrics(predictions, test_part.targets);
    return m.r2.value();
}

TEST(Train, OneEpochOneBigBatchTakesExactlyOneStep) {
    const tcwv::SampleTable table = small_synth(400, 0.0, 1);
    tcwv::RunConfig config;
    config.epochs = 1;
    config.batch_size = 1000;
    config.split.train_fraction = 0.5;
    config.split.test_fraction = 0.25;
    config.split.seed = 1;
    const tcwv::TrainResult result = tcwv::train(config, table);
    EXPECT_EQ(result.history.epochs.size(), 1u);
    EXPECT_EQ(result.adam_state.t, 1);
}

TEST(Train, ShortFinalBatchIsProcessed) {
    const tcwv::SampleTable table = small_synth(20, 0.0, 2);
    tcwv::RunConfig config;
    config.epochs = 3;
    config.batch_size = 4;
    config.split.train_fraction = 0.5;  // 10 training rows -> 3 batches per epoch
    config.split.test_fraction = 0.0;
    config.split.seed = 2;
    const tcwv::TrainResult result = tcwv::train(config, table);
    EXPECT_EQ(result.adam_state.t, 9);
}

TEST(Train, RerunsAreBitwiseIdentical) {
    const tcwv::SampleTable table = small_synth(2000, 0.5, 3);
    tcwv::RunConfig config;
    config.epochs = 5;
    config.seed = 9;
    config.split.train_fraction = 0.25;
    config.split.test_fraction = 0.1;
    config.split.seed = 9;
    const tcwv::TrainResult a = tcwv::train(config, table);
    const tcwv::TrainResult b = tcwv::train(config, table);
    for (std::size_t k = 0; k < a.params.layers.size(); ++k) {
        EXPECT_EQ(a.params.layers[k].weights, b.params.layers[k].weights);
        EXPECT_EQ(a.params.layers[k].biases, b.params.layers[k].biases);
    }
    ASSERT_EQ(a.history.epochs.size(), b.history.epochs.size());
    for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
        EXPECT_EQ(a.history.epochs[e].train_loss, b.history.epochs[e].train_loss);
        EXPECT_EQ(a.history.epochs[e].val_loss, b.history.epochs[e].val_loss);
    }
}

TEST(Train, SeedChangesTheRun) {
    const tcwv::SampleTable table = small_synth(1000, 0.5, 4);
    tcwv::RunConfig config;
    config.epochs = 2;
    config.split.train_fraction = 0.3;
    config.split.seed = 4;
    config.seed = 1;
    const tcwv::TrainResult a = tcwv::train(config, table);
    config.seed = 2;
    const tcwv::TrainResult b = tcwv::train(config, table);
    EXPECT_NE(a.params.layers[0].weights, b.params.layers[0].weights);
}

TEST(Train, InsufficientTrainingRowsIsError) {
    const tcwv::SampleTable table = small_synth(10, 0.0, 5);
    tcwv::RunConfig config;  // floor(10 * 0.01) = 0 -> clamped to 1 row < 2
    EXPECT_THROW(tcwv::train(config, table), tcwv::numeric_error);
}

TEST(Train, EmptyTestPartitionYieldsNanValidationColumns) {
    const tcwv::SampleTable table = small_synth(200, 0.0, 6);
    tcwv::RunConfig config;
    config.epochs = 2;
    config.split.train_fraction = 1.0;
    config.split.test_fraction = 0.0;
    config.split.seed = 6;
    const tcwv::TrainResult result = tcwv::train(config, table);
    for (const tcwv::EpochRecord& rec : result.history.epochs) {
        EXPECT_TRUE(std::isfinite(rec.train_loss));
        EXPECT_TRUE(std::isnan(rec.val_loss));
        EXPECT_TRUE(std::isnan(rec.val_mae));
    }
}

TEST(Train, LossFallsOnCleanSyntheticData) {
    const tcwv::SampleTable table = small_synth(4000, 0.0, 7);
    tcwv::RunConfig config;
    config.epochs = 30;
    config.seed = 7;
    config.split.train_fraction = 0.25;
    config.split.test_fraction = 0.1;
    config.split.seed = 7;
    const tcwv::TrainResult result = tcwv::train(config, table);
    const double first = result.history.epochs.front().train_loss;
    const double last = result.history.epochs.back().train_loss;
    EXPECT_LT(last, first);
    EXPECT_LT(result.history.epochs.back().val_loss, result.history.epochs.front().val_loss);
}

TEST(Train, SgdOptimizerRuns) {
    const tcwv::SampleTable table = small_synth(500, 0.0, 8);
    tcwv::RunConfig config;
    config.epochs = 10;
    config.optimizer.kind = tcwv::OptimizerKind::sgd;
    config.optimizer.sgd_learning_rate = 0.01;
    config.split.train_fraction = 0.5;
    config.split.test_fraction = 0.0;
    config.split.seed = 8;
    const tcwv::TrainResult result = tcwv::train(config, table);
    EXPECT_TRUE(tcwv::all_finite(result.params));
    EXPECT_LT(result.history.epochs.back().train_loss, result.history.epochs.front().train_loss);
    EXPECT_EQ(result.adam_state.t, 0);  // adam never stepped
}

TEST(Train, OutputReluFlagSurvivesIntoParams) {
    const tcwv::SampleTable table = small_synth(500, 0.0, 9);
    tcwv::RunConfig config;
    config.epochs = 2;
    config.output_relu = true;
    config.split.train_fraction = 0.5;
    config.split.seed = 9;
    const tcwv::TrainResult result = tcwv::train(config, table);
    EXPECT_EQ(result.params.layers.back().spec.activation, tcwv::Activation::relu);
    EXPECT_TRUE(tcwv::all_finite(result.params));
}

TEST(Train, RejectsInvalidConfigs) {
    const tcwv::SampleTable table = small_synth(100, 0.0, 10);
    tcwv::RunConfig config;
    config.epochs = 0;
    EXPECT_THROW(tcwv::train(config, table), tcwv::schema_error);
    config = {};
    config.batch_size = 0;
    EXPECT_THROW(tcwv::train(config, table), tcwv::schema_error);
    config = {};
    config.architecture[0].input_dim = 4;
    EXPECT_THROW(tcwv::train(config, table), tcwv::schema_error);
    config = {};
    config.architecture.back().output_dim = 2;
    EXPECT_THROW(tcwv::train(config, table), tcwv::schema_error);
}

TEST(Train, HistoryMetricsMatchIndependentRecomputation) {
    const tcwv::SampleTable table = small_synth(600, 0.3, 11);
    tcwv::RunConfig config;
    config.epochs = 4;
    config.seed = 11;
    config.split.train_fraction = 0.4;
    config.split.test_fraction = 0.2;
    config.split.seed = 11;
    const tcwv::TrainResult result = tcwv::train(config, table);
    const auto [train_part, test_part] = tcwv::shuffle_split(table, config.split);
    const tcwv::SampleTable scaled = tcwv::apply_stats(train_part, result.stats);
    double sq = 0.0, abs_sum = 0.0;
    for (std::size_t r = 0; r < train_part.rows(); ++r) {
        const double pred = tcwv::forward_value(result.params, scaled.row(r));
        const double d = pred - train_part.targets[r];
        sq += d * d;
        abs_sum += std::abs(d);
    }
    const double n = static_cast<double>(train_part.rows());
    EXPECT_EQ(result.history.epochs.back().train_loss, sq / n);
    EXPECT_EQ(result.history.epochs.back().train_mae, abs_sum / n);
}

// The reference experiment: 50k synthetic samples with unit noise, default
// hyperparameters and split. The validation partition holds 250 rows.
TEST(Train, ReferenceSyntheticExperimentConverges) {
    const tcwv::SampleTable table = small_synth(50000, 1.0, 2004);
    tcwv::RunConfig config;
    config.seed = 2004;
    config.split.seed = 2004;
    const tcwv::TrainResult result = tcwv::train(config, table);
    ASSERT_EQ(result.history.epochs.size(), 140u);

    const double first_val = result.history.epochs.front().val_loss;
    const double last_val = result.history.epochs.back().val_loss;
    EXPECT_LT(last_val, first_val);
    EXPECT_LT(last_val, 0.1 * first_val);

    const double r2 = validation_r2(result, config, table);
    EXPECT_GE(r2, 0.90);
}

}  // namespace
