#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tcwv/data.hpp"
#include "tcwv/errors.hpp"
#include "tcwv/mlp.hpp"
#include "tcwv/optim.hpp"

namespace tcwv {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    AdamConfig adam;
    double sgd_learning_rate = 0.01;

    void validate() const {
        if (kind == OptimizerKind::adam) {
            adam.validate();
        } else if (!(sgd_learning_rate > 0.0)) {
            throw schema_error("sgd learning_rate must be positive");
        }
    }
};

inline std::vector<LayerSpec> default_architecture() {
    return {
        {kFeatureCount, 64, Activation::relu},
        {64, 32, Activation::relu},
        {32, 1, Activation::linear},
    };
}

struct RunConfig {
    std::vector<LayerSpec> architecture = default_architecture();
    std::size_t epochs = 140;
    std::size_t batch_size = 64;
    OptimizerConfig optimizer;
    SplitSpec split;
    std::uint64_t seed = 0;
    bool output_relu = false;
    MissingPolicy missing_policy = MissingPolicy::drop;

    std::string input_path;
    std::string model_output;
    std::string history_output;
    std::string metrics_output;
    std::string state_output;

    void validate() const {
        if (epochs == 0) throw schema_error("epochs must be at least 1");
        if (batch_size == 0) throw schema_error("batch_size must be at least 1");
        std::vector<LayerSpec> specs = architecture;
        if (output_relu && !specs.empty()) specs.back().activation = Activation::relu;
        validate_specs(specs);
        if (specs.front().input_dim != kFeatureCount) {
            throw schema_error("first layer input dim must be " + std::to_string(kFeatureCount));
        }
        if (specs.back().output_dim != 1) throw schema_error("last layer output dim must be 1");
        optimizer.validate();
        split.validate();
    }

    std::vector<LayerSpec> effective_architecture() const {
        std::vector<LayerSpec> specs = architecture;
        if (output_relu) specs.back().activation = Activation::relu;
        return specs;
    }
};

struct EpochRecord {
    double train_loss = 0.0;
    double train_mae = 0.0;
    double val_loss = 0.0;
    double val_mae = 0.0;
};

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
};

struct TrainResult {
    MlpParams params;
    NormStats stats;
    TrainingHistory history;
    AdamState adam_state;
};

namespace detail {

struct TargetScale {
    double mean = 0.0;
    double std_dev = 1.0;
};

// Rescales the final linear layer so the network maps standardized features
// straight to physical targets: w -> s*w, b -> s*b + m. A no-op scale
// (m=0, s=1) leaves every coefficient bitwise unchanged.
inline MlpParams fold_target_scale(const MlpParams& params, const TargetScale& scale) {
    MlpParams folded = params;
    Layer& last = folded.layers.back();
    for (double& w : last.weights) w = scale.std_dev * w;
    for (double& b : last.biases) b = scale.std_dev * b + scale.mean;
    return folded;
}

struct PartitionEval {
    double loss = std::numeric_limits<double>::quiet_NaN();
    double mae = std::numeric_limits<double>::quiet_NaN();
};

inline PartitionEval evaluate_partition(const MlpParams& physical_params, const SampleTable& scaled_features,
                                        const SampleTable& raw) {
    PartitionEval eval;
    const std::size_t n = raw.rows();
    if (n == 0) return eval;
    double sq_sum = 0.0, abs_sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double pred = forward_value(physical_params, scaled_features.row(r));
        const double d = pred - raw.targets[r];
        sq_sum += d * d;
        abs_sum += std::abs(d);
    }
    eval.loss = sq_sum / static_cast<double>(n);
    eval.mae = abs_sum / static_cast<double>(n);
    return eval;
}

}  // namespace detail

// Full training pass: split, standardize on the training partition,
// initialize from the seed, run seeded minibatch epochs with the configured
// optimizer and record per-epoch metrics on both partitions.
//
// Targets are standardized internally (training-partition statistics) while
// the output layer is linear, and the scale is folded back into that layer
// whenever parameters leave this function, so callers only ever see a
// network in physical units. With a ReLU output the targets stay raw, since
// shifting them would move mass below the representable range.
inline TrainResult train(const RunConfig& config, const SampleTable& table) {
    config.validate();

    auto [train_raw, test_raw] = shuffle_split(table, config.split);
    if (train_raw.rows() < 2) {
        throw numeric_error("training partition has " + std::to_string(train_raw.rows()) +
                            " rows; need at least 2");
    }
    const NormStats stats = compute_stats(train_raw);
    const SampleTable train_scaled = apply_stats(train_raw, stats);
    const SampleTable test_scaled = test_raw.rows() > 0 ? apply_stats(test_raw, stats) : SampleTable{};

    const std::vector<LayerSpec> specs = config.effective_architecture();
    detail::TargetScale target_scale;
    if (specs.back().activation == Activation::linear) {
        double sum = 0.0;
        for (double y : train_raw.targets) sum += y;
        target_scale.mean = sum / static_cast<double>(train_raw.rows());
        double sq = 0.0;
        for (double y : train_raw.targets) {
            const double d = y - target_scale.mean;
            sq += d * d;
        }
        target_scale.std_dev = std::sqrt(sq / static_cast<double>(train_raw.rows()));
        if (target_scale.std_dev < 1e-12) target_scale.std_dev = 1.0;
    }
    std::vector<double> train_targets(train_raw.rows());
    for (std::size_t r = 0; r < train_raw.rows(); ++r) {
        train_targets[r] = (train_raw.targets[r] - target_scale.mean) / target_scale.std_dev;
    }

    MlpParams params = make_mlp(specs, mix_seed(config.seed, 0));
    AdamState adam_state = make_adam_state(params);
    Rng shuffle_rng(mix_seed(config.seed, 1));

    std::vector<std::size_t> order(train_raw.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainingHistory history;
    history.epochs.reserve(config.epochs);
    std::vector<Sample> batch;
    batch.reserve(config.batch_size);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, order.size());
            batch.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back({train_scaled.row(order[i]), train_targets[order[i]]});
            }
            const BatchGradients bg = accumulate_batch_gradients(params, batch);
            if (config.optimizer.kind == OptimizerKind::adam) {
                auto [next, next_state] = adam_step(adam_state, config.optimizer.adam, params, bg.grads);
                params = std::move(next);
                adam_state = std::move(next_state);
            } else {
                params = sgd_step(params, bg.grads, config.optimizer.sgd_learning_rate);
            }
        }
        if (!all_finite(params)) {
            throw numeric_error("parameters diverged at epoch " + std::to_string(epoch + 1));
        }
        const MlpParams physical = detail::fold_target_scale(params, target_scale);
        const detail::PartitionEval train_eval = detail::evaluate_partition(physical, train_scaled, train_raw);
        const detail::PartitionEval val_eval = detail::evaluate_partition(physical, test_scaled, test_raw);
        history.epochs.push_back({train_eval.loss, train_eval.mae, val_eval.loss, val_eval.mae});
    }

    TrainResult result;
    result.params = detail::fold_target_scale(params, target_scale);
    result.stats = stats;
    result.history = std::move(history);
    result.adam_state = std::move(adam_state);
    return result;
}

}  // namespace tcwv
