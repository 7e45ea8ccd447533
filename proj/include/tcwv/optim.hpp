#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "tcwv/errors.hpp"
#include "tcwv/mlp.hpp"

namespace tcwv {

struct AdamConfig {
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (!(alpha > 0.0)) throw schema_error("adam alpha must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0)) throw schema_error("adam beta1 must be in [0, 1)");
        if (!(beta2 >= 0.0 && beta2 < 1.0)) throw schema_error("adam beta2 must be in [0, 1)");
        if (!(epsilon > 0.0)) throw schema_error("adam epsilon must be positive");
    }
};

// First and second moment estimates, shaped exactly like the gradients,
// plus the step counter used for bias correction.
struct AdamState {
    GradientSet m;
    GradientSet v;
    std::int64_t t = 0;
};

inline AdamState make_adam_state(const MlpParams& params) {
    AdamState state;
    state.m = zero_gradients(params);
    state.v = zero_gradients(params);
    state.t = 0;
    return state;
}

namespace detail {

inline void check_same_shape(const MlpParams& params, const GradientSet& grads, const char* what) {
    if (grads.layers.size() != params.layers.size()) {
        throw schema_error(std::string(what) + " layer count does not match parameters");
    }
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        if (grads.layers[k].weights.size() != params.layers[k].weights.size() ||
            grads.layers[k].biases.size() != params.layers[k].biases.size()) {
            throw schema_error(std::string(what) + " layer " + std::to_string(k) +
                               " does not match parameter shape");
        }
    }
}

}  // namespace detail

// Plain gradient descent step. Pure: inputs are untouched.
inline MlpParams sgd_step(const MlpParams& params, const GradientSet& grads, double learning_rate) {
    detail::check_same_shape(params, grads, "gradients");
    MlpParams next = params;
    for (std::size_t k = 0; k < next.layers.size(); ++k) {
        Layer& layer = next.layers[k];
        const GradientSet::LayerGrads& g = grads.layers[k];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            layer.weights[i] -= learning_rate * g.weights[i];
        }
        for (std::size_t i = 0; i < layer.biases.size(); ++i) {
            layer.biases[i] -= learning_rate * g.biases[i];
        }
    }
    return next;
}

namespace detail {

inline double adam_element(double p, double g, double& m, double& v, const AdamConfig& cfg,
                           double bias1, double bias2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    return p - cfg.alpha * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
}

}  // namespace detail

// One Adam update. Pure: returns new parameters and new state, leaving the
// inputs untouched. epsilon sits outside the square root.
inline std::pair<MlpParams, AdamState> adam_step(const AdamState& state, const AdamConfig& config,
                                                 const MlpParams& params, const GradientSet& grads) {
    config.validate();
    detail::check_same_shape(params, grads, "gradients");
    detail::check_same_shape(params, state.m, "adam first moment");
    detail::check_same_shape(params, state.v, "adam second moment");
    MlpParams next = params;
    AdamState next_state = state;
    next_state.t = state.t + 1;
    const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(next_state.t));
    const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(next_state.t));
    for (std::size_t k = 0; k < next.layers.size(); ++k) {
        Layer& layer = next.layers[k];
        const GradientSet::LayerGrads& g = grads.layers[k];
        GradientSet::LayerGrads& m = next_state.m.layers[k];
        GradientSet::LayerGrads& v = next_state.v.layers[k];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            layer.weights[i] =
                detail::adam_element(layer.weights[i], g.weights[i], m.weights[i], v.weights[i], config, bias1, bias2);
        }
        for (std::size_t i = 0; i < layer.biases.size(); ++i) {
            layer.biases[i] =
                detail::adam_element(layer.biases[i], g.biases[i], m.biases[i], v.biases[i], config, bias1, bias2);
        }
    }
    return {std::move(next), std::move(next_state)};
}

}  // namespace tcwv
