#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tcwv/errors.hpp"
#include "tcwv/rng.hpp"

namespace tcwv {

enum class Activation { relu, linear };

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Subgradient at exactly zero is taken as zero.
inline double relu_derivative(double x) { return x > 0.0 ? 1.0 : 0.0; }

inline double activate(Activation a, double x) {
    return a == Activation::relu ? relu(x) : x;
}

inline double activation_derivative(Activation a, double x) {
    return a == Activation::relu ? relu_derivative(x) : 1.0;
}

struct LayerSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::linear;
};

// One dense layer. weights is row major: weights[j * input_dim + i] connects
// input i to output j.
struct Layer {
    LayerSpec spec;
    std::vector<double> weights;
    std::vector<double> biases;
};

struct MlpParams {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().spec.input_dim; }
    std::size_t output_dim() const { return layers.back().spec.output_dim; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const Layer& layer : layers) {
            n += layer.weights.size() + layer.biases.size();
        }
        return n;
    }
};

inline void validate_specs(const std::vector<LayerSpec>& specs) {
    if (specs.empty()) throw schema_error("architecture has no layers");
    for (std::size_t k = 0; k < specs.size(); ++k) {
        if (specs[k].input_dim == 0 || specs[k].output_dim == 0) {
            throw schema_error("layer " + std::to_string(k) + " has a zero dimension");
        }
        if (k > 0 && specs[k].input_dim != specs[k - 1].output_dim) {
            throw schema_error("layer " + std::to_string(k) + " input dim " +
                               std::to_string(specs[k].input_dim) + " does not match previous output dim " +
                               std::to_string(specs[k - 1].output_dim));
        }
    }
}

// He-uniform initialization: weights uniform in +-sqrt(6 / fan_in), biases
// zero. Weights are drawn layer by layer in row-major order, so a given
// seed always produces the same network.
inline MlpParams make_mlp(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    validate_specs(specs);
    Rng rng(seed);
    MlpParams params;
    params.layers.reserve(specs.size());
    for (const LayerSpec& spec : specs) {
        Layer layer;
        layer.spec = spec;
        layer.weights.resize(spec.output_dim * spec.input_dim);
        layer.biases.assign(spec.output_dim, 0.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(spec.input_dim));
        for (double& w : layer.weights) w = rng.uniform(-bound, bound);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

inline bool all_finite(const MlpParams& params) {
    for (const Layer& layer : params.layers) {
        for (double w : layer.weights) {
            if (!std::isfinite(w)) return false;
        }
        for (double b : layer.biases) {
            if (!std::isfinite(b)) return false;
        }
    }
    return true;
}

// Everything backpropagation needs from one forward pass: the input, and
// per layer the pre-activations v and the activations y = f(v).
struct ForwardTrace {
    std::vector<double> input;
    std::vector<std::vector<double>> pre_activations;
    std::vector<std::vector<double>> activations;
};

struct ForwardResult {
    double prediction = 0.0;
    ForwardTrace trace;
};

namespace detail {

inline void check_input(const MlpParams& params, std::span<const double> x) {
    if (params.layers.empty()) throw schema_error("network has no layers");
    if (x.size() != params.input_dim()) {
        throw schema_error("input size " + std::to_string(x.size()) + " does not match network input dim " +
                           std::to_string(params.input_dim()));
    }
    if (params.output_dim() != 1) {
        throw schema_error("network output dim must be 1, got " + std::to_string(params.output_dim()));
    }
}

inline void affine(const Layer& layer, std::span<const double> in, std::vector<double>& out) {
    const std::size_t nin = layer.spec.input_dim;
    const std::size_t nout = layer.spec.output_dim;
    out.resize(nout);
    for (std::size_t j = 0; j < nout; ++j) {
        double v = layer.biases[j];
        const double* row = layer.weights.data() + j * nin;
        for (std::size_t i = 0; i < nin; ++i) v += row[i] * in[i];
        out[j] = v;
    }
}

}  // namespace detail

// Forward pass that records the full trace for backpropagation.
inline ForwardResult forward(const MlpParams& params, std::span<const double> x) {
    detail::check_input(params, x);
    ForwardResult result;
    result.trace.input.assign(x.begin(), x.end());
    result.trace.pre_activations.resize(params.layers.size());
    result.trace.activations.resize(params.layers.size());
    std::span<const double> current = x;
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const Layer& layer = params.layers[k];
        detail::affine(layer, current, result.trace.pre_activations[k]);
        std::vector<double>& act = result.trace.activations[k];
        act.resize(layer.spec.output_dim);
        for (std::size_t j = 0; j < act.size(); ++j) {
            act[j] = activate(layer.spec.activation, result.trace.pre_activations[k][j]);
        }
        current = act;
    }
    result.prediction = result.trace.activations.back()[0];
    return result;
}

// Forward pass without a trace. Performs the same operations in the same
// order as forward(), so both return bitwise identical predictions.
inline double forward_value(const MlpParams& params, std::span<const double> x) {
    detail::check_input(params, x);
    std::vector<double> buffer_a(x.begin(), x.end());
    std::vector<double> buffer_b;
    std::vector<double>* in = &buffer_a;
    std::vector<double>* out = &buffer_b;
    for (const Layer& layer : params.layers) {
        detail::affine(layer, *in, *out);
        for (double& v : *out) v = activate(layer.spec.activation, v);
        std::swap(in, out);
    }
    return (*in)[0];
}

// Gradient of every parameter, in the same layout as MlpParams.
struct GradientSet {
    struct LayerGrads {
        std::vector<double> weights;
        std::vector<double> biases;
    };
    std::vector<LayerGrads> layers;
};

inline GradientSet zero_gradients(const MlpParams& params) {
    GradientSet grads;
    grads.layers.resize(params.layers.size());
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        grads.layers[k].weights.assign(params.layers[k].weights.size(), 0.0);
        grads.layers[k].biases.assign(params.layers[k].biases.size(), 0.0);
    }
    return grads;
}

// Mean squared error over a batch of predictions.
inline double batch_loss(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) {
        throw schema_error("prediction and target counts differ");
    }
    if (predictions.empty()) throw numeric_error("batch_loss of an empty batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        sum += d * d;
    }
    return sum / static_cast<double>(predictions.size());
}

// Derivative of the per-sample squared error (target - output)^2 with
// respect to the network output, carrying the batch-mean 1/B factor.
inline double output_gradient(double target, double prediction, std::size_t batch_size) {
    if (batch_size == 0) throw numeric_error("output_gradient with batch size 0");
    return -2.0 * (target - prediction) / static_cast<double>(batch_size);
}

// Exact backpropagation for one sample. output_grad is dJ/dy at the network
// output; the returned set holds dJ/dw and dJ/db for every layer.
inline GradientSet backward(const MlpParams& params, const ForwardTrace& trace, double output_grad) {
    const std::size_t nlayers = params.layers.size();
    if (trace.pre_activations.size() != nlayers || trace.activations.size() != nlayers) {
        throw schema_error("trace does not match network depth");
    }
    if (trace.input.size() != params.input_dim()) {
        throw schema_error("trace input does not match network input dim");
    }
    GradientSet grads = zero_gradients(params);
    // delta[j] = dJ/dv_j for the layer currently being processed.
    std::vector<double> delta(1);
    delta[0] = output_grad *
               activation_derivative(params.layers.back().spec.activation, trace.pre_activations.back()[0]);
    for (std::size_t k = nlayers; k-- > 0;) {
        const Layer& layer = params.layers[k];
        const std::vector<double>& inputs = k == 0 ? trace.input : trace.activations[k - 1];
        if (inputs.size() != layer.spec.input_dim || trace.pre_activations[k].size() != layer.spec.output_dim) {
            throw schema_error("trace layer " + std::to_string(k) + " does not match network shape");
        }
        GradientSet::LayerGrads& lg = grads.layers[k];
        for (std::size_t j = 0; j < layer.spec.output_dim; ++j) {
            lg.biases[j] = delta[j];
            double* wrow = lg.weights.data() + j * layer.spec.input_dim;
            for (std::size_t i = 0; i < layer.spec.input_dim; ++i) {
                wrow[i] = delta[j] * inputs[i];
            }
        }
        if (k == 0) break;
        const Layer& prev = params.layers[k - 1];
        std::vector<double> prev_delta(layer.spec.input_dim, 0.0);
        for (std::size_t i = 0; i < layer.spec.input_dim; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < layer.spec.output_dim; ++j) {
                sum += delta[j] * layer.weights[j * layer.spec.input_dim + i];
            }
            prev_delta[i] = sum * activation_derivative(prev.spec.activation, trace.pre_activations[k - 1][i]);
        }
        delta = std::move(prev_delta);
    }
    return grads;
}

// One training sample: a feature view plus its target.
struct Sample {
    std::span<const double> features;
    double target = 0.0;
};

struct BatchGradients {
    GradientSet grads;
    double loss = 0.0;
};

// Forward and backward over a whole batch, gradients summed per parameter
// and loss averaged, matching output_gradient's 1/B convention.
inline BatchGradients accumulate_batch_gradients(const MlpParams& params, std::span<const Sample> batch) {
    if (batch.empty()) throw numeric_error("gradient of an empty batch");
    BatchGradients result;
    result.grads = zero_gradients(params);
    for (const Sample& sample : batch) {
        const ForwardResult fwd = forward(params, sample.features);
        const double grad = output_gradient(sample.target, fwd.prediction, batch.size());
        const GradientSet g = backward(params, fwd.trace, grad);
        for (std::size_t k = 0; k < g.layers.size(); ++k) {
            for (std::size_t i = 0; i < g.layers[k].weights.size(); ++i) {
                result.grads.layers[k].weights[i] += g.layers[k].weights[i];
            }
            for (std::size_t i = 0; i < g.layers[k].biases.size(); ++i) {
                result.grads.layers[k].biases[i] += g.layers[k].biases[i];
            }
        }
        const double diff = fwd.prediction - sample.target;
        result.loss += diff * diff;
    }
    result.loss /= static_cast<double>(batch.size());
    return result;
}

}  // namespace tcwv
