#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tcwv/data.hpp"
#include "tcwv/errors.hpp"
#include "tcwv/mlp.hpp"
#include "tcwv/optim.hpp"

namespace tcwv {

using json = nlohmann::json;

struct LoadedModel {
    MlpParams params;
    NormStats stats;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::string activation_name(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

inline Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "linear") return Activation::linear;
    throw schema_error("unknown activation \"" + name + "\"");
}

inline std::vector<double> finite_array(const json& node, const std::string& where) {
    if (!node.is_array()) throw schema_error(where + " must be an array");
    std::vector<double> values;
    values.reserve(node.size());
    for (const json& v : node) {
        if (!v.is_number()) throw schema_error(where + " must hold numbers");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw schema_error(where + " holds a non-finite value");
        values.push_back(d);
    }
    return values;
}

inline json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw schema_error(path + " is not valid JSON: " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw io_error("failed writing " + path);
}

}  // namespace detail

inline json norm_stats_to_json(const NormStats& stats) {
    json node;
    node["means"] = stats.means;
    node["stds"] = stats.stds;
    return node;
}

inline NormStats norm_stats_from_json(const json& node) {
    if (!node.is_object()) throw schema_error("norm_stats must be an object");
    const std::vector<double> means = detail::finite_array(node.at("means"), "norm_stats.means");
    const std::vector<double> stds = detail::finite_array(node.at("stds"), "norm_stats.stds");
    if (means.size() != kFeatureCount || stds.size() != kFeatureCount) {
        throw schema_error("norm_stats must hold " + std::to_string(kFeatureCount) + " entries per array");
    }
    NormStats stats;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        if (!(stds[f] > 0.0)) throw schema_error("norm_stats.stds must be positive");
        stats.means[f] = means[f];
        stats.stds[f] = stds[f];
    }
    return stats;
}

inline json model_to_json(const MlpParams& params, const NormStats& stats, std::uint64_t seed) {
    json layers = json::array();
    for (const Layer& layer : params.layers) {
        json node;
        node["in"] = layer.spec.input_dim;
        node["out"] = layer.spec.output_dim;
        node["activation"] = detail::activation_name(layer.spec.activation);
        node["weights"] = layer.weights;
        node["biases"] = layer.biases;
        layers.push_back(std::move(node));
    }
    json doc;
    doc["layers"] = std::move(layers);
    doc["norm_stats"] = norm_stats_to_json(stats);
    doc["seed"] = seed;
    return doc;
}

inline LoadedModel model_from_json(const json& doc) {
    if (!doc.is_object()) throw schema_error("model document must be a JSON object");
    if (!doc.contains("layers")) throw schema_error("model document is missing \"layers\"");
    if (!doc.contains("norm_stats")) throw schema_error("model document is missing \"norm_stats\"");
    const json& layers = doc.at("layers");
    if (!layers.is_array() || layers.empty()) throw schema_error("model \"layers\" must be a non-empty array");

    LoadedModel model;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const json& node = layers[k];
        const std::string where = "layers[" + std::to_string(k) + "]";
        if (!node.is_object()) throw schema_error(where + " must be an object");
        for (const char* field : {"in", "out", "activation", "weights", "biases"}) {
            if (!node.contains(field)) throw schema_error(where + " is missing \"" + field + "\"");
        }
        Layer layer;
        if (!node.at("in").is_number_unsigned() || !node.at("out").is_number_unsigned()) {
            throw schema_error(where + " dims must be non-negative integers");
        }
        layer.spec.input_dim = node.at("in").get<std::size_t>();
        layer.spec.output_dim = node.at("out").get<std::size_t>();
        layer.spec.activation = detail::activation_from_name(node.at("activation").get<std::string>());
        layer.weights = detail::finite_array(node.at("weights"), where + ".weights");
        layer.biases = detail::finite_array(node.at("biases"), where + ".biases");
        if (layer.weights.size() != layer.spec.input_dim * layer.spec.output_dim) {
            throw schema_error(where + ".weights length does not match in*out");
        }
        if (layer.biases.size() != layer.spec.output_dim) {
            throw schema_error(where + ".biases length does not match out");
        }
        model.params.layers.push_back(std::move(layer));
    }
    std::vector<LayerSpec> specs;
    for (const Layer& layer : model.params.layers) specs.push_back(layer.spec);
    validate_specs(specs);
    model.stats = norm_stats_from_json(doc.at("norm_stats"));
    if (doc.contains("seed")) {
        if (!doc.at("seed").is_number_integer() && !doc.at("seed").is_number_unsigned()) {
            throw schema_error("model \"seed\" must be an integer");
        }
        model.seed = doc.at("seed").get<std::uint64_t>();
    }
    return model;
}

inline void save_model(const std::string& path, const MlpParams& params, const NormStats& stats,
                       std::uint64_t seed) {
    detail::write_json_file(path, model_to_json(params, stats, seed));
}

inline LoadedModel load_model(const std::string& path) {
    return model_from_json(detail::parse_json_file(path));
}

inline json gradient_set_to_json(const GradientSet& set) {
    json layers = json::array();
    for (const auto& layer : set.layers) {
        json node;
        node["weights"] = layer.weights;
        node["biases"] = layer.biases;
        layers.push_back(std::move(node));
    }
    return layers;
}

inline GradientSet gradient_set_from_json(const json& node, const std::string& where) {
    if (!node.is_array()) throw schema_error(where + " must be an array");
    GradientSet set;
    for (std::size_t k = 0; k < node.size(); ++k) {
        GradientSet::LayerGrads layer;
        layer.weights = detail::finite_array(node[k].at("weights"), where + ".weights");
        layer.biases = detail::finite_array(node[k].at("biases"), where + ".biases");
        set.layers.push_back(std::move(layer));
    }
    return set;
}

// Checkpoint document: the model plus the optimizer moments, so training
// state survives a save/load cycle.
inline void save_checkpoint(const std::string& path, const MlpParams& params, const NormStats& stats,
                            std::uint64_t seed, const AdamState& state) {
    json doc;
    doc["model"] = model_to_json(params, stats, seed);
    json opt;
    opt["type"] = "adam";
    opt["t"] = state.t;
    opt["m"] = gradient_set_to_json(state.m);
    opt["v"] = gradient_set_to_json(state.v);
    doc["optimizer"] = std::move(opt);
    detail::write_json_file(path, doc);
}

inline std::pair<LoadedModel, AdamState> load_checkpoint(const std::string& path) {
    const json doc = detail::parse_json_file(path);
    if (!doc.contains("model") || !doc.contains("optimizer")) {
        throw schema_error(path + " is not a checkpoint document");
    }
    LoadedModel model = model_from_json(doc.at("model"));
    const json& opt = doc.at("optimizer");
    if (opt.value("type", "") != std::string("adam")) {
        throw schema_error("checkpoint optimizer type must be \"adam\"");
    }
    AdamState state;
    state.t = opt.at("t").get<std::int64_t>();
    state.m = gradient_set_from_json(opt.at("m"), "optimizer.m");
    state.v = gradient_set_from_json(opt.at("v"), "optimizer.v");
    detail::check_same_shape(model.params, state.m, "checkpoint first moment");
    detail::check_same_shape(model.params, state.v, "checkpoint second moment");
    return {std::move(model), std::move(state)};
}

}  // namespace tcwv
