#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tcwv/csv.hpp"
#include "tcwv/data.hpp"
#include "tcwv/errors.hpp"
#include "tcwv/eval.hpp"
#include "tcwv/grid.hpp"
#include "tcwv/mlp.hpp"
#include "tcwv/model_io.hpp"
#include "tcwv/train.hpp"

namespace tcwv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitSchema = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

namespace cli_detail {

inline MissingPolicy missing_policy_from_name(const std::string& name) {
    if (name == "drop") return MissingPolicy::drop;
    if (name == "fill_mean") return MissingPolicy::fill_mean;
    throw schema_error("missing_policy must be \"drop\" or \"fill_mean\", got \"" + name + "\"");
}

inline Activation activation_from_config(const json& node, const std::string& where) {
    if (!node.is_string()) throw schema_error(where + " must be \"relu\" or \"linear\"");
    const std::string name = node.get<std::string>();
    if (name == "relu") return Activation::relu;
    if (name == "linear") return Activation::linear;
    throw schema_error(where + " must be \"relu\" or \"linear\", got \"" + name + "\"");
}

template <typename T>
T config_number(const json& node, const std::string& where) {
    if constexpr (std::is_floating_point_v<T>) {
        if (!node.is_number()) throw schema_error(where + " must be a number");
    } else {
        if (!node.is_number_integer() && !node.is_number_unsigned()) {
            throw schema_error(where + " must be an integer");
        }
    }
    return node.get<T>();
}

inline void reject_unknown_keys(const json& node, std::initializer_list<const char*> known,
                                const std::string& where) {
    for (const auto& item : node.items()) {
        if (std::find_if(known.begin(), known.end(),
                         [&](const char* k) { return item.key() == k; }) == known.end()) {
            throw schema_error("unknown config field \"" + where + item.key() + "\"");
        }
    }
}

// Translates the training config document into a RunConfig. Every field is
// optional except the four paths; unknown fields are rejected so typos
// cannot silently fall back to defaults.
inline RunConfig run_config_from_json(const json& doc, std::optional<std::uint64_t> seed_override) {
    if (!doc.is_object()) throw schema_error("config must be a JSON object");
    reject_unknown_keys(doc,
                        {"input", "model_output", "history_output", "metrics_output", "state_output",
                         "seed", "epochs", "batch_size", "output_relu", "missing_policy", "architecture",
                         "optimizer", "split"},
                        "");

    RunConfig config;
    auto require_path = [&](const char* key, std::string& target) {
        if (!doc.contains(key) || !doc.at(key).is_string() || doc.at(key).get<std::string>().empty()) {
            throw schema_error(std::string("config field \"") + key + "\" must be a non-empty string");
        }
        target = doc.at(key).get<std::string>();
    };
    require_path("input", config.input_path);
    require_path("model_output", config.model_output);
    require_path("history_output", config.history_output);
    require_path("metrics_output", config.metrics_output);
    if (doc.contains("state_output")) {
        if (!doc.at("state_output").is_string()) throw schema_error("config field \"state_output\" must be a string");
        config.state_output = doc.at("state_output").get<std::string>();
    }

    if (doc.contains("seed")) config.seed = config_number<std::uint64_t>(doc.at("seed"), "seed");
    if (seed_override) config.seed = *seed_override;
    if (doc.contains("epochs")) config.epochs = config_number<std::size_t>(doc.at("epochs"), "epochs");
    if (doc.contains("batch_size")) {
        config.batch_size = config_number<std::size_t>(doc.at("batch_size"), "batch_size");
    }
    if (doc.contains("output_relu")) {
        if (!doc.at("output_relu").is_boolean()) throw schema_error("config field \"output_relu\" must be a boolean");
        config.output_relu = doc.at("output_relu").get<bool>();
    }
    if (doc.contains("missing_policy")) {
        if (!doc.at("missing_policy").is_string()) {
            throw schema_error("config field \"missing_policy\" must be a string");
        }
        config.missing_policy = missing_policy_from_name(doc.at("missing_policy").get<std::string>());
    }

    if (doc.contains("architecture")) {
        const json& arch = doc.at("architecture");
        if (!arch.is_array() || arch.empty()) {
            throw schema_error("config field \"architecture\" must be a non-empty array");
        }
        config.architecture.clear();
        for (std::size_t k = 0; k < arch.size(); ++k) {
            const std::string where = "architecture[" + std::to_string(k) + "]";
            const json& node = arch[k];
            if (!node.is_object()) throw schema_error(where + " must be an object");
            reject_unknown_keys(node, {"in", "out", "activation"}, where + ".");
            LayerSpec spec;
            spec.input_dim = config_number<std::size_t>(node.at("in"), where + ".in");
            spec.output_dim = config_number<std::size_t>(node.at("out"), where + ".out");
            spec.activation = activation_from_config(node.at("activation"), where + ".activation");
            config.architecture.push_back(spec);
        }
    }

    if (doc.contains("optimizer")) {
        const json& opt = doc.at("optimizer");
        if (!opt.is_object() || !opt.contains("type") || !opt.at("type").is_string()) {
            throw schema_error("config field \"optimizer\" must be an object with a \"type\"");
        }
        const std::string type = opt.at("type").get<std::string>();
        if (type == "adam") {
            reject_unknown_keys(opt, {"type", "alpha", "beta1", "beta2", "epsilon"}, "optimizer.");
            config.optimizer.kind = OptimizerKind::adam;
            if (opt.contains("alpha")) {
                config.optimizer.adam.alpha = config_number<double>(opt.at("alpha"), "optimizer.alpha");
            }
            if (opt.contains("beta1")) {
                config.optimizer.adam.beta1 = config_number<double>(opt.at("beta1"), "optimizer.beta1");
            }
            if (opt.contains("beta2")) {
                config.optimizer.adam.beta2 = config_number<double>(opt.at("beta2"), "optimizer.beta2");
            }
            if (opt.contains("epsilon")) {
                config.optimizer.adam.epsilon = config_number<double>(opt.at("epsilon"), "optimizer.epsilon");
            }
        } else if (type == "sgd") {
            reject_unknown_keys(opt, {"type", "learning_rate"}, "optimizer.");
            config.optimizer.kind = OptimizerKind::sgd;
            if (opt.contains("learning_rate")) {
                config.optimizer.sgd_learning_rate =
                    config_number<double>(opt.at("learning_rate"), "optimizer.learning_rate");
            }
        } else {
            throw schema_error("optimizer.type must be \"adam\" or \"sgd\", got \"" + type + "\"");
        }
    }

    // The split seed follows the run seed unless the config pins it, so one
    // seed flag reproduces a whole run.
    config.split.seed = config.seed;
    if (doc.contains("split")) {
        const json& split = doc.at("split");
        if (!split.is_object()) throw schema_error("config field \"split\" must be an object");
        reject_unknown_keys(split, {"train_fraction", "test_fraction", "seed"}, "split.");
        if (split.contains("train_fraction")) {
            config.split.train_fraction = config_number<double>(split.at("train_fraction"), "split.train_fraction");
        }
        if (split.contains("test_fraction")) {
            config.split.test_fraction = config_number<double>(split.at("test_fraction"), "split.test_fraction");
        }
        if (split.contains("seed")) {
            config.split.seed = config_number<std::uint64_t>(split.at("seed"), "split.seed");
        }
    }
    config.validate();
    return config;
}

inline json metrics_to_json(const Metrics& m) {
    json node;
    node["mae"] = m.mae;
    node["mean_bias"] = m.mean_bias;
    node["stddev_diff"] = m.stddev_diff;
    node["n"] = m.n;
    node["r2"] = m.r2 ? json(*m.r2) : json(nullptr);
    node["pearson"] = m.pearson ? json(*m.pearson) : json(nullptr);
    node["accuracy_pct"] = m.r2 ? json(*m.r2 * 100.0) : json(nullptr);
    return node;
}

inline void write_history_csv(const std::string& path, const TrainingHistory& history) {
    std::ofstream out = csv::open_output(path);
    out << "epoch,train_loss,train_mae,val_loss,val_mae\n";
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const EpochRecord& rec = history.epochs[e];
        out << (e + 1) << ',' << csv::format_double(rec.train_loss) << ',' << csv::format_double(rec.train_mae)
            << ',' << csv::format_double(rec.val_loss) << ',' << csv::format_double(rec.val_mae) << '\n';
    }
    if (!out) throw io_error("failed writing " + path);
}

inline std::optional<Metrics> partition_metrics(const MlpParams& params, const NormStats& stats,
                                                const SampleTable& raw) {
    if (raw.rows() < 2) return std::nullopt;
    const SampleTable scaled = apply_stats(raw, stats);
    std::vector<double> predictions(raw.rows());
    for (std::size_t r = 0; r < raw.rows(); ++r) {
        predictions[r] = forward_value(params, scaled.row(r));
    }
    return compute_metrics(predictions, raw.targets);
}

inline int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed_override, bool quiet) {
    const json doc = detail::parse_json_file(config_path);
    const RunConfig config = run_config_from_json(doc, seed_override);
    const SampleTable table = ingest_csv(config.input_path, config.missing_policy);
    if (!quiet) {
        std::cout << "training on " << table.rows() << " rows from " << config.input_path << "\n";
    }

    const TrainResult result = train(config, table);
    if (!quiet) {
        const EpochRecord& last = result.history.epochs.back();
        std::cout << "epoch " << result.history.epochs.size() << ": train_loss=" << csv::format_double(last.train_loss)
                  << " train_mae=" << csv::format_double(last.train_mae)
                  << " val_loss=" << csv::format_double(last.val_loss)
                  << " val_mae=" << csv::format_double(last.val_mae) << "\n";
    }

    save_model(config.model_output, result.params, result.stats, config.seed);
    write_history_csv(config.history_output, result.history);

    auto [train_part, test_part] = shuffle_split(table, config.split);
    const std::optional<Metrics> train_metrics = partition_metrics(result.params, result.stats, train_part);
    const std::optional<Metrics> val_metrics = partition_metrics(result.params, result.stats, test_part);
    json report;
    report["train"] = train_metrics ? metrics_to_json(*train_metrics) : json(nullptr);
    report["validation"] = val_metrics ? metrics_to_json(*val_metrics) : json(nullptr);
    detail::write_json_file(config.metrics_output, report);

    if (!config.state_output.empty()) {
        save_checkpoint(config.state_output, result.params, result.stats, config.seed, result.adam_state);
    }
    return kExitOk;
}

inline int cmd_predict(const std::string& model_path, const std::string& input_path,
                       const std::string& output_path, bool as_grid, const std::string& missing_policy,
                       bool quiet) {
    const LoadedModel model = load_model(model_path);
    if (model.params.input_dim() != kFeatureCount) {
        throw schema_error("model expects " + std::to_string(model.params.input_dim()) +
                           " features; this tool provides " + std::to_string(kFeatureCount));
    }
    const SampleTable table = ingest_csv(input_path, missing_policy_from_name(missing_policy));
    if (as_grid) {
        const FeatureGrid features = table_to_feature_grid(table);
        const GridCube grid = predict_grid(model.params, model.stats, features);
        write_grid_csv(output_path, grid);
        if (!quiet) {
            std::cout << "wrote " << grid.times.size() << "x" << grid.lats.size() << "x" << grid.lons.size()
                      << " grid to " << output_path << "\n";
        }
        return kExitOk;
    }
    std::ofstream out = csv::open_output(output_path);
    std::string header;
    if (table.has_coords()) header += "lat,lon,";
    if (table.has_times()) header += "time,";
    header += "tcwv,tcwv_pred";
    out << header << '\n';
    std::array<double, kFeatureCount> scaled{};
    for (std::size_t r = 0; r < table.rows(); ++r) {
        standardize_row(table.row(r), model.stats, scaled);
        const double pred = forward_value(model.params, scaled);
        std::string line;
        if (table.has_coords()) {
            line += csv::format_double(table.lats[r]);
            line += ',';
            line += csv::format_double(table.lons[r]);
            line += ',';
        }
        if (table.has_times()) {
            line += table.times[r];
            line += ',';
        }
        line += csv::format_double(table.targets[r]);
        line += ',';
        line += csv::format_double(pred);
        out << line << '\n';
    }
    if (!out) throw io_error("failed writing " + output_path);
    if (!quiet) std::cout << "wrote " << table.rows() << " predictions to " << output_path << "\n";
    return kExitOk;
}

inline int cmd_evaluate(const std::string& input_path, const std::string& output_path,
                        const std::string& predicted_column, const std::string& reference_column, bool quiet) {
    const std::vector<std::string> lines = csv::read_lines(input_path);
    if (lines.empty()) throw schema_error("empty file: " + input_path);
    const std::vector<std::string> header = csv::split_line(lines[0]);
    auto find = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (csv::trim(header[i]) == name) return i;
        }
        throw schema_error(input_path + " is missing column \"" + name + "\"");
    };
    const std::size_t pred_col = find(predicted_column);
    const std::size_t ref_col = find(reference_column);
    std::vector<double> predicted, reference;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (csv::trim(lines[li]).empty()) continue;
        const std::vector<std::string> fields = csv::split_line(lines[li]);
        if (fields.size() != header.size()) continue;
        const auto p = csv::parse_double(fields[pred_col]);
        const auto r = csv::parse_double(fields[ref_col]);
        if (!p || !r) continue;
        predicted.push_back(*p);
        reference.push_back(*r);
    }
    const Metrics metrics = compute_metrics(predicted, reference);
    detail::write_json_file(output_path, metrics_to_json(metrics));
    if (!quiet) {
        std::cout << "n=" << metrics.n << " mae=" << csv::format_double(metrics.mae)
                  << " r2=" << (metrics.r2 ? csv::format_double(*metrics.r2) : "undefined") << "\n";
    }
    return kExitOk;
}

// Grid files and sample tables share the time/lat/lon/tcwv columns, so the
// richer sample-table header has to be probed first.
inline GridCube load_grid_auto(const std::string& path) {
    const std::vector<std::string> lines = csv::read_lines(path);
    if (lines.empty()) throw schema_error("empty file: " + path);
    const std::vector<std::string> header = csv::split_line(lines[0]);
    auto has = [&](std::string_view name) {
        for (const std::string& h : header) {
            if (csv::trim(h) == name) return true;
        }
        return false;
    };
    bool all_features = true;
    for (const char* name : kFeatureNames) {
        if (!has(name)) {
            all_features = false;
            break;
        }
    }
    if (all_features && has(kTargetName)) {
        return table_to_grid(ingest_csv(path, MissingPolicy::drop));
    }
    return read_grid_csv(path);
}

inline int cmd_transect(const std::string& predicted_path, const std::string& reference_path,
                        const std::string& output_path, std::vector<double> latitudes, int year, bool quiet) {
    if (latitudes.empty()) latitudes = {0.0, 15.0, 30.0};
    const GridCube predicted = load_grid_auto(predicted_path);
    const GridCube reference = load_grid_auto(reference_path);
    const std::vector<TransectComparison> rows = compare_transects(predicted, reference, latitudes, year);
    write_comparison_csv(output_path, rows);
    if (!quiet) {
        for (const TransectComparison& row : rows) {
            std::cout << "lat " << csv::format_fixed2(row.latitude) << ": stddev "
                      << csv::format_fixed2(row.stddev_diff) << " kg/m2, correlation "
                      << csv::format_fixed2(row.correlation_pct) << "%\n";
        }
    }
    return kExitOk;
}

inline int cmd_synth(const SynthConfig& config, const std::string& output_path, bool quiet) {
    const SampleTable table = synth_generate(config);
    write_table_csv(output_path, table);
    if (!quiet) std::cout << "wrote " << table.rows() << " synthetic samples to " << output_path << "\n";
    return kExitOk;
}

}  // namespace cli_detail

// Parses arguments (program name excluded) and runs the selected
// subcommand. Returns the process exit code; all failures are reported on
// standard error with the failing stage named.
inline int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Water-vapor retrieval workbench: train, predict and evaluate"
                 " a feed-forward regression network on tabulated samples"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    bool quiet = false;
    app.add_option("--config", config_path, "JSON config file (train)");
    app.add_option("--seed", seed_override, "Override the run seed");
    app.add_flag("--quiet", quiet, "Suppress progress output");

    CLI::App* train_cmd = app.add_subcommand("train", "Train a network from a config file");

    CLI::App* predict_cmd = app.add_subcommand("predict", "Run a saved model over a sample CSV");
    std::string model_path, input_path, output_path;
    bool as_grid = false;
    std::string missing_policy = "drop";
    predict_cmd->add_option("--model", model_path, "Model JSON path")->required();
    predict_cmd->add_option("--input", input_path, "Input sample CSV")->required();
    predict_cmd->add_option("--output", output_path, "Output path")->required();
    predict_cmd->add_flag("--grid", as_grid, "Emit a gridded CSV instead of per-row predictions");
    predict_cmd->add_option("--missing-policy", missing_policy, "drop or fill_mean (default drop)");

    CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "Compare two columns of a CSV");
    std::string eval_input, eval_output;
    std::string predicted_column = "predicted";
    std::string reference_column = "reference";
    evaluate_cmd->add_option("--input", eval_input, "CSV holding both columns")->required();
    evaluate_cmd->add_option("--output", eval_output, "Metrics JSON path")->required();
    evaluate_cmd->add_option("--predicted-column", predicted_column, "Predicted column name");
    evaluate_cmd->add_option("--reference-column", reference_column, "Reference column name");

    CLI::App* transect_cmd = app.add_subcommand("transect", "Compare two gridded products along latitudes");
    std::string transect_predicted, transect_reference, transect_output;
    std::vector<double> latitudes;
    int year = 2004;
    transect_cmd->add_option("--predicted", transect_predicted, "Predicted grid or sample CSV")->required();
    transect_cmd->add_option("--reference", transect_reference, "Reference grid or sample CSV")->required();
    transect_cmd->add_option("--output", transect_output, "Comparison CSV path")->required();
    transect_cmd->add_option("--latitudes", latitudes, "Latitudes to slice (default 0 15 30)");
    transect_cmd->add_option("--year", year, "Year to average (default 2004)");

    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic sample CSV");
    SynthConfig synth_config;
    std::string synth_output;
    synth_cmd->add_option("--output", synth_output, "Output CSV path")->required();
    synth_cmd->add_option("--samples", synth_config.n_samples, "Number of samples");
    synth_cmd->add_option("--noise-std", synth_config.noise_std, "Gaussian noise scale (kg/m2)");
    synth_cmd->add_option("--lat-min", synth_config.lat_min, "Southern grid bound");
    synth_cmd->add_option("--lat-max", synth_config.lat_max, "Northern grid bound");
    synth_cmd->add_option("--lon-min", synth_config.lon_min, "Western grid bound");
    synth_cmd->add_option("--lon-max", synth_config.lon_max, "Eastern grid bound");
    synth_cmd->add_option("--resolution", synth_config.resolution, "Grid spacing in degrees");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitSchema;
    }

    const char* stage = "cli";
    try {
        if (train_cmd->parsed()) {
            stage = "train";
            if (config_path.empty()) throw schema_error("train requires --config");
            return cli_detail::cmd_train(config_path, seed_override, quiet);
        }
        if (predict_cmd->parsed()) {
            stage = "predict";
            return cli_detail::cmd_predict(model_path, input_path, output_path, as_grid, missing_policy, quiet);
        }
        if (evaluate_cmd->parsed()) {
            stage = "evaluate";
            return cli_detail::cmd_evaluate(eval_input, eval_output, predicted_column, reference_column, quiet);
        }
        if (transect_cmd->parsed()) {
            stage = "transect";
            return cli_detail::cmd_transect(transect_predicted, transect_reference, transect_output, latitudes,
                                            year, quiet);
        }
        if (synth_cmd->parsed()) {
            stage = "synth";
            if (seed_override) synth_config.seed = *seed_override;
            return cli_detail::cmd_synth(synth_config, synth_output, quiet);
        }
        std::cerr << "cli: no subcommand selected\n";
        return kExitSchema;
    } catch (const schema_error& e) {
        std::cerr << stage << ": " << e.what() << "\n";
        return kExitSchema;
    } catch (const io_error& e) {
        std::cerr << stage << ": " << e.what() << "\n";
        return kExitIo;
    } catch (const numeric_error& e) {
        std::cerr << stage << ": " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << stage << ": " << e.what() << "\n";
        return 1;
    }
}

}  // namespace tcwv
