#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcwv/csv.hpp"
#include "tcwv/errors.hpp"
#include "tcwv/rng.hpp"

namespace tcwv {

inline constexpr std::size_t kFeatureCount = 9;

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "msl", "sp", "sst", "u100", "v100", "u10", "v10", "d2m", "t2m",
};

inline constexpr const char* kTargetName = "tcwv";

// Flat table of samples: nine features plus the target, with optional
// per-row coordinates. Feature storage is row major [rows x 9].
struct SampleTable {
    std::vector<double> features;
    std::vector<double> targets;
    std::vector<double> lats;
    std::vector<double> lons;
    std::vector<std::string> times;

    std::size_t rows() const { return targets.size(); }
    bool has_coords() const { return !lats.empty(); }
    bool has_times() const { return !times.empty(); }

    std::span<const double> row(std::size_t r) const {
        return {features.data() + r * kFeatureCount, kFeatureCount};
    }

    void append(std::span<const double> feature_row, double target) {
        features.insert(features.end(), feature_row.begin(), feature_row.end());
        targets.push_back(target);
    }
};

// Per-feature standardization constants, indexed like kFeatureNames.
struct NormStats {
    std::array<double, kFeatureCount> means{};
    std::array<double, kFeatureCount> stds{};
};

struct SplitSpec {
    double train_fraction = 0.01;
    double test_fraction = 0.005;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
            throw schema_error("train_fraction must be in (0, 1]");
        }
        if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
            throw schema_error("test_fraction must be in [0, 1)");
        }
        if (train_fraction + test_fraction > 1.0) {
            throw schema_error("train_fraction + test_fraction must not exceed 1");
        }
    }
};

enum class MissingPolicy { drop, fill_mean };

namespace detail {

struct ColumnMap {
    std::array<std::size_t, kFeatureCount> feature_cols{};
    std::size_t target_col = 0;
    std::optional<std::size_t> lat_col;
    std::optional<std::size_t> lon_col;
    std::optional<std::size_t> time_col;
    std::size_t width = 0;
};

inline ColumnMap map_columns(const std::vector<std::string>& header) {
    ColumnMap map;
    map.width = header.size();
    auto find = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (csv::trim(header[i]) == name) return i;
        }
        return std::nullopt;
    };
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        const auto col = find(kFeatureNames[f]);
        if (!col) throw schema_error(std::string("header is missing column \"") + kFeatureNames[f] + "\"");
        map.feature_cols[f] = *col;
    }
    const auto target = find(kTargetName);
    if (!target) throw schema_error(std::string("header is missing column \"") + kTargetName + "\"");
    map.target_col = *target;
    map.lat_col = find("lat");
    map.lon_col = find("lon");
    map.time_col = find("time");
    return map;
}

}  // namespace detail

// Reads a sample CSV. Rows with an unusable target or coordinate are always
// dropped; rows with unusable feature cells are dropped under the drop
// policy and filled with the column mean of the valid cells under fill_mean.
inline SampleTable ingest_csv(const std::string& path, MissingPolicy policy) {
    const std::vector<std::string> lines = csv::read_lines(path);
    if (lines.empty()) throw schema_error("empty file: " + path);
    const detail::ColumnMap map = detail::map_columns(csv::split_line(lines[0]));

    struct RawRow {
        std::array<std::optional<double>, kFeatureCount> features;
        double target = 0.0;
        double lat = 0.0, lon = 0.0;
        std::string time;
    };
    std::vector<RawRow> raw;
    raw.reserve(lines.size() > 0 ? lines.size() - 1 : 0);

    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (csv::trim(lines[li]).empty()) continue;
        const std::vector<std::string> fields = csv::split_line(lines[li]);
        if (fields.size() != map.width) continue;  // structurally broken row
        RawRow row;
        const auto target = csv::parse_double(fields[map.target_col]);
        if (!target) continue;
        row.target = *target;
        if (map.lat_col) {
            const auto lat = csv::parse_double(fields[*map.lat_col]);
            if (!lat || *lat < -90.0 || *lat > 90.0) continue;
            row.lat = *lat;
        }
        if (map.lon_col) {
            const auto lon = csv::parse_double(fields[*map.lon_col]);
            if (!lon || *lon < -180.0 || *lon > 180.0) continue;
            row.lon = *lon;
        }
        if (map.time_col) row.time = std::string(csv::trim(fields[*map.time_col]));
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            row.features[f] = csv::parse_double(fields[map.feature_cols[f]]);
        }
        raw.push_back(std::move(row));
    }

    std::array<double, kFeatureCount> fill{};
    if (policy == MissingPolicy::fill_mean) {
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            double sum = 0.0;
            std::size_t count = 0;
            for (const auto& row : raw) {
                if (row.features[f]) {
                    sum += *row.features[f];
                    ++count;
                }
            }
            fill[f] = count > 0 ? sum / static_cast<double>(count) : 0.0;
        }
    }

    const bool keep_coords = map.lat_col && map.lon_col;
    SampleTable table;
    for (const auto& row : raw) {
        std::array<double, kFeatureCount> values{};
        bool usable = true;
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            if (row.features[f]) {
                values[f] = *row.features[f];
            } else if (policy == MissingPolicy::fill_mean) {
                values[f] = fill[f];
            } else {
                usable = false;
                break;
            }
        }
        if (!usable) continue;
        table.append(values, row.target);
        if (keep_coords) {
            table.lats.push_back(row.lat);
            table.lons.push_back(row.lon);
        }
        if (map.time_col) table.times.push_back(row.time);
    }
    if (table.rows() == 0) throw numeric_error("no valid rows in " + path);
    return table;
}

namespace detail {

inline double population_std(std::span<const double> values, double mean) {
    double sum = 0.0;
    for (double v : values) {
        const double d = v - mean;
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(values.size()));
}

}  // namespace detail

// Per-feature z-score statistics over the table, population convention.
// Constant columns get std clamped to 1 so the transform stays defined.
inline NormStats compute_stats(const SampleTable& table) {
    if (table.rows() < 2) throw numeric_error("standardize needs at least 2 rows");
    NormStats stats;
    const std::size_t n = table.rows();
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) sum += table.features[r * kFeatureCount + f];
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double d = table.features[r * kFeatureCount + f] - mean;
            sq += d * d;
        }
        double std_dev = std::sqrt(sq / static_cast<double>(n));
        if (std_dev < 1e-12) std_dev = 1.0;
        stats.means[f] = mean;
        stats.stds[f] = std_dev;
    }
    return stats;
}

inline void standardize_row(std::span<const double> in, const NormStats& stats, std::span<double> out) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        out[f] = (in[f] - stats.means[f]) / stats.stds[f];
    }
}

// Applies existing statistics to every feature column. Targets and
// coordinates pass through untouched.
inline SampleTable apply_stats(const SampleTable& table, const NormStats& stats) {
    SampleTable out = table;
    const std::size_t n = table.rows();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            out.features[r * kFeatureCount + f] =
                (table.features[r * kFeatureCount + f] - stats.means[f]) / stats.stds[f];
        }
    }
    return out;
}

inline SampleTable unapply_stats(const SampleTable& table, const NormStats& stats) {
    SampleTable out = table;
    const std::size_t n = table.rows();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            out.features[r * kFeatureCount + f] =
                table.features[r * kFeatureCount + f] * stats.stds[f] + stats.means[f];
        }
    }
    return out;
}

inline std::pair<SampleTable, NormStats> standardize(const SampleTable& table) {
    const NormStats stats = compute_stats(table);
    return {apply_stats(table, stats), stats};
}

namespace detail {

inline SampleTable gather_rows(const SampleTable& table, std::span<const std::size_t> indices) {
    SampleTable out;
    out.features.reserve(indices.size() * kFeatureCount);
    out.targets.reserve(indices.size());
    for (std::size_t idx : indices) {
        out.append(table.row(idx), table.targets[idx]);
        if (table.has_coords()) {
            out.lats.push_back(table.lats[idx]);
            out.lons.push_back(table.lons[idx]);
        }
        if (table.has_times()) out.times.push_back(table.times[idx]);
    }
    return out;
}

}  // namespace detail

// Seeded uniform shuffle, then a prefix split: the first
// floor(N * train_fraction) rows (at least 1) train, the next
// floor(N * test_fraction) rows test. Disjoint by construction.
inline std::pair<SampleTable, SampleTable> shuffle_split(const SampleTable& table, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = table.rows();
    if (n == 0) throw numeric_error("cannot split an empty table");
    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(indices);
    std::size_t n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.train_fraction));
    n_train = std::clamp<std::size_t>(n_train, 1, n);
    std::size_t n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.test_fraction));
    n_test = std::min(n_test, n - n_train);
    const std::span<const std::size_t> all(indices);
    return {detail::gather_rows(table, all.subspan(0, n_train)),
            detail::gather_rows(table, all.subspan(n_train, n_test))};
}

struct SynthConfig {
    std::size_t n_samples = 10000;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    double lat_min = -5.0;
    double lat_max = 34.0;
    double lon_min = -34.0;
    double lon_max = 35.0;
    double resolution = 0.25;

    void validate() const {
        if (n_samples == 0) throw schema_error("n_samples must be positive");
        if (!(noise_std >= 0.0)) throw schema_error("noise_std must be non-negative");
        if (!(lat_min < lat_max)) throw schema_error("lat bounds must be ordered");
        if (!(lon_min < lon_max)) throw schema_error("lon bounds must be ordered");
        if (!(resolution > 0.0)) throw schema_error("resolution must be positive");
        if (lat_min < -90.0 || lat_max > 90.0) throw schema_error("lat bounds outside [-90, 90]");
        if (lon_min < -180.0 || lon_max > 180.0) throw schema_error("lon bounds outside [-180, 180]");
    }
};

// Constants of the synthetic water-vapor reference function. Documented in
// docs/synthetic_reference.md and frozen by a golden test; changing any of
// them invalidates recorded outputs.
namespace synth {
inline constexpr double kProxyGain = 6.5;
inline constexpr double kContrastGain = 0.18;
inline constexpr double kWindGain = 0.2;
inline constexpr double kLatGain = 2.0;
inline constexpr double kLatCenterDeg = 2.5;
inline constexpr double kLatWidthDeg = 12.0;
inline constexpr double kClampLo = 0.0;
inline constexpr double kClampHi = 60.0;

// Magnus-style saturation proxy, dimensionless, ~0.8 at 270 K, ~6.9 at 303 K.
inline double saturation_proxy(double temp_kelvin) {
    const double tc = temp_kelvin - 273.15;
    return std::exp(17.625 * tc / (tc + 243.04));
}

inline double lat_modulation(double lat_deg) {
    const double z = (lat_deg - kLatCenterDeg) / kLatWidthDeg;
    return std::exp(-z * z);
}
}  // namespace synth

// Noise-free target value for one sample of the synthetic field.
inline double synth_reference(double lat, double sst, double u10, double v10, double d2m, double t2m) {
    const double base = synth::kProxyGain * synth::saturation_proxy(d2m) +
                        synth::kContrastGain * (t2m - sst) +
                        synth::kWindGain * std::hypot(u10, v10) +
                        synth::kLatGain * synth::lat_modulation(lat);
    return std::clamp(base, synth::kClampLo, synth::kClampHi);
}

// Draws a synthetic sample table. Feature and noise draws come from two
// independent seeded streams, so tables generated with different noise_std
// but the same seed share identical features.
inline SampleTable synth_generate(const SynthConfig& config) {
    config.validate();
    Rng feature_rng(mix_seed(config.seed, 0));
    Rng noise_rng(mix_seed(config.seed, 1));

    const auto axis_size = [&](double lo, double hi) {
        return static_cast<std::uint64_t>(std::llround((hi - lo) / config.resolution)) + 1;
    };
    const std::uint64_t n_lat = axis_size(config.lat_min, config.lat_max);
    const std::uint64_t n_lon = axis_size(config.lon_min, config.lon_max);

    SampleTable table;
    table.features.reserve(config.n_samples * kFeatureCount);
    table.targets.reserve(config.n_samples);
    table.lats.reserve(config.n_samples);
    table.lons.reserve(config.n_samples);
    table.times.reserve(config.n_samples);

    for (std::size_t s = 0; s < config.n_samples; ++s) {
        const double lat = config.lat_min + config.resolution * static_cast<double>(feature_rng.below(n_lat));
        const double lon = config.lon_min + config.resolution * static_cast<double>(feature_rng.below(n_lon));
        const std::uint64_t month = 1 + feature_rng.below(12);
        char stamp[8];
        std::snprintf(stamp, sizeof(stamp), "2004-%02u", static_cast<unsigned>(month));

        std::array<double, kFeatureCount> x{};
        x[0] = feature_rng.uniform(95000.0, 103000.0);  // msl
        x[1] = feature_rng.uniform(95000.0, 103000.0);  // sp
        x[2] = feature_rng.uniform(271.0, 303.0);       // sst
        x[3] = feature_rng.uniform(-15.0, 15.0);        // u100
        x[4] = feature_rng.uniform(-15.0, 15.0);        // v100
        x[5] = feature_rng.uniform(-15.0, 15.0);        // u10
        x[6] = feature_rng.uniform(-15.0, 15.0);        // v10
        x[7] = feature_rng.uniform(270.0, 303.0);       // d2m
        x[8] = feature_rng.uniform(270.0, 305.0);       // t2m

        const double clean = synth_reference(lat, x[2], x[5], x[6], x[7], x[8]);
        const double target = clean + config.noise_std * noise_rng.normal(0.0, 1.0);

        table.append(x, target);
        table.lats.push_back(lat);
        table.lons.push_back(lon);
        table.times.emplace_back(stamp);
    }
    return table;
}

// Writes a sample table in the canonical ingestion format. Coordinates come
// first when present so round-tripping keeps them.
inline void write_table_csv(const std::string& path, const SampleTable& table) {
    std::ofstream out = csv::open_output(path);
    std::string header;
    if (table.has_coords()) header += "lat,lon,";
    if (table.has_times()) header += "time,";
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        header += kFeatureNames[f];
        header += ',';
    }
    header += kTargetName;
    out << header << '\n';
    for (std::size_t r = 0; r < table.rows(); ++r) {
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
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            line += csv::format_double(table.features[r * kFeatureCount + f]);
            line += ',';
        }
        line += csv::format_double(table.targets[r]);
        out << line << '\n';
    }
    if (!out) throw io_error("failed writing " + path);
}

}  // namespace tcwv
