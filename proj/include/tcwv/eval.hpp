#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcwv/data.hpp"
#include "tcwv/errors.hpp"
#include "tcwv/grid.hpp"
#include "tcwv/mlp.hpp"

namespace tcwv {

// Pointwise comparison metrics. r2 is empty when the reference has zero
// variance; pearson is empty when either series has zero variance. Keeping
// them optional lets the defined metrics of a degenerate comparison through
// while callers that need the undefined one fail loudly.
struct Metrics {
    double mae = 0.0;
    double mean_bias = 0.0;
    double stddev_diff = 0.0;
    std::optional<double> r2;
    std::optional<double> pearson;
    std::size_t n = 0;
};

inline Metrics compute_metrics(std::span<const double> predicted, std::span<const double> reference) {
    if (predicted.size() != reference.size()) {
        throw schema_error("predicted and reference lengths differ");
    }
    const std::size_t n = predicted.size();
    if (n < 2) throw numeric_error("compute_metrics needs at least 2 points");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(predicted[i]) || !std::isfinite(reference[i])) {
            throw numeric_error("compute_metrics requires finite inputs");
        }
    }

    const double dn = static_cast<double>(n);
    double sum_p = 0.0, sum_r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum_p += predicted[i];
        sum_r += reference[i];
    }
    const double mean_p = sum_p / dn;
    const double mean_r = sum_r / dn;

    double abs_sum = 0.0, diff_sum = 0.0;
    double sse = 0.0, var_p = 0.0, var_r = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = predicted[i] - reference[i];
        abs_sum += std::abs(d);
        diff_sum += d;
        sse += d * d;
        const double dp = predicted[i] - mean_p;
        const double dr = reference[i] - mean_r;
        var_p += dp * dp;
        var_r += dr * dr;
        cov += dp * dr;
    }

    Metrics m;
    m.n = n;
    m.mae = abs_sum / dn;
    m.mean_bias = diff_sum / dn;
    // Population variance of (p - r) through centered sums: (p_i - r_i)
    // minus its mean equals (p_i - mean_p) - (r_i - mean_r).
    m.stddev_diff = std::sqrt(std::max(0.0, (var_p + var_r - 2.0 * cov) / dn));

    // Zero-variance detection uses a scale-relative floor: exact arithmetic
    // would call a constant column zero, but means of repeated constants can
    // round, leaving variance at roundoff scale.
    const double scale_r = std::max(1.0, std::abs(mean_r));
    const double scale_p = std::max(1.0, std::abs(mean_p));
    const bool flat_r = std::sqrt(var_r / dn) <= 1e-12 * scale_r;
    const bool flat_p = std::sqrt(var_p / dn) <= 1e-12 * scale_p;
    if (!flat_r) m.r2 = 1.0 - sse / var_r;
    if (!flat_r && !flat_p) m.pearson = std::clamp(cov / std::sqrt(var_p * var_r), -1.0, 1.0);
    return m;
}

// Grid-wide prediction: standardize each complete cell's features with the
// model's stats and run the network; cells missing any channel stay missing.
inline GridCube predict_grid(const MlpParams& model, const NormStats& stats, const FeatureGrid& features) {
    features.validate();
    if (model.input_dim() != kFeatureCount) {
        throw schema_error("model input dim " + std::to_string(model.input_dim()) + " does not match " +
                           std::to_string(kFeatureCount) + " feature channels");
    }
    GridCube out;
    out.lats = features.lats;
    out.lons = features.lons;
    out.times = features.times;
    out.values.assign(features.cell_count(), kGridMissing);
    std::array<double, kFeatureCount> raw{};
    std::array<double, kFeatureCount> scaled{};
    for (std::size_t cell = 0; cell < out.values.size(); ++cell) {
        bool complete = true;
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            raw[f] = features.channels[f][cell];
            if (grid_missing(raw[f])) {
                complete = false;
                break;
            }
        }
        if (!complete) continue;
        standardize_row(raw, stats, scaled);
        out.values[cell] = forward_value(model, scaled);
    }
    out.validate();
    return out;
}

// One latitude row of a grid at one time slot, missing cells skipped.
struct Transect {
    double latitude = 0.0;
    std::vector<double> longitudes;
    std::vector<double> values;
};

// Selects the grid row nearest the requested latitude (ties break toward
// the smaller latitude). Requests farther than the local row spacing from
// the nearest row are out of domain.
inline Transect extract_transect(const GridCube& grid, double latitude, std::size_t time_index) {
    grid.validate();
    if (time_index >= grid.times.size()) {
        throw schema_error("time index " + std::to_string(time_index) + " out of range");
    }
    std::size_t best = 0;
    double best_dist = std::abs(grid.lats[0] - latitude);
    for (std::size_t la = 1; la < grid.lats.size(); ++la) {
        const double dist = std::abs(grid.lats[la] - latitude);
        if (dist < best_dist) {
            best = la;
            best_dist = dist;
        }
    }
    if (grid.lats.size() > 1) {
        double spacing = 0.0;
        if (best > 0) spacing = std::max(spacing, grid.lats[best] - grid.lats[best - 1]);
        if (best + 1 < grid.lats.size()) spacing = std::max(spacing, grid.lats[best + 1] - grid.lats[best]);
        if (best_dist > spacing) {
            throw numeric_error("latitude " + csv::format_double(latitude) + " is outside the grid domain");
        }
    }
    Transect transect;
    transect.latitude = grid.lats[best];
    for (std::size_t lo = 0; lo < grid.lons.size(); ++lo) {
        const double v = grid.at(time_index, best, lo);
        if (grid_missing(v)) continue;
        transect.longitudes.push_back(grid.lons[lo]);
        transect.values.push_back(v);
    }
    return transect;
}

namespace detail {

inline int stamp_year(const std::string& stamp) {
    if (stamp.size() < 4) throw schema_error("time stamp \"" + stamp + "\" has no year");
    int year = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const char c = stamp[i];
        if (c < '0' || c > '9') throw schema_error("time stamp \"" + stamp + "\" has no year");
        year = year * 10 + (c - '0');
    }
    return year;
}

}  // namespace detail

// Per-cell mean over the months of one year, ignoring missing entries; a
// cell stays missing only when every month misses it. Output carries a
// single time slot stamped with the year.
inline GridCube annual_average(const GridCube& grid, int year) {
    grid.validate();
    std::vector<std::size_t> months;
    for (std::size_t t = 0; t < grid.times.size(); ++t) {
        if (detail::stamp_year(grid.times[t]) == year) months.push_back(t);
    }
    if (months.empty()) {
        throw numeric_error("grid has no months in year " + std::to_string(year));
    }
    GridCube out;
    out.lats = grid.lats;
    out.lons = grid.lons;
    char stamp[8];
    std::snprintf(stamp, sizeof(stamp), "%04d", year);
    out.times = {stamp};
    const std::size_t cells = grid.lats.size() * grid.lons.size();
    out.values.assign(cells, kGridMissing);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t t : months) {
            const double v = grid.values[t * cells + cell];
            if (grid_missing(v)) continue;
            sum += v;
            ++count;
        }
        if (count > 0) out.values[cell] = sum / static_cast<double>(count);
    }
    return out;
}

struct TransectComparison {
    double latitude = 0.0;
    double stddev_diff = 0.0;
    double correlation_pct = 0.0;
};

// The layout of the published comparison tables: annual-average both grids,
// slice each requested latitude, align by exact longitude equality and
// report the difference spread plus the correlation in percent.
inline std::vector<TransectComparison> compare_transects(const GridCube& predicted, const GridCube& reference,
                                                         std::span<const double> latitudes, int year) {
    const GridCube pred_year = annual_average(predicted, year);
    const GridCube ref_year = annual_average(reference, year);
    std::vector<TransectComparison> rows;
    rows.reserve(latitudes.size());
    for (double lat : latitudes) {
        const Transect p = extract_transect(pred_year, lat, 0);
        const Transect r = extract_transect(ref_year, lat, 0);
        std::vector<double> p_vals, r_vals;
        std::size_t i = 0, j = 0;
        while (i < p.longitudes.size() && j < r.longitudes.size()) {
            if (p.longitudes[i] < r.longitudes[j]) {
                ++i;
            } else if (r.longitudes[j] < p.longitudes[i]) {
                ++j;
            } else {
                p_vals.push_back(p.values[i]);
                r_vals.push_back(r.values[j]);
                ++i;
                ++j;
            }
        }
        if (p_vals.size() < 2) {
            throw numeric_error("fewer than 2 aligned cells at latitude " + csv::format_double(lat));
        }
        const Metrics m = compute_metrics(p_vals, r_vals);
        if (!m.pearson) {
            throw numeric_error("correlation undefined at latitude " + csv::format_double(lat) +
                                " (a transect is constant)");
        }
        rows.push_back({lat, m.stddev_diff, *m.pearson * 100.0});
    }
    return rows;
}

// Comparison-table CSV, two decimals to match the published layout.
inline void write_comparison_csv(const std::string& path, std::span<const TransectComparison> rows) {
    std::ofstream out = csv::open_output(path);
    out << "latitude,stddev_kg_m2,correlation_pct\n";
    for (const TransectComparison& row : rows) {
        out << csv::format_fixed2(row.latitude) << ',' << csv::format_fixed2(row.stddev_diff) << ','
            << csv::format_fixed2(row.correlation_pct) << '\n';
    }
    if (!out) throw io_error("failed writing " + path);
}

}  // namespace tcwv
