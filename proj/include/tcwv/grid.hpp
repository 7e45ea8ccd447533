#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "tcwv/csv.hpp"
#include "tcwv/data.hpp"
#include "tcwv/errors.hpp"

namespace tcwv {

inline constexpr double kGridMissing = std::numeric_limits<double>::quiet_NaN();

inline bool grid_missing(double v) { return std::isnan(v); }

// Gridded monthly scalar field. values is a flat [time x lat x lon] array;
// NaN marks cells with no data.
struct GridCube {
    std::vector<double> lats;
    std::vector<double> lons;
    std::vector<std::string> times;
    std::vector<double> values;

    std::size_t index(std::size_t t, std::size_t la, std::size_t lo) const {
        return (t * lats.size() + la) * lons.size() + lo;
    }

    double at(std::size_t t, std::size_t la, std::size_t lo) const { return values[index(t, la, lo)]; }

    void validate() const {
        if (lats.empty() || lons.empty() || times.empty()) throw schema_error("grid has an empty axis");
        if (values.size() != times.size() * lats.size() * lons.size()) {
            throw schema_error("grid value count does not match axis extents");
        }
        if (!std::is_sorted(lats.begin(), lats.end()) ||
            std::adjacent_find(lats.begin(), lats.end()) != lats.end()) {
            throw schema_error("grid latitudes must be strictly increasing");
        }
        if (!std::is_sorted(lons.begin(), lons.end()) ||
            std::adjacent_find(lons.begin(), lons.end()) != lons.end()) {
            throw schema_error("grid longitudes must be strictly increasing");
        }
        if (!std::is_sorted(times.begin(), times.end()) ||
            std::adjacent_find(times.begin(), times.end()) != times.end()) {
            throw schema_error("grid time stamps must be strictly increasing");
        }
    }
};

// Nine feature channels on shared axes, one slot per grid cell, NaN where a
// channel has no data.
struct FeatureGrid {
    std::vector<double> lats;
    std::vector<double> lons;
    std::vector<std::string> times;
    std::array<std::vector<double>, kFeatureCount> channels;

    std::size_t cell_count() const { return times.size() * lats.size() * lons.size(); }

    void validate() const {
        if (lats.empty() || lons.empty() || times.empty()) throw schema_error("feature grid has an empty axis");
        for (const auto& channel : channels) {
            if (channel.size() != cell_count()) {
                throw schema_error("feature grid channel extent does not match axes");
            }
        }
    }
};

namespace detail {

template <typename T>
std::vector<T> sorted_unique(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline std::size_t axis_index(const std::vector<double>& axis, double value) {
    return static_cast<std::size_t>(std::lower_bound(axis.begin(), axis.end(), value) - axis.begin());
}

inline std::size_t axis_index(const std::vector<std::string>& axis, const std::string& value) {
    return static_cast<std::size_t>(std::lower_bound(axis.begin(), axis.end(), value) - axis.begin());
}

inline void require_coords_and_times(const SampleTable& table) {
    if (!table.has_coords() || !table.has_times()) {
        throw schema_error("gridding requires lat, lon and time columns");
    }
}

}  // namespace detail

// Arranges a coordinate-bearing sample table onto its implied grid, target
// channel only. Duplicate cells keep the last row seen.
inline GridCube table_to_grid(const SampleTable& table) {
    detail::require_coords_and_times(table);
    GridCube grid;
    grid.lats = detail::sorted_unique(table.lats);
    grid.lons = detail::sorted_unique(table.lons);
    grid.times = detail::sorted_unique(table.times);
    grid.values.assign(grid.times.size() * grid.lats.size() * grid.lons.size(), kGridMissing);
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const std::size_t t = detail::axis_index(grid.times, table.times[r]);
        const std::size_t la = detail::axis_index(grid.lats, table.lats[r]);
        const std::size_t lo = detail::axis_index(grid.lons, table.lons[r]);
        grid.values[grid.index(t, la, lo)] = table.targets[r];
    }
    grid.validate();
    return grid;
}

// Same arrangement for all nine feature channels.
inline FeatureGrid table_to_feature_grid(const SampleTable& table) {
    detail::require_coords_and_times(table);
    FeatureGrid grid;
    grid.lats = detail::sorted_unique(table.lats);
    grid.lons = detail::sorted_unique(table.lons);
    grid.times = detail::sorted_unique(table.times);
    const std::size_t cells = grid.cell_count();
    for (auto& channel : grid.channels) channel.assign(cells, kGridMissing);
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const std::size_t t = detail::axis_index(grid.times, table.times[r]);
        const std::size_t la = detail::axis_index(grid.lats, table.lats[r]);
        const std::size_t lo = detail::axis_index(grid.lons, table.lons[r]);
        const std::size_t cell = (t * grid.lats.size() + la) * grid.lons.size() + lo;
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            grid.channels[f][cell] = table.features[r * kFeatureCount + f];
        }
    }
    grid.validate();
    return grid;
}

// Gridded CSV: header time,lat,lon,tcwv, one row per non-missing cell.
inline void write_grid_csv(const std::string& path, const GridCube& grid) {
    grid.validate();
    std::ofstream out = csv::open_output(path);
    out << "time,lat,lon,tcwv\n";
    for (std::size_t t = 0; t < grid.times.size(); ++t) {
        for (std::size_t la = 0; la < grid.lats.size(); ++la) {
            for (std::size_t lo = 0; lo < grid.lons.size(); ++lo) {
                const double v = grid.at(t, la, lo);
                if (grid_missing(v)) continue;
                out << grid.times[t] << ',' << csv::format_double(grid.lats[la]) << ','
                    << csv::format_double(grid.lons[lo]) << ',' << csv::format_double(v) << '\n';
            }
        }
    }
    if (!out) throw io_error("failed writing " + path);
}

inline GridCube read_grid_csv(const std::string& path) {
    const std::vector<std::string> lines = csv::read_lines(path);
    if (lines.empty()) throw schema_error("empty file: " + path);
    const std::vector<std::string> header = csv::split_line(lines[0]);
    auto find = [&](std::string_view name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (csv::trim(header[i]) == name) return i;
        }
        throw schema_error("grid file " + path + " is missing column \"" + std::string(name) + "\"");
    };
    const std::size_t time_col = find("time");
    const std::size_t lat_col = find("lat");
    const std::size_t lon_col = find("lon");
    const std::size_t value_col = find("tcwv");

    struct Cell {
        std::string time;
        double lat, lon, value;
    };
    std::vector<Cell> cells;
    std::vector<double> lats, lons;
    std::vector<std::string> times;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (csv::trim(lines[li]).empty()) continue;
        const std::vector<std::string> fields = csv::split_line(lines[li]);
        if (fields.size() != header.size()) {
            throw schema_error(path + ": row " + std::to_string(li + 1) + " has wrong field count");
        }
        const auto lat = csv::parse_double(fields[lat_col]);
        const auto lon = csv::parse_double(fields[lon_col]);
        const auto value = csv::parse_double(fields[value_col]);
        if (!lat || !lon || !value) {
            throw schema_error(path + ": row " + std::to_string(li + 1) + " has a non-numeric cell");
        }
        Cell cell{std::string(csv::trim(fields[time_col])), *lat, *lon, *value};
        lats.push_back(cell.lat);
        lons.push_back(cell.lon);
        times.push_back(cell.time);
        cells.push_back(std::move(cell));
    }
    if (cells.empty()) throw numeric_error("no grid cells in " + path);

    GridCube grid;
    grid.lats = detail::sorted_unique(std::move(lats));
    grid.lons = detail::sorted_unique(std::move(lons));
    grid.times = detail::sorted_unique(std::move(times));
    grid.values.assign(grid.times.size() * grid.lats.size() * grid.lons.size(), kGridMissing);
    for (const Cell& cell : cells) {
        const std::size_t t = detail::axis_index(grid.times, cell.time);
        const std::size_t la = detail::axis_index(grid.lats, cell.lat);
        const std::size_t lo = detail::axis_index(grid.lons, cell.lon);
        grid.values[grid.index(t, la, lo)] = cell.value;
    }
    grid.validate();
    return grid;
}

}  // namespace tcwv
