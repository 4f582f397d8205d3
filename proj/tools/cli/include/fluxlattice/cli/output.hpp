#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "fluxlattice/dynamics.hpp"

namespace fluxlattice::cli {

/// Shortest form that keeps 17 significant digits, locale independent.
/// Non-finite values print as nan, inf, -inf.
std::string format_number(double value);

/// Column-major friendly numeric table written as CSV (header row, LF).
struct Table {
    std::string name; // file stem
    std::vector<std::string> columns;
    std::vector<double> cells; // row-major

    void add_row(std::initializer_list<double> row);
    void add_row(const std::vector<double>& row);
    std::size_t rows() const noexcept { return columns.empty() ? 0 : cells.size() / columns.size(); }
    double at(std::size_t row, std::size_t col) const { return cells[row * columns.size() + col]; }
};

std::string to_csv(const Table& table);

/// Writes bytes verbatim (no newline translation), replacing the file.
void write_file(const std::filesystem::path& path, std::string_view contents);

struct HeatmapOptions {
    std::vector<int> marked_sites; // coupling sites, drawn as vertical markers
    std::string title;
    int max_rows = 400;    // time bins
    int max_columns = 400; // site bins
};

/// Standalone SVG of P_m(t): sites along x, time upwards along y, linear
/// colour scale from 0 to the record maximum. Throws InvalidArgument for an
/// empty record.
std::string heatmap_svg(const EvolutionRecord& record, const HeatmapOptions& options = {});

/// heatmap_svg written to `path`; no file is created on error.
void render_heatmap(const EvolutionRecord& record, const std::filesystem::path& path,
                    const HeatmapOptions& options = {});

} // namespace fluxlattice::cli
