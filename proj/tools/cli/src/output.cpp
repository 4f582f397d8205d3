#include "fluxlattice/cli/output.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace fluxlattice::cli {

std::string format_number(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    if (value == 0.0)
        return "0"; // folds -0 as well
    std::array<char, 64> buf{};
    const auto res =
        std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

void Table::add_row(std::initializer_list<double> row)
{
    if (row.size() != columns.size())
        throw std::logic_error("table row width mismatch");
    cells.insert(cells.end(), row.begin(), row.end());
}

void Table::add_row(const std::vector<double>& row)
{
    if (row.size() != columns.size())
        throw std::logic_error("table row width mismatch");
    cells.insert(cells.end(), row.begin(), row.end());
}

std::string to_csv(const Table& table)
{
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c)
            out += ',';
        out += table.columns[c];
    }
    out += '\n';
    const std::size_t width = table.columns.size();
    for (std::size_t i = 0; i < table.cells.size(); ++i) {
        out += format_number(table.cells[i]);
        out += (i + 1) % width == 0 ? '\n' : ',';
    }
    return out;
}

void write_file(const std::filesystem::path& path, std::string_view contents)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::system_error(errno, std::generic_category(), "cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out)
        throw std::system_error(errno, std::generic_category(), "cannot write " + path.string());
}

} // namespace fluxlattice::cli
