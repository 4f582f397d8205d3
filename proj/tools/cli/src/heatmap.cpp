#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "fluxlattice/cli/output.hpp"
#include "fluxlattice/error.hpp"

namespace fluxlattice::cli {

namespace {

constexpr int kLevels = 64;
constexpr double kPlotW = 640.0;
constexpr double kPlotH = 420.0;
constexpr double kLeft = 70.0;
constexpr double kTop = 40.0;
constexpr double kBar = 18.0;

// Viridis, sampled at nine stops.
constexpr std::array<std::array<double, 3>, 9> kStops{{{68, 1, 84},
                                                       {71, 44, 122},
                                                       {59, 81, 139},
                                                       {44, 113, 142},
                                                       {33, 144, 141},
                                                       {39, 173, 129},
                                                       {92, 200, 99},
                                                       {170, 220, 50},
                                                       {253, 231, 37}}};

std::string colour(int level)
{
    const double x = static_cast<double>(level) / (kLevels - 1) * (kStops.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(x), kStops.size() - 2);
    const double f = x - static_cast<double>(i);
    char buf[8];
    int rgb[3];
    for (int c = 0; c < 3; ++c)
        rgb[c] = static_cast<int>(std::lround(kStops[i][c] + f * (kStops[i + 1][c] - kStops[i][c])));
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string heatmap_svg(const EvolutionRecord& record, const HeatmapOptions& options)
{
    if (record.empty() || record.sites.empty() || record.p_site.size() == 0)
        throw InvalidArgument("cannot render a heatmap of an empty record");
    if (options.max_rows < 1 || options.max_columns < 1)
        throw InvalidArgument("heatmap bin counts must be positive");

    const auto samples = static_cast<int>(record.sample_count());
    const auto sites = static_cast<int>(record.sites.size());
    const int rows = std::min(samples, options.max_rows);
    const int cols = std::min(sites, options.max_columns);

    // Each bin takes the maximum of the sites it covers so thin fronts stay
    // visible; rows pick the nearest sample.
    std::vector<double> grid(static_cast<std::size_t>(rows * cols), 0.0);
    double vmax = 0.0;
    for (int r = 0; r < rows; ++r) {
        const int s = rows == 1 ? 0
                                : static_cast<int>(std::lround(static_cast<double>(r) * (samples - 1)
                                                               / (rows - 1)));
        for (int m = 0; m < sites; ++m) {
            const int c = static_cast<int>(static_cast<long long>(m) * cols / sites);
            double& cell = grid[static_cast<std::size_t>(r * cols + c)];
            cell = std::max(cell, record.p_site(s, m));
            vmax = std::max(vmax, cell);
        }
    }

    const double cw = kPlotW / cols;
    const double rh = kPlotH / rows;
    const double width = kLeft + kPlotW + 90.0;
    const double height = kTop + kPlotH + 60.0;
    std::string svg;
    svg.reserve(1 << 20);
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\""
           + num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height)
           + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!options.title.empty())
        svg += "<text x=\"" + num(kLeft) + "\" y=\"22\" font-size=\"14\">" + escape(options.title)
               + "</text>\n";
    svg += "<g shape-rendering=\"crispEdges\">\n";
    svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kPlotW)
           + "\" height=\"" + num(kPlotH) + "\" fill=\"" + colour(0) + "\"/>\n";
    for (int r = 0; r < rows; ++r) {
        // Time runs upwards: row 0 (t = 0) sits at the bottom.
        const double y = kTop + kPlotH - (r + 1) * rh;
        int c = 0;
        while (c < cols) {
            const double v = grid[static_cast<std::size_t>(r * cols + c)];
            const int level =
                vmax > 0.0 ? std::min(kLevels - 1, static_cast<int>(v / vmax * (kLevels - 1) + 0.5)) : 0;
            int end = c + 1;
            while (end < cols) {
                const double w = grid[static_cast<std::size_t>(r * cols + end)];
                const int l2 = vmax > 0.0
                                   ? std::min(kLevels - 1,
                                              static_cast<int>(w / vmax * (kLevels - 1) + 0.5))
                                   : 0;
                if (l2 != level)
                    break;
                ++end;
            }
            if (level > 0)
                svg += "<rect x=\"" + num(kLeft + c * cw) + "\" y=\"" + num(y) + "\" width=\""
                       + num((end - c) * cw) + "\" height=\"" + num(rh) + "\" fill=\""
                       + colour(level) + "\"/>\n";
            c = end;
        }
    }
    svg += "</g>\n";

    // Coupling sites.
    const int m_lo = record.sites.front();
    for (int m : options.marked_sites) {
        const int idx = m - m_lo;
        if (idx < 0 || idx >= sites)
            continue;
        const double x = kLeft + (static_cast<double>(idx) * cols / sites + 0.5) * cw;
        svg += "<line x1=\"" + num(x) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(x) + "\" y2=\""
               + num(kTop + kPlotH)
               + "\" stroke=\"white\" stroke-opacity=\"0.5\" stroke-dasharray=\"4 4\"/>\n";
        svg += "<path d=\"M" + num(x) + " " + num(kTop + kPlotH + 2) + " l-5 9 h10 z\" fill=\"#d62728\"/>\n";
    }

    // Axes and ticks.
    svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kPlotW)
           + "\" height=\"" + num(kPlotH) + "\" fill=\"none\" stroke=\"black\"/>\n";
    const double t_end = record.times.back();
    for (int i = 0; i <= 4; ++i) {
        const int idx = static_cast<int>(std::lround(i * (sites - 1) / 4.0));
        const double x = kLeft + (static_cast<double>(idx) * cols / sites + 0.5) * cw;
        svg += "<text x=\"" + num(x) + "\" y=\"" + num(kTop + kPlotH + 26)
               + "\" text-anchor=\"middle\">" + std::to_string(m_lo + idx) + "</text>\n";
        const double t = t_end * i / 4.0;
        const double y = kTop + kPlotH - kPlotH * i / 4.0;
        svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y + 4)
               + "\" text-anchor=\"end\">" + label(t) + "</text>\n";
    }
    svg += "<text x=\"" + num(kLeft + kPlotW / 2) + "\" y=\"" + num(kTop + kPlotH + 46)
           + "\" text-anchor=\"middle\">site m</text>\n";
    svg += "<text transform=\"translate(20 " + num(kTop + kPlotH / 2)
           + ") rotate(-90)\" text-anchor=\"middle\">time (1/J)</text>\n";

    // Colour bar.
    const double bx = kLeft + kPlotW + 20.0;
    for (int l = 0; l < kLevels; ++l) {
        const double h = kPlotH / kLevels;
        svg += "<rect x=\"" + num(bx) + "\" y=\"" + num(kTop + kPlotH - (l + 1) * h)
               + "\" width=\"" + num(kBar) + "\" height=\"" + num(h + 0.5) + "\" fill=\""
               + colour(l) + "\"/>\n";
    }
    svg += "<text x=\"" + num(bx + kBar + 4) + "\" y=\"" + num(kTop + 10) + "\">" + label(vmax)
           + "</text>\n";
    svg += "<text x=\"" + num(bx + kBar + 4) + "\" y=\"" + num(kTop + kPlotH) + "\">0</text>\n";
    svg += "<text x=\"" + num(bx) + "\" y=\"" + num(kTop - 8) + "\">P_m</text>\n";
    svg += "</svg>\n";
    return svg;
}

void render_heatmap(const EvolutionRecord& record, const std::filesystem::path& path,
                    const HeatmapOptions& options)
{
    const std::string svg = heatmap_svg(record, options);
    write_file(path, svg);
}

} // namespace fluxlattice::cli
