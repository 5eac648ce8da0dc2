#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "hetfuse/common.hpp"

namespace hetfuse {

// Minimal SVG line charts for the experiment outputs. One series per label,
// points sorted by x.
struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

inline void write_svg_lineplot(const std::filesystem::path& path, const std::string& title,
                               const std::string& x_label, const std::string& y_label,
                               std::vector<PlotSeries> series) {
    check(!series.empty(), ErrorKind::Config, "plot needs at least one series");
    const double W = 640, H = 420, ml = 70, mr = 30, mt = 45, mb = 55;
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (auto& s : series) {
        std::sort(s.points.begin(), s.points.end());
        for (const auto& [x, y] : s.points) {
            x_lo = std::min(x_lo, x); x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y); y_hi = std::max(y_hi, y);
        }
    }
    if (x_hi <= x_lo) x_hi = x_lo + 1;
    if (y_hi <= y_lo) y_hi = y_lo + 1;
    const double y_pad = 0.08 * (y_hi - y_lo);
    y_lo -= y_pad; y_hi += y_pad;

    auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - y_lo) / (y_hi - y_lo) * (H - mt - mb); };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::ofstream out(path);
    check(out.good(), ErrorKind::Io, "cannot write plot: ", path.string());
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
        << "</text>\n";
    // axes
    out << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
        << "' stroke='black'/>\n";
    out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
        << "' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x_lo + (x_hi - x_lo) * i / 4.0;
        const double yv = y_lo + (y_hi - y_lo) * i / 4.0;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", xv);
        out << "<text x='" << px(xv) << "' y='" << H - mb + 18
            << "' text-anchor='middle' font-size='11'>" << buf << "</text>\n";
        std::snprintf(buf, sizeof(buf), "%.3g", yv);
        out << "<text x='" << ml - 8 << "' y='" << py(yv) + 4
            << "' text-anchor='end' font-size='11'>" << buf << "</text>\n";
        out << "<line x1='" << ml << "' y1='" << py(yv) << "' x2='" << W - mr << "' y2='" << py(yv)
            << "' stroke='#dddddd'/>\n";
    }
    out << "<text x='" << (ml + W - mr) / 2 << "' y='" << H - 12
        << "' text-anchor='middle' font-size='13'>" << x_label << "</text>\n";
    out << "<text x='18' y='" << (mt + H - mb) / 2
        << "' text-anchor='middle' font-size='13' transform='rotate(-90 18 "
        << (mt + H - mb) / 2 << ")'>" << y_label << "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const char* color = colors[si % 6];
        const auto& pts = series[si].points;
        if (pts.empty()) continue;
        out << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
        for (const auto& [x, y] : pts) out << px(x) << "," << py(y) << " ";
        out << "'/>\n";
        for (const auto& [x, y] : pts)
            out << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='3' fill='" << color
                << "'/>\n";
        out << "<text x='" << W - mr - 150 << "' y='" << mt + 16 * static_cast<double>(si) + 6
            << "' font-size='12' fill='" << color << "'>" << series[si].label << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace hetfuse
