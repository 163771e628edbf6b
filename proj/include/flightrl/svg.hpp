// Minimal self-contained SVG line charts.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "flightrl/textio.hpp"

namespace flightrl::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    int width = 800;
    int height = 480;
};

namespace detail {

inline std::string escape(const std::string &s) {
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

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Round step (1, 2 or 5 times a power of ten) giving about n intervals.
inline double nice_step(double span, int n) {
    const double raw = span / n;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

} // namespace detail

inline void write(std::ostream &out, const Chart &c) {
    static const char *palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto &s : c.series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;

    const double left = 80, right = 20, top = 40, bottom = 60;
    const double pw = c.width - left - right;
    const double ph = c.height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width << "\" height=\""
        << c.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << c.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << detail::escape(c.title) << "</text>\n";

    const double xs = detail::nice_step(x1 - x0, 8);
    for (double v = std::ceil(x0 / xs) * xs; v <= x1 + 1e-9 * xs; v += xs) {
        out << "<line x1=\"" << detail::num(px(v)) << "\" y1=\"" << top << "\" x2=\""
            << detail::num(px(v)) << "\" y2=\"" << top + ph << "\" stroke=\"#e5e5e5\"/>\n";
        out << "<text x=\"" << detail::num(px(v)) << "\" y=\"" << top + ph + 16
            << "\" text-anchor=\"middle\">" << detail::tick(v) << "</text>\n";
    }
    const double ys = detail::nice_step(y1 - y0, 6);
    for (double v = std::ceil(y0 / ys) * ys; v <= y1 + 1e-9 * ys; v += ys) {
        out << "<line x1=\"" << left << "\" y1=\"" << detail::num(py(v)) << "\" x2=\"" << left + pw
            << "\" y2=\"" << detail::num(py(v)) << "\" stroke=\"#e5e5e5\"/>\n";
        out << "<text x=\"" << left - 6 << "\" y=\"" << detail::num(py(v) + 4)
            << "\" text-anchor=\"end\">" << detail::tick(v) << "</text>\n";
    }
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left + pw / 2 << "\" y=\"" << c.height - 18
        << "\" text-anchor=\"middle\">" << detail::escape(c.x_label) << "</text>\n";
    out << "<text transform=\"translate(18," << top + ph / 2
        << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape(c.y_label) << "</text>\n";

    for (std::size_t k = 0; k < c.series.size(); ++k) {
        const auto &s = c.series[k];
        const char *colour = palette[k % (sizeof palette / sizeof *palette)];
        out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (!first) out << ' ';
            out << detail::num(px(s.x[i])) << ',' << detail::num(py(s.y[i]));
            first = false;
        }
        out << "\"/>\n";
        const double ly = top + 16 + 16.0 * static_cast<double>(k);
        out << "<line x1=\"" << left + pw - 170 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw - 150
            << "\" y2=\"" << ly - 4 << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << left + pw - 145 << "\" y=\"" << ly << "\">" << detail::escape(s.label)
            << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace flightrl::svg
