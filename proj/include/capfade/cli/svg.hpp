#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace capfade::cli {

struct Trace {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool markers = false;  // squares instead of a polyline
};

struct Panel {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool log_x = false;
    bool log_y = false;
    std::vector<Trace> traces;
    std::vector<std::pair<double, std::string>> vlines;  // position, label
};

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[i % 10];
}

namespace detail {

inline std::string escape_xml(const std::string& s) {
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

inline std::string fmt(double v, const char* spec = "%.2f") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::string tick_label(double v, bool log) {
    if (log) return "1e" + fmt(v, "%.0f");
    return fmt(v, "%.4g");
}

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;

    double map(double v) const { return log ? std::log10(v) : v; }
    bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
};

inline Axis fit_axis(const Panel& p, bool x_axis) {
    Axis a;
    a.log = x_axis ? p.log_x : p.log_y;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& t : p.traces) {
        const auto& vals = x_axis ? t.x : t.y;
        for (double v : vals) {
            if (!a.usable(v)) continue;
            lo = std::min(lo, a.map(v));
            hi = std::max(hi, a.map(v));
        }
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo <= 0.0) {
        const double pad = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
        lo -= pad;
        hi += pad;
    }
    if (a.log) {
        lo = std::floor(lo);
        hi = std::ceil(hi);
        if (hi == lo) hi += 1.0;
    }
    a.lo = lo;
    a.hi = hi;
    return a;
}

inline std::vector<double> ticks(const Axis& a) {
    std::vector<double> out;
    if (a.log) {
        const double step = std::max(1.0, std::ceil((a.hi - a.lo) / 8.0));
        for (double v = a.lo; v <= a.hi + 1e-9; v += step) out.push_back(v);
        return out;
    }
    const double raw = (a.hi - a.lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 5.0, 10.0}) {
        step = f * mag;
        if (step >= raw) break;
    }
    for (double v = std::ceil(a.lo / step) * step; v <= a.hi + 1e-9 * step; v += step) {
        out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return out;
}

} // namespace detail

/// Panels stacked vertically in one standalone SVG document.
inline std::string render_svg(const std::vector<Panel>& panels) {
    using namespace detail;
    const double width = 760.0, height = 320.0;
    const double left = 90.0, right = 20.0, top = 36.0, bottom = 50.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width, "%.0f") + "\" height=\"" +
         fmt(height * static_cast<double>(panels.size()), "%.0f") +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
        const Panel& p = panels[pi];
        const double oy = height * static_cast<double>(pi);
        const Axis ax = fit_axis(p, true);
        const Axis ay = fit_axis(p, false);
        auto px = [&](double v) { return left + (ax.map(v) - ax.lo) / (ax.hi - ax.lo) * plot_w; };
        auto py = [&](double v) { return oy + top + plot_h - (ay.map(v) - ay.lo) / (ay.hi - ay.lo) * plot_h; };
        auto tx = [&](double t) { return left + (t - ax.lo) / (ax.hi - ax.lo) * plot_w; };
        auto ty = [&](double t) { return oy + top + plot_h - (t - ay.lo) / (ay.hi - ay.lo) * plot_h; };

        s += "<g>\n";
        s += "<text x=\"" + fmt(width / 2) + "\" y=\"" + fmt(oy + 20) +
             "\" text-anchor=\"middle\" font-size=\"13\">" + escape_xml(p.title) + "</text>\n";
        s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(oy + top) + "\" width=\"" + fmt(plot_w) +
             "\" height=\"" + fmt(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";
        for (double t : ticks(ax)) {
            const double x = tx(t);
            s += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(oy + top + plot_h) + "\" x2=\"" + fmt(x) +
                 "\" y2=\"" + fmt(oy + top + plot_h + 4) + "\" stroke=\"black\"/>\n";
            s += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(oy + top + plot_h + 16) +
                 "\" text-anchor=\"middle\">" + escape_xml(tick_label(t, ax.log)) + "</text>\n";
        }
        for (double t : ticks(ay)) {
            const double y = ty(t);
            s += "<line x1=\"" + fmt(left - 4) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(left) +
                 "\" y2=\"" + fmt(y) + "\" stroke=\"black\"/>\n";
            s += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(y + 4) + "\" text-anchor=\"end\">" +
                 escape_xml(tick_label(t, ay.log)) + "</text>\n";
        }
        s += "<text x=\"" + fmt(left + plot_w / 2) + "\" y=\"" + fmt(oy + height - 12) +
             "\" text-anchor=\"middle\">" + escape_xml(p.xlabel) + "</text>\n";
        s += "<text transform=\"translate(16," + fmt(oy + top + plot_h / 2) +
             ") rotate(-90)\" text-anchor=\"middle\">" + escape_xml(p.ylabel) + "</text>\n";

        for (const auto& [pos, label] : p.vlines) {
            if (!ax.usable(pos)) continue;
            const double x = px(pos);
            s += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(oy + top) + "\" x2=\"" + fmt(x) + "\" y2=\"" +
                 fmt(oy + top + plot_h) + "\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>\n";
            s += "<text x=\"" + fmt(x + 3) + "\" y=\"" + fmt(oy + top + 12) + "\">" + escape_xml(label) +
                 "</text>\n";
        }

        for (std::size_t ti = 0; ti < p.traces.size(); ++ti) {
            const Trace& t = p.traces[ti];
            const std::size_t n = std::min(t.x.size(), t.y.size());
            if (t.markers) {
                for (std::size_t i = 0; i < n; ++i) {
                    if (!ax.usable(t.x[i]) || !ay.usable(t.y[i])) continue;
                    s += "<rect x=\"" + fmt(px(t.x[i]) - 3) + "\" y=\"" + fmt(py(t.y[i]) - 3) +
                         "\" width=\"6\" height=\"6\" fill=\"" + t.color + "\"/>\n";
                }
            } else {
                std::string pts;
                for (std::size_t i = 0; i < n; ++i) {
                    if (!ax.usable(t.x[i]) || !ay.usable(t.y[i])) continue;
                    pts += fmt(px(t.x[i])) + "," + fmt(py(t.y[i])) + " ";
                }
                if (!pts.empty()) pts.pop_back();
                s += "<polyline fill=\"none\" stroke=\"" + t.color + "\" stroke-width=\"1.2\" points=\"" +
                     pts + "\"/>\n";
            }
            if (!t.label.empty()) {
                const double ly = oy + top + 14 + 14 * static_cast<double>(ti);
                s += "<rect x=\"" + fmt(left + plot_w - 150) + "\" y=\"" + fmt(ly - 8) +
                     "\" width=\"10\" height=\"10\" fill=\"" + t.color + "\"/>\n";
                s += "<text x=\"" + fmt(left + plot_w - 135) + "\" y=\"" + fmt(ly + 1) + "\">" +
                     escape_xml(t.label) + "</text>\n";
            }
        }
        s += "</g>\n";
    }
    s += "</svg>\n";
    return s;
}

} // namespace capfade::cli
