#include "astsa/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace astsa::plot {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

void line(std::ostream& s, double x1, double y1, double x2, double y2, const char* stroke,
          double width = 1.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" "
                  "stroke-width=\"%.2f\"/>\n",
                  x1, y1, x2, y2, stroke, width);
    s << buf;
}

void text(std::ostream& s, double x, double y, const std::string& t, int size = 11) {
    s << "<text x=\"" << x << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\""
      << size << "\">" << t << "</text>\n";
}

}  // namespace

void write_event_timeline_svg(const std::vector<analytics::Event>& events,
                              const TimeRange& range, std::ostream& sink) {
    const double w = 900, h = 160, pad = 40;
    sink << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
         << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    line(sink, pad, h - pad, w - pad, h - pad, "#000");
    const double span = static_cast<double>(range.length_seconds());
    for (const auto& e : events) {
        const double x =
            pad + (w - 2 * pad) * static_cast<double>(e.t_event - range.start) / span;
        line(sink, x, pad, x, h - pad, kPalette[1], 1.5);
    }
    text(sink, pad, h - pad + 16, to_iso8601(range.start));
    text(sink, w - pad - 150, h - pad + 16, to_iso8601(range.end));
    text(sink, pad, pad - 10, std::to_string(events.size()) + " events");
    sink << "</svg>\n";
}

void write_event_trace_svg(const Stream& window_data, Timestamp t_event, std::ostream& sink) {
    const double w = 900, h = 300, pad = 40;
    sink << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
         << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    line(sink, pad, h - pad, w - pad, h - pad, "#000");
    const std::size_t n = window_data.length();
    int color = 0;
    double legend_y = pad;
    for (const auto& [id, series] : window_data.channels()) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (double v : series.values) {
            if (is_missing(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(lo < hi)) hi = lo + 1.0;
        const char* stroke = kPalette[color % 8];
        sink << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1\" points=\"";
        char buf[40];
        for (std::size_t i = 0; i < n; ++i) {
            const double v = series.values[i];
            if (is_missing(v)) continue;
            const double x = pad + (w - 2 * pad) * static_cast<double>(i) /
                                       static_cast<double>(std::max<std::size_t>(1, n - 1));
            const double y = (h - pad) - (h - 2 * pad) * (v - lo) / (hi - lo);
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
            sink << buf;
        }
        sink << "\"/>\n";
        text(sink, w - pad - 120, legend_y, id);
        line(sink, w - pad - 140, legend_y - 4, w - pad - 125, legend_y - 4, stroke, 2.0);
        legend_y += 14;
        ++color;
    }
    if (n > 1) {
        const std::int64_t total = static_cast<std::int64_t>(n - 1) * window_data.dt_seconds();
        const double x = pad + (w - 2 * pad) *
                                   static_cast<double>(t_event - window_data.t0()) /
                                   static_cast<double>(total);
        line(sink, x, pad, x, h - pad, "#d62728", 1.0);
    }
    text(sink, pad, h - pad + 16, to_iso8601(window_data.t0()));
    text(sink, pad, pad - 10, "event at " + to_iso8601(t_event));
    sink << "</svg>\n";
}

void write_polar_svg(const analytics::PolarHistogram& hist, std::ostream& sink) {
    const double size = 600, cx = size / 2, cy = size / 2, rmax = size / 2 - 40;
    sink << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\""
         << size << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
    double max_sum = 0.0;
    for (const auto& b : hist.bins()) max_sum = std::max(max_sum, b.sum);
    if (max_sum <= 0.0) max_sum = 1.0;
    const double wrad = hist.bin_width_deg() * std::numbers::pi / 180.0;
    char buf[256];
    for (const auto& b : hist.bins()) {
        if (b.sum <= 0.0) continue;
        const double r = rmax * b.sum / max_sum;
        const double a0 = b.angle_start_deg * std::numbers::pi / 180.0;
        const double a1 = a0 + wrad;
        // SVG y grows downward; angles measured counterclockwise from east.
        const double x0 = cx + r * std::cos(a0), y0 = cy - r * std::sin(a0);
        const double x1 = cx + r * std::cos(a1), y1 = cy - r * std::sin(a1);
        std::snprintf(buf, sizeof(buf),
                      "<path d=\"M %.2f %.2f L %.2f %.2f A %.2f %.2f 0 0 0 %.2f %.2f Z\" "
                      "fill=\"#1f77b4\" fill-opacity=\"0.7\" stroke=\"#14507d\" "
                      "stroke-width=\"0.5\"/>\n",
                      cx, cy, x0, y0, r, r, x1, y1);
        sink << buf;
    }
    for (int q = 0; q < 4; ++q) {
        const double a = q * 90.0 * std::numbers::pi / 180.0;
        line(sink, cx, cy, cx + rmax * std::cos(a), cy - rmax * std::sin(a), "#999", 0.5);
    }
    sink << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << rmax
         << "\" fill=\"none\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
    text(sink, cx + rmax + 6, cy + 4, "0");
    text(sink, cx - 8, cy - rmax - 8, "90");
    sink << "</svg>\n";
}

}  // namespace astsa::plot
