#include "mhmm/plot.hpp"

#include "mhmm/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mhmm {

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 320.0;
constexpr double kMargin = 40.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

void open_svg(std::ostringstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
        << "</text>\n"
        << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin / 2
        << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
        << kHeight - kMargin << "\" stroke=\"black\"/>\n";
}

void axis_labels(std::ostringstream& out, double x_lo, double x_hi, double y_hi) {
    out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 14 << "\" text-anchor=\"middle\">" << num(x_lo)
        << "</text>\n"
        << "<text x=\"" << kWidth - kMargin / 2 << "\" y=\"" << kHeight - kMargin + 14
        << "\" text-anchor=\"middle\">" << num(x_hi) << "</text>\n"
        << "<text x=\"" << kMargin - 4 << "\" y=\"" << kMargin + 4 << "\" text-anchor=\"end\">" << num(y_hi)
        << "</text>\n";
}

}  // namespace

std::vector<HistogramBin> histogram(const std::vector<double>& values, std::size_t bins) {
    if (values.empty()) throw ConfigError("histogram of an empty sample");
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (hi <= lo) {
        lo -= 0.5;
        hi += 0.5;
        bins = 1;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<HistogramBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].lower = lo + width * static_cast<double>(b);
        out[b].upper = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
    }
    for (double v : values) {
        auto b = static_cast<std::size_t>(std::floor((v - lo) / width));
        ++out[std::min(b, bins - 1)].count;
    }
    return out;
}

std::string svg_histogram(const std::vector<HistogramBin>& bins, const std::string& title,
                          std::optional<double> reference) {
    if (bins.empty()) throw ConfigError("histogram has no bins");
    double x_lo = bins.front().lower;
    double x_hi = bins.back().upper;
    if (reference) {
        x_lo = std::min(x_lo, *reference);
        x_hi = std::max(x_hi, *reference);
    }
    const double span = x_hi > x_lo ? x_hi - x_lo : 1.0;
    std::size_t top = 1;
    for (const auto& b : bins) top = std::max(top, b.count);
    const double plot_w = kWidth - 1.5 * kMargin;
    const double plot_h = kHeight - 2.0 * kMargin;
    auto x_of = [&](double x) { return kMargin + (x - x_lo) / span * plot_w; };
    std::ostringstream out;
    open_svg(out, title);
    for (const auto& b : bins) {
        const double h = static_cast<double>(b.count) / static_cast<double>(top) * plot_h;
        out << "<rect x=\"" << num(x_of(b.lower)) << "\" y=\"" << num(kHeight - kMargin - h) << "\" width=\""
            << num(std::max(x_of(b.upper) - x_of(b.lower), 0.5)) << "\" height=\"" << num(h)
            << "\" fill=\"#8fa8c8\" stroke=\"#44546a\" stroke-width=\"0.5\"/>\n";
    }
    if (reference) {
        const double x = x_of(*reference);
        out << "<line x1=\"" << num(x) << "\" y1=\"" << kMargin << "\" x2=\"" << num(x) << "\" y2=\""
            << kHeight - kMargin << "\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n";
    }
    axis_labels(out, x_lo, x_hi, static_cast<double>(top));
    out << "</svg>\n";
    return out.str();
}

std::string svg_trace(const std::vector<double>& values, const std::string& title) {
    if (values.empty()) throw ConfigError("trace of an empty sequence");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it > lo ? *hi_it : lo + 1.0;
    const double plot_w = kWidth - 1.5 * kMargin;
    const double plot_h = kHeight - 2.0 * kMargin;
    const double n = values.size() > 1 ? static_cast<double>(values.size() - 1) : 1.0;
    std::ostringstream out;
    open_svg(out, title);
    out << "<polyline fill=\"none\" stroke=\"#44546a\" stroke-width=\"0.8\" points=\"";
    for (std::size_t i = 0; i < values.size(); ++i) {
        out << (i ? " " : "") << num(kMargin + static_cast<double>(i) / n * plot_w) << ','
            << num(kHeight - kMargin - (values[i] - lo) / (hi - lo) * plot_h);
    }
    out << "\"/>\n";
    axis_labels(out, 1.0, static_cast<double>(values.size()), hi);
    out << "<text x=\"" << kMargin - 4 << "\" y=\"" << kHeight - kMargin << "\" text-anchor=\"end\">" << num(lo)
        << "</text>\n</svg>\n";
    return out.str();
}

}  // namespace mhmm
