#pragma once

// Minimal standalone SVG charts.

#include <optional>
#include <string>
#include <vector>

namespace mhmm {

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
};

/// Equal-width bins spanning [min, max] of the values (a single bin of
/// width 1 around a constant sample).
std::vector<HistogramBin> histogram(const std::vector<double>& values, std::size_t bins);

/// Histogram with an optional vertical reference line (e.g. the observed
/// statistic in a posterior predictive check).
std::string svg_histogram(const std::vector<HistogramBin>& bins, const std::string& title,
                          std::optional<double> reference = std::nullopt);

/// Line plot of a sequence against its index.
std::string svg_trace(const std::vector<double>& values, const std::string& title);

}  // namespace mhmm
