#pragma once

#include <string>
#include <vector>

#include "mobgen/types.hpp"

namespace mobgen::cli {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Static line chart with linear axes.
std::string svg_line_chart(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                           const std::string& y_label);

/// Empirical CDF of each sample set.
std::string svg_ecdf(const std::vector<std::pair<std::string, std::vector<double>>>& samples, const std::string& title,
                     const std::string& x_label);

/// Origin-destination heat map on a log colour scale.
std::string svg_flow_heatmap(const FlowMatrix& flows, const std::string& title);

}  // namespace mobgen::cli
