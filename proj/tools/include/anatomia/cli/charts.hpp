#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anatomia/types.hpp"

namespace anatomia::cli {

struct BarGroup {
  std::string label;
  double value = 0;
  double error = 0;
};

struct LineSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> error;
};

/// Self-contained SVG documents; output depends only on the arguments.
std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<BarGroup>& bars);
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<LineSeries>& series);

/// Binary PPM (P6) of the central slice along the last axis (the volume itself
/// in 2D): grayscale image with class colours
/// blended over it.
void write_label_overlay(const Volume& image, const LabelMask& mask, const std::filesystem::path& path);
/// Same with a heat map of `values` (one per voxel, scaled by `max_value`).
void write_heat_overlay(const Volume& image, const std::vector<float>& values, double max_value,
                        const std::filesystem::path& path);

}  // namespace anatomia::cli
