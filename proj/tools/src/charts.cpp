#include "anatomia/cli/charts.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "anatomia/error.hpp"

namespace anatomia::cli {
namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;

constexpr std::array<const char*, 8> kPalette = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                                 "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Axis {
  double lo = 0, hi = 1;
  [[nodiscard]] double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

Axis nice_axis(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::string frame(const std::string& title, const std::string& x_label, const std::string& y_label, const Axis& y) {
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + coord(kWidth) + "\" height=\"" + coord(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + coord(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
       "</text>\n";
  s += "<line x1=\"" + coord(kLeft) + "\" y1=\"" + coord(kHeight - kBottom) + "\" x2=\"" + coord(kWidth - kRight) +
       "\" y2=\"" + coord(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + coord(kLeft) + "\" y1=\"" + coord(kTop) + "\" x2=\"" + coord(kLeft) + "\" y2=\"" +
       coord(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y.lo + (y.hi - y.lo) * i / 4.0;
    const double py = y.map(v, kHeight - kBottom, kTop);
    s += "<line x1=\"" + coord(kLeft - 4) + "\" y1=\"" + coord(py) + "\" x2=\"" + coord(kLeft) + "\" y2=\"" +
         coord(py) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + coord(kLeft - 8) + "\" y=\"" + coord(py + 4) + "\" text-anchor=\"end\">" + num(v) +
         "</text>\n";
  }
  s += "<text x=\"16\" y=\"" + coord((kTop + kHeight - kBottom) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       coord((kTop + kHeight - kBottom) / 2) + ")\">" + escape(y_label) + "</text>\n";
  if (!x_label.empty())
    s += "<text x=\"" + coord((kLeft + kWidth - kRight) / 2) + "\" y=\"" + coord(kHeight - 12) +
         "\" text-anchor=\"middle\">" + escape(x_label) + "</text>\n";
  return s;
}

void write_ppm(const fs::path& path, std::int64_t w, std::int64_t h, const std::vector<std::uint8_t>& rgb) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

// Row-major (rows = axis 0) voxel indices of the displayed slice.
std::vector<std::int64_t> slice_indices(const Shape& shape, std::int64_t& rows, std::int64_t& cols) {
  rows = shape[0];
  cols = shape[1];
  const std::int64_t depth = shape.size() == 3 ? shape[2] : 1;
  const std::int64_t k = depth / 2;
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(rows * cols));
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) idx.push_back((r * cols + c) * depth + k);
  return idx;
}

std::vector<double> gray(const Volume& image, const std::vector<std::int64_t>& idx) {
  float lo = std::numeric_limits<float>::max(), hi = std::numeric_limits<float>::lowest();
  for (auto i : idx) {
    lo = std::min(lo, image.data[i]);
    hi = std::max(hi, image.data[i]);
  }
  std::vector<double> g;
  g.reserve(idx.size());
  for (auto i : idx) g.push_back(hi > lo ? (image.data[i] - lo) / (hi - lo) : 0.0);
  return g;
}

std::uint8_t byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<BarGroup>& bars) {
  double lo = 0, hi = 0;
  for (const auto& b : bars) {
    lo = std::min(lo, b.value - b.error);
    hi = std::max(hi, b.value + b.error);
  }
  const Axis y = nice_axis(lo, hi);
  std::string s = frame(title, "", y_label, y);
  const double slot = (kWidth - kLeft - kRight) / static_cast<double>(std::max<std::size_t>(bars.size(), 1));
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double x0 = kLeft + slot * static_cast<double>(i) + slot * 0.15;
    const double bw = slot * 0.7;
    const double top = y.map(std::max(b.value, 0.0), kHeight - kBottom, kTop);
    const double base = y.map(std::min(b.value, 0.0), kHeight - kBottom, kTop);
    s += "<rect x=\"" + coord(x0) + "\" y=\"" + coord(top) + "\" width=\"" + coord(bw) + "\" height=\"" +
         coord(base - top) + "\" fill=\"" + kPalette[i % kPalette.size()] + "\"/>\n";
    if (b.error > 0) {
      const double cx = x0 + bw / 2;
      const double e0 = y.map(b.value - b.error, kHeight - kBottom, kTop);
      const double e1 = y.map(b.value + b.error, kHeight - kBottom, kTop);
      s += "<line x1=\"" + coord(cx) + "\" y1=\"" + coord(e0) + "\" x2=\"" + coord(cx) + "\" y2=\"" + coord(e1) +
           "\" stroke=\"black\"/>\n";
    }
    s += "<text x=\"" + coord(x0 + bw / 2) + "\" y=\"" + coord(kHeight - kBottom + 16) +
         "\" text-anchor=\"middle\">" + escape(b.label) + "</text>\n";
    s += "<text x=\"" + coord(x0 + bw / 2) + "\" y=\"" + coord(top - 4) + "\" text-anchor=\"middle\" font-size=\"10\">" +
         num(b.value) + "</text>\n";
  }
  return s + "</svg>\n";
}

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<LineSeries>& series) {
  double xlo = std::numeric_limits<double>::max(), xhi = std::numeric_limits<double>::lowest();
  double ylo = xlo, yhi = xhi;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double e = i < s.error.size() ? s.error[i] : 0.0;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i] - e);
      yhi = std::max(yhi, s.y[i] + e);
    }
  if (xlo > xhi) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  const Axis x = nice_axis(xlo, xhi), y = nice_axis(ylo, yhi);
  std::string out = frame(title, x_label, y_label, y);
  for (int i = 0; i <= 4; ++i) {
    const double v = x.lo + (x.hi - x.lo) * i / 4.0;
    const double px = x.map(v, kLeft, kWidth - kRight);
    out += "<text x=\"" + coord(px) + "\" y=\"" + coord(kHeight - kBottom + 16) + "\" text-anchor=\"middle\">" +
           num(v) + "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = kPalette[k % kPalette.size()];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double px = x.map(s.x[i], kLeft, kWidth - kRight), py = y.map(s.y[i], kHeight - kBottom, kTop);
      points += (i ? " " : "") + coord(px) + "," + coord(py);
      out += "<circle cx=\"" + coord(px) + "\" cy=\"" + coord(py) + "\" r=\"3\" fill=\"" + colour + "\"/>\n";
      if (i < s.error.size() && s.error[i] > 0)
        out += "<line x1=\"" + coord(px) + "\" y1=\"" + coord(y.map(s.y[i] - s.error[i], kHeight - kBottom, kTop)) +
               "\" x2=\"" + coord(px) + "\" y2=\"" + coord(y.map(s.y[i] + s.error[i], kHeight - kBottom, kTop)) +
               "\" stroke=\"" + colour + "\"/>\n";
    }
    out += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + coord(kWidth - kRight - 4) + "\" y=\"" + coord(kTop + 14 * static_cast<double>(k + 1)) +
           "\" text-anchor=\"end\" fill=\"" + colour + "\">" + escape(s.name) + "</text>\n";
  }
  return out + "</svg>\n";
}

void write_label_overlay(const Volume& image, const LabelMask& mask, const fs::path& path) {
  if (mask.shape != image.shape) throw ShapeError("overlay: mask and image shapes differ");
  static constexpr std::array<std::array<double, 3>, 6> colours = {
      {{0.90, 0.25, 0.20}, {0.20, 0.70, 0.30}, {0.25, 0.45, 0.95}, {0.95, 0.80, 0.20}, {0.70, 0.30, 0.80}, {0.20, 0.80, 0.85}}};
  std::int64_t rows = 0, cols = 0;
  const auto idx = slice_indices(image.shape, rows, cols);
  const auto g = gray(image, idx);
  std::vector<std::uint8_t> rgb;
  rgb.reserve(idx.size() * 3);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const int c = mask.data[static_cast<std::size_t>(idx[i])];
    for (int ch = 0; ch < 3; ++ch) {
      const double base = g[i];
      rgb.push_back(byte(c == 0 ? base : 0.5 * base + 0.5 * colours[(c - 1) % colours.size()][ch]));
    }
  }
  write_ppm(path, cols, rows, rgb);
}

void write_heat_overlay(const Volume& image, const std::vector<float>& values, double max_value, const fs::path& path) {
  if (static_cast<std::int64_t>(values.size()) != image.size()) throw ShapeError("overlay: value count differs from image");
  std::int64_t rows = 0, cols = 0;
  const auto idx = slice_indices(image.shape, rows, cols);
  const auto g = gray(image, idx);
  std::vector<std::uint8_t> rgb;
  rgb.reserve(idx.size() * 3);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double h = max_value > 0 ? std::clamp(values[static_cast<std::size_t>(idx[i])] / max_value, 0.0, 1.0) : 0.0;
    rgb.push_back(byte((1 - h) * g[i] + h));
    rgb.push_back(byte((1 - h) * g[i] + h * 0.85));
    rgb.push_back(byte((1 - h) * g[i]));
  }
  write_ppm(path, cols, rows, rgb);
}

}  // namespace anatomia::cli
