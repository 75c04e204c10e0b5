#include "anatomia/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "anatomia/error.hpp"

namespace anatomia {

namespace {

void check_pair(const LabelMask& pred, const LabelMask& gt) {
  if (pred.shape != gt.shape)
    throw ConsistencyError("metric inputs have shapes " + to_string(pred.shape) + " and " + to_string(gt.shape));
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one line
// with sample positions i * step.
void edt_line(std::span<double> f, double step, std::vector<double>& out, std::vector<int>& vertices,
              std::vector<double>& bounds) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(f.size());
  vertices.assign(n, 0);
  bounds.assign(n + 1, 0.0);
  out.assign(n, inf);

  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    const double xq = q * step;
    while (k >= 0) {
      const int v = vertices[k];
      const double xv = v * step;
      const double s = ((f[q] + xq * xq) - (f[v] + xv * xv)) / (2.0 * (xq - xv));
      if (s <= bounds[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    vertices[k] = q;
    if (k == 0) {
      bounds[k] = -inf;
    } else {
      const int v = vertices[k - 1];
      const double xv = v * step;
      bounds[k] = ((f[q] + xq * xq) - (f[v] + xv * xv)) / (2.0 * (xq - xv));
    }
    bounds[k + 1] = inf;
  }
  if (k < 0) return;
  int j = 0;
  for (int p = 0; p < n; ++p) {
    const double xp = p * step;
    while (bounds[j + 1] < xp) ++j;
    const double d = xp - vertices[j] * step;
    out[p] = d * d + f[vertices[j]];
  }
}

}  // namespace

double dice_score(const LabelMask& pred, const LabelMask& gt, int c) {
  check_pair(pred, gt);
  std::int64_t a = 0, b = 0, both = 0;
  for (std::int64_t v = 0; v < pred.size(); ++v) {
    const bool in_a = pred.data[v] == c;
    const bool in_b = gt.data[v] == c;
    a += in_a;
    b += in_b;
    both += in_a && in_b;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

std::vector<std::uint8_t> boundary_mask(const LabelMask& mask, int c) {
  Grid g(mask.shape);
  std::vector<std::uint8_t> out(g.size(), 0);
  for (std::int64_t v = 0; v < g.size(); ++v) {
    if (mask.data[v] != c) continue;
    bool edge = false;
    const int outside = g.for_each_face_neighbor(v, [&](std::int64_t n) { edge = edge || mask.data[n] != c; });
    out[v] = edge || outside > 0;
  }
  return out;
}

std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& sites, const Shape& shape,
                                               std::span<const double> spacing) {
  Grid g(shape);
  if (static_cast<int>(spacing.size()) != g.rank()) throw ConsistencyError("spacing rank mismatch");
  std::vector<double> dist(g.size());
  for (std::int64_t v = 0; v < g.size(); ++v)
    dist[v] = sites[v] ? 0.0 : std::numeric_limits<double>::infinity();

  std::vector<double> line, out, bounds;
  std::vector<int> vertices;
  for (int axis = 0; axis < g.rank(); ++axis) {
    const auto n = g.extent(axis);
    const auto stride = g.stride(axis);
    line.resize(n);
    for (std::int64_t start = 0; start < g.size(); ++start) {
      if (g.coords(start)[axis] != 0) continue;
      for (std::int64_t i = 0; i < n; ++i) line[i] = dist[start + i * stride];
      edt_line(line, spacing[axis], out, vertices, bounds);
      for (std::int64_t i = 0; i < n; ++i) dist[start + i * stride] = out[i];
    }
  }
  return dist;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw SizeError("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (rank - static_cast<double>(lo));
}

std::optional<double> hd95(const LabelMask& pred, const LabelMask& gt, int c, std::span<const double> spacing) {
  check_pair(pred, gt);
  if (pred.count(c) == 0 || gt.count(c) == 0) return std::nullopt;
  const auto edge_pred = boundary_mask(pred, c);
  const auto edge_gt = boundary_mask(gt, c);
  const auto to_gt = squared_distance_transform(edge_gt, gt.shape, spacing);
  const auto to_pred = squared_distance_transform(edge_pred, pred.shape, spacing);

  std::vector<double> distances;
  for (std::size_t v = 0; v < edge_pred.size(); ++v)
    if (edge_pred[v]) distances.push_back(std::sqrt(to_gt[v]));
  for (std::size_t v = 0; v < edge_gt.size(); ++v)
    if (edge_gt[v]) distances.push_back(std::sqrt(to_pred[v]));
  return percentile(std::move(distances), 95.0);
}

MetricReport evaluate_case(const LabelMask& pred, const LabelMask& gt, std::span<const double> spacing) {
  check_pair(pred, gt);
  MetricReport r;
  double hd_sum = 0.0;
  int hd_count = 0;
  for (int c = 1; c <= gt.num_classes; ++c) {
    r.per_class_dsc.push_back(dice_score(pred, gt, c));
    const auto hd = hd95(pred, gt, c, spacing);
    r.per_class_hd95.push_back(hd);
    if (hd) {
      hd_sum += *hd;
      ++hd_count;
    }
  }
  double dsc_sum = 0.0;
  for (double d : r.per_class_dsc) dsc_sum += d;
  r.mean_dsc = dsc_sum / static_cast<double>(r.per_class_dsc.size());
  if (hd_count > 0) r.mean_hd95 = hd_sum / hd_count;
  return r;
}

MetricReport average_reports(std::span<const MetricReport> reports) {
  if (reports.empty()) throw SizeError("average_reports: no reports");
  const auto classes = reports.front().per_class_dsc.size();
  MetricReport out;
  out.per_class_dsc.assign(classes, 0.0);
  out.per_class_hd95.assign(classes, std::nullopt);
  std::vector<double> hd_sum(classes, 0.0);
  std::vector<int> hd_n(classes, 0);
  double mean_hd = 0.0;
  int mean_hd_n = 0;
  for (const auto& r : reports) {
    if (r.per_class_dsc.size() != classes) throw ConsistencyError("average_reports: class count mismatch");
    for (std::size_t c = 0; c < classes; ++c) {
      out.per_class_dsc[c] += r.per_class_dsc[c];
      if (r.per_class_hd95[c]) {
        hd_sum[c] += *r.per_class_hd95[c];
        ++hd_n[c];
      }
    }
    out.mean_dsc += r.mean_dsc;
    if (r.mean_hd95) {
      mean_hd += *r.mean_hd95;
      ++mean_hd_n;
    }
  }
  const auto n = static_cast<double>(reports.size());
  for (std::size_t c = 0; c < classes; ++c) {
    out.per_class_dsc[c] /= n;
    if (hd_n[c] > 0) out.per_class_hd95[c] = hd_sum[c] / hd_n[c];
  }
  out.mean_dsc /= n;
  if (mean_hd_n > 0) out.mean_hd95 = mean_hd / mean_hd_n;
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw SizeError("mean_std: no values");
  MeanStd r;
  r.count = static_cast<int>(values.size());
  for (double v : values) r.mean += v;
  r.mean /= r.count;
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    r.mean = values.front();
    return r;
  }
  if (r.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / (r.count - 1));
  }
  return r;
}

AggregateReport aggregate_runs(std::span<const MetricReport> reports) {
  if (reports.empty()) throw SizeError("aggregate_runs: no runs");
  const auto classes = reports.front().per_class_dsc.size();
  AggregateReport out;
  auto collect = [&](auto&& get) {
    std::vector<double> v;
    for (const auto& r : reports) {
      const std::optional<double> x = get(r);
      if (x) v.push_back(*x);
    }
    return v;
  };
  for (std::size_t c = 0; c < classes; ++c) {
    const auto dsc = collect([&](const MetricReport& r) -> std::optional<double> {
      if (r.per_class_dsc.size() != classes) throw ConsistencyError("aggregate_runs: class count mismatch");
      return r.per_class_dsc[c];
    });
    out.per_class_dsc.push_back(mean_std(dsc));
    const auto hd = collect([&](const MetricReport& r) { return r.per_class_hd95[c]; });
    out.per_class_hd95.push_back(hd.empty() ? std::nullopt : std::optional<MeanStd>(mean_std(hd)));
  }
  const auto dsc = collect([](const MetricReport& r) -> std::optional<double> { return r.mean_dsc; });
  out.mean_dsc = mean_std(dsc);
  const auto hd = collect([](const MetricReport& r) { return r.mean_hd95; });
  if (!hd.empty()) out.mean_hd95 = mean_std(hd);
  return out;
}

}  // namespace anatomia
