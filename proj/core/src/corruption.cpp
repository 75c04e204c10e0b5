#include "anatomia/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "anatomia/error.hpp"

namespace anatomia {

namespace {

// Separable min/max filter of half-width r on a binary field; out-of-bounds
// samples read as `outside`.
std::vector<std::uint8_t> box_filter(std::vector<std::uint8_t> field, const Grid& g, int r, bool take_max,
                                     std::uint8_t outside) {
  std::vector<std::uint8_t> next(field.size());
  for (int axis = 0; axis < g.rank(); ++axis) {
    const auto n = g.extent(axis);
    const auto stride = g.stride(axis);
    for (std::int64_t v = 0; v < g.size(); ++v) {
      const auto pos = g.coords(v)[axis];
      std::uint8_t acc = take_max ? 0 : 1;
      for (std::int64_t d = -r; d <= r; ++d) {
        const auto p = pos + d;
        const std::uint8_t s = (p < 0 || p >= n) ? outside : field[v + d * stride];
        acc = take_max ? std::max(acc, s) : std::min(acc, s);
      }
      next[v] = acc;
    }
    std::swap(field, next);
  }
  return field;
}

std::vector<int> present_foreground(const LabelMask& mask) {
  std::vector<int> seen(mask.num_classes + 1, 0);
  for (auto v : mask.data) seen[v] = 1;
  std::vector<int> out;
  for (int c = 1; c <= mask.num_classes; ++c)
    if (seen[c]) out.push_back(c);
  return out;
}

}  // namespace

void CorruptionPolicy::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("corruption: ") + name + " must be in [0,1]");
  };
  prob(swap_rate, "swap_rate");
  prob(p_swap, "p_swap");
  prob(p_morph, "p_morph");
  prob(p_rescale, "p_rescale");
  prob(p_shape_edit, "p_shape_edit");
  if (morph_radius_min < 1 || morph_radius_max < morph_radius_min)
    throw ConfigError("corruption: morph radius range must satisfy 1 <= min <= max");
  if (!(rescale_min > 0.0) || rescale_max < rescale_min)
    throw ConfigError("corruption: rescale range must satisfy 0 < min <= max");
  if (shape_edits_min < 0 || shape_edits_max < shape_edits_min)
    throw ConfigError("corruption: shape edit range must satisfy 0 <= min <= max");
}

CorruptionPolicy CorruptionPolicy::none() {
  CorruptionPolicy p;
  p.p_swap = p.p_morph = p.p_rescale = p.p_shape_edit = 0.0;
  return p;
}

std::vector<std::uint8_t> label_boundary(const LabelMask& mask) {
  Grid g(mask.shape);
  std::vector<std::uint8_t> out(g.size(), 0);
  for (std::int64_t v = 0; v < g.size(); ++v) {
    bool edge = false;
    g.for_each_face_neighbor(v, [&](std::int64_t n) { edge = edge || mask.data[n] != mask.data[v]; });
    out[v] = edge;
  }
  return out;
}

LabelMask boundary_swap(const LabelMask& mask, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw InvariantError("boundary_swap: rate must be in [0,1]");
  const auto edge = label_boundary(mask);
  std::vector<std::int64_t> candidates;
  for (std::int64_t v = 0; v < mask.size(); ++v)
    if (edge[v]) candidates.push_back(v);
  const auto picks = static_cast<std::int64_t>(std::llround(rate * static_cast<double>(candidates.size())));

  LabelMask out = mask;
  Grid g(mask.shape);
  std::vector<std::int64_t> neighbors;
  for (std::int64_t i = 0; i < picks; ++i) {
    // Partial Fisher-Yates: candidates[0..i] is a uniform sample.
    std::swap(candidates[i], candidates[rng.uniform_int(i, static_cast<std::int64_t>(candidates.size()) - 1)]);
    const auto v = candidates[i];
    neighbors.clear();
    g.for_each_face_neighbor(v, [&](std::int64_t n) { neighbors.push_back(n); });
    const auto pick = neighbors[rng.uniform_int(0, static_cast<std::int64_t>(neighbors.size()) - 1)];
    out.data[v] = mask.data[pick];
  }
  return out;
}

LabelMask morph_perturb(const LabelMask& mask, MorphOp op, int radius, int c) {
  if (radius < 1) throw InvariantError("morph_perturb: radius must be >= 1");
  Grid g(mask.shape);
  std::vector<std::uint8_t> region(g.size());
  for (std::int64_t v = 0; v < g.size(); ++v) region[v] = mask.data[v] == c;
  LabelMask out = mask;
  if (op == MorphOp::erode) {
    const auto kept = box_filter(region, g, radius, false, 0);
    for (std::int64_t v = 0; v < g.size(); ++v)
      if (region[v] && !kept[v]) out.data[v] = 0;
  } else {
    const auto grown = box_filter(region, g, radius, true, 0);
    for (std::int64_t v = 0; v < g.size(); ++v)
      if (grown[v]) out.data[v] = static_cast<std::uint8_t>(c);
  }
  return out;
}

LabelMask rescale_perturb(const LabelMask& mask, double factor) {
  if (!(factor > 0.0)) throw InvariantError("rescale_perturb: factor must be positive");
  Grid g(mask.shape);
  std::array<double, 3> centroid{0, 0, 0};
  std::int64_t n = 0;
  for (std::int64_t v = 0; v < g.size(); ++v) {
    if (mask.data[v] == 0) continue;
    const auto c = g.coords(v);
    for (int a = 0; a < g.rank(); ++a) centroid[a] += static_cast<double>(c[a]);
    ++n;
  }
  if (n == 0) return mask;
  for (auto& c : centroid) c /= static_cast<double>(n);

  LabelMask out(mask.shape, mask.num_classes);
  for (std::int64_t v = 0; v < g.size(); ++v) {
    auto c = g.coords(v);
    for (int a = 0; a < g.rank(); ++a)
      c[a] = static_cast<std::int64_t>(
          std::floor(centroid[a] + (static_cast<double>(c[a]) - centroid[a]) / factor + 0.5));
    if (g.contains(c)) out.data[v] = mask.data[g.index(c)];
  }
  return out;
}

LabelMask shape_edit(const LabelMask& mask, int n_edits, Rng& rng) {
  if (n_edits < 0) throw InvariantError("shape_edit: negative edit count");
  Grid g(mask.shape);
  LabelMask out = mask;
  std::int64_t min_extent = g.extent(0);
  for (int a = 1; a < g.rank(); ++a) min_extent = std::min(min_extent, g.extent(a));
  const std::int64_t max_size = std::max<std::int64_t>(2, min_extent / 8);

  for (int e = 0; e < n_edits; ++e) {
    const bool add = rng.bernoulli(0.5);
    const bool disc = rng.bernoulli(0.5);
    std::uint8_t value = 0;
    if (add) {
      const auto present = present_foreground(out);
      value = present.empty()
                  ? static_cast<std::uint8_t>(rng.uniform_int(1, out.num_classes))
                  : static_cast<std::uint8_t>(present[rng.uniform_int(0, static_cast<std::int64_t>(present.size()) - 1)]);
    }
    std::array<std::int64_t, 3> center{0, 0, 0};
    std::array<std::int64_t, 3> half{0, 0, 0};
    for (int a = 0; a < g.rank(); ++a) center[a] = rng.uniform_int(0, g.extent(a) - 1);
    if (disc) {
      half.fill(rng.uniform_int(2, max_size));
    } else {
      for (int a = 0; a < g.rank(); ++a) half[a] = rng.uniform_int(2, max_size);
    }
    const double r2 = static_cast<double>(half[0] * half[0]);

    std::array<std::int64_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < g.rank(); ++a) {
      lo[a] = std::max<std::int64_t>(0, center[a] - half[a]);
      hi[a] = std::min<std::int64_t>(g.extent(a) - 1, center[a] + half[a]);
    }
    std::array<std::int64_t, 3> c{0, 0, 0};
    for (c[0] = lo[0]; c[0] <= hi[0]; ++c[0])
      for (c[1] = lo[1]; c[1] <= hi[1]; ++c[1])
        for (c[2] = lo[2]; c[2] <= hi[2]; ++c[2]) {
          if (disc) {
            double d2 = 0;
            for (int a = 0; a < g.rank(); ++a) d2 += static_cast<double>((c[a] - center[a]) * (c[a] - center[a]));
            if (d2 > r2) continue;
          }
          out.data[g.index(c)] = value;
        }
  }
  return out;
}

LabelMask corrupt(const LabelMask& mask, const CorruptionPolicy& policy, Rng& rng) {
  policy.validate();
  LabelMask out = mask;
  if (rng.bernoulli(policy.p_swap)) out = boundary_swap(out, policy.swap_rate, rng);
  if (rng.bernoulli(policy.p_morph)) {
    const auto op = rng.bernoulli(0.5) ? MorphOp::erode : MorphOp::dilate;
    const int radius = static_cast<int>(rng.uniform_int(policy.morph_radius_min, policy.morph_radius_max));
    const auto present = present_foreground(out);
    if (!present.empty()) {
      const int c = present[rng.uniform_int(0, static_cast<std::int64_t>(present.size()) - 1)];
      out = morph_perturb(out, op, radius, c);
    }
  }
  if (rng.bernoulli(policy.p_rescale)) out = rescale_perturb(out, rng.uniform(policy.rescale_min, policy.rescale_max));
  if (rng.bernoulli(policy.p_shape_edit)) {
    const int n = static_cast<int>(rng.uniform_int(policy.shape_edits_min, policy.shape_edits_max));
    out = shape_edit(out, n, rng);
  }
  return out;
}

}  // namespace anatomia
