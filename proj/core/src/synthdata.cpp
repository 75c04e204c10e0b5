#include "anatomia/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "anatomia/error.hpp"
#include "anatomia/rng.hpp"
#include "anatomia/splits.hpp"

namespace anatomia {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kHarmonics = 4;  // orders 2..5
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Blob {
  double cy = 0, cx = 0;
  double radius = 0;
  std::array<double, kHarmonics> amp{};
  std::array<double, kHarmonics> phase{};

  [[nodiscard]] double radius_at(double theta) const {
    double r = 1.0;
    for (int k = 0; k < kHarmonics; ++k) r += amp[k] * std::cos((k + 2) * theta + phase[k]);
    return radius * r;
  }
  [[nodiscard]] double max_radius() const {
    double s = 1.0;
    for (double a : amp) s += std::abs(a);
    return radius * s;
  }
  [[nodiscard]] bool contains(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double d = std::hypot(dy, dx);
    if (d == 0.0) return true;
    return d <= radius_at(std::atan2(dy, dx));
  }
};

// Keeps r(theta) >= 0.4 * radius so the blob stays star-convex and thick.
void cap_harmonics(Blob& b) {
  double total = 0.0;
  for (double a : b.amp) total += std::abs(a);
  if (total > 0.6)
    for (double& a : b.amp) a *= 0.6 / total;
}

Blob draw_blob(Rng& rng, double radius, double irregularity, double h, double w) {
  Blob b;
  b.radius = radius;
  for (int k = 0; k < kHarmonics; ++k) {
    b.amp[k] = irregularity * rng.uniform(-1.0, 1.0) / (k + 1);
    b.phase[k] = rng.uniform(0.0, kTwoPi);
  }
  cap_harmonics(b);
  const double reach = b.max_radius() + 2.0;
  b.cy = rng.uniform(reach, std::max(reach, h - 1.0 - reach));
  b.cx = rng.uniform(reach, std::max(reach, w - 1.0 - reach));
  return b;
}

// Canonical organ of class c (1-based): a fixed slot on a ring around the
// image center, a class-specific size and a class-specific harmonic shape.
// It depends on the dataset seed only, so every case shares the anatomy.
Blob canonical_organ(const SynthConfig& cfg, int c) {
  Rng rng = Rng(cfg.seed).derive(0xA7A5, static_cast<std::uint64_t>(c));
  const double h = static_cast<double>(cfg.image_size[0]), w = static_cast<double>(cfg.image_size[1]);
  const double side = std::min(h, w);
  const int C = cfg.num_classes;
  Blob b;
  const double t = C == 1 ? 0.5 : static_cast<double>(c - 1) / (C - 1);
  b.radius = (cfg.min_radius + t * (cfg.max_radius - cfg.min_radius)) * side;
  for (int k = 0; k < kHarmonics; ++k) {
    b.amp[k] = cfg.irregularity * rng.uniform(-1.0, 1.0) / (k + 1);
    b.phase[k] = rng.uniform(0.0, kTwoPi);
  }
  cap_harmonics(b);
  const double ring = C == 1 ? 0.0 : 0.24 * side;
  const double angle = -std::numbers::pi / 2 + kTwoPi * (c - 1) / C;
  b.cy = (h - 1) / 2 + ring * std::sin(angle);
  b.cx = (w - 1) / 2 + ring * std::cos(angle);
  return b;
}

// Per-case variation of a canonical organ.
Blob jitter_organ(const Blob& canon, const SynthConfig& cfg, Rng& rng, double shrink) {
  const double side = static_cast<double>(std::min(cfg.image_size[0], cfg.image_size[1]));
  Blob b = canon;
  b.radius = canon.radius * shrink * (1.0 + rng.uniform(-cfg.size_jitter, cfg.size_jitter));
  for (int k = 0; k < kHarmonics; ++k) {
    b.amp[k] = canon.amp[k] + cfg.shape_jitter * cfg.irregularity * rng.uniform(-1.0, 1.0) / (k + 1);
    b.phase[k] = canon.phase[k] + cfg.shape_jitter * rng.uniform(-1.0, 1.0);
  }
  cap_harmonics(b);
  b.cy += cfg.layout_jitter * side * rng.uniform(-1.0, 1.0);
  b.cx += cfg.layout_jitter * side * rng.uniform(-1.0, 1.0);
  return b;
}

int poisson(Rng& rng, double mean) {
  if (mean <= 0) return 0;
  const double limit = std::exp(-mean);
  double p = rng.uniform();
  int k = 0;
  while (p > limit) {
    ++k;
    p *= rng.uniform();
  }
  return k;
}

std::vector<float> gaussian_blur(const std::vector<float>& img, std::int64_t h, std::int64_t w, double sigma) {
  const int half = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> kernel(2 * half + 1);
  double sum = 0;
  for (int i = -half; i <= half; ++i) sum += kernel[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& k : kernel) k /= sum;
  auto pass = [&](const std::vector<float>& src, bool rows) {
    std::vector<float> dst(src.size());
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -half; i <= half; ++i) {
          std::int64_t yy = rows ? y : std::clamp<std::int64_t>(y + i, 0, h - 1);
          std::int64_t xx = rows ? std::clamp<std::int64_t>(x + i, 0, w - 1) : x;
          acc += kernel[i + half] * src[yy * w + xx];
        }
        dst[y * w + x] = static_cast<float>(acc);
      }
    return dst;
  };
  return pass(pass(img, true), false);
}

double angle_diff(double a, double b) {
  double d = std::fmod(std::abs(a - b), kTwoPi);
  return d > std::numbers::pi ? kTwoPi - d : d;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_cases < 1) throw ConfigError("synth: num_cases must be >= 1");
  if (image_size.size() != 2) throw ConfigError("synth: only 2D phantoms are generated");
  for (auto e : image_size)
    if (e < 32) throw ConfigError("synth: image extents must be >= 32");
  if (num_classes < 1 || num_classes > 4) throw ConfigError("synth: num_classes must be in 1..4");
  if (noise_std < 0) throw ConfigError("synth: noise_std must be >= 0");
  if (!(contrast > 0 && contrast <= 1)) throw ConfigError("synth: contrast must be in (0,1]");
  if (blob_count < 0 || irregularity < 0) throw ConfigError("synth: blob_count/irregularity must be >= 0");
  if (layout_jitter < 0 || size_jitter < 0 || size_jitter >= 1 || shape_jitter < 0)
    throw ConfigError("synth: jitters must be >= 0 (size_jitter < 1)");
  if (!(min_radius > 0 && min_radius <= max_radius)) throw ConfigError("synth: bad radius range");
  if (!(min_class_fraction >= 0 && min_class_fraction < max_class_fraction))
    throw ConfigError("synth: bad class fraction range");
  if (!(spacing > 0)) throw ConfigError("synth: spacing must be > 0");
}

std::string synth_case_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%04d", index);
  return buf;
}

Case generate_case(const SynthConfig& cfg, int index) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).derive(static_cast<std::uint64_t>(index));
  const auto h = cfg.image_size[0], w = cfg.image_size[1];
  const double side = static_cast<double>(std::min(h, w));
  const double area = static_cast<double>(h * w);
  const int C = cfg.num_classes;

  // Labeled organs: jittered copies of the canonical anatomy, kept apart
  // and inside the image.
  std::vector<Blob> canon;
  for (int c = 1; c <= C; ++c) canon.push_back(canonical_organ(cfg, c));
  std::vector<Blob> organs;
  LabelMask mask({h, w}, C);
  for (int attempt = 0;; ++attempt) {
    organs.clear();
    std::fill(mask.data.begin(), mask.data.end(), 0);
    const double shrink = std::pow(0.97, attempt / 50);
    bool ok = true;
    for (int c = 1; c <= C && ok; ++c) {
      Blob b = jitter_organ(canon[c - 1], cfg, rng, shrink);
      const double reach = b.max_radius() + 1.0;
      ok = b.cy - reach >= 0 && b.cx - reach >= 0 && b.cy + reach <= static_cast<double>(h - 1) &&
           b.cx + reach <= static_cast<double>(w - 1) &&
           std::all_of(organs.begin(), organs.end(), [&](const Blob& o) {
             return std::hypot(o.cy - b.cy, o.cx - b.cx) > o.max_radius() + b.max_radius() + 2.0;
           });
      if (ok) organs.push_back(b);
    }
    if (!ok) continue;
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x)
        for (int c = 0; c < C; ++c)
          if (organs[c].contains(static_cast<double>(y), static_cast<double>(x)))
            mask.data[y * w + x] = static_cast<std::uint8_t>(c + 1);
    for (int c = 1; c <= C && ok; ++c) {
      const double frac = static_cast<double>(mask.count(c)) / area;
      ok = frac >= cfg.min_class_fraction && frac <= cfg.max_class_fraction;
    }
    if (ok) break;
    if (attempt > 5000) throw ConfigError("synth: cannot place organs with the configured sizes");
  }

  // Piecewise-constant intensities: background 0, class c at c/C, distractors
  // halfway between two class levels.
  std::vector<float> image(h * w, 0.0f);
  for (std::int64_t v = 0; v < h * w; ++v) image[v] = static_cast<float>(mask.data[v]) / static_cast<float>(C);

  const int distractors = poisson(rng, cfg.blob_count);
  for (int k = 0; k < distractors; ++k) {
    for (int tries = 0; tries < 50; ++tries) {
      const double r = rng.uniform(0.5, 0.8) * cfg.min_radius * side;
      Blob b = draw_blob(rng, r, cfg.irregularity, static_cast<double>(h), static_cast<double>(w));
      const bool clear = std::all_of(organs.begin(), organs.end(), [&](const Blob& o) {
        return std::hypot(o.cy - b.cy, o.cx - b.cx) > o.max_radius() + b.max_radius() + 2.0;
      });
      if (!clear) continue;
      const auto level = static_cast<float>((static_cast<double>(rng.uniform_int(1, C)) - 0.5) / C);
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
          if (b.contains(static_cast<double>(y), static_cast<double>(x))) image[y * w + x] = level;
      organs.push_back(b);
      break;
    }
  }

  // Unclear boundaries: along one random arc per organ, blend toward a
  // blurred copy inside a band around the contour.
  if (cfg.contrast < 1.0) {
    const auto blurred = gaussian_blur(image, h, w, 2.0);
    const float mix = static_cast<float>(1.0 - cfg.contrast);
    for (int c = 0; c < C; ++c) {
      const Blob& b = organs[c];
      const double center = rng.uniform(0.0, kTwoPi);
      const double half_width = rng.uniform(std::numbers::pi / 6, std::numbers::pi / 3);
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
          const double dy = static_cast<double>(y) - b.cy, dx = static_cast<double>(x) - b.cx;
          const double theta = std::atan2(dy, dx);
          if (angle_diff(theta, center) > half_width) continue;
          if (std::abs(std::hypot(dy, dx) - b.radius_at(theta)) > 3.0) continue;
          const auto v = y * w + x;
          image[v] = (1.0f - mix) * image[v] + mix * blurred[v];
        }
    }
  }

  if (cfg.noise_std > 0)
    for (auto& v : image) v += static_cast<float>(cfg.noise_std * rng.normal());

  const auto [lo, hi] = std::minmax_element(image.begin(), image.end());
  const float min = *lo, range = *hi - *lo;
  if (range > 0)
    for (auto& v : image) v = (v - min) / range;

  Case out;
  out.volume = Volume({h, w}, {cfg.spacing, cfg.spacing}, synth_case_id(index));
  out.volume.data = std::move(image);
  out.label = std::move(mask);
  return out;
}

std::vector<std::string> gen_dataset(const SynthConfig& cfg, const fs::path& out) {
  cfg.validate();
  std::vector<std::string> ids;
  for (int i = 0; i < cfg.num_cases; ++i) {
    const auto c = generate_case(cfg, i);
    save_volume(c.volume, c.label, case_dir(out, c.volume.id));
    ids.push_back(c.volume.id);
  }
  json j;
  j["config"] = {{"num_cases", cfg.num_cases},
                 {"image_size", cfg.image_size},
                 {"num_classes", cfg.num_classes},
                 {"blob_count", cfg.blob_count},
                 {"irregularity", cfg.irregularity},
                 {"layout_jitter", cfg.layout_jitter},
                 {"size_jitter", cfg.size_jitter},
                 {"shape_jitter", cfg.shape_jitter},
                 {"contrast", cfg.contrast},
                 {"noise_std", cfg.noise_std},
                 {"min_radius", cfg.min_radius},
                 {"max_radius", cfg.max_radius},
                 {"min_class_fraction", cfg.min_class_fraction},
                 {"max_class_fraction", cfg.max_class_fraction},
                 {"spacing", cfg.spacing},
                 {"seed", cfg.seed}};
  j["ids"] = ids;
  j["num_classes"] = cfg.num_classes;
  std::ofstream f(out / "dataset.json", std::ios::trunc);
  if (!f) throw IoError("cannot write " + (out / "dataset.json").string());
  f << j.dump(2) << '\n';
  return ids;
}

std::vector<std::string> read_dataset_ids(const fs::path& dataset_dir) {
  std::ifstream in(dataset_dir / "dataset.json");
  if (!in) throw FormatError("missing dataset.json in " + dataset_dir.string());
  try {
    return json::parse(in).at("ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("ill-formed dataset.json: ") + e.what());
  }
}

}  // namespace anatomia
