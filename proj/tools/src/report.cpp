#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <map>

#include "anatomia/checkpoint.hpp"
#include "anatomia/cli/charts.hpp"
#include "anatomia/cli/commands.hpp"
#include "anatomia/cli/internal.hpp"
#include "anatomia/error.hpp"
#include "anatomia/evaluation.hpp"
#include "anatomia/labels.hpp"
#include "anatomia/volume_io.hpp"

namespace anatomia::cli {
namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace detail;

namespace {

struct Run {
  std::string strategy;
  std::optional<std::string> sweep_value;
  std::uint64_t seed = 0;
  fs::path dir;
  std::optional<fs::path> dae;
  json metrics;
  double ms_per_iteration = 0;
};

// Sweeps over these keys are categorical studies and are drawn as bars.
bool bar_sweep(const std::string& key) { return key == "dae.latent_dim" || key == "ssl.latent_noise_std"; }

std::optional<double> as_number(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

std::string opt(const json& v) { return v.is_null() ? "" : fmt(v.get<double>()); }

struct Group {
  std::string strategy;
  std::optional<std::string> sweep_value;
  std::vector<MetricReport> reports;
  std::vector<double> ms;
};

std::vector<Group> group_runs(const std::vector<Run>& runs) {
  std::vector<Group> groups;
  for (const auto& r : runs) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.strategy == r.strategy && g.sweep_value == r.sweep_value;
    });
    if (it == groups.end()) {
      groups.push_back({r.strategy, r.sweep_value, {}, {}});
      it = groups.end() - 1;
    }
    if (!r.metrics.at("mean_dsc").is_null()) it->reports.push_back(report_from_json(r.metrics));
    it->ms.push_back(r.ms_per_iteration);
  }
  return groups;
}

std::string group_label(const Group& g) { return g.sweep_value ? g.strategy + " " + *g.sweep_value : g.strategy; }

void write_overlays(const fs::path& root, const json& results, const std::vector<Run>& runs, const fs::path& out,
                    const std::string& tag) {
  const fs::path dataset = results.at("dataset").get<std::string>();
  std::vector<std::string> done;
  for (const auto& r : runs) {
    if (std::find(done.begin(), done.end(), r.strategy) != done.end()) continue;
    done.push_back(r.strategy);
    const auto manifest = read_split_manifest(root / r.dir / "splits.json");
    if (manifest.test.empty()) continue;
    const std::string id = manifest.test.front();
    const auto c = load_volume(case_dir(dataset, id));
    const auto ckpt = load_checkpoint(root / r.dir / "model.ckpt");
    auto model = network_from(ckpt);
    const auto setup = inference_setup(Settings{}, ckpt);
    const auto probs = sliding_window_infer(model, c.volume, setup.patch, setup.stride);
    const auto mask = argmax_labels(probs);
    const std::string stem = tag + "_overlay_" + r.strategy;
    write_label_overlay(c.volume, mask, out / (stem + ".ppm"));

    // Case metrics are copied from metrics.json rather than recomputed.
    json case_metrics;
    for (const auto& m : r.metrics.at("cases"))
      if (m.at("id") == id) case_metrics = m;
    std::string csv = "case,strategy,seed,class,dsc,hd95\n";
    if (!case_metrics.is_null()) {
      const auto& d = case_metrics.at("per_class_dsc");
      const auto& h = case_metrics.at("per_class_hd95");
      for (std::size_t k = 0; k < d.size(); ++k)
        csv += id + "," + r.strategy + "," + std::to_string(r.seed) + "," + std::to_string(k + 1) + "," +
               fmt(d[k].get<double>()) + "," + opt(h[k]) + "\n";
    }
    write_text(out / (stem + ".csv"), csv);

    if (r.dae) {
      auto dae = load_dae(root / *r.dae, ckpt.arch.num_classes);
      const auto u = anatomical_uncertainty(dae, probs);
      double sum = 0, peak = 0;
      for (float v : u) {
        sum += v;
        peak = std::max(peak, static_cast<double>(v));
      }
      write_heat_overlay(c.volume, u, 1.0, out / (stem + "_uncertainty.ppm"));
      write_text(out / (stem + "_uncertainty.csv"),
                 "case,mean_uncertainty,max_uncertainty\n" + id + "," +
                     fmt(u.empty() ? 0.0 : sum / static_cast<double>(u.size())) + "," + fmt(peak) + "\n");
    }
  }
}

void report_one(const fs::path& root, const std::string& tag, const fs::path& out) {
  const json results = read_json(root / "results.json");
  const std::optional<std::string> key =
      results.at("sweep_key").is_null() ? std::nullopt : std::optional<std::string>(results.at("sweep_key"));

  std::vector<Run> runs;
  for (const auto& c : results.at("cells")) {
    if (c.at("status") != "ok") continue;
    Run r;
    r.strategy = c.at("strategy").get<std::string>();
    if (!c.at("sweep_value").is_null()) r.sweep_value = c.at("sweep_value").get<std::string>();
    r.seed = c.at("seed").get<std::uint64_t>();
    r.dir = c.at("dir").get<std::string>();
    if (c.contains("dae")) r.dae = fs::path(c.at("dae").get<std::string>());
    r.metrics = read_json(root / r.dir / "metrics.json");
    r.ms_per_iteration = read_json(root / r.dir / "timing.json").at("ms_per_iteration").get<double>();
    runs.push_back(std::move(r));
  }
  if (runs.empty()) throw SizeError(root.string() + ": no completed runs to report");

  std::string csv = "strategy,sweep_value,seed,mean_dsc,mean_hd95\n";
  for (const auto& r : runs)
    csv += r.strategy + "," + r.sweep_value.value_or("") + "," + std::to_string(r.seed) + "," +
           opt(r.metrics.at("mean_dsc")) + "," + opt(r.metrics.at("mean_hd95")) + "\n";
  write_text(out / (tag + "_runs.csv"), csv);

  const auto groups = group_runs(runs);
  std::string table = "strategy,sweep_value,runs,dsc_mean,dsc_std,hd95_mean,hd95_std\n";
  std::string md = "| strategy | " + key.value_or("setting") + " | runs | DSC | HD95 |\n|---|---|---|---|---|\n";
  std::vector<BarGroup> dsc_bars, hd_bars, time_bars;
  std::map<std::string, LineSeries> dsc_lines, hd_lines;
  std::vector<std::string> line_order;
  bool numeric = key && !bar_sweep(*key);
  for (const auto& g : groups)
    if (g.sweep_value && !as_number(*g.sweep_value)) numeric = false;
  std::string timing = "strategy,sweep_value,runs,ms_per_iteration\n";

  for (const auto& g : groups) {
    double ms = 0;
    for (double v : g.ms) ms += v;
    ms /= static_cast<double>(g.ms.size());
    timing += g.strategy + "," + g.sweep_value.value_or("") + "," + std::to_string(g.ms.size()) + "," + fmt(ms) + "\n";
    time_bars.push_back({group_label(g), ms, 0});
    if (g.reports.empty()) continue;
    const auto agg = aggregate_runs(g.reports);
    const auto& hd = agg.mean_hd95;
    table += g.strategy + "," + g.sweep_value.value_or("") + "," + std::to_string(g.reports.size()) + "," +
             fmt(agg.mean_dsc.mean) + "," + fmt(agg.mean_dsc.std) + "," + (hd ? fmt(hd->mean) : "") + "," +
             (hd ? fmt(hd->std) : "") + "\n";
    char buf[200];
    std::snprintf(buf, sizeof buf, "| %s | %s | %zu | %.4f ± %.4f | ", g.strategy.c_str(),
                  g.sweep_value.value_or("-").c_str(), g.reports.size(), agg.mean_dsc.mean, agg.mean_dsc.std);
    md += buf;
    if (hd) std::snprintf(buf, sizeof buf, "%.3f ± %.3f |\n", hd->mean, hd->std);
    else std::snprintf(buf, sizeof buf, "n/a |\n");
    md += buf;

    if (numeric) {
      if (!dsc_lines.count(g.strategy)) {
        line_order.push_back(g.strategy);
        dsc_lines[g.strategy].name = g.strategy;
        hd_lines[g.strategy].name = g.strategy;
      }
      const double x = *as_number(*g.sweep_value);
      auto& d = dsc_lines[g.strategy];
      d.x.push_back(x);
      d.y.push_back(agg.mean_dsc.mean);
      d.error.push_back(agg.mean_dsc.std);
      if (hd) {
        auto& h = hd_lines[g.strategy];
        h.x.push_back(x);
        h.y.push_back(hd->mean);
        h.error.push_back(hd->std);
      }
    } else {
      dsc_bars.push_back({group_label(g), agg.mean_dsc.mean, agg.mean_dsc.std});
      if (hd) hd_bars.push_back({group_label(g), hd->mean, hd->std});
    }
  }
  write_text(out / (tag + "_strategies.csv"), table);
  write_text(out / (tag + "_strategies.md"), md);
  write_text(out / (tag + "_timing.csv"), timing);
  write_text(out / (tag + "_timing.svg"), bar_chart_svg(tag + ": time per iteration", "ms", time_bars));

  const std::string what = key ? *key : std::string("strategy");
  if (numeric) {
    std::vector<LineSeries> d, h;
    for (const auto& n : line_order) {
      d.push_back(dsc_lines[n]);
      if (!hd_lines[n].x.empty()) h.push_back(hd_lines[n]);
    }
    write_text(out / (tag + "_dsc.svg"), line_chart_svg(tag + ": DSC vs " + what, what, "DSC", d));
    write_text(out / (tag + "_hd95.svg"), line_chart_svg(tag + ": HD95 vs " + what, what, "HD95", h));
  } else {
    write_text(out / (tag + "_dsc.svg"), bar_chart_svg(tag + ": DSC by " + what, "DSC", dsc_bars));
    write_text(out / (tag + "_hd95.svg"), bar_chart_svg(tag + ": HD95 by " + what, "HD95", hd_bars));
  }
  write_overlays(root, results, runs, out, tag);
}

}  // namespace

void report(std::span<const fs::path> results, const fs::path& out) {
  if (results.empty()) throw SizeError("report: no result directories given");
  fs::create_directories(out);
  std::vector<std::string> tags;
  for (const auto& root : results) {
    if (!fs::exists(root / "results.json")) throw IoError(root.string() + " has no results.json");
    std::string tag = fs::absolute(root).lexically_normal().filename().string();
    if (tag.empty()) tag = fs::absolute(root).lexically_normal().parent_path().filename().string();
    std::string unique = tag;
    for (int i = 2; std::find(tags.begin(), tags.end(), unique) != tags.end(); ++i) unique = tag + "_" + std::to_string(i);
    tags.push_back(unique);
    report_one(root, unique, out);
  }
}

}  // namespace anatomia::cli
