#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>

#include "anatomia/cli/commands.hpp"
#include "anatomia/cli/internal.hpp"
#include "anatomia/error.hpp"

namespace anatomia::cli {
namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace detail;

namespace {

struct Cell {
  Strategy strategy;
  std::optional<std::string> sweep_value;
  std::uint64_t seed;
  fs::path dir;  // relative to the results root
  std::optional<fs::path> dae;  // relative to the results root
  bool ok = false;
  std::string error;
};

std::string cell_group(const Cell& c, const std::optional<std::string>& key) {
  std::string g = to_string(c.strategy);
  if (c.sweep_value) g += "/" + *key + "=" + *c.sweep_value;
  return g;
}

// Keys whose value changes what the shape prior learns.
bool affects_prior(const std::string& key) {
  return key.starts_with("dae.") || key.starts_with("corruption.") || key.starts_with("split.") ||
         key.starts_with("synth.");
}

void write_tables(const fs::path& root, const std::vector<Cell>& cells, const std::optional<std::string>& key) {
  std::map<std::string, std::vector<MetricReport>> groups;
  std::map<std::string, std::vector<double>> timing;
  std::vector<std::string> order;
  for (const auto& c : cells) {
    const auto g = cell_group(c, key);
    if (!groups.count(g)) order.push_back(g);
    auto& reports = groups[g];
    if (!c.ok) continue;
    const auto m = read_json(root / c.dir / "metrics.json");
    if (!m.at("mean_dsc").is_null()) reports.push_back(report_from_json(m));
    timing[g].push_back(read_json(root / c.dir / "timing.json").at("ms_per_iteration").get<double>());
  }

  std::string csv = "group,runs,dsc_mean,dsc_std,hd95_mean,hd95_std\n";
  std::string md = "| group | runs | DSC | HD95 |\n|---|---|---|---|\n";
  std::string times = "group,runs,ms_per_iteration\n";
  for (const auto& g : order) {
    const auto& reports = groups[g];
    if (reports.empty()) {
      csv += g + ",0,,,,\n";
      md += "| " + g + " | 0 | failed | failed |\n";
      continue;
    }
    const auto agg = aggregate_runs(reports);
    const auto hd = agg.mean_hd95;
    csv += g + "," + std::to_string(reports.size()) + "," + fmt(agg.mean_dsc.mean) + "," + fmt(agg.mean_dsc.std) + "," +
           (hd ? fmt(hd->mean) : "") + "," + (hd ? fmt(hd->std) : "") + "\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "| %s | %zu | %.4f ± %.4f | ", g.c_str(), reports.size(), agg.mean_dsc.mean,
                  agg.mean_dsc.std);
    md += buf;
    if (hd) {
      std::snprintf(buf, sizeof buf, "%.3f ± %.3f |\n", hd->mean, hd->std);
      md += buf;
    } else {
      md += "n/a |\n";
    }
    const auto& t = timing[g];
    double mean = 0;
    for (double v : t) mean += v;
    times += g + "," + std::to_string(t.size()) + "," + fmt(t.empty() ? 0.0 : mean / static_cast<double>(t.size())) + "\n";
  }
  write_text(root / "table.csv", csv);
  write_text(root / "table.md", md);
  write_text(root / "timing.csv", times);
}

}  // namespace

int experiment(const KeyValueConfig& manifest, bool resume, std::ostream* progress) {
  const Settings base = resolve(manifest);
  if (!base.experiment.out) throw ConfigError("manifest: experiment.out is required");
  const fs::path root = *base.experiment.out;
  fs::create_directories(root);

  fs::path dataset;
  if (base.experiment.dataset) {
    dataset = *base.experiment.dataset;
    if (!fs::exists(dataset / "dataset.json"))
      throw IoError("manifest: experiment.dataset " + dataset.string() + " has no dataset.json");
  } else {
    dataset = root / "dataset";
    if (!(resume && fs::exists(dataset / "dataset.json"))) {
      if (progress) *progress << "generating dataset in " << dataset.string() << "\n";
      gen_data(base, dataset);
    }
  }
  write_text(root / "manifest.resolved.cfg", describe(base));
  write_split_manifest(split_ids(base, read_dataset_ids(dataset)), root / "splits.json");

  std::vector<std::optional<std::string>> sweep{std::nullopt};
  if (base.experiment.sweep_key) sweep.assign(base.experiment.sweep_values.begin(), base.experiment.sweep_values.end());
  const auto& key = base.experiment.sweep_key;

  std::vector<Cell> cells;
  std::set<std::string> priors_this_run;
  for (const auto& value : sweep) {
    KeyValueConfig layered = manifest;
    if (value) layered.set(*key, *value, "experiment.sweep_values");
    Settings s = resolve(layered);
    for (const auto seed : base.experiment.seeds) {
      s.dae.seed = seed;
      std::optional<fs::path> prior;
      std::string prior_error;
      bool any_prior = false;
      for (auto st : base.experiment.strategies) any_prior = any_prior || needs_dae(st);
      if (any_prior) {
        const std::string tag = value && affects_prior(*key) ? *key + "=" + *value : "shared";
        const fs::path ckpt = root / "dae" / tag / ("seed_" + std::to_string(seed)) / "dae.ckpt";
        const bool have = priors_this_run.count(ckpt.string()) || (resume && fs::exists(ckpt));
        if (!have) {
          try {
            if (progress) *progress << "training shape prior " << tag << " seed " << seed << "\n";
            train_dae(s, dataset, ckpt, nullptr);
          } catch (const std::exception& e) {
            prior_error = std::string("shape prior: ") + e.what();
          }
        }
        if (prior_error.empty()) {
          priors_this_run.insert(ckpt.string());
          prior = ckpt;
        }
      }
      for (auto st : base.experiment.strategies) {
        Cell c{st, value, seed, {}};
        if (needs_dae(st) && prior) c.dae = fs::relative(*prior, root);
        c.dir = fs::path("runs") / to_string(st);
        if (value) c.dir /= *key + "=" + *value;
        c.dir /= "seed_" + std::to_string(seed);
        const fs::path dir = root / c.dir;
        if (resume && fs::exists(dir / "model.ckpt") && fs::exists(dir / "metrics.json")) {
          c.ok = true;
          cells.push_back(c);
          continue;
        }
        fs::remove(dir / "error.txt");
        try {
          if (needs_dae(st) && !prior) throw DivergenceError(prior_error);
          if (progress) *progress << "run " << cell_group(c, key) << " seed " << seed << "\n";
          KeyValueConfig cell_cfg = layered;
          cell_cfg.set("ssl.seed", std::to_string(seed), "experiment.seeds");
          cell_cfg.set("ssl.strategy", to_string(st), "experiment.strategies");
          train_ssl(s, dataset, st, seed, prior, dir, progress);
          write_text(dir / "resolved.cfg", describe(resolve(cell_cfg)));
          c.ok = true;
        } catch (const std::exception& e) {
          c.error = e.what();
          write_text(dir / "error.txt", c.error + "\n");
          if (progress) *progress << "  failed: " << c.error << "\n";
        }
        cells.push_back(c);
      }
    }
  }

  json results;
  results["dataset"] = fs::absolute(dataset).string();
  results["sweep_key"] = key ? json(*key) : json(nullptr);
  results["cells"] = json::array();
  int failed = 0;
  for (const auto& c : cells) {
    json j{{"strategy", to_string(c.strategy)},
           {"sweep_value", c.sweep_value ? json(*c.sweep_value) : json(nullptr)},
           {"seed", c.seed},
           {"dir", c.dir.generic_string()},
           {"status", c.ok ? "ok" : "failed"}};
    if (c.dae) j["dae"] = c.dae->generic_string();
    if (!c.ok) {
      j["error"] = c.error;
      ++failed;
    }
    results["cells"].push_back(j);
  }
  write_text(root / "results.json", results.dump(2) + "\n");
  write_tables(root, cells, key);
  return failed;
}

}  // namespace anatomia::cli
