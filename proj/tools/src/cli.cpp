#include <CLI11.hpp>

#include "anatomia/cli/commands.hpp"
#include "anatomia/cli/internal.hpp"
#include "anatomia/error.hpp"

namespace anatomia::cli {
namespace fs = std::filesystem;

namespace {

struct Options {
  std::vector<std::string> configs;
  std::vector<std::string> sets;
  std::string out;
  std::string dataset;
  std::string strategy;
  std::string seed;
  std::string dae;
  std::string model;
  std::string subset = "test";
  std::string input;
  std::string manifest;
  std::vector<std::string> results;
  bool resume = false;
  bool quiet = false;
};

void add_layers(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.configs, "Config file; later files override earlier ones");
  cmd->add_option("--set", o.sets, "Override one key: key=value");
}

KeyValueConfig layered(const Options& o) {
  KeyValueConfig cfg;
  if (!o.manifest.empty()) cfg.load_file(o.manifest);
  for (const auto& f : o.configs) cfg.load_file(f);
  for (const auto& s : o.sets) cfg.set(s);
  return cfg;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"anatomia: shape-prior uncertainty for mean-teacher segmentation"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset");
  add_layers(gen, o);
  gen->add_option("--out", o.out, "Dataset directory")->required();

  auto* dae = app.add_subcommand("train-dae", "Train the shape prior on the labeled masks");
  add_layers(dae, o);
  dae->add_option("--dataset", o.dataset, "Dataset directory")->required();
  dae->add_option("--seed", o.seed, "Overrides dae.seed");
  dae->add_option("--out", o.out, "Output directory (dae.ckpt)")->required();

  auto* ssl = app.add_subcommand("train-ssl", "Train one segmentation model");
  add_layers(ssl, o);
  ssl->add_option("--dataset", o.dataset, "Dataset directory")->required();
  ssl->add_option("--strategy", o.strategy, "Overrides ssl.strategy");
  ssl->add_option("--seed", o.seed, "Overrides ssl.seed");
  ssl->add_option("--dae", o.dae, "Shape-prior checkpoint");
  ssl->add_option("--out", o.out, "Output directory")->required();

  auto* exp = app.add_subcommand("experiment", "Run every (strategy, seed) cell of a manifest");
  add_layers(exp, o);
  exp->add_option("--manifest", o.manifest, "Experiment manifest")->required();
  exp->add_option("--out", o.out, "Overrides experiment.out");
  exp->add_option("--dataset", o.dataset, "Overrides experiment.dataset");
  exp->add_flag("--resume", o.resume, "Skip cells that already finished");

  auto* ev = app.add_subcommand("eval", "Evaluate a model on a split subset");
  add_layers(ev, o);
  ev->add_option("--model", o.model, "Model checkpoint")->required();
  ev->add_option("--dataset", o.dataset, "Dataset directory")->required();
  ev->add_option("--subset", o.subset, "test, val or labeled");
  ev->add_option("--out", o.out, "Metrics JSON file")->required();

  auto* inf = app.add_subcommand("infer", "Predict masks for volume archives");
  add_layers(inf, o);
  inf->add_option("--model", o.model, "Model checkpoint")->required();
  inf->add_option("--input", o.input, "Archive, dataset or directory of archives")->required();
  inf->add_option("--dae", o.dae, "Shape-prior checkpoint; enables uncertainty maps");
  inf->add_option("--out", o.out, "Output directory")->required();

  auto* rep = app.add_subcommand("report", "Tables and figures from experiment results");
  rep->add_option("--results", o.results, "Experiment result directories")->required();
  rep->add_option("--out", o.out, "Output directory")->required();

  app.add_flag("--quiet", o.quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (apply_deterministic_env() && !o.quiet) err << "deterministic mode: 1 thread\n";
    std::ostream* progress = o.quiet ? nullptr : &err;
    KeyValueConfig cfg = layered(o);

    if (*gen) {
      const Settings s = resolve(cfg);
      gen_data(s, o.out);
      detail::write_text(fs::path(o.out) / "resolved.cfg", describe(s));
    } else if (*dae) {
      if (!o.seed.empty()) cfg.set("dae.seed", o.seed, "--seed");
      const Settings s = resolve(cfg);
      train_dae(s, o.dataset, fs::path(o.out) / "dae.ckpt", progress);
      detail::write_text(fs::path(o.out) / "resolved.cfg", describe(s));
    } else if (*ssl) {
      if (!o.strategy.empty()) cfg.set("ssl.strategy", o.strategy, "--strategy");
      if (!o.seed.empty()) cfg.set("ssl.seed", o.seed, "--seed");
      const Settings s = resolve(cfg);
      std::optional<fs::path> prior;
      if (!o.dae.empty()) prior = o.dae;
      train_ssl(s, o.dataset, s.ssl.strategy, s.ssl.seed, prior, o.out, progress);
      detail::write_text(fs::path(o.out) / "resolved.cfg", describe(s));
    } else if (*exp) {
      if (!o.out.empty()) cfg.set("experiment.out", o.out, "--out");
      if (!o.dataset.empty()) cfg.set("experiment.dataset", o.dataset, "--dataset");
      const int failed = experiment(cfg, o.resume, progress);
      if (failed > 0) {
        err << failed << " cell(s) failed; see error.txt in their run directories\n";
        return kExitDivergence;
      }
    } else if (*ev) {
      const Settings s = resolve(cfg);
      eval(s, o.model, o.dataset, o.subset, o.out);
      const fs::path target(o.out);
      detail::write_text(target.parent_path() / (target.stem().string() + ".resolved.cfg"), describe(s));
    } else if (*inf) {
      const Settings s = resolve(cfg);
      std::optional<fs::path> prior;
      if (!o.dae.empty()) prior = o.dae;
      infer(s, o.model, o.input, prior, o.out);
      detail::write_text(fs::path(o.out) / "resolved.cfg", describe(s));
    } else if (*rep) {
      std::vector<fs::path> roots(o.results.begin(), o.results.end());
      report(roots, o.out);
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace anatomia::cli
