#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "anatomia/checkpoint.hpp"
#include "anatomia/cli/charts.hpp"
#include "anatomia/cli/commands.hpp"
#include "anatomia/error.hpp"
#include "anatomia/volume_io.hpp"
#include "fixtures.hpp"

using namespace anatomia;
using namespace anatomia::cli;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Fresh scratch directory per test, removed afterwards.
class Scratch {
 public:
  explicit Scratch(const std::string& name) : dir_(fs::temp_directory_path() / ("anatomia_cli_" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Scratch() { fs::remove_all(dir_); }
  [[nodiscard]] const fs::path& dir() const { return dir_; }
  fs::path operator/(const std::string& p) const { return dir_ / p; }

 private:
  fs::path dir_;
};

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "anatomia");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

// Every regular file under `root`, relative path to contents.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  return files;
}

const char* kTiny =
    "synth.num_cases = 12\n"
    "synth.image_size = 32,32\n"
    "split.n_labeled = 3\n"
    "split.test_frac = 0.25\n"
    "dae.max_iters = 10\n"
    "dae.log_every = 5\n"
    "dae.batch_size = 2\n"
    "dae.patch = 32,32\n"
    "dae.latent_dim = 8\n"
    "dae.base_width = 2\n"
    "dae.depth = 2\n"
    "dae.convs_per_level = 1\n"
    "ssl.t_max = 4\n"
    "ssl.patch = 16,16\n"
    "ssl.infer_stride = 8,8\n"
    "ssl.base_width = 2\n"
    "ssl.depth = 2\n"
    "ssl.convs_per_level = 1\n";

// A segmentation network whose logits are `bias` at every voxel: all weights
// zero, so every normalised activation is zero too.
fs::path constant_model(const fs::path& path, const std::vector<float>& bias) {
  Rng rng(5);
  auto arch = default_segnet_arch(static_cast<int>(bias.size()) - 1, 2, Strategy::none);
  arch.base_width = 2;
  arch.depth = 2;
  arch.convs_per_level = 1;
  auto net = Network::segnet(arch, rng);
  Checkpoint ckpt;
  ckpt.kind = "segnet";
  ckpt.arch = arch;
  for (auto& p : net.parameters()) {
    auto v = at::zeros_like(p.value);
    if (p.name == "head.bias")
      for (std::size_t k = 0; k < bias.size(); ++k) v[static_cast<std::int64_t>(k)] = bias[k];
    ckpt.params.push_back({p.name, v});
  }
  ckpt.metadata = R"({"patch_size":[16,16],"infer_stride":[8,8]})";
  save_checkpoint(ckpt, path);
  return path;
}

fs::path tiny_prior(const fs::path& path) {
  auto dae = fixture::tiny_dae();
  Checkpoint ckpt;
  ckpt.kind = "dae";
  ckpt.arch = dae.arch();
  ckpt.params = snapshot(dae.parameters());
  save_checkpoint(ckpt, path);
  return path;
}

}  // namespace

// ---- layered configuration ----------------------------------------------

TEST(Config, MalformedLineNamesFileAndLine) {
  Scratch s("malformed");
  write(s / "a.cfg", "# comment\nsynth.num_cases = 3\n\nnot an assignment\n");
  KeyValueConfig cfg;
  try {
    cfg.load_file(s / "a.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("a.cfg:4:"), std::string::npos) << e.what();
  }
}

TEST(Config, DuplicateKeyNamesBothLines) {
  Scratch s("duplicate");
  write(s / "a.cfg", "ssl.gamma = 1\nssl.beta = 0.1\nssl.gamma = 2\n");
  KeyValueConfig cfg;
  try {
    cfg.load_file(s / "a.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("a.cfg:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 1"), std::string::npos) << msg;
  }
}

TEST(Config, BadValueAndUnknownKeyNameTheirOrigin) {
  Scratch s("badvalue");
  write(s / "a.cfg", "ssl.gamma = 1\nssl.t_max = many\n");
  KeyValueConfig cfg;
  cfg.load_file(s / "a.cfg");
  try {
    (void)resolve(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("a.cfg:2"), std::string::npos) << e.what();
  }
  try {
    cfg.set("ssl.gama=1");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("--set ssl.gama"), std::string::npos) << e.what();
  }
}

TEST(Config, LaterLayersOverrideEarlierOnes) {
  Scratch s("layers");
  write(s / "base.cfg", "ssl.gamma = 1\nssl.beta = 0.3\n");
  write(s / "top.cfg", "include = base.cfg\nssl.gamma = 2\n");
  KeyValueConfig cfg;
  cfg.load_file(s / "top.cfg");
  auto st = resolve(cfg);
  EXPECT_EQ(st.ssl.gamma, 2.0);
  EXPECT_EQ(st.ssl.beta, 0.3);
  cfg.set("ssl.beta=0.5");
  st = resolve(cfg);
  EXPECT_EQ(st.ssl.beta, 0.5);
  EXPECT_EQ(cfg.entries().at("ssl.beta").origin, "--set ssl.beta");
}

TEST(Config, IncludeCycleIsAConfigError) {
  Scratch s("cycle");
  write(s / "a.cfg", "include = a.cfg\n");
  KeyValueConfig cfg;
  EXPECT_THROW(cfg.load_file(s / "a.cfg"), ConfigError);
}

TEST(Config, DescribeCoversEveryKeyAndRoundTrips) {
  Scratch s("describe");
  KeyValueConfig cfg;
  cfg.set("ssl.gamma=0.25");
  cfg.set("dae.base_width=6");
  cfg.set("experiment.strategies=none,mcdo");
  cfg.set("synth.image_size=40,48");
  const auto text = describe(resolve(cfg));

  std::vector<std::string> described;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto body = line.rfind("# ", 0) == 0 ? line.substr(2) : line;
    described.push_back(body.substr(0, body.find(" =")));
  }
  EXPECT_EQ(described, known_keys());

  write(s / "resolved.cfg", text);
  KeyValueConfig back;
  back.load_file(s / "resolved.cfg");
  EXPECT_EQ(describe(resolve(back)), text);
}

TEST(Config, SweepMustNameAnotherKnownKey) {
  KeyValueConfig cfg;
  cfg.set("experiment.sweep=ssl.gama");
  cfg.set("experiment.sweep_values=1,2");
  EXPECT_THROW((void)resolve(cfg), ConfigError);
  KeyValueConfig empty;
  empty.set("experiment.sweep=ssl.gamma");
  EXPECT_THROW((void)resolve(empty), ConfigError);
}

// ---- exit codes -----------------------------------------------------------

TEST(ExitCodes, LibraryErrorsMapToDocumentedCodes) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), kExitConfig);
  EXPECT_EQ(exit_code_for(FormatError("x")), kExitData);
  EXPECT_EQ(exit_code_for(IoError("x")), kExitData);
  EXPECT_EQ(exit_code_for(ShapeError("x")), kExitData);
  EXPECT_EQ(exit_code_for(SizeError("x")), kExitData);
  EXPECT_EQ(exit_code_for(DivergenceError("x")), kExitDivergence);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), kExitFailure);
}

TEST(ExitCodes, CommandLine) {
  Scratch s("exitcodes");
  EXPECT_EQ(invoke({}).code, kExitConfig);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(invoke({"gen-data"}).code, kExitConfig);  // --out is required
  EXPECT_EQ(invoke({"--help"}).code, kExitOk);
  EXPECT_EQ(invoke({"gen-data", "--set", "synth.num_cases=0", "--out", (s / "d").string()}).code, kExitConfig);
  EXPECT_EQ(invoke({"train-dae", "--dataset", (s / "missing").string(), "--out", (s / "p").string()}).code, kExitData);
  EXPECT_EQ(invoke({"report", "--results", (s / "missing").string(), "--out", (s / "r").string()}).code, kExitData);
}

TEST(GenData, MalformedConfigReportsLine) {
  Scratch s("genbad");
  write(s / "bad.cfg", "synth.num_cases = 4\nsynth.seed 3\n");
  const auto r = invoke({"gen-data", "--config", (s / "bad.cfg").string(), "--out", (s / "d").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("bad.cfg:2:"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(s / "d"));
}

TEST(GenData, DefaultsGiveTwoHundredCasesAndIdenticalBytes) {
  Scratch s("gendefault");
  ASSERT_EQ(invoke({"--quiet", "gen-data", "--out", (s / "a").string()}).code, kExitOk);
  ASSERT_EQ(invoke({"--quiet", "gen-data", "--out", (s / "b").string()}).code, kExitOk);
  EXPECT_EQ(read_dataset_ids(s / "a").size(), 200u);
  std::size_t archives = 0;
  for (const auto& e : fs::directory_iterator(s / "a" / "cases")) archives += e.is_directory();
  EXPECT_EQ(archives, 200u);
  EXPECT_TRUE(fs::exists(s / "a" / "resolved.cfg"));
  EXPECT_EQ(tree(s / "a"), tree(s / "b"));
}

// ---- experiment -----------------------------------------------------------

class Experiment : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    scratch_ = new Scratch("experiment");
    write(*scratch_ / "tiny.cfg", kTiny);
    write(*scratch_ / "exp.cfg",
          "include = tiny.cfg\nexperiment.strategies = none,anatomical\nexperiment.seeds = 1,2,3\n");
    first_ = invoke({"--quiet", "experiment", "--manifest", (*scratch_ / "exp.cfg").string(), "--out", root().string()});
  }
  static void TearDownTestSuite() {
    delete scratch_;
    scratch_ = nullptr;
  }
  static fs::path root() { return *scratch_ / "exp"; }

  static Scratch* scratch_;
  static Outcome first_;
};
Scratch* Experiment::scratch_ = nullptr;
Outcome Experiment::first_{};

TEST_F(Experiment, TwoStrategiesThreeSeedsGiveSixRunsAndOneTable) {
  ASSERT_EQ(first_.code, kExitOk) << first_.err;
  const auto results = load_json(root() / "results.json");
  ASSERT_EQ(results.at("cells").size(), 6u);
  std::set<std::pair<std::string, std::uint64_t>> seen;
  for (const auto& c : results.at("cells")) {
    EXPECT_EQ(c.at("status"), "ok");
    seen.insert({c.at("strategy").get<std::string>(), c.at("seed").get<std::uint64_t>()});
    const fs::path dir = root() / c.at("dir").get<std::string>();
    for (const char* f : {"model.ckpt", "metrics.json", "timing.json", "ssl_log.csv", "resolved.cfg", "splits.json"})
      EXPECT_TRUE(fs::exists(dir / f)) << dir / f;
  }
  EXPECT_EQ(seen.size(), 6u);

  std::size_t run_dirs = 0;
  for (const auto& e : fs::recursive_directory_iterator(root() / "runs")) run_dirs += e.path().filename() == "model.ckpt";
  EXPECT_EQ(run_dirs, 6u);
  // One prior per seed, shared by every strategy that uses it.
  std::size_t priors = 0;
  for (const auto& e : fs::recursive_directory_iterator(root() / "dae")) priors += e.path().filename() == "dae.ckpt";
  EXPECT_EQ(priors, 3u);

  EXPECT_TRUE(fs::exists(root() / "table.md"));
  const auto table = csv_rows(root() / "table.csv");
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table[0][0], "none");
  EXPECT_EQ(table[1][0], "anatomical");
  EXPECT_EQ(table[0][1], "3");
  EXPECT_EQ(csv_rows(root() / "timing.csv").size(), 2u);
  EXPECT_TRUE(fs::exists(root() / "manifest.resolved.cfg"));
}

TEST_F(Experiment, TableIsMeanAndStdOfPerRunMetrics) {
  ASSERT_EQ(first_.code, kExitOk);
  const auto results = load_json(root() / "results.json");
  std::map<std::string, std::vector<double>> dsc;
  for (const auto& c : results.at("cells"))
    dsc[c.at("strategy")].push_back(load_json(root() / c.at("dir").get<std::string>() / "metrics.json")
                                        .at("mean_dsc")
                                        .get<double>());
  for (const auto& row : csv_rows(root() / "table.csv")) {
    const auto& v = dsc.at(row[0]);
    const double mean = (v[0] + v[1] + v[2]) / 3.0;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(std::stod(row[2]), mean, 1e-12);
    EXPECT_NEAR(std::stod(row[3]), std::sqrt(ss / 2.0), 1e-12);
  }
}

TEST_F(Experiment, ResumeSkipsFinishedCells) {
  ASSERT_EQ(first_.code, kExitOk);
  std::map<std::string, fs::file_time_type> stamps;
  for (const auto& e : fs::recursive_directory_iterator(root()))
    if (e.path().filename() == "model.ckpt" || e.path().filename() == "dae.ckpt") stamps[e.path().string()] = e.last_write_time();
  const auto before = slurp(root() / "table.csv");
  const auto again = invoke({"--quiet", "experiment", "--manifest", (*scratch_ / "exp.cfg").string(), "--out",
                          root().string(), "--resume"});
  ASSERT_EQ(again.code, kExitOk) << again.err;
  for (const auto& [path, t] : stamps) EXPECT_EQ(fs::last_write_time(path), t) << path;
  EXPECT_EQ(slurp(root() / "table.csv"), before);
}

TEST_F(Experiment, ReportCsvEqualsMetricsJson) {
  ASSERT_EQ(first_.code, kExitOk);
  const fs::path out = *scratch_ / "report";
  ASSERT_EQ(invoke({"report", "--results", root().string(), "--out", out.string()}).code, kExitOk);
  const auto results = load_json(root() / "results.json");
  const auto rows = csv_rows(out / "exp_runs.csv");
  ASSERT_EQ(rows.size(), results.at("cells").size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& cell = results.at("cells")[i];
    const auto metrics = load_json(root() / cell.at("dir").get<std::string>() / "metrics.json");
    EXPECT_EQ(rows[i][0], cell.at("strategy"));
    EXPECT_EQ(std::stoull(rows[i][2]), cell.at("seed").get<std::uint64_t>());
    EXPECT_EQ(std::stod(rows[i][3]), metrics.at("mean_dsc").get<double>());
    if (metrics.at("mean_hd95").is_null()) EXPECT_EQ(rows[i][4], "");
    else EXPECT_EQ(std::stod(rows[i][4]), metrics.at("mean_hd95").get<double>());
  }
  for (const char* f : {"exp_strategies.csv", "exp_strategies.md", "exp_dsc.svg", "exp_hd95.svg", "exp_timing.csv",
                        "exp_timing.svg", "exp_overlay_none.ppm", "exp_overlay_none.csv",
                        "exp_overlay_anatomical.ppm", "exp_overlay_anatomical.csv",
                        "exp_overlay_anatomical_uncertainty.ppm", "exp_overlay_anatomical_uncertainty.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_FALSE(fs::exists(out / "exp_overlay_none_uncertainty.ppm"));
}

TEST_F(Experiment, ReportIsDeterministic) {
  ASSERT_EQ(first_.code, kExitOk);
  const fs::path a = *scratch_ / "report_a", b = *scratch_ / "report_b";
  ASSERT_EQ(invoke({"report", "--results", root().string(), "--out", a.string()}).code, kExitOk);
  ASSERT_EQ(invoke({"report", "--results", root().string(), "--out", b.string()}).code, kExitOk);
  EXPECT_EQ(tree(a), tree(b));
}

TEST(ExperimentFailures, FailedCellIsRecordedAndOthersContinue) {
  Scratch s("failures");
  write(s / "tiny.cfg", kTiny);
  write(s / "exp.cfg",
        "include = tiny.cfg\nexperiment.strategies = none\nexperiment.seeds = 1\n"
        "experiment.sweep = ssl.t_max\nexperiment.sweep_values = 0,3\n");
  const auto r = invoke({"--quiet", "experiment", "--manifest", (s / "exp.cfg").string(), "--out", (s / "exp").string()});
  EXPECT_NE(r.code, kExitOk);
  const auto cells = load_json(s / "exp" / "results.json").at("cells");
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0].at("status"), "failed");
  EXPECT_TRUE(fs::exists(s / "exp" / cells[0].at("dir").get<std::string>() / "error.txt"));
  EXPECT_EQ(cells[1].at("status"), "ok");
  EXPECT_TRUE(fs::exists(s / "exp" / cells[1].at("dir").get<std::string>() / "metrics.json"));
}

TEST(Report, EmptyInputIsASizeError) {
  Scratch s("emptyreport");
  EXPECT_THROW(report({}, s / "out"), SizeError);
  write(s / "res" / "results.json", R"({"dataset": "x", "sweep_key": null, "cells": [)"
                                    R"({"strategy": "none", "sweep_value": null, "seed": 1,)"
                                    R"( "dir": "runs/none/seed_1", "status": "failed", "error": "boom"}]})");
  const std::vector<fs::path> roots{s / "res"};
  EXPECT_THROW(report(roots, s / "out"), SizeError);
}

TEST(Report, SweepsUseBarsForLatentStudiesAndLinesOtherwise) {
  Scratch s("sweeps");
  write(s / "tiny.cfg", kTiny);
  write(s / "gamma.cfg",
        "include = tiny.cfg\nexperiment.strategies = none\nexperiment.seeds = 1\n"
        "experiment.sweep = ssl.gamma\nexperiment.sweep_values = 0,1\n");
  write(s / "latent.cfg",
        "include = tiny.cfg\nexperiment.strategies = none\nexperiment.seeds = 1\n"
        "experiment.sweep = dae.latent_dim\nexperiment.sweep_values = 8,16\n");
  ASSERT_EQ(invoke({"--quiet", "experiment", "--manifest", (s / "gamma.cfg").string(), "--out", (s / "gamma").string()})
                .code,
            kExitOk);
  ASSERT_EQ(invoke({"--quiet", "experiment", "--manifest", (s / "latent.cfg").string(), "--out",
                 (s / "latent").string()})
                .code,
            kExitOk);
  ASSERT_EQ(invoke({"report", "--results", (s / "gamma").string(), "--results", (s / "latent").string(), "--out",
                 (s / "out").string()})
                .code,
            kExitOk);
  for (const char* metric : {"dsc", "hd95"}) {
    const auto line = slurp(s / "out" / ("gamma_" + std::string(metric) + ".svg"));
    const auto bars = slurp(s / "out" / ("latent_" + std::string(metric) + ".svg"));
    EXPECT_NE(line.find("<polyline"), std::string::npos) << metric;
    EXPECT_EQ(bars.find("<polyline"), std::string::npos) << metric;
  }
  EXPECT_EQ(csv_rows(s / "out" / "gamma_strategies.csv").size(), 2u);
}

// ---- infer ----------------------------------------------------------------

class Infer : public ::testing::Test {
 protected:
  void SetUp() override {
    KeyValueConfig cfg;
    cfg.set("synth.num_cases=3");
    cfg.set("synth.image_size=32,32");
    gen_data(resolve(cfg), scratch_ / "data");
    constant_model(scratch_ / "model.ckpt", {0.0F, 2.0F, -1.0F});
    tiny_prior(scratch_ / "dae.ckpt");
  }
  Scratch scratch_{"infer"};
};

TEST_F(Infer, ConstantModelGivesConstantOutputsAndNoUncertaintyWithoutPrior) {
  const fs::path out = scratch_ / "pred";
  const auto r = invoke({"infer", "--model", (scratch_ / "model.ckpt").string(), "--input", (scratch_ / "data").string(),
                      "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;

  // softmax(0, 2, -1)
  const double z = 1.0 + std::exp(2.0) + std::exp(-1.0);
  const double expected[3] = {1.0 / z, std::exp(2.0) / z, std::exp(-1.0) / z};
  std::size_t cases = 0;
  for (const auto& id : read_dataset_ids(scratch_ / "data")) {
    ++cases;
    const fs::path dir = out / id;
    const auto c = load_volume(dir);
    ASSERT_TRUE(c.label.has_value());
    c.label->validate();
    for (auto v : c.label->data) EXPECT_EQ(v, 1);

    const auto raw = slurp(dir / "probs.raw");
    const std::size_t voxels = static_cast<std::size_t>(c.volume.size());
    ASSERT_EQ(raw.size(), voxels * 3 * sizeof(float));
    std::vector<float> probs(voxels * 3);
    std::memcpy(probs.data(), raw.data(), raw.size());
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t v = 0; v < voxels; ++v) ASSERT_NEAR(probs[k * voxels + v], expected[k], 1e-6);

    EXPECT_FALSE(load_json(dir / "probs.json").at("uncertainty").get<bool>());
    EXPECT_FALSE(fs::exists(dir / "uncertainty.raw"));
    EXPECT_TRUE(fs::exists(dir / "overlay.ppm"));
  }
  EXPECT_EQ(cases, 3u);
}

TEST_F(Infer, UncertaintyPresentExactlyWhenPriorGiven) {
  const fs::path out = scratch_ / "pred";
  const auto r = invoke({"infer", "--model", (scratch_ / "model.ckpt").string(), "--input", (scratch_ / "data").string(),
                      "--dae", (scratch_ / "dae.ckpt").string(), "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const auto& id : read_dataset_ids(scratch_ / "data")) {
    const fs::path dir = out / id;
    EXPECT_TRUE(load_json(dir / "probs.json").at("uncertainty").get<bool>());
    const auto raw = slurp(dir / "uncertainty.raw");
    ASSERT_EQ(raw.size(), static_cast<std::size_t>(32 * 32) * sizeof(float));
    std::vector<float> u(32 * 32);
    std::memcpy(u.data(), raw.data(), raw.size());
    for (float v : u) {
      EXPECT_GE(v, 0.0F);
      EXPECT_LE(v, 2.0F);  // squared distance between two distributions
    }
    EXPECT_TRUE(fs::exists(dir / "uncertainty.ppm"));
  }
  // Rerunning without the prior removes stale maps.
  ASSERT_EQ(invoke({"infer", "--model", (scratch_ / "model.ckpt").string(), "--input", (scratch_ / "data").string(),
                 "--out", out.string()})
                .code,
            kExitOk);
  for (const auto& id : read_dataset_ids(scratch_ / "data")) EXPECT_FALSE(fs::exists(out / id / "uncertainty.raw"));
}

TEST_F(Infer, MismatchedPriorIsRejected) {
  constant_model(scratch_ / "four.ckpt", {0.0F, 1.0F, 0.0F, 0.0F});
  const auto r = invoke({"infer", "--model", (scratch_ / "four.ckpt").string(), "--input", (scratch_ / "data").string(),
                      "--dae", (scratch_ / "dae.ckpt").string(), "--out", (scratch_ / "p").string()});
  EXPECT_EQ(r.code, kExitData);
}

// ---- charts ---------------------------------------------------------------

TEST(Charts, SvgDependsOnlyOnArguments) {
  const std::vector<BarGroup> bars{{"a", 0.5, 0.1}, {"b", 0.7, 0.0}};
  EXPECT_EQ(bar_chart_svg("t", "y", bars), bar_chart_svg("t", "y", bars));
  const std::vector<LineSeries> lines{{"s", {0, 1, 2}, {0.2, 0.4, 0.3}, {0, 0, 0}}};
  const auto svg = line_chart_svg("t", "x", "y", lines);
  EXPECT_EQ(svg, line_chart_svg("t", "x", "y", lines));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
