#include "anatomia/cli/commands.hpp"

#include <ATen/Parallel.h>
#include <ATen/core/grad_mode.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "anatomia/checkpoint.hpp"
#include "anatomia/cli/charts.hpp"
#include "anatomia/cli/internal.hpp"
#include "anatomia/error.hpp"
#include "anatomia/evaluation.hpp"
#include "anatomia/labels.hpp"
#include "anatomia/tensor.hpp"
#include "anatomia/volume_io.hpp"

namespace anatomia::cli {
namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DivergenceError*>(&e) || dynamic_cast<const DegenerateWeightError*>(&e))
    return kExitDivergence;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const IoError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const SizeError*>(&e) || dynamic_cast<const ConsistencyError*>(&e) ||
      dynamic_cast<const InvariantError*>(&e))
    return kExitData;
  return kExitFailure;
}

bool apply_deterministic_env() {
  const char* v = std::getenv("ANATOMIA_DETERMINISTIC");
  if (v == nullptr || std::string(v) != "1") return false;
  at::set_num_threads(1);
  return true;
}

namespace detail {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json report_json(const MetricReport& r) {
  json j;
  j["mean_dsc"] = r.mean_dsc;
  j["mean_hd95"] = r.mean_hd95 ? json(*r.mean_hd95) : json(nullptr);
  j["per_class_dsc"] = r.per_class_dsc;
  j["per_class_hd95"] = json::array();
  for (const auto& h : r.per_class_hd95) j["per_class_hd95"].push_back(h ? json(*h) : json(nullptr));
  return j;
}

MetricReport report_from_json(const json& j) {
  MetricReport r;
  r.mean_dsc = j.at("mean_dsc").get<double>();
  if (!j.at("mean_hd95").is_null()) r.mean_hd95 = j.at("mean_hd95").get<double>();
  r.per_class_dsc = j.at("per_class_dsc").get<std::vector<double>>();
  for (const auto& h : j.at("per_class_hd95"))
    r.per_class_hd95.push_back(h.is_null() ? std::nullopt : std::optional<double>(h.get<double>()));
  return r;
}

json metrics_json(const std::vector<MetricReport>& reports, const std::vector<std::string>& ids) {
  json j = reports.empty() ? json{{"mean_dsc", nullptr}, {"mean_hd95", nullptr}} : report_json(average_reports(reports));
  j["cases"] = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    json c = report_json(reports[i]);
    c["id"] = ids[i];
    j["cases"].push_back(c);
  }
  return j;
}

int dataset_classes(const fs::path& dataset) {
  const auto j = read_json(dataset / "dataset.json");
  if (!j.contains("num_classes")) throw FormatError("dataset.json has no num_classes");
  return j.at("num_classes").get<int>();
}

LoadedSplit load_configured_split(const Settings& s, const fs::path& dataset) {
  const auto ids = read_dataset_ids(dataset);
  LoadedSplit out;
  out.manifest = split_ids(s, ids);
  out.split = load_split(dataset, out.manifest);
  out.num_classes = dataset_classes(dataset);
  if (out.split.labeled.empty()) throw SizeError("split has no labeled cases");
  out.rank = out.split.labeled.front().volume.rank();
  return out;
}

std::vector<float> anatomical_uncertainty(Network& dae, const ProbMap& probs) {
  at::NoGradGuard no_grad;
  dae.set_mode(Mode::eval);
  Rng unused(0);
  const auto p = to_tensor(probs).unsqueeze(0);
  const auto u = uncertainty_anatomical(p, dae_map(dae, p, 0.0, unused))[0].contiguous().to(at::kFloat);
  return {u.data_ptr<float>(), u.data_ptr<float>() + u.numel()};
}

InferenceSetup inference_setup(const Settings& s, const Checkpoint& ckpt) {
  InferenceSetup out{s.ssl.patch_size, s.ssl.infer_stride};
  const json meta = json::parse(ckpt.metadata, nullptr, false);
  if (meta.is_object()) {
    if (meta.contains("patch_size")) out.patch = meta.at("patch_size").get<Shape>();
    if (meta.contains("infer_stride")) out.stride = meta.at("infer_stride").get<Shape>();
  }
  if (static_cast<int>(out.patch.size()) != ckpt.arch.rank || out.stride.size() != out.patch.size())
    throw ShapeError("inference patch rank differs from the model");
  return out;
}

Network load_dae(const fs::path& path, int num_classes) {
  const auto ckpt = load_checkpoint(path);
  if (ckpt.kind != "dae") throw ConsistencyError(path.string() + " is not a shape-prior checkpoint");
  if (ckpt.arch.num_classes != num_classes)
    throw ConsistencyError("shape prior has " + std::to_string(ckpt.arch.num_classes) + " classes, data has " +
                           std::to_string(num_classes));
  return network_from(ckpt);
}

}  // namespace detail

using namespace detail;

void gen_data(const Settings& s, const fs::path& out) {
  gen_dataset(s.synth, out);
}

void train_dae(const Settings& s, const fs::path& dataset, const fs::path& ckpt_path, std::ostream* progress) {
  const auto data = load_configured_split(s, dataset);
  std::vector<LabelMask> masks;
  for (const auto& c : data.split.labeled) masks.push_back(c.label);
  const auto cfg = dae_training(s, data.num_classes);
  const auto result = anatomia::train_dae(masks, cfg, [&](const DaeLogRow& row) {
    if (progress) *progress << "dae it " << row.iteration << " loss " << row.total << "\n";
  });
  json meta;
  meta["dataset"] = fs::absolute(dataset).string();
  meta["masks"] = masks.size();
  meta["seed"] = cfg.seed;
  meta["early_stopped"] = result.early_stopped;
  const fs::path dir = ckpt_path.has_parent_path() ? ckpt_path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  save_checkpoint(make_dae_checkpoint(result, meta.dump()), ckpt_path);
  write_dae_log(result.log, dir / "dae_log.csv");
  write_split_manifest(data.manifest, dir / "splits.json");
}

void train_ssl(const Settings& s, const fs::path& dataset, Strategy strategy, std::uint64_t seed,
               const std::optional<fs::path>& dae_ckpt, const fs::path& out, std::ostream* progress) {
  const auto data = load_configured_split(s, dataset);
  const auto cfg = ssl_training(s, strategy, seed, data.num_classes, data.rank);
  std::optional<Network> dae;
  if (needs_dae(strategy)) {
    if (!dae_ckpt) throw ConfigError("strategy '" + to_string(strategy) + "' needs --dae <checkpoint>");
    dae = load_dae(*dae_ckpt, data.num_classes);
  }
  fs::create_directories(out);
  auto result = anatomia::train_ssl(data.split, cfg, std::move(dae), [&](const SslIterationLog& row) {
    if (progress && (row.iteration + 1) % 100 == 0)
      *progress << to_string(strategy) << " seed " << seed << " it " << row.iteration + 1 << "/" << cfg.t_max
                << " L " << row.total << "\n";
  });

  json meta = json::parse(result.checkpoint.metadata);
  meta["patch_size"] = cfg.patch_size;
  meta["infer_stride"] = cfg.infer_stride;
  meta["seed"] = seed;
  meta["dataset"] = fs::absolute(dataset).string();
  result.checkpoint.metadata = meta.dump();
  save_checkpoint(result.checkpoint, out / "model.ckpt");
  write_ssl_log(result.log, out / "ssl_log.csv");

  std::vector<std::string> ids;
  for (const auto& c : data.split.test) ids.push_back(c.volume.id);
  const auto reports = evaluate_model(result.model, data.split.test, cfg.patch_size, cfg.infer_stride);
  json metrics = metrics_json(reports, ids);
  metrics["strategy"] = to_string(strategy);
  metrics["seed"] = seed;
  metrics["selected_iteration"] = result.selected_iteration;
  write_text(out / "metrics.json", metrics.dump(2) + "\n");

  double wall = 0;
  for (const auto& row : result.log) wall += row.wall_ms;
  json timing;
  timing["iterations"] = result.log.size();
  timing["ms_per_iteration"] = result.log.empty() ? 0.0 : wall / static_cast<double>(result.log.size());
  write_text(out / "timing.json", timing.dump(2) + "\n");
  write_split_manifest(data.manifest, out / "splits.json");
}

void eval(const Settings& s, const fs::path& model_path, const fs::path& dataset, const std::string& subset,
          const fs::path& out) {
  const auto data = load_configured_split(s, dataset);
  const auto ckpt = load_checkpoint(model_path);
  if (ckpt.kind != "segnet") throw ConsistencyError(model_path.string() + " is not a segmentation checkpoint");
  if (ckpt.arch.num_classes != data.num_classes) throw ConsistencyError("model and dataset class counts differ");
  auto model = network_from(ckpt);
  const auto setup = inference_setup(s, ckpt);
  const std::vector<LabeledCase>* cases = nullptr;
  if (subset == "test") cases = &data.split.test;
  else if (subset == "val") cases = &data.split.val;
  else if (subset == "labeled") cases = &data.split.labeled;
  else throw ConfigError("--subset must be test, val or labeled, got '" + subset + "'");
  if (cases->empty()) throw SizeError("subset '" + subset + "' is empty");
  std::vector<std::string> ids;
  for (const auto& c : *cases) ids.push_back(c.volume.id);
  json metrics = metrics_json(evaluate_model(model, *cases, setup.patch, setup.stride), ids);
  metrics["subset"] = subset;
  write_text(out, metrics.dump(2) + "\n");
}

void infer(const Settings& s, const fs::path& model_path, const fs::path& input,
           const std::optional<fs::path>& dae_ckpt, const fs::path& out) {
  const auto ckpt = load_checkpoint(model_path);
  if (ckpt.kind != "segnet") throw ConsistencyError(model_path.string() + " is not a segmentation checkpoint");
  auto model = network_from(ckpt);
  const auto setup = inference_setup(s, ckpt);
  std::optional<Network> dae;
  if (dae_ckpt) dae = load_dae(*dae_ckpt, ckpt.arch.num_classes);

  std::vector<fs::path> archives;
  if (fs::exists(input / "meta.json")) {
    archives.push_back(input);
  } else {
    const fs::path root = fs::exists(input / "cases") ? input / "cases" : input;
    if (!fs::is_directory(root)) throw IoError("no volume archives under " + input.string());
    for (const auto& e : fs::directory_iterator(root))
      if (fs::exists(e.path() / "meta.json")) archives.push_back(e.path());
    std::sort(archives.begin(), archives.end());
  }
  if (archives.empty()) throw SizeError("no volume archives under " + input.string());

  for (const auto& dir : archives) {
    const auto c = load_volume(dir);
    if (c.volume.rank() != ckpt.arch.rank)
      throw ShapeError(dir.string() + ": rank " + std::to_string(c.volume.rank()) + " differs from the model's " +
                       std::to_string(ckpt.arch.rank));
    const auto probs = sliding_window_infer(model, c.volume, setup.patch, setup.stride);
    const auto mask = argmax_labels(probs);
    mask.validate();
    const std::string id = c.volume.id.empty() ? dir.filename().string() : c.volume.id;
    const fs::path case_out = out / id;
    save_volume(c.volume, mask, case_out);
    write_label_overlay(c.volume, mask, case_out / "overlay.ppm");

    std::vector<std::uint32_t> words(probs.data.size());
    for (std::size_t i = 0; i < words.size(); ++i) std::memcpy(&words[i], &probs.data[i], 4);
    write_text(case_out / "probs.raw", std::string(reinterpret_cast<const char*>(words.data()), words.size() * 4));
    json meta{{"shape", probs.shape}, {"channels", probs.channels}, {"dtype", "float32"}, {"layout", "channel-major"},
              {"uncertainty", static_cast<bool>(dae)}};
    if (dae) {
      const auto u = anatomical_uncertainty(*dae, probs);
      write_text(case_out / "uncertainty.raw", std::string(reinterpret_cast<const char*>(u.data()), u.size() * 4));
      write_heat_overlay(c.volume, u, 1.0, case_out / "uncertainty.ppm");
    } else {
      fs::remove(case_out / "uncertainty.raw");
      fs::remove(case_out / "uncertainty.ppm");
    }
    write_text(case_out / "probs.json", meta.dump(2) + "\n");
  }
}

}  // namespace anatomia::cli
