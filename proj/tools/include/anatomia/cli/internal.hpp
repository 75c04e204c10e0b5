#pragma once

// Helpers shared by the command implementations; not part of the installed
// interface.

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "anatomia/checkpoint.hpp"
#include "anatomia/cli/config.hpp"
#include "anatomia/metrics.hpp"

namespace anatomia::cli::detail {

void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);
/// Round-trip exact decimal form of a double.
std::string fmt(double v);

nlohmann::json report_json(const MetricReport& r);
MetricReport report_from_json(const nlohmann::json& j);
nlohmann::json metrics_json(const std::vector<MetricReport>& reports, const std::vector<std::string>& ids);

int dataset_classes(const std::filesystem::path& dataset);

struct LoadedSplit {
  SplitManifest manifest;
  DatasetSplit split;
  int num_classes = 1;
  int rank = 2;
};
LoadedSplit load_configured_split(const Settings& s, const std::filesystem::path& dataset);

/// Channel-summed squared difference between the prediction and its
/// noise-free reconstruction, one value per voxel.
std::vector<float> anatomical_uncertainty(Network& dae, const ProbMap& probs);

struct InferenceSetup {
  Shape patch;
  Shape stride;
};
/// Patch and stride recorded in the checkpoint, else the configured ones.
InferenceSetup inference_setup(const Settings& s, const Checkpoint& ckpt);

Network load_dae(const std::filesystem::path& path, int num_classes);

}  // namespace anatomia::cli::detail
