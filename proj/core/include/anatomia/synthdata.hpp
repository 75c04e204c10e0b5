#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anatomia/volume_io.hpp"

namespace anatomia {

/// Parameters of the 2D organ-like phantom generator.
struct SynthConfig {
  int num_cases = 200;
  Shape image_size{72, 72};
  int num_classes = 2;
  /// Expected number of unlabeled distractor blobs per case (Poisson mean).
  double blob_count = 1.0;
  /// Relative amplitude of the radial harmonics (0 = discs).
  double irregularity = 0.3;
  /// Organs are jittered copies of a per-dataset canonical layout. Center
  /// offset as a fraction of the smaller extent, relative radius change, and
  /// relative change of the harmonic shape.
  double layout_jitter = 0.03;
  double size_jitter = 0.08;
  double shape_jitter = 0.3;
  /// Edge sharpness on the blurred arcs; 1 keeps every edge crisp.
  double contrast = 0.6;
  double noise_std = 0.15;
  /// Canonical organ radii (as a fraction of the smaller image extent) are
  /// spread over this range by class index.
  double min_radius = 0.11;
  double max_radius = 0.19;
  /// Accepted range of each class's pixel fraction.
  double min_class_fraction = 0.01;
  double max_class_fraction = 0.25;
  double spacing = 1.0;
  std::uint64_t seed = 7;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

std::string synth_case_id(int index);

/// Generates case `index` (a pure function of cfg and index).
Case generate_case(const SynthConfig& cfg, int index);

/// Writes every case as a volume archive under `<out>/cases/<id>` plus
/// `<out>/dataset.json` (config echo and ids). Returns the ids.
std::vector<std::string> gen_dataset(const SynthConfig& cfg, const std::filesystem::path& out);

/// Ids listed in `<dataset>/dataset.json`.
std::vector<std::string> read_dataset_ids(const std::filesystem::path& dataset_dir);

}  // namespace anatomia
