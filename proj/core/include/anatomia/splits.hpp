#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "anatomia/types.hpp"

namespace anatomia {

/// Ids per subset plus the seed that generated them (splits.json).
struct SplitManifest {
  std::vector<std::string> labeled;
  std::vector<std::string> unlabeled;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t seed = 0;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

/// Deterministic partition of `ids` into disjoint subsets. Validation and
/// test sizes are round(frac * |ids|). Throws SizeError when N < 1 or the
/// requested subsets do not fit.
SplitManifest make_splits(std::span<const std::string> ids, int n_labeled, int n_unlabeled,
                          double val_frac, double test_frac, std::uint64_t seed);

void write_split_manifest(const SplitManifest& manifest, const std::filesystem::path& path);
SplitManifest read_split_manifest(const std::filesystem::path& path);

struct LabeledCase {
  Volume volume;
  LabelMask label;
};

/// Materialized split. Unlabeled cases never carry their masks.
struct DatasetSplit {
  std::vector<LabeledCase> labeled;
  std::vector<Volume> unlabeled;
  std::vector<LabeledCase> val;
  std::vector<LabeledCase> test;

  [[nodiscard]] std::size_t N() const { return labeled.size(); }
  [[nodiscard]] std::size_t M() const { return unlabeled.size(); }
};

/// Reads the case archives named by `manifest` from `<dataset_dir>/cases/<id>`.
DatasetSplit load_split(const std::filesystem::path& dataset_dir, const SplitManifest& manifest);

/// Directory of the archive for `id` inside a dataset directory.
std::filesystem::path case_dir(const std::filesystem::path& dataset_dir, const std::string& id);

}  // namespace anatomia
