#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anatomia/prior.hpp"
#include "anatomia/ssl.hpp"
#include "anatomia/synthdata.hpp"

namespace anatomia::cli {

/// Layered `key = value` configuration. Later layers override earlier ones;
/// every value remembers where it came from ("file:line" or "--set") so
/// errors can point at it.
///
/// File syntax: one assignment per line, `#` starts a comment, blank lines
/// are ignored, and `include = path` splices another file (relative to the
/// including file) at that point.
class KeyValueConfig {
 public:
  struct Entry {
    std::string value;
    std::string origin;
  };

  void load_file(const std::filesystem::path& path);
  /// "key=value" from the command line.
  void set(std::string_view assignment);
  void set(const std::string& key, const std::string& value, const std::string& origin);

  [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) != 0; }
  [[nodiscard]] const std::map<std::string, Entry>& entries() const { return entries_; }

  /// Resolved configuration in file syntax, sorted by key.
  [[nodiscard]] std::string dump() const;

 private:
  void load_file(const std::filesystem::path& path, int depth);
  std::map<std::string, Entry> entries_;
};

struct SplitParams {
  int n_labeled = 16;
  /// -1 takes every case not used elsewhere.
  int n_unlabeled = -1;
  double val_frac = 0.0;
  double test_frac = 0.2;
  std::uint64_t seed = 11;
};

struct ExperimentParams {
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> out;
  std::vector<Strategy> strategies{Strategy::supervised, Strategy::none, Strategy::anatomical};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Optional one-dimensional sweep over any other key.
  std::optional<std::string> sweep_key;
  std::vector<std::string> sweep_values;
};

/// Backbone and prior layout knobs; class count and rank come from the data.
struct ArchOverrides {
  std::optional<int> base_width;
  std::optional<int> depth;
  std::optional<int> convs_per_level;
  std::optional<double> dropout_rate;
};

struct Settings {
  SynthConfig synth;
  SplitParams split;
  DaeTrainConfig dae;
  int dae_latent_dim = 128;
  ArchOverrides dae_arch;
  SslConfig ssl;
  ArchOverrides ssl_arch;
  ExperimentParams experiment;
};

/// Applies every entry on top of the defaults. Unknown keys and malformed
/// values throw ConfigError naming the entry's origin.
Settings resolve(const KeyValueConfig& cfg);

/// Every key with its effective value, in config file syntax. Keys left at
/// an architecture-dependent default are written as comments.
std::string describe(const Settings& s);

/// Every accepted key, sorted.
std::vector<std::string> known_keys();

/// The prior's training setup for `num_classes` classes.
DaeTrainConfig dae_training(const Settings& s, int num_classes);

/// The SSL setup for a strategy on data of `num_classes` classes and `rank`.
SslConfig ssl_training(const Settings& s, Strategy strategy, std::uint64_t seed, int num_classes, int rank);

/// Split of `ids` per the settings.
SplitManifest split_ids(const Settings& s, std::span<const std::string> ids);

}  // namespace anatomia::cli
