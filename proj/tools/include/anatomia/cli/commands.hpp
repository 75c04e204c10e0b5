#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include "anatomia/cli/config.hpp"

namespace anatomia::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;

/// Maps a library exception onto the documented exit codes.
int exit_code_for(const std::exception& e);

/// Parses the command line and runs one command. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Forces single-threaded bitwise-reproducible execution when
/// ANATOMIA_DETERMINISTIC=1 is set. Returns whether it did.
bool apply_deterministic_env();

/// Writes the synthetic dataset and its resolved config.
void gen_data(const Settings& s, const std::filesystem::path& out);

/// Trains the shape prior on the labeled masks of the configured split.
/// Writes the checkpoint, dae_log.csv and splits.json next to it.
void train_dae(const Settings& s, const std::filesystem::path& dataset, const std::filesystem::path& ckpt,
               std::ostream* progress = nullptr);

/// One SSL run: model.ckpt, ssl_log.csv, metrics.json (test split),
/// timing.json and resolved.cfg under `out`.
void train_ssl(const Settings& s, const std::filesystem::path& dataset, Strategy strategy, std::uint64_t seed,
               const std::optional<std::filesystem::path>& dae_ckpt, const std::filesystem::path& out,
               std::ostream* progress = nullptr);

/// Metrics of a model checkpoint on a split subset ("test", "val",
/// "labeled") written as JSON.
void eval(const Settings& s, const std::filesystem::path& model, const std::filesystem::path& dataset,
          const std::string& subset, const std::filesystem::path& out);

/// Sliding-window predictions (probabilities, hard mask, overlays) for every
/// volume archive under `input`; anatomical uncertainty too when a prior is
/// given.
void infer(const Settings& s, const std::filesystem::path& model, const std::filesystem::path& input,
           const std::optional<std::filesystem::path>& dae_ckpt, const std::filesystem::path& out);

/// Runs every (strategy, sweep value, seed) cell of a manifest and writes
/// results.json, table.csv, table.md and timing.csv. Returns the number of
/// failed cells.
int experiment(const KeyValueConfig& manifest, bool resume, std::ostream* progress = nullptr);

/// Figures and tables for one or more experiment result trees.
void report(std::span<const std::filesystem::path> results, const std::filesystem::path& out);

}  // namespace anatomia::cli
