#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anatomia/nets.hpp"

namespace anatomia {

/// Everything needed to resume or deploy a model.
///
/// On disk: 8-byte magic "ANATCKPT", u32 format version, u64 header length,
/// a UTF-8 JSON header (arch, iteration, rng state, tensor directory, free
/// form metadata) and the raw little-endian tensor payloads.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;  // "segnet" or "dae"
  ArchConfig arch;
  std::int64_t iteration = 0;
  std::vector<NamedTensor> params;
  std::vector<NamedTensor> optimizer;
  /// Teacher (EMA) parameters; empty when not applicable.
  std::vector<NamedTensor> ema;
  std::string rng_state;
  /// Arbitrary JSON text (resolved config, notes).
  std::string metadata = "{}";
};

/// Detached deep copy; checkpoints never alias live training tensors.
std::vector<NamedTensor> snapshot(const std::vector<NamedTensor>& tensors);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the stored network; with `use_ema` the teacher weights are used.
Network network_from(const Checkpoint& ckpt, bool use_ema = false);

}  // namespace anatomia
