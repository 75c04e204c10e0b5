#pragma once

#include <filesystem>
#include <optional>

#include "anatomia/types.hpp"

namespace anatomia {

/// An image with its optional ground-truth mask.
struct Case {
  Volume volume;
  std::optional<LabelMask> label;
};

/// Reads a volume archive directory: meta.json, image.raw and optionally
/// label.raw (little-endian, row-major).
///
/// Throws FormatError on missing or ill-formed metadata/payloads and
/// ConsistencyError when the label payload disagrees with the image.
Case load_volume(const std::filesystem::path& dir);

/// Writes a volume archive that load_volume reads back bit-exactly. The
/// volume (and label) are validated before anything touches the disk.
void save_volume(const Volume& volume, const std::optional<LabelMask>& label,
                 const std::filesystem::path& dir);

}  // namespace anatomia
