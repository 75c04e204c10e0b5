#pragma once

#include <array>
#include <optional>

#include "anatomia/rng.hpp"
#include "anatomia/types.hpp"

namespace anatomia {

/// Image with an optional mask that moves with it through cropping and
/// augmentation.
struct Sample {
  Volume image;
  std::optional<LabelMask> label;
};

/// Symmetric zero/background padding so every axis reaches at least `size`.
Sample pad_to(const Sample& sample, const Shape& size);

/// Window of extent `size` starting at `offset` (no bounds adaptation).
Sample crop_at(const Sample& sample, const Shape& offset, const Shape& size);

/// Pads if needed, then crops a window of `size` at a uniformly drawn offset.
Sample random_crop(const Sample& sample, const Shape& size, Rng& rng);

/// Element of the flip/rot90 group: flip the selected axes, then rotate by
/// quarter_turns * 90 degrees in the plane of the first two axes (from axis
/// 0 toward axis 1, the numpy/torch rot90 convention).
struct DihedralTransform {
  std::array<bool, 3> flip{false, false, false};
  int quarter_turns = 0;

  [[nodiscard]] bool is_identity() const { return !flip[0] && !flip[1] && !flip[2] && quarter_turns % 4 == 0; }
};

/// Each axis flipped with probability 1/2, then k uniform in {0,1,2,3}.
DihedralTransform draw_dihedral(int rank, Rng& rng);

Shape transformed_shape(const Shape& shape, const DihedralTransform& t);

/// Applies `t` (or its inverse) to a single-channel row-major buffer.
template <typename T>
std::vector<T> apply_dihedral(const std::vector<T>& data, const Shape& shape, const DihedralTransform& t);
template <typename T>
std::vector<T> apply_dihedral_inverse(const std::vector<T>& data, const Shape& transformed,
                                      const DihedralTransform& t);

Sample apply_dihedral(const Sample& sample, const DihedralTransform& t);

/// Random flips and quarter-turn rotation, identical for image and label.
Sample augment(const Sample& sample, Rng& rng);

}  // namespace anatomia
