#pragma once

#include "anatomia/rng.hpp"
#include "anatomia/types.hpp"

namespace anatomia {

/// Magnitudes and application probabilities of the mask corruptions used to
/// build (corrupted, clean) training pairs for the shape prior.
struct CorruptionPolicy {
  double swap_rate = 0.1;
  int morph_radius_min = 1;
  int morph_radius_max = 3;
  double rescale_min = 0.9;
  double rescale_max = 1.1;
  int shape_edits_min = 0;
  int shape_edits_max = 3;
  double p_swap = 0.5;
  double p_morph = 0.5;
  double p_rescale = 0.5;
  double p_shape_edit = 0.5;

  void validate() const;

  /// Every operator switched off.
  static CorruptionPolicy none();
};

enum class MorphOp { erode, dilate };

/// Voxels with at least one in-bounds face neighbor carrying another label.
std::vector<std::uint8_t> label_boundary(const LabelMask& mask);

/// Replaces round(rate * |boundary|) boundary voxels with the label of a
/// uniformly chosen face neighbor. Reads the original labels only.
LabelMask boundary_swap(const LabelMask& mask, double rate, Rng& rng);

/// Square/cube structuring element of half-width `radius` applied to the
/// region of class `c`. Eroded voxels become background; dilation overwrites
/// other labels.
LabelMask morph_perturb(const LabelMask& mask, MorphOp op, int radius, int c);

/// Nearest-neighbor rescale by `factor` about the foreground centroid,
/// keeping the original extents.
LabelMask rescale_perturb(const LabelMask& mask, double factor);

/// `n_edits` random disc/box stamps of an existing class, or erasures to
/// background.
LabelMask shape_edit(const LabelMask& mask, int n_edits, Rng& rng);

/// swap -> morph -> rescale -> shape edit, each applied with its
/// probability.
LabelMask corrupt(const LabelMask& mask, const CorruptionPolicy& policy, Rng& rng);

}  // namespace anatomia
