#pragma once

#include <ATen/ATen.h>

#include "anatomia/labels.hpp"
#include "anatomia/sampling.hpp"
#include "anatomia/types.hpp"

namespace anatomia {

/// Image as a [1, *shape] tensor (leading channel axis).
at::Tensor to_tensor(const Volume& volume, at::ScalarType dtype = at::kFloat);
/// Probabilities as a [C+1, *shape] tensor.
at::Tensor to_tensor(const ProbMap& probs, at::ScalarType dtype = at::kFloat);
/// Integer labels as a [*shape] int64 tensor.
at::Tensor to_label_tensor(const LabelMask& mask);
/// One-hot [C+1, *shape] tensor, optionally smoothed toward uniform.
at::Tensor one_hot_tensor(const LabelMask& mask, double smoothing = 0.0, at::ScalarType dtype = at::kFloat);

/// [C+1, *shape] probabilities back to a ProbMap.
ProbMap to_probmap(const at::Tensor& probs);
/// [*shape] values back to an UncertaintyMap.
UncertaintyMap to_uncertainty_map(const at::Tensor& values);

/// Dihedral transform of the spatial axes of a tensor whose first
/// `leading` axes are batch/channel axes.
at::Tensor apply_dihedral(const at::Tensor& x, const DihedralTransform& t, int leading);
at::Tensor apply_dihedral_inverse(const at::Tensor& x, const DihedralTransform& t, int leading);

/// Stacks single tensors into a batch along a new leading axis.
at::Tensor stack(const std::vector<at::Tensor>& items);

}  // namespace anatomia
