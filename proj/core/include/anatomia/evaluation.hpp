#pragma once

#include <span>
#include <vector>

#include "anatomia/metrics.hpp"
#include "anatomia/nets.hpp"
#include "anatomia/splits.hpp"

namespace anatomia {

/// Hard prediction for a whole volume by sliding-window inference.
LabelMask predict_mask(Network& model, const Volume& volume, const Shape& patch, const Shape& stride);

/// One report per case, in input order.
std::vector<MetricReport> evaluate_model(Network& model, std::span<const LabeledCase> cases, const Shape& patch,
                                         const Shape& stride);

}  // namespace anatomia
