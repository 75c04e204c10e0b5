#pragma once

#include "anatomia/types.hpp"

namespace anatomia {

/// C+1 channel indicator encoding of a mask.
ProbMap one_hot(const LabelMask& mask);

/// Hard labels from probabilities; ties go to the smaller class index.
LabelMask argmax_labels(const ProbMap& probs);

}  // namespace anatomia
