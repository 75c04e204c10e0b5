#include "anatomia/labels.hpp"

namespace anatomia {

ProbMap one_hot(const LabelMask& mask) {
  mask.validate();
  ProbMap out(mask.num_classes + 1, mask.shape);
  const auto n = mask.size();
  for (std::int64_t v = 0; v < n; ++v) out.at(mask.data[v], v) = 1.0f;
  return out;
}

LabelMask argmax_labels(const ProbMap& probs) {
  LabelMask out(probs.shape, probs.channels - 1);
  const auto n = probs.voxels();
  for (std::int64_t v = 0; v < n; ++v) {
    int best = 0;
    float best_p = probs.at(0, v);
    for (int c = 1; c < probs.channels; ++c) {
      if (probs.at(c, v) > best_p) {
        best_p = probs.at(c, v);
        best = c;
      }
    }
    out.data[v] = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace anatomia
