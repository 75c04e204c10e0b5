#include "anatomia/evaluation.hpp"

#include "anatomia/labels.hpp"

namespace anatomia {

LabelMask predict_mask(Network& model, const Volume& volume, const Shape& patch, const Shape& stride) {
  auto mask = argmax_labels(sliding_window_infer(model, volume, patch, stride));
  mask.num_classes = model.arch().num_classes;
  return mask;
}

std::vector<MetricReport> evaluate_model(Network& model, std::span<const LabeledCase> cases, const Shape& patch,
                                         const Shape& stride) {
  std::vector<MetricReport> out;
  out.reserve(cases.size());
  for (const auto& c : cases) {
    const auto pred = predict_mask(model, c.volume, patch, stride);
    out.push_back(evaluate_case(pred, c.label, c.volume.spacing));
  }
  return out;
}

}  // namespace anatomia
