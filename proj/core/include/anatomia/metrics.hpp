#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anatomia/types.hpp"

namespace anatomia {

/// Dice overlap of {pred == c} and {gt == c}; 1 when both are empty.
double dice_score(const LabelMask& pred, const LabelMask& gt, int c);

/// Class voxels with at least one face neighbor outside the class. Voxels on
/// the grid border count as boundary (out-of-bounds is non-class).
std::vector<std::uint8_t> boundary_mask(const LabelMask& mask, int c);

/// Squared Euclidean distance (physical units) from every voxel to the nearest
/// voxel with sites[v] != 0; +inf when there are no sites.
std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& sites, const Shape& shape,
                                               std::span<const double> spacing);

/// Linear-interpolated percentile (q in [0,100]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

/// 95th percentile of the pooled directed boundary-to-boundary distances.
/// Undefined when either class region is empty.
std::optional<double> hd95(const LabelMask& pred, const LabelMask& gt, int c, std::span<const double> spacing);

struct MetricReport {
  std::vector<double> per_class_dsc;
  std::vector<std::optional<double>> per_class_hd95;
  double mean_dsc = 0.0;
  std::optional<double> mean_hd95;
};

/// DSC and HD95 for classes 1..C. Means skip undefined HD95 entries.
MetricReport evaluate_case(const LabelMask& pred, const LabelMask& gt, std::span<const double> spacing);

/// Mean of several case reports, class by class.
MetricReport average_reports(std::span<const MetricReport> reports);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  int count = 0;
};

/// Sample mean and (n-1)-denominator standard deviation; std is 0 for n=1.
MeanStd mean_std(std::span<const double> values);

struct AggregateReport {
  std::vector<MeanStd> per_class_dsc;
  std::vector<std::optional<MeanStd>> per_class_hd95;
  MeanStd mean_dsc;
  std::optional<MeanStd> mean_hd95;
};

/// Mean and std across runs (one report per seed). Throws SizeError if empty.
AggregateReport aggregate_runs(std::span<const MetricReport> reports);

}  // namespace anatomia
