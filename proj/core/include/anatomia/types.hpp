#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace anatomia {

/// Spatial extents, slowest-varying axis first (row-major).
using Shape = std::vector<std::int64_t>;

std::int64_t num_voxels(const Shape& shape);
std::string to_string(const Shape& shape);

/// Row-major strides for `shape`.
std::vector<std::int64_t> strides_of(const Shape& shape);

/// Dense scalar image of rank 2 or 3 with physical voxel spacing in mm.
struct Volume {
  Shape shape;
  std::vector<double> spacing;
  std::vector<float> data;
  std::string id;

  Volume() = default;
  Volume(Shape shape, std::vector<double> spacing, std::string id = {});

  [[nodiscard]] int rank() const { return static_cast<int>(shape.size()); }
  [[nodiscard]] std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }

  /// Throws InvariantError on non-finite data, non-positive spacing, bad rank
  /// or a data/shape size mismatch.
  void validate() const;
};

/// Integer labels in {0, ..., num_classes}; 0 is background.
struct LabelMask {
  Shape shape;
  int num_classes = 1;
  std::vector<std::uint8_t> data;

  LabelMask() = default;
  LabelMask(Shape shape, int num_classes);

  [[nodiscard]] int rank() const { return static_cast<int>(shape.size()); }
  [[nodiscard]] std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  [[nodiscard]] std::int64_t count(int label) const;

  void validate() const;
  friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

/// Per-class probabilities, channel-major: data[c * voxels + v].
struct ProbMap {
  int channels = 2;
  Shape shape;
  std::vector<float> data;

  ProbMap() = default;
  ProbMap(int channels, Shape shape);

  [[nodiscard]] std::int64_t voxels() const { return num_voxels(shape); }
  [[nodiscard]] float at(int c, std::int64_t v) const { return data[c * voxels() + v]; }
  float& at(int c, std::int64_t v) { return data[c * voxels() + v]; }

  /// Values in [0,1] and per-voxel sums within `tolerance` of 1.
  void validate(double tolerance = 1e-5) const;
};

/// Non-negative per-voxel uncertainty.
struct UncertaintyMap {
  Shape shape;
  std::vector<float> data;

  void validate() const;
};

/// Fixed-rank coordinate helper over a row-major grid.
class Grid {
 public:
  explicit Grid(const Shape& shape);

  [[nodiscard]] int rank() const { return rank_; }
  [[nodiscard]] std::int64_t size() const { return size_; }
  [[nodiscard]] std::int64_t extent(int axis) const { return extent_[axis]; }
  [[nodiscard]] std::int64_t stride(int axis) const { return stride_[axis]; }

  [[nodiscard]] std::array<std::int64_t, 3> coords(std::int64_t index) const;
  [[nodiscard]] std::int64_t index(const std::array<std::int64_t, 3>& c) const;
  [[nodiscard]] bool contains(const std::array<std::int64_t, 3>& c) const;

  /// Calls fn(neighbor_index) for each in-bounds face neighbor and returns
  /// how many face neighbors fell outside the grid.
  template <typename Fn>
  int for_each_face_neighbor(std::int64_t index, Fn&& fn) const {
    const auto c = coords(index);
    int outside = 0;
    for (int axis = 0; axis < rank_; ++axis) {
      if (c[axis] > 0) fn(index - stride_[axis]); else ++outside;
      if (c[axis] + 1 < extent_[axis]) fn(index + stride_[axis]); else ++outside;
    }
    return outside;
  }

 private:
  int rank_;
  std::int64_t size_;
  std::array<std::int64_t, 3> extent_{1, 1, 1};
  std::array<std::int64_t, 3> stride_{0, 0, 0};
};

}  // namespace anatomia
