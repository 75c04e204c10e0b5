#include "anatomia/types.hpp"

#include <cmath>
#include <sstream>

#include "anatomia/error.hpp"

namespace anatomia {

std::int64_t num_voxels(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

std::vector<std::int64_t> strides_of(const Shape& shape) {
  std::vector<std::int64_t> strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) strides[i] = strides[i + 1] * shape[i + 1];
  return strides;
}

namespace {

void check_rank(const Shape& shape, const char* what) {
  if (shape.size() != 2 && shape.size() != 3)
    throw InvariantError(std::string(what) + ": rank must be 2 or 3, got " + std::to_string(shape.size()));
  for (auto e : shape)
    if (e <= 0) throw InvariantError(std::string(what) + ": non-positive extent in " + to_string(shape));
}

}  // namespace

Volume::Volume(Shape s, std::vector<double> sp, std::string name)
    : shape(std::move(s)), spacing(std::move(sp)), data(num_voxels(shape), 0.0f), id(std::move(name)) {}

void Volume::validate() const {
  check_rank(shape, "Volume");
  if (spacing.size() != shape.size())
    throw InvariantError("Volume: spacing has " + std::to_string(spacing.size()) + " entries for rank " +
                         std::to_string(shape.size()));
  for (double s : spacing)
    if (!(s > 0.0) || !std::isfinite(s)) throw InvariantError("Volume: spacing must be strictly positive");
  if (size() != num_voxels(shape)) throw InvariantError("Volume: data size does not match shape");
  for (float v : data)
    if (!std::isfinite(v)) throw InvariantError("Volume: non-finite value in '" + id + "'");
}

LabelMask::LabelMask(Shape s, int classes)
    : shape(std::move(s)), num_classes(classes), data(num_voxels(shape), 0) {}

std::int64_t LabelMask::count(int label) const {
  std::int64_t n = 0;
  for (auto v : data) n += (v == label);
  return n;
}

void LabelMask::validate() const {
  check_rank(shape, "LabelMask");
  if (num_classes < 1 || num_classes > 254) throw InvariantError("LabelMask: num_classes out of range");
  if (size() != num_voxels(shape)) throw InvariantError("LabelMask: data size does not match shape");
  for (auto v : data)
    if (v > num_classes)
      throw ConsistencyError("LabelMask: label " + std::to_string(v) + " exceeds num_classes " +
                             std::to_string(num_classes));
}

ProbMap::ProbMap(int c, Shape s) : channels(c), shape(std::move(s)), data(c * num_voxels(shape), 0.0f) {}

void ProbMap::validate(double tolerance) const {
  if (channels < 2) throw InvariantError("ProbMap: need at least two channels");
  const auto n = voxels();
  if (static_cast<std::int64_t>(data.size()) != channels * n)
    throw InvariantError("ProbMap: data size does not match channels x shape");
  for (std::int64_t v = 0; v < n; ++v) {
    double sum = 0.0;
    for (int c = 0; c < channels; ++c) {
      const float p = at(c, v);
      if (!(p >= 0.0f && p <= 1.0f)) throw InvariantError("ProbMap: probability outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > tolerance) throw InvariantError("ProbMap: channels do not sum to 1");
  }
}

void UncertaintyMap::validate() const {
  if (static_cast<std::int64_t>(data.size()) != num_voxels(shape))
    throw InvariantError("UncertaintyMap: data size does not match shape");
  for (float u : data)
    if (!(u >= 0.0f) || !std::isfinite(u)) throw InvariantError("UncertaintyMap: negative or non-finite value");
}

Grid::Grid(const Shape& shape) : rank_(static_cast<int>(shape.size())), size_(num_voxels(shape)) {
  if (rank_ < 1 || rank_ > 3) throw InvariantError("Grid: rank must be 1..3");
  for (int a = 0; a < rank_; ++a) extent_[a] = shape[a];
  std::int64_t s = 1;
  for (int a = rank_ - 1; a >= 0; --a) {
    stride_[a] = s;
    s *= extent_[a];
  }
}

std::array<std::int64_t, 3> Grid::coords(std::int64_t index) const {
  std::array<std::int64_t, 3> c{0, 0, 0};
  for (int a = 0; a < rank_; ++a) {
    c[a] = index / stride_[a];
    index -= c[a] * stride_[a];
  }
  return c;
}

std::int64_t Grid::index(const std::array<std::int64_t, 3>& c) const {
  std::int64_t i = 0;
  for (int a = 0; a < rank_; ++a) i += c[a] * stride_[a];
  return i;
}

bool Grid::contains(const std::array<std::int64_t, 3>& c) const {
  for (int a = 0; a < rank_; ++a)
    if (c[a] < 0 || c[a] >= extent_[a]) return false;
  return true;
}

}  // namespace anatomia
