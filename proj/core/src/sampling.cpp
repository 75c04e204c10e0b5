#include "anatomia/sampling.hpp"

#include <algorithm>
#include <cstdint>

#include "anatomia/error.hpp"

namespace anatomia {

namespace {

template <typename T>
std::vector<T> copy_window(const std::vector<T>& src, const Shape& src_shape, const Shape& dst_shape,
                           const Shape& src_offset, T fill) {
  // dst[v] = src[v + src_offset] where in bounds, else fill.
  Grid dst_grid(dst_shape);
  Grid src_grid(src_shape);
  std::vector<T> dst(dst_grid.size(), fill);
  for (std::int64_t i = 0; i < dst_grid.size(); ++i) {
    auto c = dst_grid.coords(i);
    for (int a = 0; a < dst_grid.rank(); ++a) c[a] += src_offset[a];
    if (src_grid.contains(c)) dst[i] = src[src_grid.index(c)];
  }
  return dst;
}

void check_rank(const Sample& s, const Shape& size) {
  if (static_cast<int>(size.size()) != s.image.rank())
    throw ShapeError("window rank " + std::to_string(size.size()) + " differs from image rank " +
                     std::to_string(s.image.rank()));
  if (s.label && s.label->shape != s.image.shape) throw ConsistencyError("label shape differs from image shape");
}

template <typename T>
std::vector<T> flip_axis(const std::vector<T>& data, const Grid& g, int axis) {
  std::vector<T> out(data.size());
  for (std::int64_t i = 0; i < g.size(); ++i) {
    auto c = g.coords(i);
    c[axis] = g.extent(axis) - 1 - c[axis];
    out[g.index(c)] = data[i];
  }
  return out;
}

// One quarter turn: out[i][j] = in[j][W-1-i], shape (H, W, ...) -> (W, H, ...).
template <typename T>
std::vector<T> rot90_once(const std::vector<T>& data, Shape& shape) {
  Grid in(shape);
  Shape out_shape = shape;
  std::swap(out_shape[0], out_shape[1]);
  Grid out(out_shape);
  std::vector<T> dst(data.size());
  const auto w = shape[1];
  for (std::int64_t o = 0; o < out.size(); ++o) {
    const auto c = out.coords(o);
    dst[o] = data[in.index({c[1], w - 1 - c[0], c[2]})];
  }
  shape = out_shape;
  return dst;
}

}  // namespace

Sample pad_to(const Sample& s, const Shape& size) {
  check_rank(s, size);
  Shape padded = s.image.shape;
  Shape offset(size.size(), 0);
  bool needed = false;
  for (std::size_t a = 0; a < size.size(); ++a) {
    if (padded[a] < size[a]) {
      offset[a] = -((size[a] - padded[a]) / 2);
      padded[a] = size[a];
      needed = true;
    }
  }
  if (!needed) return s;
  Sample out;
  out.image = Volume(padded, s.image.spacing, s.image.id);
  out.image.data = copy_window(s.image.data, s.image.shape, padded, offset, 0.0f);
  if (s.label) {
    out.label = LabelMask(padded, s.label->num_classes);
    out.label->data = copy_window(s.label->data, s.label->shape, padded, offset, std::uint8_t{0});
  }
  return out;
}

Sample crop_at(const Sample& s, const Shape& offset, const Shape& size) {
  check_rank(s, size);
  Sample out;
  out.image = Volume(size, s.image.spacing, s.image.id);
  out.image.data = copy_window(s.image.data, s.image.shape, size, offset, 0.0f);
  if (s.label) {
    out.label = LabelMask(size, s.label->num_classes);
    out.label->data = copy_window(s.label->data, s.label->shape, size, offset, std::uint8_t{0});
  }
  return out;
}

Sample random_crop(const Sample& s, const Shape& size, Rng& rng) {
  const Sample padded = pad_to(s, size);
  Shape offset(size.size(), 0);
  for (std::size_t a = 0; a < size.size(); ++a) offset[a] = rng.uniform_int(0, padded.image.shape[a] - size[a]);
  return crop_at(padded, offset, size);
}

DihedralTransform draw_dihedral(int rank, Rng& rng) {
  DihedralTransform t;
  for (int a = 0; a < rank; ++a) t.flip[a] = rng.bernoulli(0.5);
  t.quarter_turns = static_cast<int>(rng.uniform_int(0, 3));
  return t;
}

Shape transformed_shape(const Shape& shape, const DihedralTransform& t) {
  Shape out = shape;
  if (t.quarter_turns % 2 != 0) std::swap(out[0], out[1]);
  return out;
}

template <typename T>
std::vector<T> apply_dihedral(const std::vector<T>& data, const Shape& shape, const DihedralTransform& t) {
  Grid g(shape);
  std::vector<T> out = data;
  for (int a = 0; a < g.rank(); ++a)
    if (t.flip[a]) out = flip_axis(out, g, a);
  Shape cur = shape;
  for (int k = 0; k < ((t.quarter_turns % 4) + 4) % 4; ++k) out = rot90_once(out, cur);
  return out;
}

template <typename T>
std::vector<T> apply_dihedral_inverse(const std::vector<T>& data, const Shape& transformed,
                                      const DihedralTransform& t) {
  std::vector<T> out = data;
  Shape cur = transformed;
  const int undo = (4 - ((t.quarter_turns % 4) + 4) % 4) % 4;
  for (int k = 0; k < undo; ++k) out = rot90_once(out, cur);
  Grid g(cur);
  for (int a = 0; a < g.rank(); ++a)
    if (t.flip[a]) out = flip_axis(out, g, a);
  return out;
}

template std::vector<float> apply_dihedral(const std::vector<float>&, const Shape&, const DihedralTransform&);
template std::vector<std::uint8_t> apply_dihedral(const std::vector<std::uint8_t>&, const Shape&,
                                                  const DihedralTransform&);
template std::vector<float> apply_dihedral_inverse(const std::vector<float>&, const Shape&,
                                                   const DihedralTransform&);
template std::vector<std::uint8_t> apply_dihedral_inverse(const std::vector<std::uint8_t>&, const Shape&,
                                                          const DihedralTransform&);

Sample apply_dihedral(const Sample& s, const DihedralTransform& t) {
  if (s.image.rank() < 2) throw ShapeError("dihedral transforms need rank >= 2");
  Sample out;
  const Shape shape = transformed_shape(s.image.shape, t);
  auto spacing = s.image.spacing;
  if (t.quarter_turns % 2 != 0) std::swap(spacing[0], spacing[1]);
  out.image = Volume(shape, spacing, s.image.id);
  out.image.data = apply_dihedral(s.image.data, s.image.shape, t);
  if (s.label) {
    out.label = LabelMask(shape, s.label->num_classes);
    out.label->data = apply_dihedral(s.label->data, s.label->shape, t);
  }
  return out;
}

Sample augment(const Sample& s, Rng& rng) { return apply_dihedral(s, draw_dihedral(s.image.rank(), rng)); }

}  // namespace anatomia
