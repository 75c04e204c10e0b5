#include "anatomia/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "anatomia/error.hpp"

namespace anatomia {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMetaFile = "meta.json";
constexpr const char* kImageFile = "image.raw";
constexpr const char* kLabelFile = "label.raw";

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("short write to " + path.string());
}

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

}  // namespace

Case load_volume(const fs::path& dir) {
  const auto meta_path = dir / kMetaFile;
  if (!fs::exists(meta_path)) throw FormatError("missing " + meta_path.string());

  json meta;
  try {
    std::ifstream in(meta_path);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("ill-formed " + meta_path.string() + ": " + e.what());
  }

  Case out;
  try {
    out.volume.shape = meta.at("shape").get<Shape>();
    out.volume.spacing = meta.at("spacing").get<std::vector<double>>();
    if (meta.at("dtype").get<std::string>() != "float32")
      throw FormatError("unsupported image dtype in " + meta_path.string());
    out.volume.id = meta.value("id", dir.filename().string());
  } catch (const json::exception& e) {
    throw FormatError("bad metadata in " + meta_path.string() + ": " + e.what());
  }
  if (out.volume.shape.size() != 2 && out.volume.shape.size() != 3)
    throw FormatError("shape must have rank 2 or 3 in " + meta_path.string());
  for (auto e : out.volume.shape)
    if (e <= 0) throw FormatError("non-positive extent in " + meta_path.string());

  const auto n = num_voxels(out.volume.shape);
  const auto raw = read_bytes(dir / kImageFile);
  if (static_cast<std::int64_t>(raw.size()) != n * 4)
    throw FormatError("image.raw holds " + std::to_string(raw.size()) + " bytes, expected " +
                      std::to_string(n * 4));
  out.volume.data.resize(n);
  for (std::int64_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, raw.data() + 4 * i, 4);
    out.volume.data[i] = std::bit_cast<float>(to_little(bits));
  }
  try {
    out.volume.validate();
  } catch (const InvariantError& e) {
    throw FormatError(std::string("invalid volume archive: ") + e.what());
  }

  if (fs::exists(dir / kLabelFile)) {
    if (!meta.contains("num_classes")) throw FormatError("label payload without num_classes");
    if (meta.value("label_dtype", std::string("uint8")) != "uint8")
      throw FormatError("unsupported label dtype in " + meta_path.string());
    LabelMask mask(out.volume.shape, meta.at("num_classes").get<int>());
    const auto labels = read_bytes(dir / kLabelFile);
    if (static_cast<std::int64_t>(labels.size()) != n)
      throw ConsistencyError("label.raw holds " + std::to_string(labels.size()) + " voxels, image has " +
                             std::to_string(n));
    std::memcpy(mask.data.data(), labels.data(), labels.size());
    mask.validate();
    out.label = std::move(mask);
  }
  return out;
}

void save_volume(const Volume& volume, const std::optional<LabelMask>& label, const fs::path& dir) {
  volume.validate();
  if (label) {
    label->validate();
    if (label->shape != volume.shape)
      throw ConsistencyError("label shape " + to_string(label->shape) + " differs from image shape " +
                             to_string(volume.shape));
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json meta;
  meta["id"] = volume.id;
  meta["shape"] = volume.shape;
  meta["spacing"] = volume.spacing;
  meta["dtype"] = "float32";
  if (label) {
    meta["num_classes"] = label->num_classes;
    meta["label_dtype"] = "uint8";
  }

  std::vector<std::uint32_t> words(volume.data.size());
  for (std::size_t i = 0; i < words.size(); ++i) words[i] = to_little(std::bit_cast<std::uint32_t>(volume.data[i]));
  write_bytes(dir / kImageFile, words.data(), words.size() * 4);
  if (label) {
    write_bytes(dir / kLabelFile, label->data.data(), label->data.size());
  } else {
    fs::remove(dir / kLabelFile, ec);
  }

  std::ofstream out(dir / kMetaFile, std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / kMetaFile).string());
  out << meta.dump(2) << '\n';
}

}  // namespace anatomia
