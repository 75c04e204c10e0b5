#include "anatomia/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "anatomia/error.hpp"

namespace anatomia {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'A', 'N', 'A', 'T', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

json arch_to_json(const ArchConfig& a) {
  json j{{"rank", a.rank},
         {"in_channels", a.in_channels},
         {"num_classes", a.num_classes},
         {"base_width", a.base_width},
         {"depth", a.depth},
         {"convs_per_level", a.convs_per_level},
         {"dropout_rate", a.dropout_rate},
         {"skip_connections", a.skip_connections},
         {"grid", a.grid}};
  j["bottleneck_dim"] = a.bottleneck_dim ? json(*a.bottleneck_dim) : json(nullptr);
  return j;
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig a;
  a.rank = j.at("rank");
  a.in_channels = j.at("in_channels");
  a.num_classes = j.at("num_classes");
  a.base_width = j.at("base_width");
  a.depth = j.at("depth");
  a.convs_per_level = j.at("convs_per_level");
  a.dropout_rate = j.at("dropout_rate");
  a.skip_connections = j.at("skip_connections");
  a.grid = j.at("grid").get<Shape>();
  if (!j.at("bottleneck_dim").is_null()) a.bottleneck_dim = j.at("bottleneck_dim").get<int>();
  return a;
}

const char* dtype_name(at::ScalarType t) {
  switch (t) {
    case at::kFloat:
      return "float32";
    case at::kDouble:
      return "float64";
    default:
      throw FormatError("checkpoint: unsupported tensor dtype");
  }
}

at::ScalarType dtype_from(const std::string& s) {
  if (s == "float32") return at::kFloat;
  if (s == "float64") return at::kDouble;
  throw FormatError("checkpoint: unknown dtype '" + s + "'");
}

}  // namespace

std::vector<NamedTensor> snapshot(const std::vector<NamedTensor>& tensors) {
  std::vector<NamedTensor> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back({t.name, t.value.detach().clone()});
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  json header;
  header["kind"] = ckpt.kind;
  header["arch"] = arch_to_json(ckpt.arch);
  header["iteration"] = ckpt.iteration;
  header["rng_state"] = ckpt.rng_state;
  header["metadata"] = json::parse(ckpt.metadata.empty() ? "{}" : ckpt.metadata);

  std::vector<at::Tensor> payloads;
  json dir = json::array();
  std::uint64_t offset = 0;
  auto add_group = [&](const char* group, const std::vector<NamedTensor>& tensors) {
    for (const auto& t : tensors) {
      auto c = t.value.detach().contiguous();
      const std::uint64_t bytes = static_cast<std::uint64_t>(c.numel()) * c.element_size();
      dir.push_back({{"group", group},
                     {"name", t.name},
                     {"dtype", dtype_name(c.scalar_type())},
                     {"shape", std::vector<std::int64_t>(c.sizes().begin(), c.sizes().end())},
                     {"offset", offset},
                     {"bytes", bytes}});
      offset += bytes;
      payloads.push_back(c);
    }
  };
  add_group("params", ckpt.params);
  add_group("optimizer", ckpt.optimizer);
  add_group("ema", ckpt.ema);
  header["tensors"] = dir;

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    const auto text = header.dump();
    const std::uint32_t version = Checkpoint::kVersion;
    const std::uint64_t length = text.size();
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&length), sizeof length);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : payloads)
      out.write(static_cast<const char*>(p.data_ptr()), static_cast<std::streamsize>(p.numel() * p.element_size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&length), sizeof length);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError(path.string() + " is not a checkpoint");
  if (version != Checkpoint::kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw FormatError("truncated checkpoint header in " + path.string());

  Checkpoint ckpt;
  try {
    const auto header = json::parse(text);
    ckpt.kind = header.at("kind");
    ckpt.arch = arch_from_json(header.at("arch"));
    ckpt.iteration = header.at("iteration");
    ckpt.rng_state = header.at("rng_state");
    ckpt.metadata = header.at("metadata").dump();
    const auto base = in.tellg();
    for (const auto& e : header.at("tensors")) {
      const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
      auto t = at::empty(shape, at::TensorOptions().dtype(dtype_from(e.at("dtype"))));
      const auto bytes = e.at("bytes").get<std::uint64_t>();
      if (bytes != static_cast<std::uint64_t>(t.numel()) * t.element_size())
        throw FormatError("checkpoint tensor '" + e.at("name").get<std::string>() + "' has a bad byte count");
      in.seekg(base + static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
      in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
      if (!in) throw FormatError("truncated checkpoint payload in " + path.string());
      const std::string group = e.at("group");
      NamedTensor nt{e.at("name"), t};
      if (group == "params") {
        ckpt.params.push_back(nt);
      } else if (group == "optimizer") {
        ckpt.optimizer.push_back(nt);
      } else if (group == "ema") {
        ckpt.ema.push_back(nt);
      } else {
        throw FormatError("unknown checkpoint tensor group '" + group + "'");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError("ill-formed checkpoint header in " + path.string() + ": " + e.what());
  }
  return ckpt;
}

Network network_from(const Checkpoint& ckpt, bool use_ema) {
  if (use_ema && ckpt.ema.empty()) throw ConsistencyError("checkpoint has no EMA parameters");
  return Network::from_parameters(ckpt.arch, use_ema ? ckpt.ema : ckpt.params);
}

}  // namespace anatomia
