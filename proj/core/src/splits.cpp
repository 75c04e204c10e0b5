#include "anatomia/splits.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "anatomia/error.hpp"
#include "anatomia/rng.hpp"
#include "anatomia/volume_io.hpp"

namespace anatomia {

namespace fs = std::filesystem;
using nlohmann::json;

SplitManifest make_splits(std::span<const std::string> ids, int n_labeled, int n_unlabeled, double val_frac,
                          double test_frac, std::uint64_t seed) {
  if (n_labeled < 1) throw SizeError("make_splits: at least one labeled case is required");
  if (n_unlabeled < 0) throw SizeError("make_splits: negative unlabeled count");
  if (val_frac < 0 || test_frac < 0) throw SizeError("make_splits: negative fraction");
  {
    std::unordered_set<std::string> unique(ids.begin(), ids.end());
    if (unique.size() != ids.size()) throw ConsistencyError("make_splits: duplicate ids");
  }
  const auto total = static_cast<std::int64_t>(ids.size());
  const auto n_val = std::llround(val_frac * static_cast<double>(total));
  const auto n_test = std::llround(test_frac * static_cast<double>(total));
  if (n_labeled + n_unlabeled + n_val + n_test > total)
    throw SizeError("make_splits: requested " + std::to_string(n_labeled + n_unlabeled + n_val + n_test) +
                    " cases from " + std::to_string(total));

  // Fisher-Yates with the library's own generator so manifests are portable.
  std::vector<std::string> order(ids.begin(), ids.end());
  Rng rng(seed);
  for (std::int64_t i = total - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);

  SplitManifest m;
  m.seed = seed;
  auto it = order.begin();
  auto take = [&](std::vector<std::string>& dst, std::int64_t n) {
    dst.assign(it, it + n);
    it += n;
  };
  take(m.test, n_test);
  take(m.val, n_val);
  take(m.labeled, n_labeled);
  take(m.unlabeled, n_unlabeled);
  return m;
}

void write_split_manifest(const SplitManifest& m, const fs::path& path) {
  json j;
  j["seed"] = m.seed;
  j["labeled"] = m.labeled;
  j["unlabeled"] = m.unlabeled;
  j["val"] = m.val;
  j["test"] = m.test;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

SplitManifest read_split_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    const auto j = json::parse(in);
    SplitManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.labeled = j.at("labeled").get<std::vector<std::string>>();
    m.unlabeled = j.at("unlabeled").get<std::vector<std::string>>();
    m.val = j.value("val", std::vector<std::string>{});
    m.test = j.value("test", std::vector<std::string>{});
    return m;
  } catch (const json::exception& e) {
    throw FormatError("ill-formed split manifest " + path.string() + ": " + e.what());
  }
}

fs::path case_dir(const fs::path& dataset_dir, const std::string& id) { return dataset_dir / "cases" / id; }

namespace {

LabeledCase load_labeled(const fs::path& dataset_dir, const std::string& id) {
  auto c = load_volume(case_dir(dataset_dir, id));
  if (!c.label) throw FormatError("case '" + id + "' has no label payload");
  return {std::move(c.volume), std::move(*c.label)};
}

}  // namespace

DatasetSplit load_split(const fs::path& dataset_dir, const SplitManifest& m) {
  DatasetSplit split;
  for (const auto& id : m.labeled) split.labeled.push_back(load_labeled(dataset_dir, id));
  for (const auto& id : m.unlabeled) split.unlabeled.push_back(load_volume(case_dir(dataset_dir, id)).volume);
  for (const auto& id : m.val) split.val.push_back(load_labeled(dataset_dir, id));
  for (const auto& id : m.test) split.test.push_back(load_labeled(dataset_dir, id));

  if (split.labeled.empty()) throw SizeError("split has no labeled cases");
  const int rank = split.labeled.front().volume.rank();
  auto check = [&](const Volume& v) {
    if (v.rank() != rank) throw ConsistencyError("case '" + v.id + "' has a different rank from the dataset");
  };
  for (const auto& c : split.labeled) check(c.volume);
  for (const auto& v : split.unlabeled) check(v);
  for (const auto& c : split.val) check(c.volume);
  for (const auto& c : split.test) check(c.volume);
  return split;
}

}  // namespace anatomia
