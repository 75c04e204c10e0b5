#include "anatomia/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "anatomia/error.hpp"

namespace anatomia::cli {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const KeyValueConfig::Entry& e, const std::string& expected) {
  throw ConfigError(e.origin + ": key '" + key + "': expected " + expected + ", got '" + e.value + "'");
}

double as_double(const std::string& key, const KeyValueConfig::Entry& e) {
  double v = 0;
  const auto* end = e.value.data() + e.value.size();
  const auto r = std::from_chars(e.value.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) bad_value(key, e, "a number");
  return v;
}

std::int64_t as_int(const std::string& key, const KeyValueConfig::Entry& e) {
  std::int64_t v = 0;
  const auto* end = e.value.data() + e.value.size();
  const auto r = std::from_chars(e.value.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) bad_value(key, e, "an integer");
  return v;
}

std::uint64_t as_uint(const std::string& key, const KeyValueConfig::Entry& e) {
  std::uint64_t v = 0;
  const auto* end = e.value.data() + e.value.size();
  const auto r = std::from_chars(e.value.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) bad_value(key, e, "a non-negative integer");
  return v;
}

bool as_bool(const std::string& key, const KeyValueConfig::Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "on") return true;
  if (e.value == "false" || e.value == "0" || e.value == "off") return false;
  bad_value(key, e, "true or false");
}

Shape as_shape(const std::string& key, const KeyValueConfig::Entry& e) {
  Shape out;
  for (const auto& item : split_list(e.value)) {
    const KeyValueConfig::Entry one{item, e.origin};
    const auto v = as_int(key, one);
    if (v < 1) bad_value(key, e, "positive extents");
    out.push_back(v);
  }
  if (out.size() < 2 || out.size() > 3) bad_value(key, e, "2 or 3 comma-separated extents");
  return out;
}

using Setter = std::function<void(Settings&, const std::string&, const KeyValueConfig::Entry&)>;

#define DOUBLE(field) [](Settings& s, const std::string& k, const KeyValueConfig::Entry& e) { s.field = as_double(k, e); }
#define INT(field) \
  [](Settings& s, const std::string& k, const KeyValueConfig::Entry& e) { s.field = static_cast<decltype(s.field)>(as_int(k, e)); }
#define UINT(field) [](Settings& s, const std::string& k, const KeyValueConfig::Entry& e) { s.field = as_uint(k, e); }
#define SHAPE(field) [](Settings& s, const std::string& k, const KeyValueConfig::Entry& e) { s.field = as_shape(k, e); }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"synth.num_cases", INT(synth.num_cases)},
      {"synth.image_size", SHAPE(synth.image_size)},
      {"synth.num_classes", INT(synth.num_classes)},
      {"synth.blob_count", DOUBLE(synth.blob_count)},
      {"synth.irregularity", DOUBLE(synth.irregularity)},
      {"synth.layout_jitter", DOUBLE(synth.layout_jitter)},
      {"synth.size_jitter", DOUBLE(synth.size_jitter)},
      {"synth.shape_jitter", DOUBLE(synth.shape_jitter)},
      {"synth.contrast", DOUBLE(synth.contrast)},
      {"synth.noise_std", DOUBLE(synth.noise_std)},
      {"synth.min_radius", DOUBLE(synth.min_radius)},
      {"synth.max_radius", DOUBLE(synth.max_radius)},
      {"synth.min_class_fraction", DOUBLE(synth.min_class_fraction)},
      {"synth.max_class_fraction", DOUBLE(synth.max_class_fraction)},
      {"synth.spacing", DOUBLE(synth.spacing)},
      {"synth.seed", UINT(synth.seed)},

      {"split.n_labeled", INT(split.n_labeled)},
      {"split.n_unlabeled", INT(split.n_unlabeled)},
      {"split.val_frac", DOUBLE(split.val_frac)},
      {"split.test_frac", DOUBLE(split.test_frac)},
      {"split.seed", UINT(split.seed)},

      {"corruption.swap_rate", DOUBLE(dae.policy.swap_rate)},
      {"corruption.morph_radius_min", INT(dae.policy.morph_radius_min)},
      {"corruption.morph_radius_max", INT(dae.policy.morph_radius_max)},
      {"corruption.rescale_min", DOUBLE(dae.policy.rescale_min)},
      {"corruption.rescale_max", DOUBLE(dae.policy.rescale_max)},
      {"corruption.shape_edits_min", INT(dae.policy.shape_edits_min)},
      {"corruption.shape_edits_max", INT(dae.policy.shape_edits_max)},
      {"corruption.p_swap", DOUBLE(dae.policy.p_swap)},
      {"corruption.p_morph", DOUBLE(dae.policy.p_morph)},
      {"corruption.p_rescale", DOUBLE(dae.policy.p_rescale)},
      {"corruption.p_shape_edit", DOUBLE(dae.policy.p_shape_edit)},

      {"dae.latent_dim", INT(dae_latent_dim)},
      {"dae.base_width", INT(dae_arch.base_width)},
      {"dae.depth", INT(dae_arch.depth)},
      {"dae.convs_per_level", INT(dae_arch.convs_per_level)},
      {"dae.lr0", DOUBLE(dae.lr0)},
      {"dae.momentum", DOUBLE(dae.momentum)},
      {"dae.lr_halving_period", INT(dae.lr_halving_period)},
      {"dae.max_iters", INT(dae.max_iters)},
      {"dae.batch_size", INT(dae.batch_size)},
      {"dae.patch", SHAPE(dae.patch_size)},
      {"dae.label_smoothing", DOUBLE(dae.label_smoothing)},
      {"dae.patience", INT(dae.patience)},
      {"dae.log_every", INT(dae.log_every)},
      {"dae.seed", UINT(dae.seed)},

      {"ssl.strategy",
       [](Settings& s, const std::string& k, const KeyValueConfig::Entry& e) {
         try {
           s.ssl.strategy = parse_strategy(e.value);
         } catch (const ConfigError&) {
           bad_value(k, e, "a strategy name");
         }
       }},
      {"ssl.alpha", DOUBLE(ssl.alpha)},
      {"ssl.beta", DOUBLE(ssl.beta)},
      {"ssl.ramp_rate", DOUBLE(ssl.ramp_rate)},
      {"ssl.gamma", DOUBLE(ssl.gamma)},
      {"ssl.mcdo_samples", INT(ssl.mcdo_samples)},
      {"ssl.latent_noise_std", DOUBLE(ssl.latent_noise_std)},
      {"ssl.lr0", DOUBLE(ssl.lr0)},
      {"ssl.momentum", DOUBLE(ssl.momentum)},
      {"ssl.t_max", INT(ssl.t_max)},
      {"ssl.labeled_per_batch", INT(ssl.labeled_per_batch)},
      {"ssl.unlabeled_per_batch", INT(ssl.unlabeled_per_batch)},
      {"ssl.patch", SHAPE(ssl.patch_size)},
      {"ssl.infer_stride", SHAPE(ssl.infer_stride)},
      {"ssl.teacher_input_noise", DOUBLE(ssl.teacher_input_noise)},
      {"ssl.threshold_cap_init", DOUBLE(ssl.threshold_cap_init)},
      {"ssl.seed", UINT(ssl.seed)},
      {"ssl.val_every", INT(ssl.val_every)},
      {"ssl.selection",
       [](Settings& s, const std::string& k, const KeyValueConfig::Entry& e) {
         if (e.value == "last-iteration" || e.value == "last_iteration")
           s.ssl.selection = ModelSelection::last_iteration;
         else if (e.value == "best-val" || e.value == "best_val")
           s.ssl.selection = ModelSelection::best_val;
         else
           bad_value(k, e, "last-iteration or best-val");
       }},
      {"ssl.base_width", INT(ssl_arch.base_width)},
      {"ssl.depth", INT(ssl_arch.depth)},
      {"ssl.convs_per_level", INT(ssl_arch.convs_per_level)},
      {"ssl.dropout", DOUBLE(ssl_arch.dropout_rate)},

      {"experiment.dataset",
       [](Settings& s, const std::string&, const KeyValueConfig::Entry& e) { s.experiment.dataset = e.value; }},
      {"experiment.out", [](Settings& s, const std::string&, const KeyValueConfig::Entry& e) { s.experiment.out = e.value; }},
      {"experiment.strategies",
       [](Settings& s, const std::string& k, const KeyValueConfig::Entry& e) {
         s.experiment.strategies.clear();
         for (const auto& name : split_list(e.value)) {
           try {
             s.experiment.strategies.push_back(parse_strategy(name));
           } catch (const ConfigError&) {
             bad_value(k, e, "a comma-separated list of strategy names");
           }
         }
         if (s.experiment.strategies.empty()) bad_value(k, e, "at least one strategy");
       }},
      {"experiment.seeds",
       [](Settings& s, const std::string& k, const KeyValueConfig::Entry& e) {
         s.experiment.seeds.clear();
         for (const auto& item : split_list(e.value)) s.experiment.seeds.push_back(as_uint(k, {item, e.origin}));
         if (s.experiment.seeds.empty()) bad_value(k, e, "at least one seed");
       }},
      {"experiment.sweep",
       [](Settings& s, const std::string&, const KeyValueConfig::Entry& e) { s.experiment.sweep_key = e.value; }},
      {"experiment.sweep_values",
       [](Settings& s, const std::string&, const KeyValueConfig::Entry& e) {
         s.experiment.sweep_values = split_list(e.value);
       }},
  };
  return table;
}

#undef DOUBLE
#undef INT
#undef UINT
#undef SHAPE

// Shortest form that parses back to the same double.
std::string text(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}
std::string text(std::int64_t v) { return std::to_string(v); }
std::string text(int v) { return std::to_string(v); }
std::string text(std::uint64_t v) { return std::to_string(v); }
std::string text(const Shape& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}
template <class T>
std::optional<std::string> opt_text(const std::optional<T>& v) {
  return v ? std::optional<std::string>(text(*v)) : std::nullopt;
}
template <class T>
std::string join(const std::vector<T>& items, std::string (*f)(T)) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + f(items[i]);
  return out;
}

using Getter = std::function<std::optional<std::string>(const Settings&)>;

// Effective value of every key; nullopt means "architecture default".
const std::map<std::string, Getter>& getters() {
  static const std::map<std::string, Getter> table = {
      {"synth.num_cases", [](const Settings& s) { return text(s.synth.num_cases); }},
      {"synth.image_size", [](const Settings& s) { return text(s.synth.image_size); }},
      {"synth.num_classes", [](const Settings& s) { return text(s.synth.num_classes); }},
      {"synth.blob_count", [](const Settings& s) { return text(s.synth.blob_count); }},
      {"synth.irregularity", [](const Settings& s) { return text(s.synth.irregularity); }},
      {"synth.layout_jitter", [](const Settings& s) { return text(s.synth.layout_jitter); }},
      {"synth.size_jitter", [](const Settings& s) { return text(s.synth.size_jitter); }},
      {"synth.shape_jitter", [](const Settings& s) { return text(s.synth.shape_jitter); }},
      {"synth.contrast", [](const Settings& s) { return text(s.synth.contrast); }},
      {"synth.noise_std", [](const Settings& s) { return text(s.synth.noise_std); }},
      {"synth.min_radius", [](const Settings& s) { return text(s.synth.min_radius); }},
      {"synth.max_radius", [](const Settings& s) { return text(s.synth.max_radius); }},
      {"synth.min_class_fraction", [](const Settings& s) { return text(s.synth.min_class_fraction); }},
      {"synth.max_class_fraction", [](const Settings& s) { return text(s.synth.max_class_fraction); }},
      {"synth.spacing", [](const Settings& s) { return text(s.synth.spacing); }},
      {"synth.seed", [](const Settings& s) { return text(s.synth.seed); }},
      {"split.n_labeled", [](const Settings& s) { return text(s.split.n_labeled); }},
      {"split.n_unlabeled", [](const Settings& s) { return text(s.split.n_unlabeled); }},
      {"split.val_frac", [](const Settings& s) { return text(s.split.val_frac); }},
      {"split.test_frac", [](const Settings& s) { return text(s.split.test_frac); }},
      {"split.seed", [](const Settings& s) { return text(s.split.seed); }},
      {"corruption.swap_rate", [](const Settings& s) { return text(s.dae.policy.swap_rate); }},
      {"corruption.morph_radius_min", [](const Settings& s) { return text(s.dae.policy.morph_radius_min); }},
      {"corruption.morph_radius_max", [](const Settings& s) { return text(s.dae.policy.morph_radius_max); }},
      {"corruption.rescale_min", [](const Settings& s) { return text(s.dae.policy.rescale_min); }},
      {"corruption.rescale_max", [](const Settings& s) { return text(s.dae.policy.rescale_max); }},
      {"corruption.shape_edits_min", [](const Settings& s) { return text(s.dae.policy.shape_edits_min); }},
      {"corruption.shape_edits_max", [](const Settings& s) { return text(s.dae.policy.shape_edits_max); }},
      {"corruption.p_swap", [](const Settings& s) { return text(s.dae.policy.p_swap); }},
      {"corruption.p_morph", [](const Settings& s) { return text(s.dae.policy.p_morph); }},
      {"corruption.p_rescale", [](const Settings& s) { return text(s.dae.policy.p_rescale); }},
      {"corruption.p_shape_edit", [](const Settings& s) { return text(s.dae.policy.p_shape_edit); }},
      {"dae.latent_dim", [](const Settings& s) { return text(s.dae_latent_dim); }},
      {"dae.base_width", [](const Settings& s) { return opt_text(s.dae_arch.base_width); }},
      {"dae.depth", [](const Settings& s) { return opt_text(s.dae_arch.depth); }},
      {"dae.convs_per_level", [](const Settings& s) { return opt_text(s.dae_arch.convs_per_level); }},
      {"dae.momentum", [](const Settings& s) { return text(s.dae.momentum); }},
      {"dae.lr_halving_period", [](const Settings& s) { return text(s.dae.lr_halving_period); }},
      {"dae.max_iters", [](const Settings& s) { return text(s.dae.max_iters); }},
      {"dae.batch_size", [](const Settings& s) { return text(s.dae.batch_size); }},
      {"dae.patch", [](const Settings& s) { return text(s.dae.patch_size); }},
      {"dae.label_smoothing", [](const Settings& s) { return text(s.dae.label_smoothing); }},
      {"dae.patience", [](const Settings& s) { return text(s.dae.patience); }},
      {"dae.log_every", [](const Settings& s) { return text(s.dae.log_every); }},
      {"dae.seed", [](const Settings& s) { return text(s.dae.seed); }},
      {"ssl.alpha", [](const Settings& s) { return text(s.ssl.alpha); }},
      {"ssl.beta", [](const Settings& s) { return text(s.ssl.beta); }},
      {"ssl.ramp_rate", [](const Settings& s) { return text(s.ssl.ramp_rate); }},
      {"ssl.gamma", [](const Settings& s) { return text(s.ssl.gamma); }},
      {"ssl.mcdo_samples", [](const Settings& s) { return text(s.ssl.mcdo_samples); }},
      {"ssl.latent_noise_std", [](const Settings& s) { return text(s.ssl.latent_noise_std); }},
      {"ssl.momentum", [](const Settings& s) { return text(s.ssl.momentum); }},
      {"ssl.t_max", [](const Settings& s) { return text(s.ssl.t_max); }},
      {"ssl.labeled_per_batch", [](const Settings& s) { return text(s.ssl.labeled_per_batch); }},
      {"ssl.unlabeled_per_batch", [](const Settings& s) { return text(s.ssl.unlabeled_per_batch); }},
      {"ssl.patch", [](const Settings& s) { return text(s.ssl.patch_size); }},
      {"ssl.infer_stride", [](const Settings& s) { return text(s.ssl.infer_stride); }},
      {"ssl.teacher_input_noise", [](const Settings& s) { return text(s.ssl.teacher_input_noise); }},
      {"ssl.threshold_cap_init", [](const Settings& s) { return text(s.ssl.threshold_cap_init); }},
      {"ssl.seed", [](const Settings& s) { return text(s.ssl.seed); }},
      {"ssl.val_every", [](const Settings& s) { return text(s.ssl.val_every); }},
      {"ssl.base_width", [](const Settings& s) { return opt_text(s.ssl_arch.base_width); }},
      {"ssl.depth", [](const Settings& s) { return opt_text(s.ssl_arch.depth); }},
      {"ssl.convs_per_level", [](const Settings& s) { return opt_text(s.ssl_arch.convs_per_level); }},
      {"ssl.dropout", [](const Settings& s) { return opt_text(s.ssl_arch.dropout_rate); }},
      {"dae.lr0", [](const Settings& s) { return text(s.dae.lr0); }},
      {"ssl.lr0", [](const Settings& s) { return text(s.ssl.lr0); }},
      {"ssl.strategy", [](const Settings& s) { return to_string(s.ssl.strategy); }},
      {"ssl.selection",
       [](const Settings& s) {
         return std::string(s.ssl.selection == ModelSelection::best_val ? "best-val" : "last-iteration");
       }},
      {"experiment.dataset",
       [](const Settings& s) { return s.experiment.dataset ? std::optional(s.experiment.dataset->string()) : std::nullopt; }},
      {"experiment.out",
       [](const Settings& s) { return s.experiment.out ? std::optional(s.experiment.out->string()) : std::nullopt; }},
      {"experiment.strategies",
       [](const Settings& s) {
         return join<Strategy>(s.experiment.strategies, [](Strategy v) { return to_string(v); });
       }},
      {"experiment.seeds",
       [](const Settings& s) {
         return join<std::uint64_t>(s.experiment.seeds, [](std::uint64_t v) { return std::to_string(v); });
       }},
      {"experiment.sweep", [](const Settings& s) { return s.experiment.sweep_key; }},
      {"experiment.sweep_values",
       [](const Settings& s) -> std::optional<std::string> {
         if (s.experiment.sweep_values.empty()) return std::nullopt;
         return join<std::string>(s.experiment.sweep_values, [](std::string v) { return v; });
       }},
  };
  return table;
}

ArchConfig apply(ArchConfig a, const ArchOverrides& o) {
  if (o.base_width) a.base_width = *o.base_width;
  if (o.depth) a.depth = *o.depth;
  if (o.convs_per_level) a.convs_per_level = *o.convs_per_level;
  if (o.dropout_rate) a.dropout_rate = *o.dropout_rate;
  return a;
}

}  // namespace

void KeyValueConfig::load_file(const fs::path& path) { load_file(path, 0); }

void KeyValueConfig::load_file(const fs::path& path, int depth) {
  if (depth > 16) throw ConfigError(path.string() + ": include nesting deeper than 16");
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::map<std::string, int> seen;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const std::string origin = path.string() + ":" + std::to_string(n);
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ": expected 'key = value', got '" + body + "'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ": missing key before '='");
    if (key == "include") {
      const fs::path target = fs::path(value).is_absolute() ? fs::path(value) : path.parent_path() / value;
      load_file(target, depth + 1);
      continue;
    }
    if (const auto it = seen.find(key); it != seen.end())
      throw ConfigError(origin + ": key '" + key + "' already set on line " + std::to_string(it->second));
    seen[key] = n;
    set(key, value, origin);
  }
}

void KeyValueConfig::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("--set: expected key=value, got '" + std::string(assignment) + "'");
  const std::string key = trim(assignment.substr(0, eq));
  if (key.empty()) throw ConfigError("--set: missing key in '" + std::string(assignment) + "'");
  set(key, trim(assignment.substr(eq + 1)), "--set " + key);
}

void KeyValueConfig::set(const std::string& key, const std::string& value, const std::string& origin) {
  if (!setters().count(key)) throw ConfigError(origin + ": unknown key '" + key + "'");
  entries_[key] = {value, origin};
}

std::string KeyValueConfig::dump() const {
  std::string out;
  for (const auto& [k, e] : entries_) out += k + " = " + e.value + "\n";
  return out;
}

Settings resolve(const KeyValueConfig& cfg) {
  Settings s;
  for (const auto& [key, entry] : cfg.entries()) setters().at(key)(s, key, entry);
  if (s.experiment.sweep_key) {
    if (!setters().count(*s.experiment.sweep_key) || s.experiment.sweep_key->starts_with("experiment."))
      throw ConfigError(cfg.entries().at("experiment.sweep").origin + ": cannot sweep over '" +
                        *s.experiment.sweep_key + "'");
    if (s.experiment.sweep_values.empty())
      throw ConfigError(cfg.entries().at("experiment.sweep").origin + ": experiment.sweep_values is empty");
  }
  try {
    s.synth.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("synth.*: ") + e.what());
  }
  return s;
}

std::string describe(const Settings& s) {
  std::string out;
  for (const auto& [key, get] : getters()) {
    const auto v = get(s);
    out += v ? key + " = " + *v + "\n" : "# " + key + " = (default)\n";
  }
  return out;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

DaeTrainConfig dae_training(const Settings& s, int num_classes) {
  DaeTrainConfig cfg = s.dae;
  cfg.arch = apply(default_dae_arch(num_classes, cfg.patch_size, s.dae_latent_dim), s.dae_arch);
  cfg.validate();
  return cfg;
}

SslConfig ssl_training(const Settings& s, Strategy strategy, std::uint64_t seed, int num_classes, int rank) {
  SslConfig cfg = s.ssl;
  cfg.strategy = strategy;
  cfg.seed = seed;
  cfg.arch = apply(default_segnet_arch(num_classes, rank, strategy), s.ssl_arch);
  cfg.validate();
  return cfg;
}

SplitManifest split_ids(const Settings& s, std::span<const std::string> ids) {
  const auto total = static_cast<int>(ids.size());
  const int held = static_cast<int>(std::lround(s.split.val_frac * total) + std::lround(s.split.test_frac * total));
  const int n_unlabeled = s.split.n_unlabeled >= 0 ? s.split.n_unlabeled : std::max(0, total - held - s.split.n_labeled);
  return make_splits(ids, s.split.n_labeled, n_unlabeled, s.split.val_frac, s.split.test_frac, s.split.seed);
}

}  // namespace anatomia::cli
