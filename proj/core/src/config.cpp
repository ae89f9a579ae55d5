#include "sparselab/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "sparselab/error.hpp"

namespace sparselab {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  auto parse_one = [&](const std::string& part) {
    double v = 0.0;
    const std::string p = trim(part);
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
    if (p.empty() || ec != std::errc() || ptr != p.data() + p.size()) {
      throw ConfigError(key + ": expected a number, got '" + text + "'");
    }
    return v;
  };
  const auto slash = t.find('/');
  if (slash == std::string::npos) return parse_one(t);
  const double den = parse_one(t.substr(slash + 1));
  if (den == 0.0) throw ConfigError(key + ": zero denominator in '" + text + "'");
  return parse_one(t.substr(0, slash)) / den;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  const std::string t = trim(text);
  if (t.empty()) return out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<std::size_t>(parse_uint(key, item)));
  return out;
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field real_field(std::string key, T ExperimentConfig::*member) {
  return {key, [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_real(key, v); },
          [member](const ExperimentConfig& c) { return format_real(c.*member); }};
}

template <typename T>
Field uint_field(std::string key, T ExperimentConfig::*member) {
  return {key,
          [key, member](ExperimentConfig& c, const std::string& v) { c.*member = static_cast<T>(parse_uint(key, v)); },
          [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field list_field(std::string key, std::vector<std::size_t> ExperimentConfig::*member) {
  return {key, [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_list(key, v); },
          [member](const ExperimentConfig& c) { return format_list(c.*member); }};
}

Field string_field(std::string key, std::string ExperimentConfig::*member) {
  return {key, [member](ExperimentConfig& c, const std::string& v) { c.*member = trim(v); },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

template <typename T>
Field synth_field(std::string key, T SyntheticSpec::*member, bool real) {
  return {key,
          [key, member, real](ExperimentConfig& c, const std::string& v) {
            if (real) {
              c.synth.*member = static_cast<T>(parse_real(key, v));
            } else {
              c.synth.*member = static_cast<T>(parse_uint(key, v));
            }
          },
          [member, real](const ExperimentConfig& c) {
            return real ? format_real(static_cast<double>(c.synth.*member)) : std::to_string(c.synth.*member);
          }};
}

template <typename E>
Field enum_field(std::string key, E ExperimentConfig::*member, E (*parse)(const std::string&)) {
  return {key,
          [key, member, parse](ExperimentConfig& c, const std::string& v) {
            try {
              c.*member = parse(trim(v));
            } catch (const InputError& e) {
              throw ConfigError(key + ": " + e.what());
            }
          },
          [member](const ExperimentConfig& c) { return std::string(to_string(c.*member)); }};
}

CorruptionKind parse_corruption(const std::string& s) { return parse_corruption_kind(s); }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(string_field("data_dir", &ExperimentConfig::data_dir));
    f.push_back(synth_field("synth_classes", &SyntheticSpec::classes, false));
    f.push_back(synth_field("synth_per_class", &SyntheticSpec::per_class, false));
    f.push_back(uint_field("synth_test_per_class", &ExperimentConfig::synth_test_per_class));
    f.push_back(synth_field("synth_channels", &SyntheticSpec::channels, false));
    f.push_back(synth_field("synth_height", &SyntheticSpec::height, false));
    f.push_back(synth_field("synth_width", &SyntheticSpec::width, false));
    f.push_back(synth_field("synth_noise", &SyntheticSpec::noise_std, true));
    f.push_back(synth_field("synth_overlap", &SyntheticSpec::overlap, true));
    f.push_back(uint_field("data_seed", &ExperimentConfig::data_seed));
    f.push_back(enum_field("hardness", &ExperimentConfig::hardness, &parse_hardness));
    f.push_back(real_field("keep_frac", &ExperimentConfig::keep_frac));
    f.push_back(uint_field("el2n_models", &ExperimentConfig::el2n_models));
    f.push_back(uint_field("el2n_epochs", &ExperimentConfig::el2n_epochs));
    f.push_back(string_field("scores_file", &ExperimentConfig::scores_file));
    f.push_back(enum_field("corruption", &ExperimentConfig::corruption, &parse_corruption));
    f.push_back({"severity",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.severity = static_cast<int>(std::min<std::uint64_t>(parse_uint("severity", v), 1000));
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.severity); }});
    f.push_back({"test_severity",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.test_severity = static_cast<int>(std::min<std::uint64_t>(parse_uint("test_severity", v), 1000));
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.test_severity); }});
    f.push_back(real_field("epsilon", &ExperimentConfig::epsilon));
    f.push_back(real_field("alpha", &ExperimentConfig::alpha));
    f.push_back(uint_field("attack_steps", &ExperimentConfig::attack_steps));
    f.push_back(uint_field("eval_attack_steps", &ExperimentConfig::eval_attack_steps));
    f.push_back(real_field("data_ratio", &ExperimentConfig::data_ratio));
    f.push_back(enum_field("method", &ExperimentConfig::method, &parse_method));
    f.push_back(real_field("sparsity", &ExperimentConfig::sparsity));
    f.push_back(real_field("gmp_t0", &ExperimentConfig::gmp_t0));
    f.push_back(real_field("gmp_t1", &ExperimentConfig::gmp_t1));
    f.push_back(uint_field("update_interval", &ExperimentConfig::update_interval));
    f.push_back(real_field("set_zeta", &ExperimentConfig::set_zeta));
    f.push_back(real_field("set_stop", &ExperimentConfig::set_stop));
    f.push_back(uint_field("snip_batch", &ExperimentConfig::snip_batch));
    f.push_back(enum_field("model", &ExperimentConfig::model, &parse_architecture));
    f.push_back(list_field("channels", &ExperimentConfig::channels));
    f.push_back(uint_field("kernel", &ExperimentConfig::kernel));
    f.push_back(list_field("hidden", &ExperimentConfig::hidden));
    f.push_back(uint_field("epochs", &ExperimentConfig::epochs));
    f.push_back(uint_field("batch_size", &ExperimentConfig::batch_size));
    f.push_back(real_field("lr", &ExperimentConfig::lr));
    f.push_back(real_field("momentum", &ExperimentConfig::momentum));
    f.push_back(real_field("weight_decay", &ExperimentConfig::weight_decay));
    f.push_back(list_field("milestones", &ExperimentConfig::milestones));
    f.push_back(real_field("lr_factor", &ExperimentConfig::lr_factor));
    f.push_back(uint_field("seed", &ExperimentConfig::seed));
    f.push_back(string_field("output", &ExperimentConfig::output));
    f.push_back({"log_wall_time",
                 [](ExperimentConfig& c, const std::string& v) { c.log_wall_time = parse_bool("log_wall_time", v); },
                 [](const ExperimentConfig& c) { return std::string(c.log_wall_time ? "true" : "false"); }});
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

template <typename E, std::size_t N>
E parse_enum(const std::string& s, const E (&values)[N], const char* what) {
  for (E v : values) {
    if (s == to_string(v)) return v;
  }
  std::string valid;
  for (E v : values) valid += std::string(valid.empty() ? "" : ", ") + to_string(v);
  throw InputError("unknown " + std::string(what) + " '" + s + "' (expected one of: " + valid + ")");
}

constexpr Hardness kHardness[] = {Hardness::none, Hardness::el2n, Hardness::corruption, Hardness::adversarial};
constexpr Architecture kArchitectures[] = {Architecture::miniconvnet, Architecture::mlp};

void require(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError(key + ": " + message);
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::dense: return "dense";
    case Method::gmp: return "gmp";
    case Method::set: return "set";
    case Method::snip: return "snip";
    case Method::lth: return "lth";
    case Method::omp: return "omp";
    case Method::omp_erk: return "omp_erk";
    case Method::random: return "random";
    case Method::uniform: return "uniform";
  }
  return "?";
}

const char* to_string(Hardness h) {
  switch (h) {
    case Hardness::none: return "none";
    case Hardness::el2n: return "el2n";
    case Hardness::corruption: return "corruption";
    case Hardness::adversarial: return "adversarial";
  }
  return "?";
}

const char* to_string(Architecture a) { return a == Architecture::mlp ? "mlp" : "miniconvnet"; }

Method parse_method(const std::string& s) { return parse_enum(s, kAllMethods, "method"); }
Hardness parse_hardness(const std::string& s) { return parse_enum(s, kHardness, "hardness regime"); }
Architecture parse_architecture(const std::string& s) { return parse_enum(s, kArchitectures, "model"); }

void ExperimentConfig::validate() const {
  if (data_dir.empty()) {
    require(synth.classes >= 2, "synth_classes", "need at least 2 classes");
    require(synth.per_class >= 1, "synth_per_class", "must be positive");
    require(synth_test_per_class >= 1, "synth_test_per_class", "must be positive");
    require(synth.channels >= 1 && synth.height >= 1 && synth.width >= 1, "synth_channels",
            "image dims must be positive");
    require(synth.noise_std >= 0.0, "synth_noise", "must be nonnegative");
    require(synth.overlap >= 0.0 && synth.overlap <= 1.0, "synth_overlap", "must lie in [0, 1]");
  }
  require(data_ratio > 0.0 && data_ratio <= 1.0, "data_ratio", "must lie in (0, 1]");
  if (hardness == Hardness::el2n) {
    require(keep_frac > 0.0 && keep_frac <= 1.0, "keep_frac", "must lie in (0, 1]");
    if (scores_file.empty()) {
      require(el2n_models >= 1, "el2n_models", "need at least one scoring model");
    }
  }
  if (hardness == Hardness::corruption) {
    require(severity >= 1 && severity <= kMaxSeverity, "severity", "must lie in 1..6");
    require(test_severity >= 0 && test_severity <= kMaxSeverity, "test_severity", "must lie in 0..6");
  }
  if (hardness == Hardness::adversarial) {
    require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon", "must lie in [0, 1]");
    require(alpha >= 0.0, "alpha", "must be nonnegative");
  }
  if (method == Method::dense) {
    require(sparsity == 0.0, "sparsity", "dense method requires sparsity 0");
  } else {
    require(sparsity > 0.0 && sparsity < 1.0, "sparsity", "must lie in (0, 1) for method " +
                                                              std::string(to_string(method)));
  }
  require(gmp_t0 >= 0.0 && gmp_t0 <= gmp_t1 && gmp_t1 <= 1.0, "gmp_t0", "need 0 <= gmp_t0 <= gmp_t1 <= 1");
  require(update_interval >= 1, "update_interval", "must be positive");
  require(set_zeta >= 0.0 && set_zeta <= 1.0, "set_zeta", "must lie in [0, 1]");
  require(set_stop >= 0.0 && set_stop <= 1.0, "set_stop", "must lie in [0, 1]");
  require(snip_batch >= 1, "snip_batch", "must be positive");
  if (model == Architecture::miniconvnet) {
    require(!channels.empty(), "channels", "need at least one conv block");
    require(std::all_of(channels.begin(), channels.end(), [](std::size_t c) { return c > 0; }), "channels",
            "channel counts must be positive");
    require(kernel >= 1 && kernel % 2 == 1, "kernel", "must be a positive odd number");
  } else {
    require(std::all_of(hidden.begin(), hidden.end(), [](std::size_t c) { return c > 0; }), "hidden",
            "widths must be positive");
  }
  require(epochs >= 1, "epochs", "must be positive");
  require(batch_size >= 1, "batch_size", "must be positive");
  require(lr > 0.0, "lr", "must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "momentum", "must lie in [0, 1)");
  require(weight_decay >= 0.0, "weight_decay", "must be nonnegative");
  require(lr_factor > 0.0, "lr_factor", "must be positive");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    require(milestones[i] < epochs, "milestones", "every milestone must be < epochs");
    require(i == 0 || milestones[i - 1] < milestones[i], "milestones", "must be strictly increasing");
  }
}

TrainSchedule ExperimentConfig::schedule() const {
  TrainSchedule s;
  s.epochs = epochs;
  s.batch_size = batch_size;
  s.sgd.learning_rate = lr;
  s.sgd.momentum = momentum;
  s.sgd.weight_decay = weight_decay;
  s.milestones = milestones;
  s.lr_factor = lr_factor;
  return s;
}

AttackConfig ExperimentConfig::train_attack() const {
  return AttackConfig{epsilon, alpha, attack_steps, true};
}

AttackConfig ExperimentConfig::eval_attack() const {
  return AttackConfig{epsilon, alpha, eval_attack_steps, true};
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  if (key == "code_version") return;  // informational, written by write_manifest
  const Field* f = find_field(key);
  if (!f) throw ConfigError(key + ": unknown configuration key");
  f->set(config, value);
}

std::string get_config_value(const ExperimentConfig& config, const std::string& key) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError(key + ": unknown configuration key");
  return f->get(config);
}

std::map<std::string, std::string> parse_config_text(std::istream& is, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (key != "code_version" && !find_field(key)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + key + ": unknown configuration key");
    }
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_config(ExperimentConfig& config, const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) set_config_value(config, k, v);
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  ExperimentConfig config;
  apply_config(config, parse_config_text(in, path.string()));
  return config;
}

std::string code_version() { return SPARSELAB_VERSION; }

void write_manifest(std::ostream& os, const ExperimentConfig& config) {
  os << "code_version = " << code_version() << "\n";
  for (const auto& f : fields()) os << f.key << " = " << f.get(config) << "\n";
}

ModelSpec model_spec_for(const ExperimentConfig& config, std::size_t channels, std::size_t height, std::size_t width,
                         std::size_t classes) {
  if (config.model == Architecture::mlp) return mlp_spec(channels * height * width, config.hidden, classes);
  return miniconvnet_spec(channels, height, width, config.channels, config.kernel, classes);
}

}  // namespace sparselab
