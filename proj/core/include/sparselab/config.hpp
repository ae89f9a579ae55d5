#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sparselab/corruption.hpp"
#include "sparselab/dataset.hpp"
#include "sparselab/model.hpp"
#include "sparselab/pgd.hpp"
#include "sparselab/trainer.hpp"

namespace sparselab {

enum class Method { dense, gmp, set, snip, lth, omp, omp_erk, random, uniform };
enum class Hardness { none, el2n, corruption, adversarial };
enum class Architecture { miniconvnet, mlp };

const char* to_string(Method m);
const char* to_string(Hardness h);
const char* to_string(Architecture a);
Method parse_method(const std::string& s);
Hardness parse_hardness(const std::string& s);
Architecture parse_architecture(const std::string& s);

inline constexpr Method kAllMethods[] = {Method::dense, Method::gmp,     Method::set,    Method::snip,   Method::lth,
                                         Method::omp,   Method::omp_erk, Method::random, Method::uniform};

struct ExperimentConfig {
  // dataset: files under data_dir, or synthetic when empty
  std::string data_dir;
  SyntheticSpec synth;
  std::size_t synth_test_per_class = 200;
  std::uint64_t data_seed = 0;

  // hardness regime
  Hardness hardness = Hardness::none;
  double keep_frac = 0.5;
  std::size_t el2n_models = 1;
  std::size_t el2n_epochs = 0;  // 0: the main run's schedule
  std::string scores_file;
  CorruptionKind corruption = CorruptionKind::gaussian_noise;
  int severity = 3;
  int test_severity = 0;  // 0: same as severity
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  std::size_t attack_steps = 10;
  std::size_t eval_attack_steps = 20;
  double data_ratio = 1.0;

  // sparsifier
  Method method = Method::dense;
  double sparsity = 0.0;
  double gmp_t0 = 0.10;
  double gmp_t1 = 0.80;
  std::size_t update_interval = 4;
  double set_zeta = 0.3;
  double set_stop = 0.75;
  std::size_t snip_batch = 128;

  // model
  Architecture model = Architecture::miniconvnet;
  std::vector<std::size_t> channels{16, 32};
  std::size_t kernel = 3;
  std::vector<std::size_t> hidden{128};

  // optimization
  std::size_t epochs = 40;
  std::size_t batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<std::size_t> milestones{20, 30};
  double lr_factor = 0.1;
  std::uint64_t seed = 0;

  // outputs
  std::string output;
  bool log_wall_time = false;

  // Throws ConfigError naming the offending field.
  void validate() const;

  TrainSchedule schedule() const;
  AttackConfig train_attack() const;
  AttackConfig eval_attack() const;
  int effective_test_severity() const { return test_severity == 0 ? severity : test_severity; }
};

// Every key understood by set_config_value, in manifest order.
const std::vector<std::string>& config_keys();

// Assigns one field from its textual value; ConfigError on an unknown key or
// malformed value. Fractions such as "8/255" are accepted for real fields and
// comma-separated lists for list fields.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& config, const std::string& key);

// `key = value` lines; `#` starts a comment, blank lines are ignored.
std::map<std::string, std::string> parse_config_text(std::istream& is, const std::string& origin = "config");
void apply_config(ExperimentConfig& config, const std::map<std::string, std::string>& values);
ExperimentConfig load_config_file(const std::filesystem::path& path);

// Full config echo plus code_version; loading it back reproduces the run.
void write_manifest(std::ostream& os, const ExperimentConfig& config);
std::string code_version();

ModelSpec model_spec_for(const ExperimentConfig& config, std::size_t channels, std::size_t height, std::size_t width,
                         std::size_t classes);

}  // namespace sparselab
