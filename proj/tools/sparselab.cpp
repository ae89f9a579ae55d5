// Command-line front end: dataset generation, hardness transforms, training,
// sweeps and checkpoint inspection.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sparselab/checkpoint.hpp"
#include "sparselab/config.hpp"
#include "sparselab/corruption.hpp"
#include "sparselab/el2n.hpp"
#include "sparselab/error.hpp"
#include "sparselab/experiment.hpp"
#include "sparselab/flops.hpp"
#include "sparselab/pgd.hpp"
#include "sparselab/rng.hpp"
#include "sparselab/sweep.hpp"

namespace sl = sparselab;

namespace {

// Registers --<key> (and --<key-with-dashes>) for every config key; values
// land in `overrides` only when given.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file; flags override its values");
    for (const auto& key : sl::config_keys()) {
      std::string names = "--" + key;
      std::string dashed = key;
      for (char& c : dashed) c = c == '_' ? '-' : c;
      if (dashed != key) names += ",--" + dashed;
      app->add_option_function<std::string>(
             names, [this, key](const std::string& v) { overrides[key] = v; }, "config field " + key)
          ->group("Config fields");
    }
  }

  sl::ExperimentConfig resolve() const {
    sl::ExperimentConfig config;
    if (!config_file.empty()) config = sl::load_config_file(config_file);
    sl::apply_config(config, overrides);
    return config;
  }
};

std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  sl::ExperimentConfig scratch;
  while (std::getline(ss, item, ',')) {
    sl::set_config_value(scratch, "sparsity", item);
    out.push_back(scratch.sparsity);
  }
  return out;
}

template <typename T>
std::vector<T> parse_uints(const std::string& key, const std::string& text) {
  std::vector<T> out;
  sl::ExperimentConfig scratch;
  sl::set_config_value(scratch, "milestones", text);
  for (auto v : scratch.milestones) out.push_back(static_cast<T>(v));
  if (out.empty()) throw sl::ConfigError(key + ": empty list");
  return out;
}

void print_metrics(const sl::MetricsRecord& r) {
  std::printf("final epoch %zu: train_loss %.4f train_acc %.4f test_clean_acc %.4f", r.epoch, r.train_loss,
              r.train_acc, r.test_clean_acc);
  if (r.test_adv_acc) std::printf(" test_adv_acc %.4f", *r.test_adv_acc);
  std::printf(" sparsity %.4f flops %.4e\n", r.global_sparsity, r.cumulative_flops);
}

sl::Model load_run_model(const std::filesystem::path& run, sl::ExperimentConfig& config, sl::MaskSet& masks) {
  config = sl::load_config_file(run / "manifest.cfg");
  const sl::Dataset probe = sl::prepare_test_data(config);
  sl::Model model(sl::model_spec_for(config, probe.channels(), probe.height(), probe.width(), probe.classes));
  sl::load_model_file(run / "model.bin", model);
  masks = sl::read_mask_file(run / "masks.bin").masks;
  if (masks.size() != model.layer_count()) throw sl::InputError("masks.bin does not match the model");
  return model;
}

int run(int argc, char** argv) {
  CLI::App app{"sparselab: sparse training on hard data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sl::code_version());

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset (train and test splits)");
  ConfigFlags synth_flags;
  std::string synth_out;
  synth_flags.attach(synth);
  synth->add_option("--out", synth_out, "output dataset directory")->required();

  // score
  auto* score = app.add_subcommand("score", "EL2N-score the train split, writing index,el2n CSV");
  ConfigFlags score_flags;
  std::string score_out;
  std::vector<std::string> score_ckpts;
  score_flags.attach(score);
  score->add_option("--out", score_out, "score CSV path")->required();
  score->add_option("--checkpoint", score_ckpts, "score with these model.bin files instead of training scorers");

  // filter
  auto* filter = app.add_subcommand("filter", "Keep the hardest keep_frac of the train split");
  std::string filter_data, filter_scores, filter_out;
  double keep_frac = 0.5;
  filter->add_option("--data", filter_data, "input dataset directory")->required();
  filter->add_option("--scores", filter_scores, "score CSV")->required();
  filter->add_option("--keep-frac,--keep_frac", keep_frac, "fraction kept")->required();
  filter->add_option("--out", filter_out, "output dataset directory")->required();

  // corrupt
  auto* corr = app.add_subcommand("corrupt", "Write a corrupted copy of a dataset");
  std::string corr_data, corr_out, corr_kind = "gaussian_noise", corr_split = "both";
  int corr_severity = 3;
  std::uint64_t corr_seed = 0;
  corr->add_option("--data", corr_data, "input dataset directory")->required();
  corr->add_option("--out", corr_out, "output dataset directory")->required();
  corr->add_option("--corruption,--kind", corr_kind, "gaussian_noise | impulse_noise | defocus_blur");
  corr->add_option("--severity", corr_severity, "1..6");
  corr->add_option("--seed", corr_seed, "noise seed");
  corr->add_option("--split", corr_split, "train | test | both")->check(CLI::IsMember({"train", "test", "both"}));

  // train
  auto* train = app.add_subcommand("train", "Run one experiment");
  ConfigFlags train_flags;
  train_flags.attach(train);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a sweep over sparsity / data ratio / severity and seeds");
  ConfigFlags sweep_flags;
  std::string axis_sparsity, axis_ratio, axis_severity, seeds_text;
  std::size_t jobs = 1;
  sweep_flags.attach(sweep);
  sweep->add_option("--sparsity-axis", axis_sparsity, "comma-separated sparsities");
  sweep->add_option("--data-ratio-axis", axis_ratio, "comma-separated data ratios");
  sweep->add_option("--severity-axis", axis_severity, "comma-separated severities");
  sweep->add_option("--seeds", seeds_text, "comma-separated seeds");
  sweep->add_option("--jobs", jobs, "parallel worker processes");

  // attack-eval
  auto* attack = app.add_subcommand("attack-eval", "Evaluate a run's checkpoint under PGD");
  std::string attack_run;
  sl::AttackConfig attack_cfg;
  attack_cfg.steps = 20;
  std::uint64_t attack_seed = 0;
  bool zero_start = false;
  std::string attack_eps, attack_alpha;
  attack->add_option("--run", attack_run, "run directory")->required();
  attack->add_option("--epsilon", attack_eps, "l-infinity budget (default 8/255)");
  attack->add_option("--alpha", attack_alpha, "step size (default 2/255)");
  attack->add_option("--steps", attack_cfg.steps, "PGD steps");
  attack->add_option("--seed", attack_seed, "attack seed");
  attack->add_flag("--zero-start", zero_start, "start from delta = 0 instead of a random point");

  // report
  auto* report = app.add_subcommand("report", "Density and FLOPs summary of a run directory");
  std::string report_run;
  report->add_option("--run", report_run, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*synth) {
    const sl::ExperimentConfig config = synth_flags.resolve();
    config.validate();
    sl::save_dataset_dir(synth_out, sl::load_source_data(config));
    std::printf("wrote %s\n", synth_out.c_str());
  } else if (*score) {
    const sl::ExperimentConfig config = score_flags.resolve();
    config.validate();
    const sl::Dataset data = sl::load_source_data(config).train;
    std::vector<double> values;
    if (score_ckpts.empty()) {
      values = sl::compute_el2n_scores(config, data);
    } else {
      std::vector<sl::Model> models;
      for (const auto& path : score_ckpts) {
        models.emplace_back(sl::model_spec_for(config, data.channels(), data.height(), data.width(), data.classes));
        sl::load_model_file(path, models.back());
      }
      std::vector<sl::Model*> ptrs;
      for (auto& m : models) ptrs.push_back(&m);
      values = sl::score_values(sl::el2n_score(ptrs, data), data.size());
    }
    std::vector<sl::ScoreRecord> records;
    for (std::size_t i = 0; i < values.size(); ++i) records.push_back({i, values[i], "el2n"});
    std::ofstream out(score_out);
    if (!out) throw sl::IoError("cannot write " + score_out);
    sl::write_score_csv(out, records);
    std::printf("scored %zu samples -> %s\n", values.size(), score_out.c_str());
  } else if (*filter) {
    sl::DatasetPair data = sl::load_dataset_dir(filter_data);
    std::ifstream in(filter_scores);
    if (!in) throw sl::IoError("cannot open " + filter_scores);
    const auto values = sl::score_values(sl::read_score_csv(in), data.train.size());
    if (!(keep_frac > 0.0 && keep_frac <= 1.0)) throw sl::ConfigError("keep_frac: must lie in (0, 1]");
    data.train = sl::filter_hard(data.train, values, keep_frac);
    sl::save_dataset_dir(filter_out, data);
    std::printf("kept %zu train samples -> %s\n", data.train.size(), filter_out.c_str());
  } else if (*corr) {
    sl::DatasetPair data = sl::load_dataset_dir(corr_data);
    sl::CorruptionKind kind;
    try {
      kind = sl::parse_corruption_kind(corr_kind);
    } catch (const sl::InputError& e) {
      throw sl::ConfigError(std::string("corruption: ") + e.what());
    }
    if (corr_severity < 1 || corr_severity > sl::kMaxSeverity) throw sl::ConfigError("severity: must lie in 1..6");
    if (corr_split != "test") {
      data.train = sl::corrupt(data.train, {kind, corr_severity, sl::derive_seed(corr_seed, "corrupt-train")});
    }
    if (corr_split != "train") {
      data.test = sl::corrupt(data.test, {kind, corr_severity, sl::derive_seed(corr_seed, "corrupt-test")});
    }
    sl::save_dataset_dir(corr_out, data);
    std::printf("wrote %s\n", corr_out.c_str());
  } else if (*train) {
    const sl::ExperimentConfig config = train_flags.resolve();
    const sl::RunResult result = sl::run_experiment(config);
    print_metrics(result.final_metrics());
    if (!result.run_dir.empty()) std::printf("run directory: %s\n", result.run_dir.string().c_str());
  } else if (*sweep) {
    const sl::ExperimentConfig config = sweep_flags.resolve();
    sl::SweepAxes axes;
    if (!axis_sparsity.empty()) axes.sparsity = parse_reals(axis_sparsity);
    if (!axis_ratio.empty()) axes.data_ratio = parse_reals(axis_ratio);
    if (!axis_severity.empty()) axes.severity = parse_uints<int>("severity-axis", axis_severity);
    std::vector<std::uint64_t> seeds;
    if (!seeds_text.empty()) seeds = parse_uints<std::uint64_t>("seeds", seeds_text);
    const sl::SweepResult result = sl::run_sweep(config, axes, seeds, jobs);
    sl::write_aggregate_csv(std::cout, result.rows);
  } else if (*attack) {
    sl::ExperimentConfig config;
    sl::MaskSet masks;
    sl::Model model = load_run_model(attack_run, config, masks);
    sl::ExperimentConfig scratch;
    if (!attack_eps.empty()) {
      sl::set_config_value(scratch, "epsilon", attack_eps);
      attack_cfg.epsilon = scratch.epsilon;
    }
    if (!attack_alpha.empty()) {
      sl::set_config_value(scratch, "alpha", attack_alpha);
      attack_cfg.alpha = scratch.alpha;
    }
    attack_cfg.random_start = !zero_start;
    const sl::Dataset test = sl::prepare_test_data(config);
    const sl::EvalResult eval = sl::evaluate(model, &masks, test, attack_cfg, attack_seed);
    std::printf("samples %zu epsilon %.6f alpha %.6f steps %zu\nclean_acc %.4f\nadv_acc %.4f\n", test.size(),
                attack_cfg.epsilon, attack_cfg.alpha, attack_cfg.steps, eval.clean_acc, *eval.adv_acc);
  } else if (*report) {
    const std::filesystem::path run = report_run;
    sl::ExperimentConfig config;
    sl::MaskSet masks;
    sl::Model model = load_run_model(run, config, masks);
    const auto layers = sl::layer_shapes(model);
    const auto rows = sl::density_report(masks, layers);
    sl::write_density_csv(std::cout, rows);
    std::printf("global_sparsity %.6f\n", sl::global_sparsity(masks));
    std::ifstream stored(run / "density.csv");
    if (stored) {
      std::ostringstream fresh;
      sl::write_density_csv(fresh, rows);
      std::stringstream disk;
      disk << stored.rdbuf();
      std::printf("density.csv %s\n", disk.str() == fresh.str() ? "consistent" : "MISMATCH");
      if (disk.str() != fresh.str()) return 1;
    }
    std::ifstream flops(run / "flops.json");
    if (flops) {
      std::stringstream ss;
      ss << flops.rdbuf();
      const sl::FlopsLedger ledger = sl::FlopsLedger::from_json(ss.str());
      std::printf("dense_pretrain_flops %.6e\nsparse_train_flops %.6e\nretrain_flops %.6e\ntotal_flops %.6e\n"
                  "final_params %zu\n",
                  ledger.phase(sl::FlopsPhase::dense_pretrain), ledger.phase(sl::FlopsPhase::sparse_train),
                  ledger.phase(sl::FlopsPhase::retrain), ledger.total(), ledger.final_params());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const sl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sl::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const sl::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
