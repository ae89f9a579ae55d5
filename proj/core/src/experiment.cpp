#include "sparselab/experiment.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sparselab/checkpoint.hpp"
#include "sparselab/el2n.hpp"
#include "sparselab/error.hpp"
#include "sparselab/sparsifiers.hpp"

namespace sparselab {
namespace {

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::optional<double> parse_optional_real(const std::string& field) {
  if (field.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) throw InputError("bad metrics field '" + field + "'");
  return v;
}

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  body(out);
  if (!out) throw IoError("failed writing " + path.string());
}

std::size_t bias_count(const Model& model) {
  std::size_t n = 0;
  for (const auto& b : model.biases()) n += b.numel();
  return n;
}

void write_run_dir(const std::filesystem::path& dir, const ExperimentConfig& config, RunResult& run) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  write_file(dir / "manifest.cfg", [&](std::ostream& os) { write_manifest(os, config); });
  write_file(dir / "metrics.csv",
             [&](std::ostream& os) { write_metrics_csv(os, run.pipeline.metrics, config.log_wall_time); });
  write_file(dir / "density.csv", [&](std::ostream& os) { write_density_csv(os, run.density); });
  write_file(dir / "flops.json", [&](std::ostream& os) { os << run.pipeline.ledger.to_json() << "\n"; });
  MaskFile masks;
  for (const auto& l : run.layers) masks.names.push_back(l.name);
  masks.masks = run.pipeline.masks;
  write_mask_file(dir / "masks.bin", masks);
  save_model_file(dir / "model.bin", *run.model);
}

}  // namespace

DatasetPair load_source_data(const ExperimentConfig& config) {
  if (!config.data_dir.empty()) return load_dataset_dir(config.data_dir);
  SyntheticSpec test_spec = config.synth;
  test_spec.per_class = config.synth_test_per_class;
  return {make_synthetic(config.synth, config.data_seed, "train"), make_synthetic(test_spec, config.data_seed, "test")};
}

Model build_model(const ExperimentConfig& config, const Dataset& data) {
  Model model(model_spec_for(config, data.channels(), data.height(), data.width(), data.classes));
  he_initialize(model, config.seed);
  return model;
}

std::vector<double> compute_el2n_scores(const ExperimentConfig& config, const Dataset& train) {
  TrainSchedule schedule = config.schedule();
  if (config.el2n_epochs != 0) {
    schedule.epochs = config.el2n_epochs;
    std::erase_if(schedule.milestones, [&](std::size_t m) { return m >= schedule.epochs; });
  }
  std::vector<Model> models;
  for (std::size_t k = 0; k < config.el2n_models; ++k) {
    const std::uint64_t seed = derive_seed(derive_seed(config.seed, "el2n-scorer"), k);
    Model model(model_spec_for(config, train.channels(), train.height(), train.width(), train.classes));
    he_initialize(model, seed);
    MaskSet masks = full_masks(model.weights());
    NoSparsification dense;
    FlopsLedger ledger;
    PhaseOptions options;
    options.phase = FlopsPhase::dense_pretrain;
    options.seed = seed;
    train_phase(model, masks, train, schedule, dense, ledger, options);
    models.push_back(std::move(model));
  }
  std::vector<Model*> ptrs;
  for (auto& m : models) ptrs.push_back(&m);
  return score_values(el2n_score(ptrs, train), train.size());
}

PreparedData prepare_data(const ExperimentConfig& config) {
  DatasetPair source = load_source_data(config);
  PreparedData out;
  out.source_train_size = source.train.size();
  Dataset train = std::move(source.train);
  Dataset test = std::move(source.test);
  switch (config.hardness) {
    case Hardness::none:
    case Hardness::adversarial:
      break;
    case Hardness::el2n: {
      if (!config.scores_file.empty()) {
        std::ifstream in(config.scores_file);
        if (!in) throw IoError("cannot open scores file " + config.scores_file);
        out.scores = score_values(read_score_csv(in), train.size());
      } else {
        out.scores = compute_el2n_scores(config, train);
      }
      train = filter_hard(train, out.scores, config.keep_frac);
      break;
    }
    case Hardness::corruption:
      train = corrupt(train, {config.corruption, config.severity, derive_seed(config.data_seed, "corrupt-train")});
      test = corrupt(test, {config.corruption, config.effective_test_severity(),
                            derive_seed(config.data_seed, "corrupt-test")});
      break;
  }
  if (config.data_ratio < 1.0) train = subsample(train, config.data_ratio, derive_seed(config.seed, "subsample"));
  out.train = std::move(train);
  out.test = std::move(test);
  return out;
}

Dataset prepare_test_data(const ExperimentConfig& config) {
  Dataset test = load_source_data(config).test;
  if (config.hardness == Hardness::corruption) {
    test = corrupt(test, {config.corruption, config.effective_test_severity(),
                          derive_seed(config.data_seed, "corrupt-test")});
  }
  return test;
}

RunResult run_experiment(const ExperimentConfig& config, const RunObserver* observer) {
  config.validate();
  return run_experiment(config, prepare_data(config), observer);
}

RunResult run_experiment(const ExperimentConfig& config, const PreparedData& data, const RunObserver* observer) {
  config.validate();
  RunResult run;
  run.model.emplace(build_model(config, data.train));
  Model& model = *run.model;
  run.layers = layer_shapes(model);
  run.train_size = data.train.size();

  PipelineOptions options;
  options.schedule = config.schedule();
  options.seed = config.seed;
  options.test = &data.test;
  if (config.hardness == Hardness::adversarial) {
    options.train_attack = config.train_attack();
    options.eval_attack = config.eval_attack();
  }
  if (observer) {
    options.on_phase_start = observer->on_phase_start;
    options.on_epoch_end = observer->on_epoch_end;
  }

  const double s = config.sparsity;
  try {
    switch (config.method) {
      case Method::dense: {
        NoSparsification hooks;
        run.pipeline = single_phase_pipeline(model, data.train, hooks, options, FlopsPhase::dense_pretrain);
        break;
      }
      case Method::gmp: {
        GmpController hooks(s, config.gmp_t0, config.gmp_t1, config.update_interval);
        run.pipeline = single_phase_pipeline(model, data.train, hooks, options);
        break;
      }
      case Method::set: {
        SetController hooks(s, config.seed, config.set_zeta, config.update_interval, config.set_stop);
        run.pipeline = single_phase_pipeline(model, data.train, hooks, options);
        for (const auto& ev : hooks.events()) {
          if (ev.skipped_dense) {
            std::clog << "set: layer " << run.layers[ev.layer].name << " is fully dense at epoch " << ev.epoch
                      << "; regrowth skipped\n";
          }
        }
        break;
      }
      case Method::snip: {
        SnipController hooks(s, config.snip_batch);
        run.pipeline = single_phase_pipeline(model, data.train, hooks, options);
        break;
      }
      case Method::random:
      case Method::uniform: {
        auto hooks = fixed_random_controller(config.method == Method::random ? PlanKind::erk : PlanKind::uniform, s,
                                             run.layers, config.seed);
        run.pipeline = single_phase_pipeline(model, data.train, *hooks, options);
        break;
      }
      case Method::lth:
        run.pipeline = lth_pipeline(model, data.train, s, options);
        break;
      case Method::omp:
        run.pipeline = omp_pipeline(model, data.train, s, options);
        break;
      case Method::omp_erk: {
        const DensityPlan plan = solve_erk_plan(run.layers, 1.0 - s);
        run.pipeline = omp_pipeline(model, data.train, s, options, &plan);
        break;
      }
    }
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("run aborted (method ") + to_string(config.method) + ", seed " +
                         std::to_string(config.seed) + ", lr " + format_real(config.lr) + "): " + e.what());
  }

  run.pipeline.ledger.set_final_params(total_nonzeros(run.pipeline.masks) + bias_count(model));
  run.density = density_report(run.pipeline.masks, run.layers);
  if (!config.output.empty()) {
    run.run_dir = config.output;
    write_run_dir(run.run_dir, config, run);
  }
  return run;
}

void write_metrics_csv(std::ostream& os, std::span<const MetricsRecord> records, bool include_wall_time) {
  os << "epoch,train_loss,train_acc,test_clean_acc,test_adv_acc,global_sparsity,cumulative_flops,wall_seconds\n";
  for (const auto& r : records) {
    os << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.train_acc) << ','
       << format_real(r.test_clean_acc) << ',' << (r.test_adv_acc ? format_real(*r.test_adv_acc) : "") << ','
       << format_real(r.global_sparsity) << ',' << format_real(r.cumulative_flops) << ','
       << (include_wall_time ? format_real(r.wall_seconds) : "") << '\n';
  }
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("epoch,", 0) != 0) throw InputError("metrics.csv: missing header");
  std::vector<MetricsRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw InputError("metrics.csv: expected 8 columns in '" + line + "'");
    MetricsRecord r;
    r.epoch = static_cast<std::size_t>(parse_optional_real(f[0]).value_or(0.0));
    r.train_loss = parse_optional_real(f[1]).value_or(0.0);
    r.train_acc = parse_optional_real(f[2]).value_or(0.0);
    r.test_clean_acc = parse_optional_real(f[3]).value_or(0.0);
    r.test_adv_acc = parse_optional_real(f[4]);
    r.global_sparsity = parse_optional_real(f[5]).value_or(0.0);
    r.cumulative_flops = parse_optional_real(f[6]).value_or(0.0);
    r.wall_seconds = parse_optional_real(f[7]).value_or(0.0);
    out.push_back(r);
  }
  return out;
}

}  // namespace sparselab
