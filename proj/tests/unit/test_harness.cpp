#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sparselab/checkpoint.hpp"
#include "sparselab/error.hpp"
#include "sparselab/experiment.hpp"
#include "sparselab/sweep.hpp"

using namespace sparselab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sparselab_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.synth.classes = 3;
  c.synth.per_class = 12;
  c.synth.height = c.synth.width = 4;
  c.synth_test_per_class = 5;
  c.channels = {3};
  c.epochs = 2;
  c.batch_size = 8;
  c.milestones = {};
  c.lr = 0.05;
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string error_of(const ExperimentConfig& c) {
  try {
    c.validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config text parsing") {
  std::istringstream in("# comment\nmethod = set\n\nsparsity = 0.9  # trailing\nepsilon = 8/255\nchannels = 4, 8\n");
  const auto kv = parse_config_text(in, "t.cfg");
  ExperimentConfig c;
  apply_config(c, kv);
  CHECK(c.method == Method::set);
  CHECK(c.sparsity == 0.9);
  CHECK(c.epsilon == 8.0 / 255.0);
  CHECK(c.channels == std::vector<std::size_t>{4, 8});

  std::istringstream bad("method = set\nbogus = 1\n");
  try {
    parse_config_text(bad, "t.cfg");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("t.cfg:2") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  std::istringstream noeq("method set\n");
  CHECK_THROWS_AS(parse_config_text(noeq), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "epochs", "-3"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "epsilon", "1/0"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "method", "magic"), ConfigError);
}

TEST_CASE("later sources override earlier ones") {
  ExperimentConfig c;
  std::istringstream file("epochs = 10\nlr = 0.2\n");
  apply_config(c, parse_config_text(file));
  set_config_value(c, "epochs", "3");
  CHECK(c.epochs == 3);
  CHECK(c.lr == 0.2);
}

TEST_CASE("validation names the offending field") {
  ExperimentConfig c = tiny_config();
  CHECK(error_of(c).empty());
  c.sparsity = 0.5;
  CHECK(error_of(c).find("sparsity") != std::string::npos);
  c.method = Method::gmp;
  CHECK(error_of(c).empty());
  c.sparsity = 1.0;
  CHECK(error_of(c).find("sparsity") != std::string::npos);
  c = tiny_config();
  c.hardness = Hardness::el2n;
  c.keep_frac = 0.0;
  CHECK(error_of(c).find("keep_frac") != std::string::npos);
  c = tiny_config();
  c.data_ratio = 1.5;
  CHECK(error_of(c).find("data_ratio") != std::string::npos);
  c = tiny_config();
  c.hardness = Hardness::corruption;
  c.severity = 7;
  CHECK(error_of(c).find("severity") != std::string::npos);
  c.hardness = Hardness::none;
  CHECK(error_of(c).empty());  // regime fields are only checked when the regime is active
  c = tiny_config();
  c.milestones = {1, 1};
  CHECK(error_of(c).find("milestones") != std::string::npos);
  c = tiny_config();
  c.hardness = Hardness::adversarial;
  c.epsilon = -0.1;
  CHECK(error_of(c).find("epsilon") != std::string::npos);
}

TEST_CASE("manifest round trip") {
  ExperimentConfig c = tiny_config();
  c.method = Method::omp_erk;
  c.sparsity = 0.875;
  c.hardness = Hardness::corruption;
  c.corruption = CorruptionKind::defocus_blur;
  c.alpha = 1.0 / 3.0;
  std::stringstream ss;
  write_manifest(ss, c);
  CHECK(ss.str().rfind("code_version = " + code_version() + "\n", 0) == 0);
  ExperimentConfig back;
  apply_config(back, parse_config_text(ss));
  for (const auto& key : config_keys()) CHECK(get_config_value(back, key) == get_config_value(c, key));
  CHECK(back.alpha == c.alpha);
}

TEST_CASE("metrics csv round trip") {
  std::vector<MetricsRecord> rows(2);
  rows[0].epoch = 1;
  rows[0].train_loss = 1.0 / 3.0;
  rows[0].test_clean_acc = 0.5;
  rows[0].cumulative_flops = 1.25e9;
  rows[1].epoch = 2;
  rows[1].test_adv_acc = 0.125;
  rows[1].global_sparsity = 0.9;
  std::stringstream ss;
  write_metrics_csv(ss, rows, false);
  CHECK(ss.str().rfind(
            "epoch,train_loss,train_acc,test_clean_acc,test_adv_acc,global_sparsity,cumulative_flops,wall_seconds\n",
            0) == 0);
  const auto back = read_metrics_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].train_loss == rows[0].train_loss);
  CHECK(back[0].cumulative_flops == rows[0].cumulative_flops);
  CHECK_FALSE(back[0].test_adv_acc.has_value());
  CHECK(back[1].test_adv_acc == 0.125);
  CHECK(back[1].global_sparsity == 0.9);
}

TEST_CASE("run directory contents and replay") {
  const fs::path dir = scratch("run");
  ExperimentConfig c = tiny_config();
  c.method = Method::set;
  c.sparsity = 0.6;
  c.update_interval = 1;
  c.epochs = 3;
  c.output = (dir / "a").string();
  const RunResult a = run_experiment(c);
  std::set<std::string> files;
  for (const auto& e : fs::directory_iterator(dir / "a")) files.insert(e.path().filename().string());
  CHECK(files == std::set<std::string>(std::begin(kRunFiles), std::end(kRunFiles)));

  c.output = (dir / "b").string();
  run_experiment(c);
  for (const char* f : {"metrics.csv", "density.csv", "flops.json", "masks.bin", "model.bin"}) {
    CHECK_MESSAGE(read_file(dir / "a" / f) == read_file(dir / "b" / f), f);
  }
  ExperimentConfig replay;
  apply_config(replay, parse_config_text(*std::make_unique<std::ifstream>(dir / "a" / "manifest.cfg")));
  CHECK(replay.method == Method::set);
  CHECK(get_config_value(replay, "sparsity") == get_config_value(c, "sparsity"));

  const MaskFile masks = read_mask_file(dir / "a" / "masks.bin");
  CHECK(masks.masks == a.pipeline.masks);
  std::ifstream density(dir / "a" / "density.csv");
  const auto rows = read_density_csv(density);
  std::size_t nz = 0;
  for (const auto& r : rows) nz += r.nonzeros;
  CHECK(nz == total_nonzeros(a.pipeline.masks));
  CHECK(a.pipeline.ledger.final_params() == nz + 3 + 3);  // plus the two bias vectors
  CHECK(a.final_metrics().epoch == 3);
  std::ifstream metrics(dir / "a" / "metrics.csv");
  const auto m = read_metrics_csv(metrics);
  CHECK(m.size() == 3);
  CHECK(read_file(dir / "a" / "metrics.csv").find(",\n") != std::string::npos);  // wall time left empty
  fs::remove_all(dir);
}

TEST_CASE("every method runs end to end") {
  for (Method m : kAllMethods) {
    ExperimentConfig c = tiny_config();
    c.method = m;
    c.sparsity = m == Method::dense ? 0.0 : 0.5;
    const RunResult r = run_experiment(c);
    const std::size_t expected_epochs = (m == Method::lth || m == Method::omp || m == Method::omp_erk) ? 4 : 2;
    CHECK_MESSAGE(r.pipeline.metrics.size() == expected_epochs, to_string(m));
    CHECK(std::abs(r.final_metrics().global_sparsity - c.sparsity) <= 0.01);
  }
}

TEST_CASE("hardness regimes prepare the expected data") {
  ExperimentConfig c = tiny_config();
  c.hardness = Hardness::el2n;
  c.keep_frac = 0.25;
  c.epochs = 1;
  const PreparedData el2n = prepare_data(c);
  CHECK(el2n.source_train_size == 36);
  CHECK(el2n.train.size() == 9);
  CHECK(el2n.scores.size() == 36);

  c = tiny_config();
  c.data_ratio = 0.5;
  CHECK(prepare_data(c).train.size() == 18);

  c = tiny_config();
  c.hardness = Hardness::corruption;
  c.severity = 4;
  const PreparedData cor = prepare_data(c);
  const PreparedData clean = prepare_data(tiny_config());
  CHECK(cor.train.images.storage() != clean.train.images.storage());
  CHECK(cor.test.images.storage() != clean.test.images.storage());
  CHECK(cor.train.labels == clean.train.labels);

  c = tiny_config();
  c.hardness = Hardness::adversarial;
  c.attack_steps = 2;
  c.eval_attack_steps = 2;
  const RunResult adv = run_experiment(c);
  CHECK(adv.final_metrics().test_adv_acc.has_value());
}

TEST_CASE("sweep cells and aggregation") {
  ExperimentConfig base = tiny_config();
  base.method = Method::gmp;
  base.sparsity = 0.5;
  SweepAxes axes;
  axes.sparsity = {0.5, 0.8};
  axes.data_ratio = {0.5, 1.0};
  const auto cells = sweep_cells(base, axes, {1, 2, 3});
  REQUIRE(cells.size() == 12);
  CHECK(cells[0].seed == 1);
  CHECK(cells[1].seed == 2);
  CHECK(cells[0].name == "s0.5_r0.5_v3_seed1");
  CHECK(cells[3].data_ratio == 1.0);
  const ExperimentConfig cc = cell_config(base, cells[4], "/tmp/sw");
  CHECK(cc.seed == 2);
  CHECK(cc.output == "/tmp/sw/" + cells[4].name);

  std::vector<CellOutcome> outs;
  for (std::size_t g = 0; g < 5; ++g)
    for (std::size_t s = 0; s < 3; ++s) {
      CellOutcome o;
      o.cell.sparsity = 0.1 * static_cast<double>(g);
      o.clean_acc = 0.5 + 0.1 * static_cast<double>(s);
      outs.push_back(o);
    }
  const auto rows = aggregate(outs);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].runs == 3);
  CHECK(rows[0].clean_mean == doctest::Approx(0.6));
  CHECK(rows[0].clean_std == doctest::Approx(0.1));
  CHECK(aggregate({outs[0]})[0].clean_std == 0.0);
}

TEST_CASE("sweep writes runs, aggregate and heatmap") {
  const fs::path dir = scratch("sweep");
  ExperimentConfig base = tiny_config();
  base.method = Method::random;
  base.sparsity = 0.5;
  base.epochs = 1;
  base.output = dir.string();
  SweepAxes axes;
  axes.sparsity = {0.5, 0.7};
  axes.data_ratio = {0.5, 1.0};
  const SweepResult serial = run_sweep(base, axes, {1}, 1);
  CHECK(serial.rows.size() == 4);
  CHECK(fs::exists(dir / "aggregate.csv"));
  CHECK(fs::exists(dir / "heatmap.csv"));
  const std::string heat = read_file(dir / "heatmap.csv");
  CHECK(heat.rfind("sparsity,0.5,1\n", 0) == 0);
  CHECK(std::count(heat.begin(), heat.end(), '\n') == 3);
  const std::string first = read_file(dir / serial.outcomes[0].cell.name / "metrics.csv");

  const fs::path dir2 = scratch("sweep_jobs");
  base.output = dir2.string();
  const SweepResult forked = run_sweep(base, axes, {1}, 2);
  REQUIRE(forked.outcomes.size() == serial.outcomes.size());
  for (std::size_t i = 0; i < forked.outcomes.size(); ++i) CHECK(forked.outcomes[i].clean_acc == serial.outcomes[i].clean_acc);
  CHECK(read_file(dir2 / serial.outcomes[0].cell.name / "metrics.csv") == first);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}
