// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,5,9] [--known-failure 7] [--workdir DIR] [--table FILE]
//
// The exit status is 0 when every selected criterion passes or is listed
// with --known-failure; listed criteria still print FAIL when they fail.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "op_check.hpp"
#include "oracles.hpp"
#include "sparselab/density.hpp"
#include "sparselab/el2n.hpp"
#include "sparselab/experiment.hpp"
#include "sparselab/gradcheck.hpp"
#include "sparselab/pgd.hpp"
#include "sparselab/rng.hpp"

using namespace sparselab;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances ------------------------------------------------------

constexpr double kGradRelTol = 1e-4;         // criterion 1
constexpr double kGradStep = 1e-5;           // criterion 1
constexpr std::size_t kGradTrials = 10;      // criterion 1
constexpr double kErkHandTol = 1e-9;         // criterion 3
constexpr double kErkOracleTol = 1e-6;       // criterion 3
constexpr double kPgdSlack = 0x1p-40;        // criterion 5
constexpr double kEl2nOracleTol = 1e-6;      // criterion 6
constexpr double kEl2nClosedTol = 1e-12;     // criterion 6
constexpr double kLedgerApproxRel = 1e-9;    // criterion 7: OMP vs dense + retrain
constexpr double kSparseLedgerRel = 0.10;    // criterion 7: SET vs SNIP
constexpr double kHardTrendTol = 0.02;       // criterion 8: SET/SNIP vs dense, top-50% EL2N
constexpr double kRatioTrendTol = 0.01;      // criterion 8: SET vs dense, data ratio 0.3

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path g_workdir;
std::string g_table_path;
std::map<int, bool> g_results;

fs::path fresh_dir(const std::string& name) {
  const fs::path d = g_workdir / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

ExperimentConfig small_config(std::size_t per_class, std::size_t epochs) {
  ExperimentConfig c;
  c.synth.per_class = per_class;
  c.synth_test_per_class = std::max<std::size_t>(per_class / 4, 10);
  c.epochs = epochs;
  c.milestones.clear();
  for (std::size_t m : {epochs / 2, (3 * epochs) / 4})
    if (m > 0 && m < epochs && (c.milestones.empty() || m > c.milestones.back())) c.milestones.push_back(m);
  c.batch_size = 64;
  return c;
}

double denominator(const std::vector<LayerSpec>& layers) {
  double total = 0.0;
  for (const auto& l : layers) total += static_cast<double>(l.param_count());
  return total;
}

// ---- 1: gradient correctness ----------------------------------------------

Outcome criterion_gradients() {
  if (sizeof(Scalar) != 8) return {false, "engine built with 32-bit scalars; the check requires 64-bit"};
  std::mt19937_64 rng(20261018);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  std::map<std::string, double> worst;
  std::size_t checks = 0;
  auto record = [&](const std::string& op, const GradCheckReport& r) {
    worst[op] = std::max(worst[op], r.max_relative_error);
    checks += r.checked;
  };
  for (std::uint64_t trial = 0; trial < kGradTrials; ++trial) {
    const std::size_t batch = pick(1, 4);
    {
      const std::size_t in = pick(2, 8), out = pick(2, 6);
      std::vector<Tensor> ops{oracle::random_tensor({batch, in}, 10 + trial), oracle::random_tensor({out, in}, 20 + trial),
                              oracle::random_tensor({out}, 30 + trial)};
      LayerMask m = LayerMask::ones({out, in});
      for (std::size_t i = 0; i < m.size(); i += 3) m.set(i, false);
      record("linear", oracle::check_op(ops, [&](Tape&, std::vector<Var>& v) { return linear(v[0], v[1], v[2], &m); },
                                        trial));
    }
    {
      const std::size_t cin = pick(1, 3), cout = pick(1, 4), k = 2 * pick(0, 2) + 1;
      const std::size_t pad = pick(0, k / 2), stride = pick(1, 2);
      const std::size_t hw = k - 2 * pad + stride * pick(1, 3);  // integral output size
      std::vector<Tensor> ops{oracle::random_tensor({batch, cin, hw, hw}, 40 + trial),
                              oracle::random_tensor({cout, cin, k, k}, 50 + trial), oracle::random_tensor({cout}, 60 + trial)};
      LayerMask m = LayerMask::ones({cout, cin, k, k});
      m.set(0, false);
      record("conv2d", oracle::check_op(
                           ops, [&](Tape&, std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], stride, pad, &m); },
                           trial));
    }
    {
      const std::size_t c = pick(1, 3), hw = 2 * pick(2, 4);
      std::vector<Tensor> ops{oracle::random_tensor({batch, c, hw, hw}, 70 + trial)};
      record("relu", oracle::check_op(ops, [](Tape&, std::vector<Var>& v) { return relu(v[0]); }, trial));
      record("max_pool2d", oracle::check_op(ops, [](Tape&, std::vector<Var>& v) { return max_pool2d(v[0], 2, 2); }, trial));
      record("avg_pool2d", oracle::check_op(ops, [](Tape&, std::vector<Var>& v) { return avg_pool2d(v[0], 2, 2); }, trial));
      record("flatten", oracle::check_op(ops, [](Tape&, std::vector<Var>& v) { return flatten(v[0]); }, trial));
    }
    {
      std::vector<Tensor> ops{oracle::random_tensor({batch, pick(2, 10)}, 80 + trial, -3.0, 3.0)};
      record("softmax_cross_entropy", oracle::check_op(ops, [](Tape&, std::vector<Var>& v) { return v[0]; }, trial));
    }
    {
      const std::size_t hw = 2 * pick(2, 4), classes = pick(2, 5);
      std::vector<std::size_t> channels;
      for (std::size_t i = 0, n = pick(1, 2); i < n; ++i) channels.push_back(pick(1, 4));
      Model model = build_miniconvnet(1, hw, hw, channels, 3, classes, 90 + trial);
      const MaskSet masks = random_mask_from_plan(solve_erk_plan(layer_shapes(model), 0.7), layer_shapes(model), trial);
      model.apply_masks(masks);
      std::vector<int> labels(batch);
      for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>((i + trial) % classes);
      GradCheckOptions opt;
      opt.step = kGradStep;
      opt.seed = trial;
      record("miniconvnet", gradient_check(model, &masks, oracle::random_tensor({batch, 1, hw, hw}, 100 + trial, 0.0, 1.0),
                                           labels, opt));
    }
  }
  double max_err = 0.0;
  std::string detail;
  for (const auto& [op, e] : worst) {
    max_err = std::max(max_err, e);
    detail += op + "=" + fmt("%.2e", e) + " ";
  }
  return {max_err < kGradRelTol && worst.size() == 8,
          "max rel err " + fmt("%.2e", max_err) + " over " + std::to_string(checks) + " probes (" + detail + ")"};
}

// ---- 2: sparsity bookkeeping ----------------------------------------------

Outcome criterion_bookkeeping() {
  const Method methods[] = {Method::gmp, Method::set, Method::snip, Method::lth,
                            Method::omp, Method::omp_erk, Method::random, Method::uniform};
  ExperimentConfig base = small_config(30, 5);
  base.update_interval = 1;
  const PreparedData data = prepare_data(base);
  double worst_ratio = 0.0;
  std::size_t runs = 0, bad = 0;
  std::string failures;
  for (Method m : methods) {
    for (double s : {0.1, 0.5, 0.9}) {
      ExperimentConfig c = base;
      c.method = m;
      c.sparsity = s;
      const RunResult r = run_experiment(c, data);
      const double bound = 1.0 / denominator(r.layers);
      const double got = global_sparsity(r.pipeline.masks);
      const double err = std::abs(got - s);
      worst_ratio = std::max(worst_ratio, err / bound);
      ++runs;
      if (err > bound || r.final_metrics().global_sparsity != got) {
        ++bad;
        failures += std::string(to_string(m)) + "@" + fmt("%g", s) + " ";
      }
    }
  }
  return {bad == 0, std::to_string(runs) + " runs, worst |s - target| = " + fmt("%.3f", worst_ratio) +
                        " x 1/sum(d_l)" + (bad ? "; violations: " + failures : "")};
}

// ---- 3: ERK solver ---------------------------------------------------------

LayerSpec lin(std::size_t in, std::size_t out) {
  LayerSpec l;
  l.name = "fc";
  l.kind = LayerKind::linear;
  l.fan_in = in;
  l.fan_out = out;
  return l;
}

Outcome criterion_erk() {
  const std::vector<LayerSpec> two{lin(4, 4), lin(4, 2)};
  const DensityPlan hand = solve_erk_plan(two, 0.5);
  const double hand_err = std::max(std::abs(hand.densities[0] - 3.0 / 7.0), std::abs(hand.densities[1] - 9.0 / 14.0));

  std::mt19937_64 rng(314159);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  double oracle_err = 0.0;
  for (int set = 0; set < 20; ++set) {
    std::vector<LayerSpec> layers;
    for (std::size_t i = 0, n = pick(2, 7); i < n; ++i) {
      if (pick(0, 1)) {
        LayerSpec l;
        l.name = "conv";
        l.kind = LayerKind::conv;
        l.fan_in = pick(1, 128);
        l.fan_out = pick(1, 128);
        l.kernel_h = l.kernel_w = 2 * pick(0, 3) + 1;
        l.out_h = l.out_w = 8;
        layers.push_back(l);
      } else {
        layers.push_back(lin(pick(1, 1024), pick(1, 512)));
      }
    }
    const double d = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    std::vector<double> raw, params;
    for (const auto& l : layers) {
      raw.push_back(erk_raw_scale(l));
      params.push_back(static_cast<double>(l.param_count()));
    }
    const auto ref = oracle::erk_by_bisection(raw, params, d);
    const DensityPlan p = solve_erk_plan(layers, d);
    for (std::size_t l = 0; l < layers.size(); ++l) oracle_err = std::max(oracle_err, std::abs(p.densities[l] - ref[l]));
  }
  return {hand_err <= kErkHandTol && oracle_err <= kErkOracleTol,
          "hand example err " + fmt("%.1e", hand_err) + ", bisection oracle max err " + fmt("%.1e", oracle_err) +
              " over 20 layer sets"};
}

// ---- 4: per-epoch lifecycle invariants --------------------------------------

struct InvariantWatch {
  std::size_t epochs_checked = 0;
  std::size_t violations = 0;
  std::size_t topology_changes = 0;
  std::vector<std::string> notes;

  void fail(const std::string& what) {
    ++violations;
    if (notes.size() < 5) notes.push_back(what);
  }
};

bool masked_weights_zero(Model& model, const MaskSet& masks) {
  for (std::size_t l = 0; l < masks.size(); ++l)
    for (std::size_t i = 0; i < masks[l].size(); ++i)
      if (!masks[l][i] && model.weights()[l][i] != 0) return false;
  return true;
}

Outcome criterion_lifecycle() {
  ExperimentConfig base = small_config(40, 40);
  base.milestones = {20, 30};
  base.sparsity = 0.8;
  const PreparedData data = prepare_data(base);
  InvariantWatch w;
  for (Method m : {Method::set, Method::gmp, Method::snip, Method::random, Method::uniform, Method::lth, Method::omp}) {
    ExperimentConfig c = base;
    c.method = m;
    const std::string tag = to_string(m);
    MaskSet phase_masks, last_masks;
    std::vector<std::size_t> phase_counts;
    std::vector<Tensor> initial;
    double last_sparsity = -1.0;
    RunObserver obs;
    obs.on_phase_start = [&](const TrainContext& ctx) {
      phase_masks = ctx.masks;
      last_masks = ctx.masks;
      phase_counts.clear();
      for (const auto& mk : ctx.masks) phase_counts.push_back(mk.nonzero_count());
      if (ctx.phase == FlopsPhase::dense_pretrain || (ctx.phase == FlopsPhase::sparse_train && initial.empty()))
        initial = snapshot_parameters(ctx.model);
      if (m == Method::lth && ctx.phase == FlopsPhase::retrain) {
        // surviving weights and all biases rewound to their initial values
        const auto now = snapshot_parameters(ctx.model);
        for (std::size_t p = 0; p < now.size(); ++p) {
          const bool weight = p % 2 == 0;
          for (std::size_t i = 0; i < now[p].numel(); ++i) {
            const Scalar expect = (weight && !ctx.masks[p / 2][i]) ? Scalar{0} : initial[p][i];
            if (now[p][i] != expect) {
              w.fail("lth rewind mismatch");
              return;
            }
          }
        }
      }
    };
    obs.on_epoch_end = [&](const TrainContext& ctx, const MetricsRecord& rec) {
      ++w.epochs_checked;
      if (!masked_weights_zero(ctx.model, ctx.masks)) w.fail(tag + ": masked weight nonzero at epoch " + std::to_string(rec.epoch));
      if (rec.global_sparsity != global_sparsity(ctx.masks)) w.fail(tag + ": reported sparsity differs from masks");
      const bool fixed_phase = m == Method::snip || m == Method::random || m == Method::uniform ||
                               ctx.phase == FlopsPhase::retrain;
      if (fixed_phase && !(ctx.masks == phase_masks)) w.fail(tag + ": fixed topology changed at epoch " + std::to_string(rec.epoch));
      if (m == Method::set) {
        for (std::size_t l = 0; l < ctx.masks.size(); ++l)
          if (ctx.masks[l].nonzero_count() != phase_counts[l]) w.fail("set: layer count not conserved");
        if (!(ctx.masks == last_masks)) ++w.topology_changes;
      }
      if (m == Method::gmp) {
        if (rec.global_sparsity < last_sparsity) w.fail("gmp: sparsity decreased at epoch " + std::to_string(rec.epoch));
        for (std::size_t l = 0; l < ctx.masks.size(); ++l)
          for (std::size_t i = 0; i < ctx.masks[l].size(); ++i)
            if (ctx.masks[l][i] && !last_masks[l][i]) {
              w.fail("gmp: pruned weight revived");
              l = ctx.masks.size() - 1;
              break;
            }
      }
      last_sparsity = rec.global_sparsity;
      last_masks = ctx.masks;
    };
    const RunResult r = run_experiment(c, data, &obs);
    if (m == Method::gmp && std::abs(global_sparsity(r.pipeline.masks) - 0.8) > 1.0 / denominator(r.layers))
      w.fail("gmp: final sparsity off target");
  }
  if (w.topology_changes == 0) w.fail("set: topology never changed, conservation check is vacuous");
  std::string detail = std::to_string(w.epochs_checked) + " epochs checked, " + std::to_string(w.violations) +
                       " violations, SET topology changed in " + std::to_string(w.topology_changes) + " epochs";
  for (const auto& n : w.notes) detail += "; " + n;
  return {w.violations == 0, detail};
}

// ---- 5: PGD contract -------------------------------------------------------

Outcome criterion_pgd() {
  ExperimentConfig c = small_config(100, 2);
  const PreparedData data = prepare_data(c);  // 1,000 samples
  const RunResult trained = run_experiment(c, data);
  Model model = *trained.model;
  AttackConfig atk;  // eps 8/255, alpha 2/255
  atk.steps = 20;
  const auto eps = static_cast<Scalar>(atk.epsilon);
  const double bound = atk.epsilon + kPgdSlack;

  std::size_t attacked = 0, bound_bad = 0, box_bad = 0, start_bad = 0;
  for (std::size_t begin = 0; begin < data.train.size(); begin += 100) {
    std::vector<std::size_t> idx(100);
    std::iota(idx.begin(), idx.end(), begin);
    const Tensor x = data.train.gather_images(idx);
    const auto y = data.train.gather_labels(idx);
    const std::uint64_t seed = derive_seed(77, begin);
    const Perturbation p = pgd_attack(model, nullptr, x, y, atk, seed);
    const Tensor adv = perturbed(x, p);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      if (!(std::abs(static_cast<double>(p.delta[i])) <= bound)) ++bound_bad;
      if (!(adv[i] >= 0 && adv[i] <= 1)) ++box_bad;
    }
    // zero steps: the projected random start, rederived from the seed
    AttackConfig none = atk;
    none.steps = 0;
    const Perturbation p0 = pgd_attack(model, nullptr, x, y, none, seed);
    Rng rng = make_rng(seed, "pgd-start");
    std::uniform_real_distribution<double> u(-atk.epsilon, atk.epsilon);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      Scalar d = std::clamp(static_cast<Scalar>(u(rng)), -eps, eps);
      d = std::clamp(d, -x[i], Scalar{1} - x[i]);
      if (p0.delta[i] != d) ++start_bad;
    }
    attacked += idx.size();
  }

  // hand-iterated example with a fixed gradient sign pattern (+, -, +, 0)
  const Tensor x({1, 4}, std::vector<Scalar>{0.5, 0.02, 0.99, 0.3});
  const Tensor g({1, 4}, std::vector<Scalar>{0.7, -2.0, 1e-3, 0.0});
  AttackConfig hand;
  hand.random_start = false;
  const auto alpha = static_cast<Scalar>(hand.alpha);
  hand.steps = 1;
  const Perturbation one = pgd_attack([&](const Tensor&) { return g; }, x, hand, 0);
  hand.steps = 5;
  const Perturbation five = pgd_attack([&](const Tensor&) { return g; }, x, hand, 0);
  const std::vector<Scalar> want1{alpha, -alpha, alpha, 0};
  const std::vector<Scalar> want5{eps, -x[1], Scalar{1} - x[2], 0};
  const bool hand_ok = one.delta.storage() == want1 && five.delta.storage() == want5;

  return {bound_bad == 0 && box_bad == 0 && start_bad == 0 && hand_ok && attacked >= 1000,
          std::to_string(attacked) + " samples attacked: " + std::to_string(bound_bad) + " budget, " +
              std::to_string(box_bad) + " box, " + std::to_string(start_bad) + " zero-step mismatches; hand example " +
              (hand_ok ? "exact" : "MISMATCH")};
}

// ---- 6: EL2N oracle --------------------------------------------------------

Outcome criterion_el2n() {
  ExperimentConfig c = small_config(100, 2);
  const PreparedData data = prepare_data(c);
  std::vector<Model> models;
  for (std::uint64_t s : {5, 6}) {
    ExperimentConfig cs = c;
    cs.seed = s;
    models.push_back(*run_experiment(cs, data).model);
  }
  std::vector<Model*> ptrs{&models[0], &models[1]};
  const auto scores = el2n_score(ptrs, data.train);
  const Tensor la = models[0].predict(data.train.images), lb = models[1].predict(data.train.images);
  const std::size_t classes = data.train.classes;
  double worst = 0.0;
  for (std::size_t n = 0; n < data.train.size(); ++n) {
    std::vector<double> ra(classes), rb(classes);
    for (std::size_t k = 0; k < classes; ++k) {
      ra[k] = la[n * classes + k];
      rb[k] = lb[n * classes + k];
    }
    const double ref =
        0.5 * (oracle::el2n_reference(ra, data.train.labels[n]) + oracle::el2n_reference(rb, data.train.labels[n]));
    worst = std::max(worst, std::abs(ref - scores[n].el2n));
  }

  // closed forms through the scoring path: zero weights give uniform softmax,
  // a dominant bias gives a one-hot prediction
  Model flat = build_mlp(data.train.image_numel(), {}, classes, 1);
  for (auto& w : flat.weights()) w.fill(0);
  const Dataset& flat_data = data.train;
  std::vector<Model*> flat_ptr{&flat};
  const auto uniform = el2n_score(flat_ptr, flat_data);
  const double expect_uniform = std::sqrt(static_cast<double>(classes - 1) / static_cast<double>(classes));
  double uniform_err = 0.0;
  for (const auto& s : uniform) uniform_err = std::max(uniform_err, std::abs(s.el2n - expect_uniform));

  flat.biases()[0][0] = 1000;
  std::vector<std::size_t> zeros;
  for (std::size_t n = 0; n < flat_data.size(); ++n)
    if (flat_data.labels[n] == 0) zeros.push_back(n);
  const Dataset class0 = flat_data.select(zeros);
  double perfect_err = 0.0;
  for (const auto& s : el2n_score(flat_ptr, class0)) perfect_err = std::max(perfect_err, std::abs(s.el2n));

  return {worst <= kEl2nOracleTol && uniform_err <= kEl2nClosedTol && perfect_err <= kEl2nClosedTol &&
              scores.size() >= 1000,
          std::to_string(scores.size()) + " samples, oracle max err " + fmt("%.1e", worst) + "; uniform err " +
              fmt("%.1e", uniform_err) + ", perfect err " + fmt("%.1e", perfect_err)};
}

// ---- 7: FLOPs ledger ordering ----------------------------------------------

Outcome criterion_ledger() {
  ExperimentConfig base = small_config(30, 6);
  base.sparsity = 0.8;
  const PreparedData data = prepare_data(base);
  auto total = [&](Method m, double s) {
    ExperimentConfig c = base;
    c.method = m;
    c.sparsity = s;
    return run_experiment(c, data).pipeline.ledger;
  };
  const FlopsLedger lth = total(Method::lth, 0.8), omp = total(Method::omp, 0.8), dense = total(Method::dense, 0.0),
                    set = total(Method::set, 0.8), snip = total(Method::snip, 0.8);
  const double dense_plus_retrain = dense.total() + omp.phase(FlopsPhase::retrain);
  const bool lth_gt_omp = lth.total() > omp.total();
  const bool omp_approx = std::abs(omp.total() - dense_plus_retrain) <= kLedgerApproxRel * dense_plus_retrain;
  const bool gt_set = dense_plus_retrain > set.total();
  const bool set_approx = std::abs(set.total() - snip.total()) <= kSparseLedgerRel * std::max(set.total(), snip.total());
  std::string detail = "LTH " + fmt("%.4e", lth.total()) + (lth_gt_omp ? " > " : " NOT > ") + "OMP " +
                       fmt("%.4e", omp.total()) + (omp_approx ? " ~ " : " !~ ") + "dense+retrain " +
                       fmt("%.4e", dense_plus_retrain) + (gt_set ? " > " : " NOT > ") + "SET " +
                       fmt("%.4e", set.total()) + (set_approx ? " ~ " : " !~ ") + "SNIP " + fmt("%.4e", snip.total());
  if (!lth_gt_omp && lth.total() == omp.total())
    detail += " (LTH and OMP prune the same trained weights to the same masks, so their ledgers are identical)";
  return {lth_gt_omp && omp_approx && gt_set && set_approx, detail};
}

// ---- 8: desk-scale trend ---------------------------------------------------

Outcome criterion_trend() {
  struct Row {
    std::uint64_t seed;
    double hard_dense, hard_set, hard_snip, ratio_dense, ratio_set;
  };
  std::vector<Row> rows;
  for (std::uint64_t seed : kSeeds) {
    ExperimentConfig c;  // 10 classes x 800, MiniConvNet, 40 epochs
    c.seed = seed;
    c.hardness = Hardness::el2n;
    c.keep_frac = 0.5;
    DatasetPair source = load_source_data(c);
    PreparedData hard;
    hard.source_train_size = source.train.size();
    hard.scores = compute_el2n_scores(c, source.train);
    hard.train = filter_hard(source.train, hard.scores, c.keep_frac);
    hard.test = source.test;
    auto acc = [&](ExperimentConfig cfg, Method m, double s, const PreparedData& d) {
      cfg.method = m;
      cfg.sparsity = s;
      return run_experiment(cfg, d).final_metrics().test_clean_acc;
    };
    Row r{seed, acc(c, Method::dense, 0.0, hard), acc(c, Method::set, 0.5, hard), acc(c, Method::snip, 0.5, hard), 0, 0};

    ExperimentConfig rc;
    rc.seed = seed;
    rc.data_ratio = 0.3;
    const PreparedData ratio = prepare_data(rc);
    r.ratio_dense = acc(rc, Method::dense, 0.0, ratio);
    r.ratio_set = acc(rc, Method::set, 0.8, ratio);
    rows.push_back(r);
    std::cout << "  criterion 8 seed " << seed << " done" << std::endl;
  }
  Row mean{0, 0, 0, 0, 0, 0};
  for (const auto& r : rows) {
    mean.hard_dense += r.hard_dense / rows.size();
    mean.hard_set += r.hard_set / rows.size();
    mean.hard_snip += r.hard_snip / rows.size();
    mean.ratio_dense += r.ratio_dense / rows.size();
    mean.ratio_set += r.ratio_set / rows.size();
  }
  std::ostringstream table;
  table << "seed,hard50_dense,hard50_set_s0.5,hard50_snip_s0.5,ratio0.3_dense,ratio0.3_set_s0.8\n";
  auto line = [&](const std::string& label, const Row& r) {
    table << label << ',' << fmt("%.4f", r.hard_dense) << ',' << fmt("%.4f", r.hard_set) << ','
          << fmt("%.4f", r.hard_snip) << ',' << fmt("%.4f", r.ratio_dense) << ',' << fmt("%.4f", r.ratio_set) << '\n';
  };
  for (const auto& r : rows) line(std::to_string(r.seed), r);
  line("mean", mean);
  std::cout << table.str();
  if (!g_table_path.empty()) std::ofstream(g_table_path) << table.str();

  const bool set_ok = mean.hard_set >= mean.hard_dense - kHardTrendTol;
  const bool snip_ok = mean.hard_snip >= mean.hard_dense - kHardTrendTol;
  const bool ratio_ok = mean.ratio_set >= mean.ratio_dense - kRatioTrendTol;
  std::string detail = "hard-50%: SET " + fmt("%+.4f", mean.hard_set - mean.hard_dense) + ", SNIP " +
                       fmt("%+.4f", mean.hard_snip - mean.hard_dense) + " vs dense (tol -" + fmt("%.2f", kHardTrendTol) +
                       "); ratio 0.3: SET " + fmt("%+.4f", mean.ratio_set - mean.ratio_dense) + " vs dense (tol -" +
                       fmt("%.2f", kRatioTrendTol) + ")";
  if (set_ok && snip_ok && ratio_ok) return {true, detail};
  // A missed trend is acceptable only with the table emitted and 1-7 passing.
  bool invariants = true;
  for (int k = 1; k <= 7; ++k) invariants = invariants && g_results.count(k) && g_results[k];
  return {invariants, detail + "; trend missed, table emitted, criteria 1-7 " +
                          (invariants ? "all pass" : "not all passing in this run")};
}

// ---- 9: determinism replay -------------------------------------------------

Outcome criterion_replay() {
  std::vector<ExperimentConfig> configs;
  {
    ExperimentConfig c = small_config(20, 4);
    c.method = Method::set;
    c.sparsity = 0.7;
    c.update_interval = 1;
    c.hardness = Hardness::el2n;
    c.el2n_epochs = 2;
    configs.push_back(c);
  }
  {
    ExperimentConfig c = small_config(20, 3);
    c.method = Method::lth;
    c.sparsity = 0.6;
    c.hardness = Hardness::corruption;
    c.corruption = CorruptionKind::defocus_blur;
    c.data_ratio = 0.5;
    configs.push_back(c);
  }
  {
    ExperimentConfig c = small_config(10, 2);
    c.method = Method::snip;
    c.sparsity = 0.9;
    c.hardness = Hardness::adversarial;
    c.attack_steps = 3;
    c.eval_attack_steps = 5;
    configs.push_back(c);
  }
  std::size_t compared = 0, differing = 0;
  std::string which;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const fs::path dir = fresh_dir("replay_" + std::to_string(k));
    ExperimentConfig first = configs[k];
    first.output = (dir / "original").string();
    run_experiment(first);
    ExperimentConfig again = load_config_file(dir / "original" / "manifest.cfg");
    again.output = (dir / "replay").string();
    run_experiment(again);
    for (const char* f : {"metrics.csv", "masks.bin", "density.csv", "flops.json", "model.bin"}) {
      ++compared;
      if (read_bytes(dir / "original" / f) != read_bytes(dir / "replay" / f)) {
        ++differing;
        which += std::string(to_string(configs[k].method)) + "/" + f + " ";
      }
    }
  }
  return {differing == 0, std::to_string(configs.size()) + " manifests replayed, " + std::to_string(compared) +
                              " artifacts compared, " + std::to_string(differing) + " differ" +
                              (differing ? ": " + which : "")};
}

// ---- 10: adversarial sanity ------------------------------------------------

Outcome criterion_adversarial() {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    ExperimentConfig c;
    c.synth.per_class = 200;
    c.synth_test_per_class = 50;
    c.epochs = 10;
    c.milestones = {5, 8};
    c.hardness = Hardness::adversarial;  // 10-step training attack, 20-step evaluation attack
    c.seed = seed;
    const RunResult r = run_experiment(c);
    const auto& m = r.final_metrics();
    const double adv = m.test_adv_acc.value_or(-1.0);
    const double chance = 1.0 / static_cast<double>(c.synth.classes);
    const bool pass = adv < m.test_clean_acc && adv > chance;
    ok = ok && pass;
    detail += "seed " + std::to_string(seed) + ": clean " + fmt("%.4f", m.test_clean_acc) + " adv " + fmt("%.4f", adv) +
              (pass ? "" : " (violated)") + "; ";
    std::cout << "  criterion 10 seed " << seed << " done" << std::endl;
  }
  return {ok, detail + "chance 0.1000"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only, known;
  std::string workdir = (fs::temp_directory_path() / "sparselab_acceptance").string();
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--known-failure", known, "criteria whose failure does not fail the exit status")->delimiter(',');
  app.add_option("--workdir", workdir, "scratch directory for run artifacts");
  app.add_option("--table", g_table_path, "also write the criterion 8 comparison table here");
  CLI11_PARSE(app, argc, argv);
  g_workdir = workdir;
  fs::create_directories(g_workdir);

  const std::vector<Criterion> criteria{
      {1, "gradient correctness", criterion_gradients},
      {2, "sparsity bookkeeping", criterion_bookkeeping},
      {3, "ERK solver", criterion_erk},
      {4, "lifecycle invariants", criterion_lifecycle},
      {5, "PGD contract", criterion_pgd},
      {6, "EL2N oracle", criterion_el2n},
      {7, "FLOPs ledger ordering", criterion_ledger},
      {8, "desk-scale trend", criterion_trend},
      {9, "determinism replay", criterion_replay},
      {10, "adversarial sanity", criterion_adversarial},
  };
  const std::set<int> selected(only.begin(), only.end()), tolerated(known.begin(), known.end());
  int blocking = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g_results[c.id] = o.pass;
    const bool excused = !o.pass && tolerated.count(c.id);
    if (!o.pass && !excused) ++blocking;
    std::printf("criterion %2d %s  %s: %s [%.1fs]%s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                excused ? " (known failure)" : "");
    std::fflush(stdout);
  }
  return blocking == 0 ? 0 : 1;
}
