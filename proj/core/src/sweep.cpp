#include "sparselab/sweep.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "sparselab/error.hpp"
#include "sparselab/experiment.hpp"

namespace sparselab {
namespace {

std::string slug(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  sd = 0.0;
  if (v.size() < 2) return;
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  if (dynamic_cast<const IoError*>(&e)) return 4;
  return 1;
}

int run_cell(const ExperimentConfig& config) {
  try {
    run_experiment(config);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "sweep cell " << config.output << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace

std::vector<SweepCell> sweep_cells(const ExperimentConfig& base, const SweepAxes& axes,
                                   const std::vector<std::uint64_t>& seeds) {
  const std::vector<double> sp = axes.sparsity.empty() ? std::vector<double>{base.sparsity} : axes.sparsity;
  const std::vector<double> dr = axes.data_ratio.empty() ? std::vector<double>{base.data_ratio} : axes.data_ratio;
  const std::vector<int> sv = axes.severity.empty() ? std::vector<int>{base.severity} : axes.severity;
  const std::vector<std::uint64_t> sd = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;
  std::vector<SweepCell> cells;
  for (double s : sp) {
    for (double r : dr) {
      for (int v : sv) {
        for (std::uint64_t seed : sd) {
          SweepCell c{s, r, v, seed, {}};
          c.name = "s" + slug(s) + "_r" + slug(r) + "_v" + std::to_string(v) + "_seed" + std::to_string(seed);
          cells.push_back(c);
        }
      }
    }
  }
  return cells;
}

ExperimentConfig cell_config(const ExperimentConfig& base, const SweepCell& cell,
                             const std::filesystem::path& sweep_dir) {
  ExperimentConfig c = base;
  c.sparsity = cell.sparsity;
  c.data_ratio = cell.data_ratio;
  c.severity = cell.severity;
  c.seed = cell.seed;
  c.output = (sweep_dir / cell.name).string();
  return c;
}

CellOutcome read_cell_outcome(const std::filesystem::path& run_dir, const SweepCell& cell) {
  std::ifstream metrics(run_dir / "metrics.csv");
  if (!metrics) throw IoError("missing metrics.csv in " + run_dir.string());
  const auto records = read_metrics_csv(metrics);
  if (records.empty()) throw IoError("empty metrics.csv in " + run_dir.string());
  const FlopsLedger ledger = FlopsLedger::from_json(read_text(run_dir / "flops.json"));
  CellOutcome out;
  out.cell = cell;
  out.clean_acc = records.back().test_clean_acc;
  out.adv_acc = records.back().test_adv_acc;
  out.global_sparsity = records.back().global_sparsity;
  out.total_flops = ledger.total();
  out.final_params = static_cast<double>(ledger.final_params());
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<CellOutcome>& outcomes) {
  std::vector<AggregateRow> rows;
  std::vector<std::vector<const CellOutcome*>> groups;
  for (const auto& o : outcomes) {
    std::size_t g = 0;
    while (g < rows.size() && !(rows[g].sparsity == o.cell.sparsity && rows[g].data_ratio == o.cell.data_ratio &&
                                rows[g].severity == o.cell.severity)) {
      ++g;
    }
    if (g == rows.size()) {
      AggregateRow r;
      r.sparsity = o.cell.sparsity;
      r.data_ratio = o.cell.data_ratio;
      r.severity = o.cell.severity;
      rows.push_back(r);
      groups.emplace_back();
    }
    groups[g].push_back(&o);
  }
  for (std::size_t g = 0; g < rows.size(); ++g) {
    std::vector<double> clean, adv, sp, fl, pa;
    for (const CellOutcome* o : groups[g]) {
      clean.push_back(o->clean_acc);
      if (o->adv_acc) adv.push_back(*o->adv_acc);
      sp.push_back(o->global_sparsity);
      fl.push_back(o->total_flops);
      pa.push_back(o->final_params);
    }
    AggregateRow& r = rows[g];
    double unused = 0.0;
    r.runs = clean.size();
    mean_std(clean, r.clean_mean, r.clean_std);
    if (adv.size() == clean.size()) {
      double m = 0.0, s = 0.0;
      mean_std(adv, m, s);
      r.adv_mean = m;
      r.adv_std = s;
    }
    mean_std(sp, r.sparsity_mean, unused);
    mean_std(fl, r.flops_mean, unused);
    mean_std(pa, r.params_mean, unused);
  }
  return rows;
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << "sparsity,data_ratio,severity,runs,test_clean_acc_mean,test_clean_acc_std,test_adv_acc_mean,"
        "test_adv_acc_std,global_sparsity_mean,total_flops_mean,final_params_mean\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%d,%zu,%.6f,%.6f,", r.sparsity, r.data_ratio, r.severity, r.runs,
                  r.clean_mean, r.clean_std);
    os << buf;
    if (r.adv_mean) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f,", *r.adv_mean, *r.adv_std);
      os << buf;
    } else {
      os << ",,";
    }
    std::snprintf(buf, sizeof buf, "%.6f,%.6e,%.1f\n", r.sparsity_mean, r.flops_mean, r.params_mean);
    os << buf;
  }
}

void write_heatmap_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  std::vector<double> sp, dr;
  for (const auto& r : rows) {
    if (std::find(sp.begin(), sp.end(), r.sparsity) == sp.end()) sp.push_back(r.sparsity);
    if (std::find(dr.begin(), dr.end(), r.data_ratio) == dr.end()) dr.push_back(r.data_ratio);
  }
  char buf[64];
  os << "sparsity";
  for (double r : dr) {
    std::snprintf(buf, sizeof buf, ",%.6g", r);
    os << buf;
  }
  os << "\n";
  for (double s : sp) {
    std::snprintf(buf, sizeof buf, "%.6g", s);
    os << buf;
    for (double r : dr) {
      os << ',';
      for (const auto& row : rows) {
        if (row.sparsity == s && row.data_ratio == r) {
          std::snprintf(buf, sizeof buf, "%.6f", row.clean_mean);
          os << buf;
          break;
        }
      }
    }
    os << "\n";
  }
}

SweepResult run_sweep(const ExperimentConfig& base, const SweepAxes& axes, const std::vector<std::uint64_t>& seeds,
                      std::size_t jobs) {
  if (base.output.empty()) throw ConfigError("output: a sweep needs an output directory");
  const std::filesystem::path dir = base.output;
  const auto cells = sweep_cells(base, axes, seeds);
  std::vector<ExperimentConfig> configs;
  for (const auto& c : cells) {
    configs.push_back(cell_config(base, c, dir));
    configs.back().validate();
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create sweep directory " + dir.string() + ": " + ec.message());

  int worst = 0;
  if (jobs <= 1) {
    for (const auto& c : configs) {
      run_experiment(c);
    }
  } else {
    std::map<pid_t, std::size_t> running;
    std::size_t next = 0;
    auto reap_one = [&] {
      int status = 0;
      const pid_t pid = ::wait(&status);
      if (pid < 0) throw Error("wait() failed while running sweep cells");
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 1;
      if (code != 0 && worst == 0) worst = code;
      running.erase(pid);
    };
    while (next < configs.size() || !running.empty()) {
      if (next < configs.size() && running.size() < jobs) {
        std::cout.flush();
        std::cerr.flush();
        const pid_t pid = ::fork();
        if (pid < 0) throw Error("fork() failed while starting a sweep cell");
        if (pid == 0) ::_exit(run_cell(configs[next]));
        running[pid] = next++;
      } else {
        reap_one();
      }
    }
  }
  if (worst == 2) throw ConfigError("a sweep cell rejected its configuration");
  if (worst == 3) throw NumericalError("a sweep cell failed numerically");
  if (worst == 4) throw IoError("a sweep cell failed with an IO error");
  if (worst != 0) throw Error("a sweep cell failed");

  SweepResult result;
  for (std::size_t i = 0; i < cells.size(); ++i) result.outcomes.push_back(read_cell_outcome(configs[i].output, cells[i]));
  result.rows = aggregate(result.outcomes);

  {
    std::ofstream out(dir / "aggregate.csv");
    if (!out) throw IoError("cannot write aggregate.csv");
    write_aggregate_csv(out, result.rows);
  }
  const bool sweep_grid = axes.sparsity.size() >= 1 && axes.data_ratio.size() >= 1 && axes.severity.size() <= 1;
  if (sweep_grid) {
    std::ofstream out(dir / "heatmap.csv");
    if (!out) throw IoError("cannot write heatmap.csv");
    write_heatmap_csv(out, result.rows);
  }
  return result;
}

}  // namespace sparselab
