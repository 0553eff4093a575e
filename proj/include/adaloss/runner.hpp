#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adaloss/config.hpp"
#include "adaloss/linreg.hpp"
#include "adaloss/twolayer.hpp"

namespace adaloss {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BoundRow {
  std::string name;
  double computed = 0.0;
  double realized = 0.0;  // NaN when not evaluated (verify-only reports)
  int pass = -1;          // 1 / 0 / -1 for not evaluated
};

struct RunReport {
  ExperimentConfig config;
  double final_loss = 0.0;
  double final_error = 0.0;  // NaN for two-layer
  std::uint64_t iterations = 0;
  double sup_b = 0.0;
  bool diverged = false;
  bool reached_tol = false;
  std::vector<BoundRow> bounds;
  std::string loss_normalization;
};

/// Shortest round-trip decimal representation.
std::string format_double(double v);

/// Fixed-header trajectory CSV:
/// iter,loss,error,b,eff_lr,max_drift,lambda_min_H,lambda_max_H
/// NaN fields render as empty cells.
std::string trajectory_csv(const LinRegTrajectory& traj);
std::string trajectory_csv(const NetTrajectory& traj);

std::string report_json(const RunReport& report);

/// Runs the configured experiment and writes trajectory.csv + report.json
/// under config.out_dir.
RunReport run_experiment(const ExperimentConfig& config);

struct SweepRow {
  double b0 = 0.0;
  std::string optimizer;
  double loss_t200 = 0.0;
  double loss_t1000 = 0.0;
  double loss_t5000 = 0.0;
  double final_eff_lr = 0.0;
  bool diverged = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  bool any_diverged = false;
};

/// One run per grid point (same seed each: the grid isolates b0), windows
/// averaged over iterations [101,200], [991,1000], [4901,5000]; windows past
/// an early tol-stop report the final achieved loss. Writes sweep.csv.
SweepResult sweep_b0(const ExperimentConfig& config);

std::string sweep_csv(const SweepResult& sweep);

/// Problem files (JSON): a linreg instance (X, w*) or a two-layer dataset
/// (X with unit rows, y).
void save_linreg_problem(const LinRegProblem& problem, const std::string& path);
LinRegProblem load_linreg_problem(const std::string& path);
void save_dataset(const DataSet& data, const std::string& path);
DataSet load_dataset(const std::string& path);

void write_file(const std::string& path, const std::string& content);

}  // namespace adaloss
