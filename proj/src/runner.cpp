#include "adaloss/runner.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "json.hpp"

namespace adaloss {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string cell(double v) { return std::isnan(v) ? std::string{} : format_double(v); }

ordered_json config_json(const ExperimentConfig& c) {
  ordered_json j;
  j["testbed"] = c.testbed == Testbed::LinReg ? "linreg" : "twolayer";
  j["optimizer"] = to_string(c.optimizer);
  j["mode"] = c.mode == Mode::Deterministic ? "det" : "stoch";
  j["conditioning"] = c.conditioning == Conditioning::IID ? "iid" : "correlated";
  j["n"] = c.n;
  j["d"] = c.d;
  if (c.testbed == Testbed::TwoLayer) j["m"] = c.m;
  j["steps"] = c.steps;
  j["tol"] = c.tol;
  j["seed"] = c.seed;
  j["b0"] = c.b0;
  j["eta"] = c.eta;
  j["alpha"] = c.alpha;
  j["c"] = c.c;
  j["c_s"] = c.c_s;
  if (is_adam_family(c.optimizer)) {
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["adam_epsilon"] = c.adam_epsilon;
  }
  j["batch"] = c.batch;
  j["eig_cadence"] = c.eig_cadence;
  if (!c.b0_grid.empty()) j["b0_grid"] = c.b0_grid;
  if (!c.problem_file.empty()) j["problem_file"] = c.problem_file;
  j["out"] = c.out_dir;
  return j;
}

ordered_json matrix_json(const DenseMatrix& m) {
  ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = m.data();
  return j;
}

DenseMatrix matrix_from_json(const ordered_json& j) {
  return DenseMatrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                     j.at("data").get<std::vector<double>>());
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trajectory_csv(const LinRegTrajectory& traj) {
  std::string out = "iter,loss,error,b,eff_lr,max_drift,lambda_min_H,lambda_max_H\n";
  for (const auto& s : traj.steps) {
    out += std::to_string(s.iter) + ',' + cell(s.loss) + ',' + cell(s.error) + ',' +
           cell(s.b) + ',' + cell(s.eff_lr) + ",,,\n";
  }
  return out;
}

std::string trajectory_csv(const NetTrajectory& traj) {
  std::string out = "iter,loss,error,b,eff_lr,max_drift,lambda_min_H,lambda_max_H\n";
  for (const auto& s : traj.steps) {
    out += std::to_string(s.iter) + ',' + cell(s.loss) + ",," + cell(s.b) + ',' +
           cell(s.eff_lr) + ',' + cell(s.max_drift) + ',';
    if (s.has_eigs) {
      out += cell(s.lambda_min_h) + ',' + cell(s.lambda_max_h);
    } else {
      out += ",";
    }
    out += '\n';
  }
  return out;
}

std::string report_json(const RunReport& report) {
  ordered_json j;
  j["config"] = config_json(report.config);
  ordered_json fin;
  fin["loss"] = report.final_loss;
  fin["error"] = std::isnan(report.final_error) ? ordered_json(nullptr)
                                                : ordered_json(report.final_error);
  fin["iterations"] = report.iterations;
  fin["sup_b"] = report.sup_b;
  fin["loss_normalization"] = report.loss_normalization;
  j["final"] = fin;
  ordered_json rows = ordered_json::array();
  for (const auto& b : report.bounds) {
    ordered_json r;
    r["name"] = b.name;
    r["computed"] = b.computed;
    r["realized"] = std::isnan(b.realized) ? ordered_json(nullptr)
                                           : ordered_json(b.realized);
    r["pass"] = b.pass < 0 ? ordered_json(nullptr) : ordered_json(b.pass == 1);
    rows.push_back(r);
  }
  j["bounds"] = rows;
  ordered_json flags;
  flags["diverged"] = report.diverged;
  flags["reached_tol"] = report.reached_tol;
  j["flags"] = flags;
  return j.dump(2) + "\n";
}

void write_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

void save_linreg_problem(const LinRegProblem& problem, const std::string& path) {
  ordered_json j;
  j["testbed"] = "linreg";
  j["X"] = matrix_json(problem.x);
  j["w_star"] = problem.w_star;
  write_file(path, j.dump(2) + "\n");
}

LinRegProblem load_linreg_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open problem file: " + path);
  ordered_json j;
  in >> j;
  if (j.at("testbed") != "linreg") throw IoError("problem file is not a linreg instance");
  return make_problem(matrix_from_json(j.at("X")), j.at("w_star").get<Vector>());
}

void save_dataset(const DataSet& data, const std::string& path) {
  ordered_json j;
  j["testbed"] = "twolayer";
  j["X"] = matrix_json(data.x);
  j["y"] = data.y;
  write_file(path, j.dump(2) + "\n");
}

DataSet load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  ordered_json j;
  in >> j;
  if (j.at("testbed") != "twolayer") throw IoError("dataset file is not a twolayer dataset");
  return make_dataset(matrix_from_json(j.at("X")), j.at("y").get<Vector>());
}

namespace {

// ---------------------------------------------------------------- linreg ----

void append_linreg_bounds(RunReport& report, const ExperimentConfig& cfg,
                          const LinRegProblem& problem, const LinRegTrajectory& traj,
                          RngStream& stream) {
  const Vector w0(problem.d(), 0.0);
  const bool adaptive = cfg.optimizer == OptimizerName::AdaGradNorm ||
                        cfg.optimizer == OptimizerName::AdaLoss;
  if (!adaptive) return;
  const ControllerKind kind = controller_kind(cfg.optimizer);

  if (cfg.mode == Mode::Deterministic) {
    try {
      const TheoryBounds tb = bound_T(problem, kind, cfg.b0, cfg.eta, cfg.tol, w0);
      BoundRow row;
      row.name = std::string("iterations_vs_theory_") + (tb.case_label == 'a' ? "a" : "b");
      row.computed = tb.t_total + (tb.case_label == 'b' ? std::ceil(tb.s) : 0.0);
      row.realized = static_cast<double>(traj.iterations_used);
      row.pass = (traj.reached_tol && row.realized <= row.computed) ? 1 : 0;
      report.bounds.push_back(row);
    } catch (const std::exception&) {
      // bound prerequisites not met (e.g. started inside tolerance)
    }

    if (2.0 * cfg.b0 < cfg.eta * problem.lambda1()) {
      try {
        const auto [n_agn, n_adaloss] = bound_crossing(problem, cfg.b0, cfg.eta, w0);
        const double threshold = cfg.eta * problem.lambda1() / 2.0;
        double realized = kNan;
        for (const auto& s : traj.steps) {
          if (s.b >= threshold) {
            realized = static_cast<double>(s.iter) - 1.0;
            break;
          }
        }
        BoundRow row;
        row.name = "crossing_index";
        row.computed = kind == ControllerKind::AdaGradNorm ? n_agn : n_adaloss;
        row.realized = realized;
        row.pass = std::isnan(realized) ? -1 : (realized <= row.computed ? 1 : 0);
        report.bounds.push_back(row);
      } catch (const std::exception&) {
      }
    }

    bool hyp = false;
    const double blim = bound_b_limit(problem, cfg.b0, cfg.eta, w0, kind, &hyp);
    if (hyp) {
      BoundRow row;
      row.name = "sup_b_vs_limit";
      row.computed = blim;
      row.realized = traj.sup_b;
      row.pass = traj.sup_b <= blim ? 1 : 0;
      report.bounds.push_back(row);
    }

    const InequalityReport ineq = verify_inequalities(problem, traj);
    for (const auto& c : ineq.checks) {
      BoundRow row;
      row.name = c.name + "_violations";
      row.computed = 0.0;
      row.realized = static_cast<double>(c.violations);
      row.pass = c.violations == 0 ? 1 : 0;
      report.bounds.push_back(row);
    }

    // Closed-form dynamics audit: replay the hat recursion with the
    // realized b sequence and compare against V^T (w_t - w*). Components
    // below the square of the float resolution of w_t carry no information,
    // so the comparison floors its scale there.
    if (traj.iterates.size() >= 2) {
      const auto& lambda = problem.spectral.eigenvalues;
      Vector hat0 = problem.to_hat(traj.iterates.front() - problem.w_star);
      Vector s(hat0.size());
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = hat0[i] * hat0[i];
      double worst = 0.0;
      for (std::size_t t = 1; t < traj.iterates.size(); ++t) {
        for (std::size_t i = 0; i < s.size(); ++i)
          s[i] = hat_dynamics_step(s[i], traj.steps[t].b, traj.eta, lambda[i]);
        const Vector hat = problem.to_hat(traj.iterates[t] - problem.w_star);
        const double w_scale =
            std::max(norm2(traj.iterates[t]), norm2(problem.w_star));
        const double floor = (1e-13 * w_scale) * (1e-13 * w_scale);
        for (std::size_t i = 0; i < s.size(); ++i) {
          const double simulated = hat[i] * hat[i];
          const double scale = std::max({simulated, s[i], floor, 1e-300});
          worst = std::max(worst, std::abs(simulated - s[i]) / scale);
        }
      }
      BoundRow row;
      row.name = "hat_dynamics_max_rel_dev";
      row.computed = 1e-10;
      row.realized = worst;
      row.pass = worst <= 1e-10 ? 1 : 0;
      report.bounds.push_back(row);
    }
  } else {
    // Stochastic: the single-sample b limit, the RUIL/RUIG estimate and the
    // high-probability horizon.
    if (cfg.batch == 1) {
      BoundRow row;
      row.name = "sup_b_vs_stochastic_limit";
      row.computed = bound_b_limit_stochastic(problem, cfg.b0, cfg.eta, w0, kind);
      row.realized = traj.sup_b;
      row.pass = traj.sup_b <= row.computed ? 1 : 0;
      report.bounds.push_back(row);
    }
    try {
      const RuilKind rk =
          kind == ControllerKind::AdaLoss ? RuilKind::LossLR : RuilKind::Gradient;
      const RuilEstimate est = estimate_ruil(problem, cfg.tol, rk, 60, stream);
      const std::uint64_t horizon = bound_stochastic_N(
          est.mu, est.gamma, cfg.tol, cfg.b0, cfg.eta, problem.lambda1());
      BoundRow row;
      row.name = "stochastic_horizon_N";
      row.computed = static_cast<double>(horizon);
      row.realized = kNan;
      row.pass = -1;
      report.bounds.push_back(row);
      BoundRow mu_row{"ruil_mu_gamma_product", est.mu * est.gamma, kNan, -1};
      report.bounds.push_back(mu_row);
    } catch (const std::exception&) {
    }
  }
}

RunReport run_linreg_experiment(const ExperimentConfig& cfg) {
  RngStream stream(cfg.seed);
  LinRegProblem problem = cfg.problem_file.empty()
                              ? gen_problem(cfg.n, cfg.d, cfg.conditioning, stream)
                              : load_linreg_problem(cfg.problem_file);

  LinRegTrajectory traj;
  if (is_adam_family(cfg.optimizer)) {
    traj = run_linreg_adam(problem, cfg.make_adam_state(problem.d()), cfg.mode, cfg.steps,
                           cfg.batch, cfg.tol, stream);
  } else {
    traj = run_linreg(problem, cfg.make_controller_state(), cfg.mode, cfg.steps, cfg.batch,
                      cfg.tol, stream);
  }

  RunReport report;
  report.config = cfg;
  report.loss_normalization = "0.5*||Xw-y||^2";
  report.diverged = traj.diverged;
  report.reached_tol = traj.reached_tol;
  report.iterations = traj.iterations_used;
  report.sup_b = traj.sup_b;
  if (!traj.steps.empty()) {
    report.final_loss = traj.steps.back().loss;
    report.final_error = traj.steps.back().error;
  }
  if (!traj.diverged && !is_adam_family(cfg.optimizer))
    append_linreg_bounds(report, cfg, problem, traj, stream);

  write_file(cfg.out_dir + "/trajectory.csv", trajectory_csv(traj));
  write_file(cfg.out_dir + "/report.json", report_json(report));
  if (cfg.plot_data) emit_plot_series(cfg.out_dir, traj.steps);
  return report;
}

// -------------------------------------------------------------- twolayer ----

RunReport run_twolayer_experiment(const ExperimentConfig& cfg) {
  RngStream stream(cfg.seed);
  DataSet data = cfg.problem_file.empty() ? gen_dataset(cfg.n, cfg.d, stream)
                                          : load_dataset(cfg.problem_file);
  TwoLayerNet net = init_net(cfg.m, data.d(), stream);

  TrainOptions opts;
  opts.mode = cfg.mode;
  opts.batch_size = cfg.batch;
  opts.steps = cfg.steps;
  opts.tol = cfg.tol;
  opts.eig_cadence = cfg.eig_cadence;

  NetTrajectory traj;
  if (is_adam_family(cfg.optimizer)) {
    traj = train_adam(net, data, cfg.make_adam_state(cfg.m * data.d()), opts, stream);
  } else {
    traj = train(net, data, cfg.make_controller_state(), opts, stream);
  }

  RunReport report;
  report.config = cfg;
  report.loss_normalization = traj.loss_normalization;
  report.diverged = traj.diverged;
  report.reached_tol = traj.reached_tol;
  report.iterations = traj.iterations_used;
  report.sup_b = traj.sup_b;
  report.final_error = kNan;
  if (!traj.steps.empty()) report.final_loss = traj.steps.back().loss;

  if (!traj.diverged && !is_adam_family(cfg.optimizer)) {
    const DenseMatrix h_inf = gram_infinity(data);
    const auto [hnorm, lambda0] = spectral_extremes(h_inf);
    if (lambda0 > 0.0) {
      TwoLayerBoundsInput in;
      in.lambda0 = lambda0;
      in.h_inf_norm = hnorm;
      in.n = data.n();
      in.m = cfg.m;
      in.eta = cfg.eta;
      in.alpha = cfg.alpha;
      in.b0 = cfg.b0;
      in.u0_residual_norm = std::sqrt(traj.steps.front().loss);
      const std::size_t t0_idx =
          traj.crossing_t0 >= 0 ? static_cast<std::size_t>(traj.crossing_t0) : 0;
      in.uT0_residual_norm =
          t0_idx < traj.steps.size() ? std::sqrt(traj.steps[t0_idx].loss) : 0.0;
      in.t0 = t0_idx;
      const TwoLayerBounds bounds = bounds_and_constants(in);

      std::vector<McCondition2Result> mc;
      if (cfg.mode == Mode::Stochastic && !traj.steps.empty()) {
        ControllerState final_state = cfg.make_controller_state();
        final_state.b = traj.steps.back().b;
        mc.push_back(mc_condition2(net, data, final_state, bounds.stochastic_threshold, 500,
                                   stream));
      }
      const VerifyReport verify =
          verify_suite(traj, bounds, controller_kind(cfg.optimizer), mc);
      for (const auto& c : verify.checks) {
        if (!c.applicable) continue;
        BoundRow row;
        row.name = c.name;
        row.computed = c.computed;
        row.realized = c.realized;
        row.pass = c.pass ? 1 : 0;
        report.bounds.push_back(row);
      }
    }
  }

  write_file(cfg.out_dir + "/trajectory.csv", trajectory_csv(traj));
  write_file(cfg.out_dir + "/report.json", report_json(report));
  return report;
}

double window_mean(const std::vector<double>& loss_by_iter, std::uint64_t lo,
                   std::uint64_t hi, bool diverged) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::uint64_t t = lo; t <= hi && t < loss_by_iter.size(); ++t) {
    acc += loss_by_iter[t];
    ++count;
  }
  if (count > 0) return acc / static_cast<double>(count);
  if (diverged) return std::numeric_limits<double>::infinity();
  return loss_by_iter.empty() ? std::numeric_limits<double>::quiet_NaN()
                              : loss_by_iter.back();
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  return config.testbed == Testbed::LinReg ? run_linreg_experiment(config)
                                           : run_twolayer_experiment(config);
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = "b0,optimizer,loss_t200,loss_t1000,loss_t5000,final_eff_lr\n";
  for (const auto& r : sweep.rows) {
    out += format_double(r.b0) + ',' + r.optimizer + ',' + format_double(r.loss_t200) +
           ',' + format_double(r.loss_t1000) + ',' + format_double(r.loss_t5000) + ',' +
           format_double(r.final_eff_lr) + '\n';
  }
  return out;
}

SweepResult sweep_b0(const ExperimentConfig& config) {
  if (config.b0_grid.empty()) throw ConfigError("sweep: 'b0_grid' is required");
  SweepResult result;
  result.rows.resize(config.b0_grid.size());

  auto run_point = [&](std::size_t idx) {
    ExperimentConfig point = config;
    point.b0 = config.b0_grid[idx];
    point.b0_grid.clear();
    point.out_dir = config.out_dir + "/sweep_" + std::to_string(idx);

    SweepRow row;
    row.b0 = point.b0;
    row.optimizer = to_string(point.optimizer);

    // The per-step loss column, indexed by iteration.
    RngStream stream(point.seed);
    std::vector<double> loss;
    double final_lr = 0.0;
    bool diverged = false;
    if (point.testbed == Testbed::LinReg) {
      LinRegProblem problem = point.problem_file.empty()
                                  ? gen_problem(point.n, point.d, point.conditioning, stream)
                                  : load_linreg_problem(point.problem_file);
      LinRegTrajectory traj;
      if (is_adam_family(point.optimizer)) {
        traj = run_linreg_adam(problem, point.make_adam_state(problem.d()), point.mode,
                               point.steps, point.batch, point.tol, stream);
      } else {
        traj = run_linreg(problem, point.make_controller_state(), point.mode, point.steps,
                          point.batch, point.tol, stream);
      }
      for (const auto& s : traj.steps) loss.push_back(s.loss);
      if (!traj.steps.empty()) final_lr = traj.steps.back().eff_lr;
      diverged = traj.diverged;
    } else {
      DataSet data = point.problem_file.empty() ? gen_dataset(point.n, point.d, stream)
                                                : load_dataset(point.problem_file);
      TwoLayerNet net = init_net(point.m, data.d(), stream);
      TrainOptions opts;
      opts.mode = point.mode;
      opts.batch_size = point.batch;
      opts.steps = point.steps;
      opts.tol = point.tol;
      opts.eig_cadence = 0;  // sweeps skip the eigen tracking
      NetTrajectory traj;
      if (is_adam_family(point.optimizer)) {
        traj = train_adam(net, data, point.make_adam_state(point.m * data.d()), opts, stream);
      } else {
        traj = train(net, data, point.make_controller_state(), opts, stream);
      }
      for (const auto& s : traj.steps) loss.push_back(s.loss);
      if (!traj.steps.empty()) final_lr = traj.steps.back().eff_lr;
      diverged = traj.diverged;
    }

    if (diverged) {
      row.loss_t200 = window_mean(loss, 101, 200, true);
      row.loss_t1000 = window_mean(loss, 991, 1000, true);
      row.loss_t5000 = window_mean(loss, 4901, 5000, true);
      row.diverged = true;
      // A diverged run's trailing windows are infinite by convention.
      if (loss.size() <= 4901) row.loss_t5000 = std::numeric_limits<double>::infinity();
      if (loss.size() <= 991) row.loss_t1000 = std::numeric_limits<double>::infinity();
      if (loss.size() <= 101) row.loss_t200 = std::numeric_limits<double>::infinity();
    } else {
      row.loss_t200 = window_mean(loss, 101, 200, false);
      row.loss_t1000 = window_mean(loss, 991, 1000, false);
      row.loss_t5000 = window_mean(loss, 4901, 5000, false);
    }
    row.final_eff_lr = final_lr;
    result.rows[idx] = row;
  };

  // Sweep points execute concurrently up to the --jobs limit; rows merge in
  // grid order so the CSV is independent of scheduling.
  std::size_t next = 0;
  const std::size_t jobs = std::max<std::size_t>(1, config.jobs);
  while (next < result.rows.size()) {
    std::vector<std::future<void>> wave;
    for (std::size_t j = 0; j < jobs && next < result.rows.size(); ++j, ++next)
      wave.push_back(std::async(std::launch::async, run_point, next));
    for (auto& f : wave) f.get();
  }
  for (const auto& r : result.rows) result.any_diverged |= r.diverged;

  write_file(config.out_dir + "/sweep.csv", sweep_csv(result));
  return result;
}

}  // namespace adaloss
