#include <cstdio>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "adaloss/runner.hpp"

namespace {

using adaloss::ExperimentConfig;

struct CommonFlags {
  std::optional<std::string> config_path;
  std::map<std::string, std::string> overrides;
};

void attach_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option_function<std::string>(
      "--config", [&flags](const std::string& v) { flags.config_path = v; },
      "key=value config file");
  auto opt = [cmd, &flags](const std::string& flag, const std::string& key,
                           const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&flags, key](const std::string& v) { flags.overrides[key] = v; }, help);
  };
  opt("--testbed", "testbed", "linreg or twolayer");
  opt("--optimizer", "optimizer",
      "adaloss|adagradnorm|sgd-const|sgd-decaysqrt|squarerule|normrule|adam|adamloss|adamsqrt");
  opt("--b0", "b0", "initial stepsize denominator");
  opt("--eta", "eta", "stepsize numerator");
  opt("--alpha", "alpha", "signal gain");
  opt("--c", "c", "loss offset (adaloss)");
  opt("--n", "n", "sample count");
  opt("--d", "d", "input dimension");
  opt("--m", "m", "hidden width (twolayer)");
  opt("--steps", "steps", "iteration budget");
  opt("--tol", "tol", "target accuracy");
  opt("--seed", "seed", "random seed");
  opt("--mode", "mode", "det or stoch");
  opt("--batch", "batch", "minibatch size (stochastic)");
  opt("--b0-grid", "b0_grid", "comma list or 'first,second,...,last' log grid");
  opt("--jobs", "jobs", "concurrent sweep points");
  opt("--out", "out", "output directory");
  opt("--eig-cadence", "eig_cadence", "Gram eigenvalue cadence (twolayer)");
  opt("--conditioning", "conditioning", "iid or correlated (linreg)");
  opt("--problem-file", "problem_file", "pre-generated problem JSON");
  opt("--c-s", "c_s", "decay coefficient (sgd-decaysqrt)");
}

ExperimentConfig load_config(const CommonFlags& flags) {
  return adaloss::parse_config(flags.config_path, flags.overrides);
}

int cmd_gen(const ExperimentConfig& cfg) {
  adaloss::RngStream stream(cfg.seed);
  if (cfg.testbed == adaloss::Testbed::LinReg) {
    const auto problem = adaloss::gen_problem(cfg.n, cfg.d, cfg.conditioning, stream);
    const std::string path = cfg.out_dir + "/problem.json";
    adaloss::save_linreg_problem(problem, path);
    std::printf("wrote %s (n=%zu d=%zu lambda1=%s lambdan=%s)\n", path.c_str(), problem.n(),
                problem.d(), adaloss::format_double(problem.lambda1()).c_str(),
                adaloss::format_double(problem.lambdan()).c_str());
  } else {
    const auto data = adaloss::gen_dataset(cfg.n, cfg.d, stream);
    const std::string path = cfg.out_dir + "/problem.json";
    adaloss::save_dataset(data, path);
    std::printf("wrote %s (n=%zu d=%zu)\n", path.c_str(), data.n(), data.d());
  }
  return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
  const adaloss::RunReport report = adaloss::run_experiment(cfg);
  std::printf("%s: iterations=%llu final_loss=%s%s\n",
              report.diverged ? "DIVERGED" : (report.reached_tol ? "converged" : "stopped"),
              static_cast<unsigned long long>(report.iterations),
              adaloss::format_double(report.final_loss).c_str(),
              report.reached_tol ? " (tol reached)" : "");
  for (const auto& b : report.bounds) {
    std::printf("  bound %-28s computed=%-14s realized=%-14s %s\n", b.name.c_str(),
                adaloss::format_double(b.computed).c_str(),
                adaloss::format_double(b.realized).c_str(),
                b.pass < 0 ? "-" : (b.pass == 1 ? "pass" : "FAIL"));
  }
  return report.diverged ? 2 : 0;
}

int cmd_sweep(const ExperimentConfig& cfg) {
  const adaloss::SweepResult sweep = adaloss::sweep_b0(cfg);
  for (const auto& r : sweep.rows) {
    std::printf("b0=%-10s loss@5000=%-14s eff_lr=%-12s%s\n",
                adaloss::format_double(r.b0).c_str(),
                adaloss::format_double(r.loss_t5000).c_str(),
                adaloss::format_double(r.final_eff_lr).c_str(),
                r.diverged ? " DIVERGED" : "");
  }
  return sweep.any_diverged ? 2 : 0;
}

int cmd_verify(const ExperimentConfig& cfg) {
  using adaloss::BoundRow;
  adaloss::RngStream stream(cfg.seed);
  adaloss::RunReport report;
  report.config = cfg;
  report.final_error = std::numeric_limits<double>::quiet_NaN();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  if (cfg.testbed == adaloss::Testbed::LinReg) {
    const auto problem = cfg.problem_file.empty()
                             ? adaloss::gen_problem(cfg.n, cfg.d, cfg.conditioning, stream)
                             : adaloss::load_linreg_problem(cfg.problem_file);
    const adaloss::Vector w0(problem.d(), 0.0);
    report.loss_normalization = "0.5*||Xw-y||^2";
    report.bounds.push_back({"lambda1", problem.lambda1(), nan, -1});
    report.bounds.push_back({"lambdan", problem.lambdan(), nan, -1});
    for (auto kind : {adaloss::ControllerKind::AdaGradNorm, adaloss::ControllerKind::AdaLoss}) {
      const std::string tag = kind == adaloss::ControllerKind::AdaGradNorm ? "agn" : "adaloss";
      const auto tb = adaloss::bound_T(problem, kind, cfg.b0, cfg.eta, cfg.tol, w0);
      report.bounds.push_back({"T_total_" + tag,
                               tb.t_total + (tb.case_label == 'b' ? std::ceil(tb.s) : 0.0),
                               nan, -1});
      bool hyp = false;
      const double blim = adaloss::bound_b_limit(problem, cfg.b0, cfg.eta, w0, kind, &hyp);
      if (hyp) report.bounds.push_back({"b_limit_" + tag, blim, nan, -1});
      report.bounds.push_back(
          {"b_limit_stochastic_" + tag,
           adaloss::bound_b_limit_stochastic(problem, cfg.b0, cfg.eta, w0, kind), nan, -1});
    }
    if (2.0 * cfg.b0 < cfg.eta * problem.lambda1()) {
      const auto [n_agn, n_adaloss] = adaloss::bound_crossing(problem, cfg.b0, cfg.eta, w0);
      report.bounds.push_back({"crossing_N_agn", n_agn, nan, -1});
      report.bounds.push_back({"crossing_N_adaloss", n_adaloss, nan, -1});
    }
    if (cfg.mode == adaloss::Mode::Stochastic) {
      for (auto rk : {adaloss::RuilKind::LossLR, adaloss::RuilKind::Gradient}) {
        const auto est = adaloss::estimate_ruil(problem, cfg.tol, rk, 60, stream);
        const std::string tag = rk == adaloss::RuilKind::LossLR ? "ruil_lr" : "ruig";
        report.bounds.push_back({tag + "_mu", est.mu, nan, -1});
        report.bounds.push_back({tag + "_gamma", est.gamma, nan, -1});
        report.bounds.push_back(
            {tag + "_horizon_N",
             static_cast<double>(adaloss::bound_stochastic_N(
                 est.mu, est.gamma, cfg.tol, cfg.b0, cfg.eta, problem.lambda1())),
             nan, -1});
      }
    }
  } else {
    const auto data = cfg.problem_file.empty()
                          ? adaloss::gen_dataset(cfg.n, cfg.d, stream)
                          : adaloss::load_dataset(cfg.problem_file);
    auto net = adaloss::init_net(cfg.m, data.d(), stream);
    report.loss_normalization = "||y-u||^2";
    const auto h_inf = adaloss::gram_infinity(data);
    const auto [hnorm, lambda0] = adaloss::spectral_extremes(h_inf);
    const auto [l, r] = adaloss::loss_and_residual(net, data);
    adaloss::TwoLayerBoundsInput in;
    in.lambda0 = lambda0;
    in.h_inf_norm = hnorm;
    in.n = data.n();
    in.m = cfg.m;
    in.eta = cfg.eta;
    in.alpha = cfg.alpha;
    in.b0 = cfg.b0;
    in.u0_residual_norm = adaloss::norm2(r);
    in.uT0_residual_norm = adaloss::norm2(r);
    const auto bounds = adaloss::bounds_and_constants(in);
    report.bounds.push_back({"lambda0", lambda0, nan, -1});
    report.bounds.push_back({"h_inf_norm", hnorm, nan, -1});
    report.bounds.push_back({"R", bounds.r, nan, -1});
    report.bounds.push_back({"R_prime", bounds.r_prime, nan, -1});
    report.bounds.push_back({"R_hat", bounds.r_hat, nan, -1});
    report.bounds.push_back({"R_tilde", bounds.r_tilde, nan, -1});
    report.bounds.push_back({"C", bounds.c_big, nan, -1});
    report.bounds.push_back({"C1", bounds.c1, nan, -1});
    report.bounds.push_back({"delta1", bounds.delta1, nan, -1});
    report.bounds.push_back({"C2", bounds.c2, nan, -1});
    report.bounds.push_back({"B", bounds.big_b, nan, -1});
    report.bounds.push_back({"stochastic_threshold", bounds.stochastic_threshold, nan, -1});
    report.bounds.push_back(
        {"T0_dynamical", static_cast<double>(bounds.t0_dynamical), nan, -1});
    report.bounds.push_back({"b_inf", bounds.b_inf, nan, -1});
    report.bounds.push_back({"b_bar_inf", bounds.b_bar_inf, nan, -1});
    (void)l;
  }
  adaloss::write_file(cfg.out_dir + "/report.json", adaloss::report_json(report));
  for (const auto& b : report.bounds)
    std::printf("  %-24s %s\n", b.name.c_str(), adaloss::format_double(b.computed).c_str());
  return 0;
}

int cmd_gram(const ExperimentConfig& cfg) {
  adaloss::RngStream stream(cfg.seed);
  const auto data = cfg.problem_file.empty() ? adaloss::gen_dataset(cfg.n, cfg.d, stream)
                                             : adaloss::load_dataset(cfg.problem_file);
  const auto net = adaloss::init_net(cfg.m, data.d(), stream);
  const auto h_inf = adaloss::gram_infinity(data);
  const auto h0 = adaloss::gram_empirical(net, data);
  const auto ext_inf = adaloss::spectral_extremes(h_inf);
  const auto ext_0 = adaloss::spectral_extremes(h0);

  nlohmann::ordered_json j;
  j["n"] = data.n();
  j["d"] = data.d();
  j["m"] = cfg.m;
  j["seed"] = cfg.seed;
  j["h_inf"] = {{"lambda_max", ext_inf.first}, {"lambda_min", ext_inf.second}};
  j["h_0"] = {{"lambda_max", ext_0.first}, {"lambda_min", ext_0.second}};
  adaloss::write_file(cfg.out_dir + "/gram.json", j.dump(2) + "\n");
  std::printf("H_inf: lambda_max=%s lambda_min=%s\nH(0):  lambda_max=%s lambda_min=%s\n",
              adaloss::format_double(ext_inf.first).c_str(),
              adaloss::format_double(ext_inf.second).c_str(),
              adaloss::format_double(ext_0.first).c_str(),
              adaloss::format_double(ext_0.second).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive-stepsize optimization laboratory"};
  app.require_subcommand(1);

  CommonFlags gen_flags, run_flags, sweep_flags, verify_flags, gram_flags;
  auto* gen = app.add_subcommand("gen", "generate a problem file");
  attach_common_flags(gen, gen_flags);
  auto* run = app.add_subcommand("run", "run one experiment");
  attach_common_flags(run, run_flags);
  auto* sweep = app.add_subcommand("sweep", "run a b0 sweep");
  attach_common_flags(sweep, sweep_flags);
  auto* verify = app.add_subcommand("verify", "evaluate the bound suite, no training");
  attach_common_flags(verify, verify_flags);
  auto* gram = app.add_subcommand("gram", "H_inf / H(0) eigenvalue report");
  attach_common_flags(gram, gram_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(load_config(gen_flags));
    if (run->parsed()) return cmd_run(load_config(run_flags));
    if (sweep->parsed()) return cmd_sweep(load_config(sweep_flags));
    if (verify->parsed()) return cmd_verify(load_config(verify_flags));
    if (gram->parsed()) return cmd_gram(load_config(gram_flags));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
