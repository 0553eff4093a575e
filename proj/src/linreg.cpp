#include "adaloss/linreg.hpp"

#include <algorithm>
#include <cmath>

namespace adaloss {

namespace {

DenseMatrix xtx(const DenseMatrix& x) {
  // Gram of the columns; assembled symmetric by construction.
  const std::size_t d = x.cols();
  DenseMatrix g(d, d);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      const double ra = r[a];
      for (std::size_t b = a; b < d; ++b) g(a, b) += ra * r[b];
    }
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b) g(b, a) = g(a, b);
  return g;
}

Vector residual(const LinRegProblem& p, const Vector& w) {
  Vector r = matvec(p.x, w);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= p.y[i];
  return r;  // Xw - y
}

double top_hat_gap_squared(const LinRegProblem& p, const Vector& w0) {
  // ([V^T w0]_1 - [V^T w*]_1)^2, the coordinate scaled by lambda_1.
  const Vector delta = w0 - p.w_star;
  Vector col(p.d());
  for (std::size_t i = 0; i < p.d(); ++i) col[i] = p.spectral.basis(i, 0);
  const double gap = dot(col, delta);
  return gap * gap;
}

}  // namespace

Vector LinRegProblem::to_hat(const Vector& v) const {
  return matvec_transposed(spectral.basis, v);
}

LinRegProblem make_problem(DenseMatrix x, Vector w_star) {
  if (x.rows() < x.cols() || x.cols() == 0)
    throw DimensionError("make_problem: need n >= d >= 1");
  if (w_star.size() != x.cols()) throw DimensionError("make_problem: w_star length != d");
  LinRegProblem p;
  p.y = matvec(x, w_star);
  p.x = std::move(x);
  p.w_star = std::move(w_star);
  p.spectral = sym_eigendecompose(xtx(p.x));
  if (!(p.lambdan() > 1e-10 * p.lambda1()))
    throw DegenerateProblemError("make_problem: X^T X is numerically rank deficient");
  return p;
}

LinRegProblem gen_problem(std::size_t n, std::size_t d, Conditioning conditioning,
                          RngStream& stream) {
  if (n < d || d == 0) throw DimensionError("gen_problem: need n >= d >= 1");
  for (int attempt = 0; attempt < 2; ++attempt) {
    DenseMatrix x = sample_gaussian_matrix(n, d, stream);
    if (conditioning == Conditioning::Correlated) {
      // Shared component across rows; the common direction makes lambda_1
      // scale with n.
      const Vector shared = sample_gaussian_vector(d, stream);
      const double rho = 0.5;
      for (std::size_t i = 0; i < n; ++i) {
        auto row = x.row(i);
        for (std::size_t j = 0; j < d; ++j)
          row[j] = std::sqrt(1.0 - rho) * row[j] + std::sqrt(rho) * shared[j];
      }
    }
    Vector w_star = sample_gaussian_vector(d, stream);
    try {
      return make_problem(std::move(x), std::move(w_star));
    } catch (const DegenerateProblemError&) {
      if (attempt == 1) throw;
    }
  }
  throw DegenerateProblemError("gen_problem: unreachable");
}

double linreg_signal(ControllerKind kind, Mode mode, const LinRegProblem& problem,
                     const Vector& w, std::span<const std::uint32_t> batch) {
  if (mode == Mode::Deterministic) {
    const Vector r = residual(problem, w);
    switch (kind) {
      case ControllerKind::AdaGradNorm:
        return norm2_squared(matvec_transposed(problem.x, r));
      case ControllerKind::AdaLoss:
        return norm2_squared(r);
      default:
        return 0.0;  // Constant / DecaySqrt take no signal
    }
  }
  if (batch.empty()) throw DimensionError("linreg_signal: empty batch in stochastic mode");
  double acc = 0.0;
  for (std::uint32_t idx : batch) {
    if (idx >= problem.n()) throw DimensionError("linreg_signal: index out of range");
    auto xi = problem.x.row(idx);
    const double res = dot(xi, w) - problem.y[idx];
    switch (kind) {
      case ControllerKind::AdaGradNorm:
        acc += norm2_squared(xi) * res * res;  // ||x_xi (x_xi^T w - y_xi)||^2
        break;
      case ControllerKind::AdaLoss:
        acc += res * res;
        break;
      default:
        break;
    }
  }
  return acc / static_cast<double>(batch.size());
}

LinRegTrajectory run_linreg(const LinRegProblem& problem, ControllerState controller,
                            Mode mode, std::uint64_t steps, std::size_t batch_size,
                            double tol, RngStream& stream, const Vector* w0) {
  if (steps < 1) throw ParameterError("run_linreg: steps must be >= 1");
  if (!(tol > 0.0)) throw ParameterError("run_linreg: tol must be > 0");
  if (mode == Mode::Stochastic && (batch_size < 1 || batch_size > problem.n()))
    throw ParameterError("run_linreg: batch_size must be in [1, n]");

  Vector w = (w0 != nullptr) ? *w0 : Vector(problem.d(), 0.0);
  if (w.size() != problem.d()) throw DimensionError("run_linreg: w0 length != d");

  LinRegTrajectory traj;
  traj.sup_b = controller.b;
  traj.eta = controller.eta;

  auto record = [&](std::uint64_t iter, double eff_lr) {
    LinRegStep row;
    row.iter = iter;
    const Vector r = residual(problem, w);
    row.loss = 0.5 * norm2_squared(r);
    row.error = norm2_squared(w - problem.w_star);
    row.b = controller.b;
    row.eff_lr = eff_lr;
    row.hat_error_1 = top_hat_gap_squared(problem, w);
    traj.steps.push_back(row);
    traj.iterates.push_back(w);
    return row.error;
  };

  double err = record(0, effective_stepsize(controller));
  if (err <= tol) {
    traj.reached_tol = true;
    return traj;
  }

  std::vector<std::uint32_t> batch(mode == Mode::Stochastic ? batch_size : 0);
  for (std::uint64_t t = 0; t < steps; ++t) {
    Vector grad;
    if (mode == Mode::Deterministic) {
      grad = matvec_transposed(problem.x, residual(problem, w));
    } else {
      for (auto& idx : batch)
        idx = static_cast<std::uint32_t>(stream.next_index(problem.n()));
      grad.assign(problem.d(), 0.0);
      for (std::uint32_t idx : batch) {
        auto xi = problem.x.row(idx);
        const double res = dot(xi, w) - problem.y[idx];
        for (std::size_t j = 0; j < problem.d(); ++j) grad[j] += res * xi[j];
      }
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (double& g : grad) g *= inv;
    }

    // Signal first, then the step uses the post-update denominator.
    const double signal =
        is_accumulating(controller.kind)
            ? linreg_signal(controller.kind, mode, problem, w, batch)
            : 0.0;
    controller = accumulate_signal(controller, signal);
    traj.sup_b = std::max(traj.sup_b, controller.b);
    const double lr = effective_stepsize(controller);

    bool finite = true;
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] -= lr * grad[j];
      if (!std::isfinite(w[j])) finite = false;
    }
    if (!finite) {
      traj.diverged = true;
      traj.iterations_used = t + 1;
      return traj;
    }

    err = record(t + 1, lr);
    traj.iterations_used = t + 1;
    if (!std::isfinite(err) || err > kDivergenceThreshold) {
      traj.diverged = true;
      return traj;
    }
    if (err <= tol) {
      traj.reached_tol = true;
      return traj;
    }
  }
  return traj;
}

LinRegTrajectory run_linreg_adam(const LinRegProblem& problem, AdamState state, Mode mode,
                                 std::uint64_t steps, std::size_t batch_size, double tol,
                                 RngStream& stream, const Vector* w0) {
  if (steps < 1) throw ParameterError("run_linreg_adam: steps must be >= 1");
  if (!(tol > 0.0)) throw ParameterError("run_linreg_adam: tol must be > 0");
  if (mode == Mode::Stochastic && (batch_size < 1 || batch_size > problem.n()))
    throw ParameterError("run_linreg_adam: batch_size must be in [1, n]");
  if (state.m1.size() != problem.d())
    throw DimensionError("run_linreg_adam: state dimension != d");

  Vector w = (w0 != nullptr) ? *w0 : Vector(problem.d(), 0.0);
  LinRegTrajectory traj;
  traj.eta = state.eta;
  traj.sup_b = state.b;

  std::vector<std::uint32_t> batch(mode == Mode::Stochastic ? batch_size : 0);
  for (std::uint64_t t = 0;; ++t) {
    LinRegStep row;
    row.iter = t;
    row.b = state.kind == AdamKind::Adam ? state.b0 : state.b;
    const Vector r = residual(problem, w);
    row.loss = 0.5 * norm2_squared(r);
    row.error = norm2_squared(w - problem.w_star);
    row.hat_error_1 = top_hat_gap_squared(problem, w);

    Vector grad;
    double loss_value = 0.0;
    if (mode == Mode::Deterministic) {
      grad = matvec_transposed(problem.x, r);
      loss_value = row.loss;
    } else {
      for (auto& idx : batch)
        idx = static_cast<std::uint32_t>(stream.next_index(problem.n()));
      grad.assign(problem.d(), 0.0);
      double acc = 0.0;
      for (std::uint32_t idx : batch) {
        auto xi = problem.x.row(idx);
        const double res = dot(xi, w) - problem.y[idx];
        acc += res * res;
        for (std::size_t j = 0; j < problem.d(); ++j) grad[j] += res * xi[j];
      }
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (double& g : grad) g *= inv;
      loss_value = 0.5 * acc * inv;
    }

    bool finite = row.error <= kDivergenceThreshold && std::isfinite(row.error);
    for (double g : grad)
      if (!std::isfinite(g)) finite = false;
    if (!finite) {
      traj.steps.push_back(row);
      traj.iterates.push_back(w);
      traj.iterations_used = t;
      traj.diverged = true;
      return traj;
    }

    auto [next, direction] = adam_family_step(std::move(state), grad, loss_value);
    state = std::move(next);
    row.eff_lr = state.kind == AdamKind::Adam
                     ? state.eta
                     : (state.kind == AdamKind::AdamLoss
                            ? 1.0 / std::sqrt(state.b)
                            : 1.0 / std::sqrt(state.b0 * state.b0 +
                                              static_cast<double>(state.t)));
    traj.sup_b = std::max(traj.sup_b, state.b);
    traj.steps.push_back(row);
    traj.iterates.push_back(w);
    traj.iterations_used = t;
    if (row.error <= tol) {
      traj.reached_tol = true;
      return traj;
    }
    if (t == steps) return traj;
    for (std::size_t j = 0; j < w.size(); ++j) w[j] += direction[j];
  }
}

double hat_dynamics_step(double s_i, double b_next, double eta, double lambda_i) {
  const double f = 1.0 - eta * lambda_i / b_next;
  return f * f * s_i;
}

namespace {

// Exact per-dimension dynamics used to realize b_{s+1} for the case (b)
// indicator. Returns the b value one update after the first crossing of
// eta*lambda_1/2.
double realized_b_after_crossing(const LinRegProblem& p, ControllerKind method, double b0,
                                 double eta, const Vector& w0) {
  const auto& lambda = p.spectral.eigenvalues;
  Vector hat = p.to_hat(w0 - p.w_star);
  Vector s(hat.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = hat[i] * hat[i];
  double b = b0;
  const double threshold = eta * p.lambda1() / 2.0;
  bool crossed = b >= threshold;
  for (std::uint64_t t = 0; t < 10'000'000; ++t) {
    double signal = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double factor = (method == ControllerKind::AdaGradNorm) ? lambda[i] * lambda[i]
                                                                    : lambda[i];
      signal += factor * s[i];
    }
    b = std::sqrt(b * b + signal);
    for (std::size_t i = 0; i < s.size(); ++i)
      s[i] = hat_dynamics_step(s[i], b, eta, lambda[i]);
    if (crossed) return b;
    if (b >= threshold) crossed = true;
  }
  return b;
}

}  // namespace

TheoryBounds bound_T(const LinRegProblem& problem, ControllerKind method, double b0,
                     double eta, double eps, const Vector& w0) {
  if (!(b0 > 0.0)) throw ParameterError("bound_T: b0 must be > 0");
  if (!(eps > 0.0)) throw ParameterError("bound_T: eps must be > 0");
  if (method != ControllerKind::AdaGradNorm && method != ControllerKind::AdaLoss)
    throw ParameterError("bound_T: method must be AdaGradNorm or AdaLoss");

  const double l1 = problem.lambda1();
  const double ln = problem.lambdan();
  const Vector delta0 = w0 - problem.w_star;
  const double delta0_sq = norm2_squared(delta0);
  if (!(delta0_sq > eps)) throw ParameterError("bound_T: requires ||w0 - w*||^2 > eps");

  const Vector xd = matvec(problem.x, delta0);
  const double x_delta_sq = norm2_squared(xd);                      // ||X Delta0||^2
  const double xtx_delta_sq = norm2_squared(matvec_transposed(problem.x, xd));

  TheoryBounds out;
  const bool case_a = b0 >= eta * l1 / 2.0;  // boundary counts as (a)
  out.case_label = case_a ? 'a' : 'b';

  if (case_a) {
    const double b1_sq =
        b0 * b0 + (method == ControllerKind::AdaGradNorm ? xtx_delta_sq : x_delta_sq);
    const double b1 = std::sqrt(b1_sq);
    const bool in_window = b1 > eta * l1 / 2.0 && b1 < eta * (l1 + ln) / 2.0;
    out.t1 = in_window ? b1_sq / (2.0 * b1 - eta * l1) : 0.0;
    out.t2 = eta * (l1 + ln) / 2.0;
    if (method == ControllerKind::AdaGradNorm) {
      out.t3 = l1 + x_delta_sq / (eta * eta);
    } else {
      // AdaLoss replaces ||X Delta0||^2 by ||Delta0||^2 and folds T2 into T1.
      out.t1 = std::max(out.t1, (l1 + ln) / 2.0);
      out.t2 = (l1 + ln) / 2.0;
      out.t3 = l1 + delta0_sq / (eta * eta);
    }
    out.log_numerator = delta0_sq;
    const double dominant = std::max({out.t1, out.t2, out.t3});
    out.t_total =
        std::ceil(dominant / ln * std::log(out.log_numerator / eps)) + 1.0;
    return out;
  }

  // Case (b): b0 < eta*lambda_1/2.
  const double s0_sq = top_hat_gap_squared(problem, w0);
  if (!(s0_sq > 0.0))
    throw DegenerateProblemError("bound_T: top-eigendirection gap is zero in case (b)");

  const double cross_num = (eta * l1) * (eta * l1) - 4.0 * b0 * b0;
  if (method == ControllerKind::AdaGradNorm) {
    out.s = 2.0 * std::log(1.0 + cross_num / (eta * eta * l1 * l1)) /
            std::log(1.0 + 4.0 / (eta * eta) * s0_sq);
  } else {
    out.s = 2.0 * std::log(1.0 + cross_num / (eta * eta * l1 * l1)) /
            std::log(1.0 + 4.0 / (eta * eta * l1) * s0_sq);
  }

  const double root = eta * l1 - std::sqrt(b0 * b0 + s0_sq);
  const double spread = l1 - ln;
  if (root == 0.0 || spread == 0.0) {
    out.delta_s = 0.0;  // delta_s blows up only on measure-zero inputs
  } else {
    out.delta_s = eta * eta * std::pow(l1 + ln, 4.0) * (1.0 + b0 * b0 / s0_sq) /
                  (4.0 * l1 * spread * spread * root * root);
  }

  const double b_after_cross = realized_b_after_crossing(problem, method, b0, eta, w0);
  const bool in_window =
      b_after_cross > eta * l1 / 2.0 && b_after_cross < eta * (l1 + ln) / 2.0;
  out.tbar1 = in_window ? (eta * ln + 5.0 * eta * l1) * (out.delta_s + 1.0) : 0.0;
  out.tbar2 = (l1 + ln) / 2.0;
  if (method == ControllerKind::AdaGradNorm) {
    out.tbar3 = l1 + x_delta_sq / (eta * eta) +
                l1 / eta * std::log(eta * eta * l1 / (2.0 * b0));
    out.log_numerator = delta0_sq + eta * eta * std::log(eta * l1 / (2.0 * b0));
  } else {
    out.tbar3 = l1 + delta0_sq / (eta * eta) +
                l1 / eta * std::log(eta * eta * l1 / (2.0 * b0));
    out.log_numerator = delta0_sq + eta * eta * std::log(eta * l1 / (2.0 * b0));
  }
  const double dominant = std::max({out.tbar1, out.tbar2, out.tbar3});
  out.t_total = std::ceil(dominant / ln * std::log(out.log_numerator / eps)) + 1.0;
  return out;
}

std::pair<double, double> bound_crossing(const LinRegProblem& problem, double b0, double eta,
                                         const Vector& w0) {
  const double l1 = problem.lambda1();
  if (!(2.0 * b0 < eta * l1))
    throw ParameterError("bound_crossing: requires 2 b0 < eta lambda_1");
  const double s0_sq = top_hat_gap_squared(problem, w0);
  if (!(s0_sq > 0.0))
    throw DegenerateProblemError("bound_crossing: s0 = 0, bound undefined");

  const double num = (eta * l1) * (eta * l1) - 4.0 * b0 * b0;
  const double n_agn = std::log(1.0 + num / (eta * eta * l1 * l1)) /
                           std::log(1.0 + 4.0 / (eta * eta) * s0_sq) +
                       1.0;
  const double n_adaloss = std::log(1.0 + num / (eta * eta * l1)) /
                               std::log(1.0 + 4.0 / (eta * eta * l1) * s0_sq) +
                           1.0;
  return {n_agn, n_adaloss};
}

double bound_b_limit(const LinRegProblem& problem, double b0, double eta, const Vector& w0,
                     ControllerKind method, bool* hypothesis_ok) {
  const double l1 = problem.lambda1();
  if (hypothesis_ok != nullptr) *hypothesis_ok = b0 >= eta * l1;
  const Vector delta0 = w0 - problem.w_star;
  if (method == ControllerKind::AdaGradNorm)
    return eta * l1 + norm2_squared(matvec(problem.x, delta0)) / eta;
  return eta * l1 + norm2_squared(delta0) / eta;
}

double sup_row_norm_squared(const LinRegProblem& problem) {
  double sup = 0.0;
  for (std::size_t i = 0; i < problem.n(); ++i)
    sup = std::max(sup, norm2_squared(problem.x.row(i)));
  return sup;
}

double bound_b_limit_stochastic(const LinRegProblem& problem, double b0, double eta,
                                const Vector& w0, ControllerKind method) {
  if (method != ControllerKind::AdaGradNorm && method != ControllerKind::AdaLoss)
    throw ParameterError("bound_b_limit_stochastic: method must be adaptive");
  const double big_l = sup_row_norm_squared(problem);
  const double delta0_sq = norm2_squared(w0 - problem.w_star);
  const double log_term =
      b0 < eta * big_l ? 2.0 * std::log(eta * big_l / b0) + 1.0 : 1.0;
  if (method == ControllerKind::AdaGradNorm) {
    const double wj_sq = delta0_sq + eta * eta * log_term;
    return eta * big_l + big_l / eta * wj_sq;
  }
  const double wj_sq = delta0_sq + eta * eta * big_l * log_term;
  return eta * big_l + wj_sq / eta;
}

RuilEstimate estimate_ruil(const LinRegProblem& problem, double eps, RuilKind kind,
                           std::size_t num_probe_points, RngStream& stream) {
  if (!(eps > 0.0)) throw ParameterError("estimate_ruil: eps must be > 0");
  if (num_probe_points < 1) throw ParameterError("estimate_ruil: need >= 1 probe point");

  const double radii[3] = {std::sqrt(2.0 * eps), std::sqrt(10.0 * eps),
                           std::sqrt(100.0 * eps)};
  const std::size_t n = problem.n();

  // Per probe, the n event statistics: <x_i, w - w*>^2 (LossLR) or
  // ||x_i||^2 <x_i, w - w*>^2 (Gradient), both relative to ||w - w*||^2.
  std::vector<std::vector<double>> stats(num_probe_points);
  double vmax = 0.0;
  double vmin_pos = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < num_probe_points; ++p) {
    const Vector w = sample_sphere(problem.w_star, radii[p % 3], stream);
    const Vector delta = w - problem.w_star;
    const double dsq = norm2_squared(delta);
    stats[p].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto xi = problem.x.row(i);
      const double ip = dot(xi, delta);
      double v = ip * ip / dsq;
      if (kind == RuilKind::Gradient) v *= norm2_squared(xi);
      stats[p][i] = v;
      vmax = std::max(vmax, v);
      if (v > 0.0) vmin_pos = std::min(vmin_pos, v);
    }
  }
  if (!(vmax > 0.0)) throw EstimationFailureError("estimate_ruil: all statistics are zero");

  // Log grid of mu candidates; gamma(mu) is the worst probe's event fraction.
  const int grid = 96;
  double best_mu = 0.0, best_gamma = 0.0, best_product = -1.0;
  const double lo = std::log(std::max(vmin_pos, vmax * 1e-12));
  const double hi = std::log(vmax);
  for (int g = 0; g < grid; ++g) {
    const double mu = std::exp(lo + (hi - lo) * g / (grid - 1));
    double gamma = 1.0;
    for (const auto& row : stats) {
      std::size_t count = 0;
      for (double v : row) count += (v >= mu) ? 1 : 0;
      gamma = std::min(gamma, static_cast<double>(count) / static_cast<double>(n));
    }
    if (gamma > 0.0 && mu * gamma > best_product) {
      best_product = mu * gamma;
      best_mu = mu;
      best_gamma = gamma;
    }
  }
  if (best_product <= 0.0)
    throw EstimationFailureError("estimate_ruil: no mu with positive gamma");
  return RuilEstimate{best_mu, best_gamma, eps, kind};
}

std::uint64_t bound_stochastic_N(double mu, double gamma, double eps, double b0, double eta,
                                 double lambda1, double delta) {
  if (!(mu > 0.0) || !(gamma > 0.0) || gamma > 1.0 || !(eps > 0.0) || !(b0 >= 0.0) ||
      !(eta > 0.0) || !(lambda1 > 0.0))
    throw ParameterError("bound_stochastic_N: parameters must be positive, gamma in (0,1]");
  const double c_sq = (eta * lambda1) * (eta * lambda1);
  const double base = std::max(0.0, c_sq - b0 * b0) / (mu * gamma * eps);
  if (delta < 0.0) {
    // Default Bernstein slack 0.1 * gamma * N0, refined once.
    const double n0 = std::ceil(base) + 1.0;
    delta = 0.1 * gamma * n0;
    const double n1 = std::ceil(base + delta / gamma) + 1.0;
    delta = 0.1 * gamma * n1;
  }
  return static_cast<std::uint64_t>(std::ceil(base + delta / gamma)) + 1;
}

bool InequalityReport::all_ok() const {
  for (const auto& c : checks)
    if (c.violations != 0) return false;
  return true;
}

InequalityReport verify_inequalities(const LinRegProblem& problem,
                                     const LinRegTrajectory& trajectory) {
  const double l1 = problem.lambda1();
  const double ln = problem.lambdan();
  const double eta_ = trajectory.eta;

  InequalityCheck ineq1{"ineq1_xres_descent", 0, 0, 0.0};
  InequalityCheck ineq2{"ineq2_contraction", 0, 0, 0.0};
  InequalityCheck ineq3{"ineq3_mixed", 0, 0, 0.0};

  auto note = [](InequalityCheck& c, double lhs, double rhs) {
    ++c.steps_checked;
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    const double slack = (lhs - rhs) / scale;
    if (slack > 1e-9) {
      ++c.violations;
      c.worst_violation = std::max(c.worst_violation, slack);
    }
  };

  for (std::size_t t = 0; t + 1 < trajectory.iterates.size(); ++t) {
    const Vector& wt = trajectory.iterates[t];
    const Vector& wn = trajectory.iterates[t + 1];
    const double b_next = trajectory.steps[t + 1].b;

    const Vector dt = wt - problem.w_star;
    const Vector dn = wn - problem.w_star;
    const Vector xdt = matvec(problem.x, dt);
    const Vector xdn = matvec(problem.x, dn);
    const double xtxdt_sq = norm2_squared(matvec_transposed(problem.x, xdt));
    const double err_t = norm2_squared(dt);
    const double err_n = norm2_squared(dn);

    // ineq2 requires b_{t+1} >= eta*lambda_1/2 for the contraction factor.
    if (b_next >= eta_ * l1 / 2.0) {
      const double factor =
          1.0 - 2.0 * eta_ * ln / b_next * (1.0 - eta_ * l1 / (2.0 * b_next));
      note(ineq2, err_n, factor * err_t);
    }

    const double f3 = 1.0 - 2.0 * eta_ * l1 * ln / ((ln + l1) * b_next);
    const double g3 = eta_ / b_next * (eta_ / b_next - 2.0 / (ln + l1));
    note(ineq3, err_n, f3 * err_t + g3 * xtxdt_sq);

    const double rhs1 = norm2_squared(xdt) - 2.0 * eta_ / b_next *
                                                 (1.0 - eta_ * l1 / (2.0 * b_next)) *
                                                 xtxdt_sq;
    note(ineq1, norm2_squared(xdn), rhs1);
  }

  InequalityReport report;
  report.checks = {ineq1, ineq2, ineq3};
  return report;
}

}  // namespace adaloss
