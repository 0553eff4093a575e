#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adaloss/controllers.hpp"
#include "adaloss/eigen_sym.hpp"
#include "adaloss/matrix.hpp"
#include "adaloss/rng.hpp"

namespace adaloss {

enum class Mode { Deterministic, Stochastic };
enum class Conditioning { IID, Correlated };

/// Noiseless regression instance: y = X w* exactly, with the
/// eigendecomposition of X^T X attached (lambda_1 >= ... >= lambda_d > 0).
struct LinRegProblem {
  DenseMatrix x;
  Vector y;
  Vector w_star;
  SpectralDecomposition spectral;  // of X^T X

  std::size_t n() const { return x.rows(); }
  std::size_t d() const { return x.cols(); }
  double lambda1() const { return spectral.eigenvalues.front(); }
  double lambdan() const { return spectral.eigenvalues.back(); }

  /// Coordinates of v in the eigenbasis: V^T v.
  Vector to_hat(const Vector& v) const;
};

struct DegenerateProblemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

LinRegProblem gen_problem(std::size_t n, std::size_t d, Conditioning conditioning,
                          RngStream& stream);
LinRegProblem make_problem(DenseMatrix x, Vector w_star);

/// The b^2 increment for one step at w. Deterministic: AdaGradNorm uses
/// ||X^T(Xw-y)||^2, AdaLoss ||Xw-y||^2. Stochastic: AdaGradNorm
/// ||x_xi (x_xi^T w - y_xi)||^2, AdaLoss (x_xi^T w - y_xi)^2, batch-averaged.
double linreg_signal(ControllerKind kind, Mode mode, const LinRegProblem& problem,
                     const Vector& w, std::span<const std::uint32_t> batch);

struct LinRegStep {
  std::uint64_t iter = 0;
  double loss = 0.0;      // 0.5 ||Xw - y||^2
  double error = 0.0;     // ||w - w*||^2
  double b = 0.0;         // post-update denominator at this iterate
  double eff_lr = 0.0;    // eta / b used to reach this iterate (0 at iter 0)
  double hat_error_1 = 0.0;  // ([V^T w]_1 - [V^T w*]_1)^2
};

struct LinRegTrajectory {
  std::vector<LinRegStep> steps;
  std::vector<Vector> iterates;  // w at every recorded step
  bool diverged = false;
  std::uint64_t iterations_used = 0;  // steps actually taken
  double sup_b = 0.0;
  bool reached_tol = false;
  double eta = 1.0;
};

constexpr double kDivergenceThreshold = 1e12;  // on ||w - w*||^2

/// Iterates w <- w - (eta/b_{t+1}) g with signal-then-step ordering.
/// Terminates at `steps`, at error <= tol, or with the divergence flag once
/// the error exceeds kDivergenceThreshold or turns non-finite.
LinRegTrajectory run_linreg(const LinRegProblem& problem, ControllerState controller,
                            Mode mode, std::uint64_t steps, std::size_t batch_size,
                            double tol, RngStream& stream, const Vector* w0 = nullptr);

/// Adam-family variant on the weight vector; loss fed to the AdamLoss
/// accumulator is the (mini-batch) objective value at the current iterate.
LinRegTrajectory run_linreg_adam(const LinRegProblem& problem, AdamState state, Mode mode,
                                 std::uint64_t steps, std::size_t batch_size, double tol,
                                 RngStream& stream, const Vector* w0 = nullptr);

/// One step of the per-dimension dynamics: (1 - eta*lambda_i/b_next)^2 * s_i.
double hat_dynamics_step(double s_i, double b_next, double eta, double lambda_i);

/// Closed-form iteration bounds, evaluated verbatim per method and case.
struct TheoryBounds {
  char case_label = 'a';      // 'a' if b0 >= eta*lambda_1/2 else 'b'
  double t_total = 0.0;       // iterations to error <= eps (ceil applied)
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;          // case (a) terms
  double s = 0.0, tbar1 = 0.0, tbar2 = 0.0, tbar3 = 0.0;  // case (b) terms
  double delta_s = 0.0;
  double log_numerator = 0.0;  // ||Delta||^2 entering the log factor
};

struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

TheoryBounds bound_T(const LinRegProblem& problem, ControllerKind method, double b0,
                     double eta, double eps, const Vector& w0);

/// Crossing-iteration bounds for 2 b0 < eta lambda_1; returns (N, N_adaloss).
/// Requires s0 = ([V^T w0]_1 - [V^T w*]_1)^2 > 0.
std::pair<double, double> bound_crossing(const LinRegProblem& problem, double b0,
                                         double eta, const Vector& w0);

/// Limit bound on b: eta*lambda_1 + ||X(w0-w*)||^2/eta (AdaGradNorm) or
/// eta*lambda_1 + ||w0-w*||^2/eta (AdaLoss). `hypothesis_ok` reports whether
/// b0 >= eta*lambda_1 held.
double bound_b_limit(const LinRegProblem& problem, double b0, double eta, const Vector& w0,
                     ControllerKind method, bool* hypothesis_ok = nullptr);

/// Stochastic analogue for single-sample runs started below the threshold.
/// Uses the per-sample constant L = sup_i ||x_i||^2 (the smoothness constant
/// of the sampled objectives): with J the first index where b_J > eta*L,
///   sup b <= eta L + (L/eta) * ||w_{J-1} - w*||^2          (AdaGradNorm)
///   sup b <= eta L + (1/eta) * ||w_{J-1} - w*||^2          (AdaLoss)
/// and ||w_{J-1} - w*||^2 <= ||w0 - w*||^2 + eta^2 * fac * (2 log(eta L/b0) + 1)
/// with fac = 1 (AdaGradNorm) or L (AdaLoss).
double bound_b_limit_stochastic(const LinRegProblem& problem, double b0, double eta,
                                const Vector& w0, ControllerKind method);

/// sup_i ||x_i||^2 over the rows of X.
double sup_row_norm_squared(const LinRegProblem& problem);

enum class RuilKind { LossLR, Gradient };

struct RuilEstimate {
  double mu = 0.0;
  double gamma = 0.0;
  double eps = 0.0;
  RuilKind kind = RuilKind::LossLR;
};

struct EstimationFailureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Samples probe points on spheres ||w - w*||^2 in {2 eps, 10 eps, 100 eps},
/// sweeps a mu grid, and returns the (mu, gamma) pair maximizing mu * gamma,
/// where gamma(mu) is the worst-case over probes of the event fraction.
RuilEstimate estimate_ruil(const LinRegProblem& problem, double eps, RuilKind kind,
                           std::size_t num_probe_points, RngStream& stream);

/// N = ceil((C^2 - b0^2)/(mu gamma eps) + delta/gamma) + 1 with C = eta*lambda1.
/// When delta < 0 is passed, the default 0.1 * gamma * N0 with one fixed-point
/// refinement is used.
std::uint64_t bound_stochastic_N(double mu, double gamma, double eps, double b0, double eta,
                                 double lambda1, double delta = -1.0);

struct InequalityCheck {
  std::string name;
  std::uint64_t steps_checked = 0;
  std::uint64_t violations = 0;
  double worst_violation = 0.0;  // relative slack of the worst offender
};

struct InequalityReport {
  std::vector<InequalityCheck> checks;
  bool all_ok() const;
};

/// Per-step audit of the descent inequalities along a deterministic
/// trajectory: contraction (ineq2, gated on b_{t+1} >= eta*lambda_1/2),
/// mixed bound (ineq3) and ||X(w-w*)||^2 descent (ineq1), with 1e-9
/// relative slack.
InequalityReport verify_inequalities(const LinRegProblem& problem,
                                     const LinRegTrajectory& trajectory);

}  // namespace adaloss
