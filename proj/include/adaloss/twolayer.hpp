#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adaloss/controllers.hpp"
#include "adaloss/eigen_sym.hpp"
#include "adaloss/linreg.hpp"  // Mode
#include "adaloss/matrix.hpp"
#include "adaloss/rng.hpp"

namespace adaloss {

/// Two-layer ReLU network f(x) = (1/sqrt(m)) sum_r a_r relu(<w_r, x>) with
/// the output signs a fixed at initialization and the first layer trained.
struct TwoLayerNet {
  DenseMatrix w;   // m x d, row r is w_r
  Vector a;        // signs, +-1
  DenseMatrix w0;  // frozen initialization snapshot

  std::size_t m() const { return w.rows(); }
  std::size_t d() const { return w.cols(); }

  /// max_r ||w_r - w_r(0)||.
  double max_drift() const;
};

TwoLayerNet init_net(std::size_t m, std::size_t d, RngStream& stream);

/// Unit-row inputs with bounded labels.
struct DataSet {
  DenseMatrix x;  // n x d, each row unit norm
  Vector y;

  std::size_t n() const { return x.rows(); }
  std::size_t d() const { return x.cols(); }
};

DataSet make_dataset(DenseMatrix x, Vector y);
/// Gaussian directions normalized to unit rows, labels uniform in
/// [-y_bound, y_bound].
DataSet gen_dataset(std::size_t n, std::size_t d, RngStream& stream, double y_bound = 1.0);

Vector forward(const TwoLayerNet& net, const DataSet& data);

/// (L, residual) with residual = y - u and L = 0.5 ||residual||^2.
std::pair<double, Vector> loss_and_residual(const TwoLayerNet& net, const DataSet& data);

/// Row r = -(1/sqrt(m)) sum_i residual_i a_r x_i I{w_r^T x_i >= 0}; the
/// gradient of L at the current weights (residual = y - u).
DenseMatrix per_neuron_gradient(const TwoLayerNet& net, const DataSet& data,
                                const Vector& residual);

double max_row_norm(const DenseMatrix& g);

/// Closed-form infinite-width Gram matrix:
/// H_ij = x_i^T x_j (pi - arccos(x_i^T x_j)) / (2 pi), diagonal exactly 1/2.
DenseMatrix gram_infinity(const DataSet& data);

/// Finite-width Gram H_ij = (1/m) sum_r x_i^T x_j I{w_r^T x_i >= 0, w_r^T x_j >= 0}.
DenseMatrix gram_empirical(const TwoLayerNet& net, const DataSet& data);

/// Neurons whose activation pattern can flip within radius R of the frozen
/// initialization: S_i_perp = { r : |w_r(0)^T x_i| < R }.
struct PatternSets {
  double radius = 0.0;
  std::vector<std::vector<std::uint32_t>> s_perp;  // per sample
  std::size_t total_perp = 0;                      // sum_i |S_i_perp|
};

/// Returns the pattern sets (from the initialization snapshot) and the
/// perturbation part H_perp assembled with the *current* activations.
std::pair<PatternSets, DenseMatrix> pattern_sets(const TwoLayerNet& net, const DataSet& data,
                                                 double radius);

struct NetStep {
  std::uint64_t iter = 0;
  double loss = 0.0;  // ||y - u||^2 (deterministic) or its minibatch estimate
  double b = 0.0;
  double eff_lr = 0.0;
  double max_drift = 0.0;
  double grad_max_norm = 0.0;  // max_r ||dL/dw_r|| (deterministic steps)
  double lambda_min_h = 0.0;
  double lambda_max_h = 0.0;
  bool has_eigs = false;
};

struct NetTrajectory {
  std::vector<NetStep> steps;
  bool diverged = false;
  bool reached_tol = false;
  std::uint64_t iterations_used = 0;
  double sup_b = 0.0;
  double eta = 1.0;
  Mode mode = Mode::Deterministic;
  double lambda_max_h0 = 0.0;  // eigenvalues of H(0)
  double lambda_min_h0 = 0.0;
  /// First index with b_k >= eta * lambda_max(H(0)); -1 when never crossed.
  std::int64_t crossing_t0 = -1;
  std::string loss_normalization;
};

struct TrainOptions {
  Mode mode = Mode::Deterministic;
  std::size_t batch_size = 1;
  std::uint64_t steps = 1000;
  double tol = 1e-8;
  std::size_t eig_cadence = 10;  // 0 disables eigen tracking
  bool record_gradient_norm = true;
};

/// Trains the first layer in place with signal-then-step ordering; records
/// loss, b, effective stepsize, drift, and H(k) extremes at the cadence.
NetTrajectory train(TwoLayerNet& net, const DataSet& data, ControllerState controller,
                    const TrainOptions& options, RngStream& stream);

/// Adam-family variant operating on the flattened first layer.
NetTrajectory train_adam(TwoLayerNet& net, const DataSet& data, AdamState state,
                         const TrainOptions& options, RngStream& stream);

/// Closed-form constants and bounds around the two-layer analysis.
struct TwoLayerBounds {
  double r = 0.0;        // c lambda0 delta / n^3
  double r_prime = 0.0;  // 4 sqrt(n) ||y-u(0)|| / (sqrt(m) lambda0)
  double r_hat = 0.0;    // pre-crossing drift bound
  double r_tilde = 0.0;  // post-crossing drift bound
  double c_big = 0.0;    // C
  double c1 = 0.0;       // C_1
  double delta1 = 0.0;
  double c2 = 0.0;       // constant in sum |S_i_perp| <= C2 m n R / delta
  double b_inf = 0.0;
  double b_bar_inf = 0.0;
  double big_b = 0.0;    // B = 1 - 2 n C2 (sqrt(n)+n) R / (lambda0 delta)
  double stochastic_threshold = 0.0;  // 2n(2 alpha n^{-3/4} + eta) / (lambda0 B)
  std::uint64_t t0_dynamical = 0;     // Lemma-style either/or horizon
  double lambda0 = 0.0;
  double h_inf_norm = 0.0;
  // Echoed inputs, so downstream checks are self-contained.
  double m_width = 0.0;
  double n_samples = 0.0;
  double b0_used = 0.0;
  double alpha_used = 0.0;
  double eta_used = 0.0;
};

struct TwoLayerBoundsInput {
  double lambda0 = 0.0;      // lambda_min(H_inf)
  double h_inf_norm = 0.0;   // ||H_inf||
  double delta = 0.1;        // initialization failure probability
  double c_small = 0.01;     // small constant in R
  std::size_t n = 0;
  std::size_t m = 0;
  double eta = 1.0;
  double alpha = 1.0;
  double b0 = 1.0;
  double u0_residual_norm = 0.0;   // ||y - u(0)||
  double uT0_residual_norm = 0.0;  // ||y - u(T0)||, for R_tilde / b_inf
  std::uint64_t t0 = 0;            // crossing index entering R_hat
  double dyn_eps = 1.0;            // epsilon in the dynamical-system horizon
};

TwoLayerBounds bounds_and_constants(const TwoLayerBoundsInput& in);

/// Dynamical-system horizon: N = ceil((L^2 - b0^2)/(gamma sqrt(eps))) + 1.
std::uint64_t dynamical_horizon(double b0, double big_l, double gamma, double eps);

/// Monte Carlo audit of the expected one-step contraction of the stochastic
/// loss at a frozen iterate.
struct McCondition2Result {
  double loss_before = 0.0;   // ||y - u(k)||^2
  double mc_mean = 0.0;       // empirical mean of ||y - u(k+1)||^2
  double mc_stderr = 0.0;
  double b_k = 0.0;
  double threshold = 0.0;
  bool above_threshold = false;
  bool pass = false;  // mc_mean <= loss_before + 3 stderr (when applicable)
};

McCondition2Result mc_condition2(const TwoLayerNet& net, const DataSet& data,
                                 const ControllerState& controller, double threshold,
                                 std::size_t samples, RngStream& stream);

struct VerifyCheck {
  std::string name;
  double computed = 0.0;
  double realized = 0.0;
  std::uint64_t checked = 0;
  std::uint64_t violations = 0;
  bool applicable = true;
  bool pass = true;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_ok() const;
};

/// Trajectory-level checks: the gradient/loss sandwich, the empirical
/// contraction, drift and b bounds, monotonicity. Gated per check on the
/// recorded eigenvalues.
VerifyReport verify_suite(const NetTrajectory& trajectory, const TwoLayerBounds& bounds,
                          ControllerKind kind,
                          const std::vector<McCondition2Result>& mc_results = {});

}  // namespace adaloss
