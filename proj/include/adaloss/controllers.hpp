#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adaloss/matrix.hpp"

namespace adaloss {

struct InvalidSignalError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Scalar-denominator stepsize rules. Accumulating kinds keep b^2 (or b for
/// NormRuleLoss) as a running sum of nonnegative signals; the effective
/// stepsize is always eta / b with the post-update b.
enum class ControllerKind {
  AdaLoss,        // b^2 += alpha * |loss - c|
  AdaGradNorm,    // b^2 += ||grad||^2
  SquareRuleLoss, // b^2 += alpha^2 sqrt(n) ||y - u||^2
  NormRuleLoss,   // b   += alpha sqrt(n) ||y - u||
  Constant,       // b   = b0
  DecaySqrt,      // b   = b0 + c_s sqrt(t)
};

const char* to_string(ControllerKind kind);
bool is_accumulating(ControllerKind kind);

/// Signals are computed by the testbed adapters (they differ per kind and
/// per mode); the controller itself only folds them into b.
struct ControllerState {
  ControllerKind kind = ControllerKind::AdaLoss;
  double b = 1.0;
  double b0 = 1.0;
  double eta = 1.0;
  double alpha = 1.0;
  double c = 0.0;    // loss offset, AdaLoss only
  double c_s = 0.0;  // decay coefficient, DecaySqrt only
  std::uint64_t step_index = 0;
};

ControllerState make_controller(ControllerKind kind, double b0, double eta,
                                double alpha = 1.0, double c = 0.0, double c_s = 0.0);

/// Folds one nonnegative signal into the state. Throws InvalidSignalError on
/// a negative or non-finite signal.
ControllerState accumulate_signal(ControllerState state, double signal);

/// eta / b with the post-update b (the denominator is updated before the
/// weight step uses it).
double effective_stepsize(const ControllerState& state);

/// Adam with the AdaLoss / Sqrt outer schedules for the eta parameter.
enum class AdamKind { Adam, AdamLoss, AdamSqrt };

const char* to_string(AdamKind kind);

struct AdamState {
  AdamKind kind = AdamKind::Adam;
  Vector m1;  // first moment
  Vector v;   // second moment, entrywise >= 0
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  std::uint64_t t = 0;
  double eta = 0.001;  // fixed stepsize (Adam)
  double b = 0.0;      // loss accumulator (AdamLoss), b_t = b_{t-1} + alpha |f_t|
  double b0 = 0.0;
  double alpha = 1.0;  // AdamLoss gain
};

AdamState make_adam(AdamKind kind, std::size_t dim, double eta_or_b0, double alpha = 1.0,
                    double beta1 = 0.9, double beta2 = 0.99, double epsilon = 1e-8);

/// One step: updates moments and the outer schedule, returns the new state
/// and the additive parameter direction (already scaled by -eta_t).
std::pair<AdamState, Vector> adam_family_step(AdamState state, std::span<const double> grad,
                                              double loss_value);

}  // namespace adaloss
