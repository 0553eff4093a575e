#include "adaloss/controllers.hpp"

#include <cmath>

namespace adaloss {

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::AdaLoss: return "adaloss";
    case ControllerKind::AdaGradNorm: return "adagradnorm";
    case ControllerKind::SquareRuleLoss: return "squarerule";
    case ControllerKind::NormRuleLoss: return "normrule";
    case ControllerKind::Constant: return "sgd-const";
    case ControllerKind::DecaySqrt: return "sgd-decaysqrt";
  }
  return "?";
}

bool is_accumulating(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::AdaLoss:
    case ControllerKind::AdaGradNorm:
    case ControllerKind::SquareRuleLoss:
    case ControllerKind::NormRuleLoss:
      return true;
    default:
      return false;
  }
}

ControllerState make_controller(ControllerKind kind, double b0, double eta, double alpha,
                                double c, double c_s) {
  if (!(b0 > 0.0)) throw InvalidSignalError("controller: b0 must be > 0");
  if (!(eta > 0.0)) throw InvalidSignalError("controller: eta must be > 0");
  if (!(alpha > 0.0)) throw InvalidSignalError("controller: alpha must be > 0");
  ControllerState s;
  s.kind = kind;
  s.b = b0;
  s.b0 = b0;
  s.eta = eta;
  s.alpha = alpha;
  s.c = c;
  s.c_s = c_s;
  return s;
}

ControllerState accumulate_signal(ControllerState state, double signal) {
  if (!(signal >= 0.0) || !std::isfinite(signal))
    throw InvalidSignalError("accumulate_signal: signal must be finite and >= 0");
  state.step_index += 1;
  switch (state.kind) {
    case ControllerKind::AdaLoss:
    case ControllerKind::AdaGradNorm:
    case ControllerKind::SquareRuleLoss:
      state.b = std::sqrt(state.b * state.b + signal);
      break;
    case ControllerKind::NormRuleLoss:
      state.b += signal;
      break;
    case ControllerKind::Constant:
      break;
    case ControllerKind::DecaySqrt:
      state.b = state.b0 + state.c_s * std::sqrt(static_cast<double>(state.step_index));
      break;
  }
  return state;
}

double effective_stepsize(const ControllerState& state) { return state.eta / state.b; }

const char* to_string(AdamKind kind) {
  switch (kind) {
    case AdamKind::Adam: return "adam";
    case AdamKind::AdamLoss: return "adamloss";
    case AdamKind::AdamSqrt: return "adamsqrt";
  }
  return "?";
}

AdamState make_adam(AdamKind kind, std::size_t dim, double eta_or_b0, double alpha,
                    double beta1, double beta2, double epsilon) {
  AdamState s;
  s.kind = kind;
  s.m1.assign(dim, 0.0);
  s.v.assign(dim, 0.0);
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  s.alpha = alpha;
  if (kind == AdamKind::Adam) {
    s.eta = eta_or_b0;
  } else {
    s.b = eta_or_b0;
    s.b0 = eta_or_b0;
  }
  return s;
}

std::pair<AdamState, Vector> adam_family_step(AdamState state, std::span<const double> grad,
                                              double loss_value) {
  if (grad.size() != state.m1.size())
    throw DimensionError("adam_family_step: gradient dimension mismatch");
  for (double g : grad) {
    if (!std::isfinite(g))
      throw InvalidSignalError("adam_family_step: non-finite gradient entry");
  }
  if (state.kind == AdamKind::AdamLoss && (!(loss_value >= 0.0) || !std::isfinite(loss_value)))
    throw InvalidSignalError("adam_family_step: loss value must be finite and >= 0");

  state.t += 1;
  double eta_t = state.eta;
  if (state.kind == AdamKind::AdamLoss) {
    state.b += state.alpha * std::abs(loss_value);
    eta_t = 1.0 / std::sqrt(state.b);
  } else if (state.kind == AdamKind::AdamSqrt) {
    eta_t = 1.0 / std::sqrt(state.b0 * state.b0 + static_cast<double>(state.t));
  }

  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  Vector direction(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.m1[i] = state.beta1 * state.m1[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m1[i] / bc1;
    const double vhat = state.v[i] / bc2;
    direction[i] = -eta_t * mhat / std::sqrt(vhat + state.epsilon);
  }
  return {std::move(state), std::move(direction)};
}

}  // namespace adaloss
