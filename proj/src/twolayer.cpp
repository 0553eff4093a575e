#include "adaloss/twolayer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "adaloss/parallel.hpp"

namespace adaloss {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Per-sample activation bitmasks over neurons. Indicator convention:
/// I{w_r^T x_i >= 0}, ties active.
struct ActivationMasks {
  std::size_t m = 0;
  std::size_t words = 0;
  std::vector<std::uint64_t> bits;  // n * words

  const std::uint64_t* row(std::size_t i) const { return bits.data() + i * words; }
};

ActivationMasks build_masks(const DenseMatrix& z /* m x n */) {
  ActivationMasks masks;
  masks.m = z.rows();
  masks.words = (z.rows() + 63) / 64;
  masks.bits.assign(z.cols() * masks.words, 0);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto zr = z.row(r);
    const std::uint64_t bit = 1ull << (r % 64);
    const std::size_t word = r / 64;
    for (std::size_t i = 0; i < z.cols(); ++i) {
      if (zr[i] >= 0.0) masks.bits[i * masks.words + word] |= bit;
    }
  }
  return masks;
}

std::size_t popcount_and(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
  std::size_t c = 0;
  for (std::size_t w = 0; w < words; ++w) c += std::popcount(a[w] & b[w]);
  return c;
}

DenseMatrix gram_from_masks(const ActivationMasks& masks, const DenseMatrix& xxt) {
  const std::size_t n = xxt.rows();
  DenseMatrix h(n, n);
  const double inv_m = 1.0 / static_cast<double>(masks.m);
  parallel_for(0, n, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const double cnt =
            static_cast<double>(popcount_and(masks.row(i), masks.row(j), masks.words));
        h(i, j) = xxt(i, j) * cnt * inv_m;
      }
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) h(i, j) = h(j, i);
  return h;
}

Vector predictions_from_z(const DenseMatrix& z, const Vector& a) {
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(z.rows()));
  Vector u(z.cols(), 0.0);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const double ar = a[r];
    auto zr = z.row(r);
    for (std::size_t i = 0; i < z.cols(); ++i) {
      if (zr[i] > 0.0) u[i] += ar * zr[i];
    }
  }
  for (double& v : u) v *= inv_sqrt_m;
  return u;
}

/// G_r = sum_i rtilde_i x_i I{z_ri >= 0}; the true gradient row is
/// (a_r/sqrt(m)) G_r. Computing the unscaled rows once serves the stepsize
/// signal, the recorded max row norm, and the weight update.
DenseMatrix unscaled_gradient_rows(const DenseMatrix& z, const DenseMatrix& x,
                                   const Vector& rtilde) {
  DenseMatrix g(z.rows(), x.cols());
  parallel_for(0, z.rows(), [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r) {
      auto zr = z.row(r);
      auto gr = g.row(r);
      for (std::size_t i = 0; i < x.rows(); ++i) {
        if (zr[i] >= 0.0) {
          const double c = rtilde[i];
          auto xi = x.row(i);
          for (std::size_t j = 0; j < x.cols(); ++j) gr[j] += c * xi[j];
        }
      }
    }
  });
  return g;
}

}  // namespace

double TwoLayerNet::max_drift() const {
  double worst = 0.0;
  for (std::size_t r = 0; r < m(); ++r) {
    double acc = 0.0;
    auto wr = w.row(r);
    auto wr0 = w0.row(r);
    for (std::size_t j = 0; j < d(); ++j) {
      const double diff = wr[j] - wr0[j];
      acc += diff * diff;
    }
    worst = std::max(worst, acc);
  }
  return std::sqrt(worst);
}

TwoLayerNet init_net(std::size_t m, std::size_t d, RngStream& stream) {
  if (m == 0 || d == 0) throw DimensionError("init_net: need m, d >= 1");
  TwoLayerNet net;
  net.w = sample_gaussian_matrix(m, d, stream);
  net.a.resize(m);
  for (double& s : net.a) s = stream.next_sign();
  net.w0 = net.w;
  return net;
}

DataSet make_dataset(DenseMatrix x, Vector y) {
  if (y.size() != x.rows()) throw DimensionError("make_dataset: label count != n");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (std::abs(norm2(x.row(i)) - 1.0) > 1e-9)
      throw DegenerateInputError("make_dataset: row " + std::to_string(i) +
                                 " is not unit norm");
  }
  return DataSet{std::move(x), std::move(y)};
}

DataSet gen_dataset(std::size_t n, std::size_t d, RngStream& stream, double y_bound) {
  DenseMatrix x = normalize_rows(sample_gaussian_matrix(n, d, stream));
  Vector y(n);
  for (double& v : y) v = (2.0 * stream.next_uniform() - 1.0) * y_bound;
  return DataSet{std::move(x), std::move(y)};
}

Vector forward(const TwoLayerNet& net, const DataSet& data) {
  if (net.d() != data.d()) throw DimensionError("forward: dimension mismatch");
  const DenseMatrix z = matmul_nt(net.w, data.x);
  return predictions_from_z(z, net.a);
}

std::pair<double, Vector> loss_and_residual(const TwoLayerNet& net, const DataSet& data) {
  const Vector u = forward(net, data);
  Vector residual(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) residual[i] = data.y[i] - u[i];
  return {0.5 * norm2_squared(residual), std::move(residual)};
}

DenseMatrix per_neuron_gradient(const TwoLayerNet& net, const DataSet& data,
                                const Vector& residual) {
  if (residual.size() != data.n()) throw DimensionError("per_neuron_gradient: bad residual");
  const DenseMatrix z = matmul_nt(net.w, data.x);
  Vector rtilde(residual.size());
  for (std::size_t i = 0; i < residual.size(); ++i) rtilde[i] = -residual[i];  // u - y
  DenseMatrix g = unscaled_gradient_rows(z, data.x, rtilde);
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(net.m()));
  for (std::size_t r = 0; r < net.m(); ++r) {
    const double scale = inv_sqrt_m * net.a[r];
    for (double& v : g.row(r)) v *= scale;
  }
  return g;
}

double max_row_norm(const DenseMatrix& g) {
  double worst = 0.0;
  for (std::size_t r = 0; r < g.rows(); ++r) worst = std::max(worst, norm2_squared(g.row(r)));
  return std::sqrt(worst);
}

DenseMatrix gram_infinity(const DataSet& data) {
  const std::size_t n = data.n();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(norm2(data.x.row(i)) - 1.0) > 1e-9)
      throw DegenerateInputError("gram_infinity: rows must be unit norm");
  }
  DenseMatrix h(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    h(i, i) = 0.5;
    for (std::size_t j = i + 1; j < n; ++j) {
      double ip = dot(data.x.row(i), data.x.row(j));
      ip = std::clamp(ip, -1.0, 1.0);  // unit-row inner products can
                                       // overshoot 1 by an ulp
      const double v = ip * (std::numbers::pi - std::acos(ip)) / kTwoPi;
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  return h;
}

DenseMatrix gram_empirical(const TwoLayerNet& net, const DataSet& data) {
  if (net.d() != data.d()) throw DimensionError("gram_empirical: dimension mismatch");
  const DenseMatrix z = matmul_nt(net.w, data.x);
  const ActivationMasks masks = build_masks(z);
  const DenseMatrix xxt = matmul_nt(data.x, data.x);
  return gram_from_masks(masks, xxt);
}

std::pair<PatternSets, DenseMatrix> pattern_sets(const TwoLayerNet& net, const DataSet& data,
                                                 double radius) {
  if (!(radius > 0.0)) throw ParameterError("pattern_sets: radius must be > 0");
  const DenseMatrix z0 = matmul_nt(net.w0, data.x);
  const DenseMatrix z = matmul_nt(net.w, data.x);
  const ActivationMasks act = build_masks(z);
  const DenseMatrix xxt = matmul_nt(data.x, data.x);

  PatternSets sets;
  sets.radius = radius;
  sets.s_perp.resize(data.n());

  // S_i_perp membership masks, decided by the initialization snapshot.
  const std::size_t words = act.words;
  std::vector<std::uint64_t> perp(data.n() * words, 0);
  for (std::size_t r = 0; r < net.m(); ++r) {
    const std::uint64_t bit = 1ull << (r % 64);
    const std::size_t word = r / 64;
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (std::abs(z0(r, i)) < radius) {
        perp[i * words + word] |= bit;
        sets.s_perp[i].push_back(static_cast<std::uint32_t>(r));
      }
    }
  }
  for (const auto& s : sets.s_perp) sets.total_perp += s.size();

  // H_perp sums over S_i_perp with the current activations; row-indexed by
  // i, hence not symmetric in general.
  DenseMatrix h_perp(data.n(), data.n());
  const double inv_m = 1.0 / static_cast<double>(net.m());
  std::vector<std::uint64_t> row_mask(words);
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t w = 0; w < words; ++w) row_mask[w] = perp[i * words + w] & act.row(i)[w];
    for (std::size_t j = 0; j < data.n(); ++j) {
      const double cnt =
          static_cast<double>(popcount_and(row_mask.data(), act.row(j), words));
      h_perp(i, j) = xxt(i, j) * cnt * inv_m;
    }
  }
  return {std::move(sets), std::move(h_perp)};
}

NetTrajectory train(TwoLayerNet& net, const DataSet& data, ControllerState controller,
                    const TrainOptions& options, RngStream& stream) {
  if (options.steps < 1) throw ParameterError("train: steps must be >= 1");
  const bool stochastic = options.mode == Mode::Stochastic;
  if (stochastic && (options.batch_size < 1 || options.batch_size > data.n()))
    throw ParameterError("train: batch_size must be in [1, n]");

  const std::size_t m = net.m();
  const std::size_t n = data.n();
  const std::size_t d = net.d();
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  NetTrajectory traj;
  traj.mode = options.mode;
  traj.eta = controller.eta;
  traj.sup_b = controller.b;
  traj.loss_normalization = "||y-u||^2";

  const bool track_eigs = options.eig_cadence > 0;
  DenseMatrix xxt;
  if (track_eigs) xxt = matmul_nt(data.x, data.x);

  auto fill_eigs = [&](NetStep& row) {
    const DenseMatrix z = matmul_nt(net.w, data.x);
    const DenseMatrix h = gram_from_masks(build_masks(z), xxt);
    const auto [lmax, lmin] = spectral_extremes(h);
    row.lambda_max_h = lmax;
    row.lambda_min_h = lmin;
    row.has_eigs = true;
  };

  std::vector<std::uint32_t> batch(stochastic ? options.batch_size : 0);
  // Stochastic scratch: pre-activations per batch sample (batch x m) and
  // residuals per sample.
  DenseMatrix zb(stochastic ? batch.size() : 0, stochastic ? m : 0);
  Vector res_b(batch.size(), 0.0);

  for (std::uint64_t t = 0;; ++t) {
    NetStep row;
    row.iter = t;
    row.b = controller.b;
    row.eff_lr = effective_stepsize(controller);
    row.max_drift = net.max_drift();
    if (track_eigs && t % options.eig_cadence == 0) fill_eigs(row);

    double residual_sq = 0.0;  // ||y-u||^2 or its minibatch estimate
    Vector rtilde;             // u - y
    DenseMatrix z;             // m x n, deterministic only

    if (!stochastic) {
      z = matmul_nt(net.w, data.x);
      const Vector u = predictions_from_z(z, net.a);
      rtilde.resize(n);
      for (std::size_t i = 0; i < n; ++i) rtilde[i] = u[i] - data.y[i];
      residual_sq = norm2_squared(rtilde);
    } else {
      for (auto& idx : batch) idx = static_cast<std::uint32_t>(stream.next_index(n));
      double acc = 0.0;
      for (std::size_t s = 0; s < batch.size(); ++s) {
        auto xrow = data.x.row(batch[s]);
        double usum = 0.0;
        auto zrow = zb.row(s);
        for (std::size_t r = 0; r < m; ++r) {
          const double zri = dot(net.w.row(r), xrow);
          zrow[r] = zri;
          if (zri > 0.0) usum += net.a[r] * zri;
        }
        res_b[s] = usum * inv_sqrt_m - data.y[batch[s]];
        acc += res_b[s] * res_b[s];
      }
      // n * mean((u_xi - y_xi)^2): unbiased estimate of ||y-u||^2.
      residual_sq = static_cast<double>(n) * acc / static_cast<double>(batch.size());
    }
    row.loss = residual_sq;

    if (t == 0) {
      traj.lambda_max_h0 = row.lambda_max_h;
      traj.lambda_min_h0 = row.lambda_min_h;
    }
    if (traj.crossing_t0 < 0 && traj.lambda_max_h0 > 0.0 &&
        controller.b >= controller.eta * traj.lambda_max_h0)
      traj.crossing_t0 = static_cast<std::int64_t>(t);

    if (!std::isfinite(residual_sq) || residual_sq > kDivergenceThreshold) {
      traj.steps.push_back(row);
      traj.iterations_used = t;
      traj.diverged = true;
      return traj;
    }

    DenseMatrix g;  // unscaled gradient rows, deterministic only
    if (!stochastic) {
      g = unscaled_gradient_rows(z, data.x, rtilde);
      if (options.record_gradient_norm) row.grad_max_norm = inv_sqrt_m * max_row_norm(g);
    }

    bool stop_tol = residual_sq <= options.tol;
    if (stop_tol && stochastic) {
      // Confirm a noisy estimate with a full forward pass.
      const Vector u = forward(net, data);
      double full = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = data.y[i] - u[i];
        full += r * r;
      }
      row.loss = full;
      stop_tol = full <= options.tol;
    }

    traj.steps.push_back(row);
    traj.iterations_used = t;
    if (stop_tol) {
      traj.reached_tol = true;
      return traj;
    }
    if (t == options.steps) return traj;

    // Signal first; the step below uses the post-update denominator.
    double signal = 0.0;
    switch (controller.kind) {
      case ControllerKind::AdaLoss:
        // b^2 += alpha^2 sqrt(n) ||y-u||^2, or its per-sample stochastic
        // form alpha^2 sqrt(n) mean((y_xi - u_xi)^2).
        signal = stochastic
                     ? controller.alpha * controller.alpha * residual_sq / sqrt_n
                     : controller.alpha * controller.alpha * sqrt_n * residual_sq;
        break;
      case ControllerKind::SquareRuleLoss:
        signal = controller.alpha * controller.alpha * sqrt_n * residual_sq;
        break;
      case ControllerKind::NormRuleLoss:
        signal = controller.alpha * sqrt_n * std::sqrt(residual_sq);
        break;
      case ControllerKind::AdaGradNorm: {
        if (!stochastic) {
          double fro = 0.0;
          for (std::size_t r = 0; r < m; ++r) fro += norm2_squared(g.row(r));
          signal = fro / static_cast<double>(m);
        } else {
          // Exact squared Frobenius norm of the minibatch-loss gradient.
          const double invb = 1.0 / static_cast<double>(batch.size());
          double fro = 0.0;
          Vector acc(d);
          for (std::size_t r = 0; r < m; ++r) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t s = 0; s < batch.size(); ++s) {
              if (zb(s, r) >= 0.0) {
                const double c = res_b[s] * invb;
                auto xi = data.x.row(batch[s]);
                for (std::size_t j = 0; j < d; ++j) acc[j] += c * xi[j];
              }
            }
            fro += norm2_squared(acc);
          }
          signal = fro / static_cast<double>(m);
        }
        break;
      }
      default:
        break;
    }
    controller = accumulate_signal(controller, signal);
    traj.sup_b = std::max(traj.sup_b, controller.b);
    const double lr = effective_stepsize(controller);

    if (!stochastic) {
      parallel_for(0, m, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
          const double scale = -lr * inv_sqrt_m * net.a[r];
          auto gr = g.row(r);
          auto wr = net.w.row(r);
          for (std::size_t j = 0; j < d; ++j) wr[j] += scale * gr[j];
        }
      });
    } else {
      const double invb = 1.0 / static_cast<double>(batch.size());
      for (std::size_t s = 0; s < batch.size(); ++s) {
        const double base = -lr * inv_sqrt_m * res_b[s] * invb;
        auto xi = data.x.row(batch[s]);
        for (std::size_t r = 0; r < m; ++r) {
          if (zb(s, r) >= 0.0) {
            const double c = base * net.a[r];
            auto wr = net.w.row(r);
            for (std::size_t j = 0; j < d; ++j) wr[j] += c * xi[j];
          }
        }
      }
    }
  }
}

NetTrajectory train_adam(TwoLayerNet& net, const DataSet& data, AdamState state,
                         const TrainOptions& options, RngStream& stream) {
  if (options.steps < 1) throw ParameterError("train_adam: steps must be >= 1");
  const bool stochastic = options.mode == Mode::Stochastic;
  if (stochastic && (options.batch_size < 1 || options.batch_size > data.n()))
    throw ParameterError("train_adam: batch_size must be in [1, n]");
  if (state.m1.size() != net.m() * net.d())
    throw DimensionError("train_adam: state dimension != m*d");

  const std::size_t m = net.m();
  const std::size_t n = data.n();
  const std::size_t d = net.d();
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));

  NetTrajectory traj;
  traj.mode = options.mode;
  traj.eta = state.eta;
  traj.sup_b = state.b;
  traj.loss_normalization = "||y-u||^2";

  std::vector<std::uint32_t> batch(stochastic ? options.batch_size : 0);
  Vector grad(m * d, 0.0);

  for (std::uint64_t t = 0;; ++t) {
    NetStep row;
    row.iter = t;
    row.b = state.kind == AdamKind::Adam ? state.b0 : state.b;
    row.max_drift = net.max_drift();

    std::fill(grad.begin(), grad.end(), 0.0);
    double residual_sq = 0.0;
    double loss_value = 0.0;  // the f_t fed to the AdamLoss accumulator
    if (!stochastic) {
      const DenseMatrix z = matmul_nt(net.w, data.x);
      const Vector u = predictions_from_z(z, net.a);
      Vector rtilde(n);
      for (std::size_t i = 0; i < n; ++i) rtilde[i] = u[i] - data.y[i];
      residual_sq = norm2_squared(rtilde);
      loss_value = 0.5 * residual_sq;
      const DenseMatrix g = unscaled_gradient_rows(z, data.x, rtilde);
      for (std::size_t r = 0; r < m; ++r) {
        const double scale = inv_sqrt_m * net.a[r];
        auto gr = g.row(r);
        for (std::size_t j = 0; j < d; ++j) grad[r * d + j] = scale * gr[j];
      }
    } else {
      for (auto& idx : batch) idx = static_cast<std::uint32_t>(stream.next_index(n));
      const double invb = 1.0 / static_cast<double>(batch.size());
      double acc = 0.0;
      for (std::uint32_t idx : batch) {
        auto xi = data.x.row(idx);
        double usum = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
          const double zri = dot(net.w.row(r), xi);
          if (zri > 0.0) usum += net.a[r] * zri;
        }
        const double res = usum * inv_sqrt_m - data.y[idx];
        acc += res * res;
        for (std::size_t r = 0; r < m; ++r) {
          if (dot(net.w.row(r), xi) >= 0.0) {
            const double c = inv_sqrt_m * net.a[r] * res * invb;
            for (std::size_t j = 0; j < d; ++j) grad[r * d + j] += c * xi[j];
          }
        }
      }
      loss_value = 0.5 * acc * invb;
      residual_sq = static_cast<double>(n) * acc * invb;
    }
    row.loss = residual_sq;

    if (!std::isfinite(residual_sq) || residual_sq > kDivergenceThreshold) {
      traj.steps.push_back(row);
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
    traj.iterations_used = t;
    if (residual_sq <= options.tol) {
      traj.reached_tol = true;
      return traj;
    }
    if (t == options.steps) return traj;

    for (std::size_t r = 0; r < m; ++r) {
      auto wr = net.w.row(r);
      for (std::size_t j = 0; j < d; ++j) wr[j] += direction[r * d + j];
    }
  }
}

std::uint64_t dynamical_horizon(double b0, double big_l, double gamma, double eps) {
  if (!(b0 > 0.0) || !(big_l > 0.0) || !(gamma > 0.0) || !(eps > 0.0) || eps > 1.0)
    throw ParameterError("dynamical_horizon: need b0, L, gamma > 0 and eps in (0, 1]");
  const double base = std::max(0.0, big_l * big_l - b0 * b0) / (gamma * std::sqrt(eps));
  return static_cast<std::uint64_t>(std::ceil(base)) + 1;
}

TwoLayerBounds bounds_and_constants(const TwoLayerBoundsInput& in) {
  if (!(in.lambda0 > 0.0) || !(in.h_inf_norm > 0.0) || !(in.delta > 0.0) || in.n == 0 ||
      in.m == 0 || !(in.eta > 0.0) || !(in.alpha > 0.0) || !(in.b0 > 0.0))
    throw ParameterError("bounds_and_constants: inputs must be positive");
  const double n = static_cast<double>(in.n);
  const double m = static_cast<double>(in.m);
  const double sqrt_n = std::sqrt(n);
  const double sqrt_m = std::sqrt(m);

  TwoLayerBounds out;
  out.lambda0 = in.lambda0;
  out.h_inf_norm = in.h_inf_norm;
  out.m_width = m;
  out.n_samples = n;
  out.b0_used = in.b0;
  out.alpha_used = in.alpha;
  out.eta_used = in.eta;
  out.r = in.c_small * in.lambda0 * in.delta / (n * n * n);
  out.r_prime = 4.0 * sqrt_n * in.u0_residual_norm / (sqrt_m * in.lambda0);
  out.c1 = 1.0 - std::pow(n, 1.5) * (sqrt_n + 2.0) * out.r / (2.0 * in.lambda0 * in.delta);
  out.delta1 = (std::pow(n, 2.5) * out.r / (2.0 * in.delta) +
                2.0 * n * n * out.r / in.delta + 2.0 * std::pow(n, 1.5) * out.r / in.delta) *
               (std::pow(n, 1.5) * out.r / in.delta);
  const double h_up = in.h_inf_norm + 4.0 * n * n * out.r / (std::sqrt(kTwoPi) * in.delta);
  out.c_big = ((in.lambda0 * in.delta + 2.0 * std::pow(n, 1.5) * out.r + n * n * out.r) *
                   h_up / (in.lambda0 * in.delta) +
               out.delta1) /
              (out.c1 * in.h_inf_norm);
  out.c2 = 2.0 / std::sqrt(kTwoPi);  // Gaussian density bound P(|z| < R) <= 2R/sqrt(2pi)
  out.big_b = 1.0 - 2.0 * n * out.c2 * (sqrt_n + n) * out.r / (in.lambda0 * in.delta);
  out.stochastic_threshold = 2.0 * n * (2.0 * in.alpha * std::pow(n, -0.75) + in.eta) /
                             (in.lambda0 * out.big_b);

  const double cross_scale = out.c_big * (in.lambda0 + in.h_inf_norm) / 2.0;
  const double log_hat = std::log(cross_scale / (2.0 * in.b0));
  out.r_hat = in.eta * std::sqrt(2.0 * (static_cast<double>(in.t0) + 1.0)) /
              (in.alpha * sqrt_m) * std::sqrt(1.0 + 2.0 * std::max(0.0, log_hat));
  out.r_tilde = 4.0 * sqrt_n / sqrt_m * (in.lambda0 + out.c_big * in.h_inf_norm) /
                (2.0 * out.c1 * in.h_inf_norm * in.lambda0) * in.uT0_residual_norm;
  out.b_inf = in.b0 + in.alpha * in.alpha * sqrt_n *
                          (in.lambda0 + out.c_big * in.h_inf_norm) /
                          (2.0 * in.eta * out.c1 * in.h_inf_norm * in.lambda0) *
                          in.uT0_residual_norm * in.uT0_residual_norm;
  const double chn = out.c_big * in.h_inf_norm;
  out.b_bar_inf =
      in.eta * chn + 4.0 * in.alpha * in.alpha * sqrt_n / (in.eta * in.lambda0 * out.c1) *
                         (in.u0_residual_norm * in.u0_residual_norm +
                          2.0 * in.eta * in.eta * chn * chn / (in.alpha * in.alpha * sqrt_n) *
                              std::log(std::max(1.0, in.eta * chn / in.b0)));
  out.t0_dynamical = dynamical_horizon(in.b0, in.eta * cross_scale,
                                       in.alpha * in.alpha * sqrt_n, in.dyn_eps);
  return out;
}

McCondition2Result mc_condition2(const TwoLayerNet& net, const DataSet& data,
                                 const ControllerState& controller, double threshold,
                                 std::size_t samples, RngStream& stream) {
  if (samples < 100) throw ParameterError("mc_condition2: need >= 100 samples");
  const std::size_t m = net.m();
  const std::size_t n = data.n();
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  const DenseMatrix z = matmul_nt(net.w, data.x);  // frozen pre-activations
  const Vector u = predictions_from_z(z, net.a);
  Vector rtilde(n);
  for (std::size_t i = 0; i < n; ++i) rtilde[i] = u[i] - data.y[i];
  const DenseMatrix xxt = matmul_nt(data.x, data.x);

  McCondition2Result out;
  out.loss_before = norm2_squared(rtilde);
  out.b_k = controller.b;
  out.threshold = threshold;
  out.above_threshold = controller.b >= threshold;

  double mean = 0.0, m2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t xi = stream.next_index(n);
    const double res = rtilde[xi];
    const double b_next = std::sqrt(controller.b * controller.b +
                                    controller.alpha * controller.alpha * sqrt_n * res * res);
    const double lr = controller.eta / b_next;
    // w_r(k+1)^T x_i = z_ri - lr * res * a_r * <x_xi, x_i> / sqrt(m) on the
    // active set of sample xi.
    double loss_after = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double shift = lr * res * inv_sqrt_m * xxt(xi, i);
      double ui = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        double zri = z(r, i);
        if (z(r, xi) >= 0.0) zri -= shift * net.a[r];
        if (zri > 0.0) ui += net.a[r] * zri;
      }
      ui *= inv_sqrt_m;
      const double diff = data.y[i] - ui;
      loss_after += diff * diff;
    }
    const double delta = loss_after - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (loss_after - mean);
  }
  out.mc_mean = mean;
  out.mc_stderr = std::sqrt(m2 / static_cast<double>(samples - 1) /
                            static_cast<double>(samples));
  out.pass = !out.above_threshold || out.mc_mean <= out.loss_before + 3.0 * out.mc_stderr;
  return out;
}

bool VerifyReport::all_ok() const {
  for (const auto& c : checks)
    if (c.applicable && !c.pass) return false;
  return true;
}

VerifyReport verify_suite(const NetTrajectory& trajectory, const TwoLayerBounds& bounds,
                          ControllerKind kind,
                          const std::vector<McCondition2Result>& mc_results) {
  VerifyReport report;
  const auto& steps = trajectory.steps;
  const double lambda0 = bounds.lambda0;

  auto add = [&](VerifyCheck c) { report.checks.push_back(std::move(c)); };

  // Prop-A.1 sandwich and the loss-vs-gradient bound, gated on the recorded
  // empirical lambda_min(H(k)) >= lambda0 / 2.
  {
    VerifyCheck lower{"sandwich_lower"}, upper{"sandwich_upper"}, lossb{"loss_vs_gradmax"};
    double worst_l = 0.0, worst_u = 0.0, worst_b = 0.0;
    for (const auto& s : steps) {
      if (trajectory.mode != Mode::Deterministic || !s.has_eigs ||
          s.lambda_min_h < lambda0 / 2.0 || s.grad_max_norm == 0.0)
        continue;
      const double res_norm = std::sqrt(s.loss);
      const double lo = std::sqrt(lambda0 / (2.0 * bounds.m_width)) * res_norm;
      const double hi = std::sqrt(static_cast<double>(bounds.n_samples) / bounds.m_width) *
                        res_norm;
      ++lower.checked;
      ++upper.checked;
      ++lossb.checked;
      const double slack = 1e-12 * std::max(1.0, s.grad_max_norm);
      if (s.grad_max_norm < lo - slack) {
        ++lower.violations;
        worst_l = std::max(worst_l, lo - s.grad_max_norm);
      }
      if (s.grad_max_norm > hi + slack) {
        ++upper.violations;
        worst_u = std::max(worst_u, s.grad_max_norm - hi);
      }
      const double cap = std::sqrt(2.0 * bounds.m_width / lambda0) * s.grad_max_norm;
      if (res_norm > cap + slack) {
        ++lossb.violations;
        worst_b = std::max(worst_b, res_norm - cap);
      }
    }
    lower.realized = worst_l;
    upper.realized = worst_u;
    lossb.realized = worst_b;
    lower.applicable = lower.checked > 0;
    upper.applicable = upper.checked > 0;
    lossb.applicable = lossb.checked > 0;
    lower.pass = lower.violations == 0;
    upper.pass = upper.violations == 0;
    lossb.pass = lossb.violations == 0;
    add(lower);
    add(upper);
    add(lossb);
  }

  // b monotonicity for accumulating kinds.
  if (is_accumulating(kind)) {
    VerifyCheck mono{"b_monotone"};
    for (std::size_t t = 0; t + 1 < steps.size(); ++t) {
      ++mono.checked;
      if (steps[t + 1].b < steps[t].b) ++mono.violations;
    }
    mono.pass = mono.violations == 0;
    mono.applicable = mono.checked > 0;
    add(mono);
  }

  // Empirical Condition-1 contraction: needs consecutive rows with
  // eigenvalues, i.e. cadence 1.
  {
    VerifyCheck contr{"condition1_contraction_empirical"};
    for (std::size_t t = 0; t + 1 < steps.size(); ++t) {
      const auto& cur = steps[t];
      const auto& nxt = steps[t + 1];
      if (trajectory.mode != Mode::Deterministic || !cur.has_eigs) continue;
      const double b_next = nxt.b;
      const double eta = trajectory.eta;
      if (b_next < eta * cur.lambda_max_h / 2.0) continue;
      const double factor = 1.0 - eta * cur.lambda_min_h / b_next *
                                      (1.0 - eta * cur.lambda_max_h / (2.0 * b_next));
      ++contr.checked;
      if (nxt.loss > factor * cur.loss * (1.0 + 1e-9)) {
        ++contr.violations;
        contr.realized = std::max(contr.realized, nxt.loss / std::max(cur.loss, 1e-300));
      }
    }
    contr.applicable = contr.checked > 0;
    contr.pass = contr.violations == 0;
    add(contr);
  }

  // Pre-crossing drift against R_hat (AdaLoss / SquareRule accumulation).
  if ((kind == ControllerKind::AdaLoss || kind == ControllerKind::SquareRuleLoss) &&
      trajectory.lambda_max_h0 > 0.0) {
    const double cross = trajectory.eta * trajectory.lambda_max_h0;
    VerifyCheck drift{"precrossing_drift_rhat"};
    const double log_term =
        std::log(std::max(1.0, bounds.c_big * (lambda0 + bounds.h_inf_norm) /
                                   (2.0 * bounds.b0_used)));
    for (const auto& s : steps) {
      if (s.iter == 0 || s.b >= cross) continue;
      const double cap = trajectory.eta *
                         std::sqrt(2.0 * static_cast<double>(s.iter)) /
                         (bounds.alpha_used * std::sqrt(bounds.m_width)) *
                         std::sqrt(1.0 + 2.0 * log_term);
      ++drift.checked;
      if (s.max_drift > cap * (1.0 + 1e-9)) ++drift.violations;
      drift.realized = std::max(drift.realized, s.max_drift);
      drift.computed = cap;
    }
    drift.applicable = drift.checked > 0;
    drift.pass = drift.violations == 0;
    add(drift);
  }

  // SquareRule drift (the alpha^2-scaled form) with lambda_max(H(0))
  // standing in for C ||H_inf||.
  if (kind == ControllerKind::SquareRuleLoss && trajectory.lambda_max_h0 > 0.0) {
    const double cross = trajectory.eta * trajectory.lambda_max_h0;
    VerifyCheck drift{"squarerule_drift"};
    const double log_term = std::log(std::max(1.0, cross / bounds.b0_used));
    for (const auto& s : steps) {
      if (s.iter == 0 || s.b >= cross) continue;
      const double cap = trajectory.eta *
                         std::sqrt(2.0 * static_cast<double>(s.iter)) /
                         (bounds.alpha_used * bounds.alpha_used * std::sqrt(bounds.m_width)) *
                         std::sqrt(1.0 + 2.0 * log_term);
      ++drift.checked;
      if (s.max_drift > cap * (1.0 + 1e-9)) ++drift.violations;
      drift.realized = std::max(drift.realized, s.max_drift);
      drift.computed = cap;
    }
    drift.applicable = drift.checked > 0;
    drift.pass = drift.violations == 0;
    add(drift);
  }

  // Post-crossing b stays below the closed-form limit.
  if (is_accumulating(kind) && trajectory.crossing_t0 >= 0 && bounds.b_inf > 0.0) {
    VerifyCheck blim{"b_sup_vs_b_inf"};
    blim.computed = bounds.b_inf;
    blim.realized = trajectory.sup_b;
    blim.checked = 1;
    blim.pass = trajectory.sup_b <= bounds.b_inf * (1.0 + 1e-9);
    if (!blim.pass) blim.violations = 1;
    add(blim);
  }

  // Log growth of the residual up to the crossing index.
  if ((kind == ControllerKind::AdaLoss || kind == ControllerKind::SquareRuleLoss) &&
      trajectory.crossing_t0 > 0 &&
      static_cast<std::size_t>(trajectory.crossing_t0) < steps.size()) {
    VerifyCheck lg{"log_growth_at_crossing"};
    const double chn = bounds.c_big * bounds.h_inf_norm;
    const double growth =
        2.0 * trajectory.eta * trajectory.eta * chn * chn /
        (bounds.alpha_used * bounds.alpha_used * std::sqrt(bounds.n_samples)) *
        std::log(std::max(1.0, bounds.c_big * (lambda0 + bounds.h_inf_norm) /
                                   (2.0 * bounds.b0_used)));
    lg.computed = steps.front().loss + growth;
    lg.realized = steps[static_cast<std::size_t>(trajectory.crossing_t0)].loss;
    lg.checked = 1;
    lg.pass = lg.realized <= lg.computed * (1.0 + 1e-9);
    if (!lg.pass) lg.violations = 1;
    add(lg);
  }

  for (const auto& mc : mc_results) {
    VerifyCheck c{"stochastic_condition2_mc"};
    c.computed = mc.loss_before + 3.0 * mc.mc_stderr;
    c.realized = mc.mc_mean;
    c.checked = 1;
    c.applicable = mc.above_threshold;
    c.pass = mc.pass;
    if (!c.pass) c.violations = 1;
    add(c);
  }

  return report;
}

}  // namespace adaloss
