#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "adaloss/twolayer.hpp"

using namespace adaloss;

namespace {

TwoLayerNet manual_net(DenseMatrix w, Vector a) {
  TwoLayerNet net;
  net.w = w;
  net.a = std::move(a);
  net.w0 = std::move(w);
  return net;
}

DataSet axis_dataset() {
  DenseMatrix x(2, 2);
  x(0, 0) = 1.0;
  x(1, 1) = 1.0;
  return make_dataset(std::move(x), Vector{0.0, 0.0});
}

}  // namespace

TEST_CASE("init_net determinism and snapshot") {
  RngStream a(3), b(3);
  const auto n1 = init_net(8, 4, a);
  const auto n2 = init_net(8, 4, b);
  CHECK(n1.w.data() == n2.w.data());
  CHECK(n1.a == n2.a);
  CHECK(n1.w.data() == n1.w0.data());
}

TEST_CASE("sign fraction is near one half") {
  RngStream rng(5);
  const auto net = init_net(10000, 2, rng);
  double plus = 0.0;
  for (double s : net.a) plus += s > 0 ? 1.0 : 0.0;
  CHECK(std::abs(plus / 10000.0 - 0.5) < 0.02);
}

TEST_CASE("forward on hand-built nets") {
  DenseMatrix w(1, 2);
  w(0, 0) = 1.0;  // w = x_0
  auto net = manual_net(w, Vector{1.0});
  DataSet data = axis_dataset();
  const Vector u = forward(net, data);
  CHECK(u[0] == doctest::Approx(1.0));
  CHECK(u[1] == doctest::Approx(0.0));  // dead input

  DenseMatrix wneg(3, 2);
  for (std::size_t r = 0; r < 3; ++r) {
    wneg(r, 0) = -1.0;
    wneg(r, 1) = -2.0;
  }
  auto dead = manual_net(wneg, Vector{1.0, -1.0, 1.0});
  CHECK(forward(dead, data)[0] == doctest::Approx(0.0));

  DenseMatrix wsym(4, 2);
  for (std::size_t r = 0; r < 4; ++r) wsym(r, 0) = 1.0;
  auto sym = manual_net(wsym, Vector{1.0, 1.0, -1.0, -1.0});
  CHECK(forward(sym, data)[0] == doctest::Approx(0.0));
}

TEST_CASE("loss and residual") {
  DenseMatrix w(1, 2);
  w(0, 0) = 1.0;
  auto net = manual_net(w, Vector{1.0});
  DenseMatrix x(2, 2);
  x(0, 0) = 1.0;
  x(1, 1) = 1.0;
  DataSet data = make_dataset(std::move(x), Vector{4.0, 4.0});
  const auto [loss, residual] = loss_and_residual(net, data);
  CHECK(residual[0] == doctest::Approx(3.0));
  CHECK(residual[1] == doctest::Approx(4.0));
  CHECK(loss == doctest::Approx(12.5));
}

TEST_CASE("initial residual stays below n/delta for most seeds") {
  // E||y-u(0)||^2 = sum(y_i^2 + 1); Markov at delta = 0.1.
  RngStream root(11);
  const std::size_t n = 30, d = 10, m = 400;
  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    auto rng = root.substream(seed);
    const DataSet data = gen_dataset(n, d, rng);
    const auto net = init_net(m, d, rng);
    const auto [loss, residual] = loss_and_residual(net, data);
    if (norm2_squared(residual) <= static_cast<double>(n) / 0.1) ++ok;
  }
  CHECK(ok >= 90);
}

TEST_CASE("per-neuron gradient equality case") {
  DenseMatrix w(1, 2);
  w(0, 0) = 1.0;
  auto net = manual_net(w, Vector{1.0});
  DenseMatrix x(1, 2);
  x(0, 0) = 1.0;
  DataSet data = make_dataset(std::move(x), Vector{0.0});  // y = 0, u = 1
  const auto [loss, residual] = loss_and_residual(net, data);
  const auto grad = per_neuron_gradient(net, data, residual);
  CHECK(grad(0, 0) == doctest::Approx(1.0));
  CHECK(grad(0, 1) == doctest::Approx(0.0));
  // the upper sandwich bound sqrt(n/m)||y-u|| = 1 is attained
  CHECK(max_row_norm(grad) == doctest::Approx(1.0));

  const Vector zero(1, 0.0);
  const auto gzero = per_neuron_gradient(net, data, zero);
  CHECK(max_row_norm(gzero) == doctest::Approx(0.0));
}

TEST_CASE("analytic gradient matches central differences away from kinks") {
  RngStream rng(13);
  const std::size_t m = 20, d = 5, n = 10;
  const DataSet data = gen_dataset(n, d, rng);
  auto net = init_net(m, d, rng);
  const auto [loss0, residual] = loss_and_residual(net, data);
  const auto grad = per_neuron_gradient(net, data, residual);

  const DenseMatrix z = matmul_nt(net.w, data.x);
  const double h = 1e-6;
  std::size_t compared = 0;
  for (std::size_t r = 0; r < m; ++r) {
    bool kink_free = true;
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(z(r, i)) < 1e-4) kink_free = false;
    if (!kink_free) continue;
    for (std::size_t j = 0; j < d; ++j) {
      const double keep = net.w(r, j);
      net.w(r, j) = keep + h;
      const double lp = loss_and_residual(net, data).first;
      net.w(r, j) = keep - h;
      const double lm = loss_and_residual(net, data).first;
      net.w(r, j) = keep;
      const double fd = (lp - lm) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(grad(r, j)), 1e-6});
      CHECK(std::abs(fd - grad(r, j)) / scale < 1e-5);
      ++compared;
    }
  }
  CHECK(compared > 3 * d);
}

TEST_CASE("gram_infinity closed form") {
  DenseMatrix x(3, 2);
  x(0, 0) = 1.0;
  x(1, 1) = 1.0;                   // orthogonal to row 0
  x(2, 0) = 0.5;
  x(2, 1) = std::sqrt(3.0) / 2.0;  // inner product 0.5 with row 0
  DataSet data = make_dataset(std::move(x), Vector{0.0, 0.0, 0.0});
  const auto h = gram_infinity(data);
  CHECK(h(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(h(1, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(h(0, 1) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(h(0, 2) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(max_asymmetry(h) == doctest::Approx(0.0));

  DenseMatrix bad(1, 2);
  bad(0, 0) = 2.0;
  DataSet unnormalized{std::move(bad), Vector{0.0}};
  CHECK_THROWS_AS(gram_infinity(unnormalized), DegenerateInputError);
}

TEST_CASE("gram_empirical small cases") {
  DenseMatrix w(1, 2);
  w(0, 0) = 1.0;
  w(0, 1) = 1.0;  // active on both axis points
  auto net = manual_net(w, Vector{1.0});
  DataSet data = axis_dataset();
  const auto h = gram_empirical(net, data);
  CHECK(h(0, 1) == doctest::Approx(dot(data.x.row(0), data.x.row(1))));
  CHECK(h(0, 0) == doctest::Approx(1.0));

  DenseMatrix wneg(2, 2);
  wneg(0, 0) = -1.0;
  wneg(0, 1) = -1.0;
  wneg(1, 0) = -2.0;
  wneg(1, 1) = -0.5;
  auto dead = manual_net(wneg, Vector{1.0, -1.0});
  const auto hdead = gram_empirical(dead, data);
  CHECK(hdead(0, 0) == doctest::Approx(0.0));
  CHECK(hdead(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("finite-width gram concentrates around gram_infinity") {
  // max_ij |H(0)_ij - H_inf_ij| <= 3 sqrt(log(n^2)/m) for >= 19 of 20 seeds.
  RngStream root(17);
  const std::size_t n = 100, d = 50;
  int ok = 0;
  DataSet data = gen_dataset(n, d, root);
  const auto h_inf = gram_infinity(data);
  const double cap = 3.0 * std::sqrt(std::log(static_cast<double>(n) * n) / 5000.0);
  for (int seed = 0; seed < 20; ++seed) {
    auto rng = root.substream(seed);
    const auto net = init_net(5000, d, rng);
    const auto h0 = gram_empirical(net, data);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        worst = std::max(worst, std::abs(h0(i, j) - h_inf(i, j)));
    if (worst <= cap) ++ok;
  }
  CHECK(ok >= 19);
}

TEST_CASE("gram deviation shrinks like 1/sqrt(m)") {
  RngStream root(19);
  const std::size_t n = 40, d = 20;
  DataSet data = gen_dataset(n, d, root);
  const auto h_inf = gram_infinity(data);
  auto mean_dev = [&](std::size_t m) {
    double acc = 0.0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
      auto rng = root.substream(1000 + 10 * m + s);
      const auto net = init_net(m, d, rng);
      const auto h = gram_empirical(net, data);
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          worst = std::max(worst, std::abs(h(i, j) - h_inf(i, j)));
      acc += worst;
    }
    return acc / seeds;
  };
  const double d100 = mean_dev(100);
  const double d1000 = mean_dev(1000);
  const double d10000 = mean_dev(10000);
  CHECK(d1000 < d100);
  CHECK(d10000 < d1000);
  CHECK(d10000 < d100 / 2.0);
}

TEST_CASE("pattern sets: radius extremes and gaussian density") {
  RngStream rng(23);
  const DataSet data = gen_dataset(10, 5, rng);
  auto net = init_net(50, 5, rng);

  const auto [tiny, h_tiny] = pattern_sets(net, data, 1e-12);
  CHECK(tiny.total_perp == 0);
  for (std::size_t i = 0; i < data.n(); ++i)
    for (std::size_t j = 0; j < data.n(); ++j) CHECK(h_tiny(i, j) == doctest::Approx(0.0));

  const auto [all, h_all] = pattern_sets(net, data, 1e9);
  CHECK(all.total_perp == 50 * 10);

  // E|S_i_perp| / m ~ P(|N(0,1)| < R) ~ 2 R phi(0) for unit rows
  RngStream rng2(29);
  const DataSet data2 = gen_dataset(20, 8, rng2);
  auto big = init_net(5000, 8, rng2);
  const double radius = 0.01;
  const auto [sets, h_perp] = pattern_sets(big, data2, radius);
  const double frac = static_cast<double>(sets.total_perp) / (5000.0 * 20.0);
  const double expect = 2.0 * radius / std::sqrt(2.0 * std::numbers::pi);
  CHECK(frac == doctest::Approx(expect).epsilon(0.3));
}

TEST_CASE("zero residual at init is a fixed point for every controller") {
  RngStream rng(31);
  DataSet data = gen_dataset(12, 6, rng);
  auto net = init_net(64, 6, rng);
  data.y = forward(net, data);  // interpolating labels
  for (auto kind : {ControllerKind::AdaLoss, ControllerKind::AdaGradNorm,
                    ControllerKind::Constant, ControllerKind::DecaySqrt}) {
    auto copy = net;
    TrainOptions opts;
    opts.steps = 5;
    opts.tol = 1e-20;
    opts.eig_cadence = 0;
    RngStream r2(0);
    const auto traj = train(copy, data, make_controller(kind, 1.0, 1.0), opts, r2);
    CHECK(traj.steps.front().loss == doctest::Approx(0.0));
    CHECK(copy.max_drift() == doctest::Approx(0.0));
  }
}

TEST_CASE("desk-scale gradient descent: monotone loss within the rate bound") {
  RngStream rng(37);
  const DataSet data = gen_dataset(30, 10, rng);
  auto net = init_net(800, 10, rng);
  const auto h0 = gram_empirical(net, data);
  const auto [lmax, lmin] = spectral_extremes(h0);
  REQUIRE(lmin > 0.0);
  const double eta = 1.0 / (2.0 * lmax);

  TrainOptions opts;
  opts.steps = 20000;
  opts.tol = 1e-3;
  opts.eig_cadence = 0;
  RngStream r2(0);
  auto ctrl = make_controller(ControllerKind::Constant, 1.0, eta);
  const auto traj = train(net, data, ctrl, opts, r2);
  REQUIRE(traj.reached_tol);
  for (std::size_t t = 0; t + 1 < traj.steps.size(); ++t)
    CHECK(traj.steps[t + 1].loss <= traj.steps[t].loss * (1.0 + 1e-12));
  const double bound =
      std::ceil(std::log(traj.steps.front().loss / 1e-3) / (eta * lmin / 2.0));
  CHECK(static_cast<double>(traj.iterations_used) <= bound);
}

TEST_CASE("adaloss training: b monotone, crossing recorded, loss converges") {
  RngStream rng(41);
  const DataSet data = gen_dataset(20, 10, rng);
  auto net = init_net(512, 10, rng);
  TrainOptions opts;
  opts.steps = 3000;
  opts.tol = 1e-6;
  opts.eig_cadence = 10;
  RngStream r2(1);
  const auto traj =
      train(net, data, make_controller(ControllerKind::AdaLoss, 0.5, 1.0), opts, r2);
  CHECK(traj.reached_tol);
  for (std::size_t t = 0; t + 1 < traj.steps.size(); ++t)
    CHECK(traj.steps[t + 1].b >= traj.steps[t].b);
  CHECK(traj.crossing_t0 >= 0);
  CHECK(traj.lambda_max_h0 > 0.0);
}

TEST_CASE("stochastic adaloss training converges on a tiny problem") {
  RngStream rng(43);
  const DataSet data = gen_dataset(16, 8, rng);
  auto net = init_net(256, 8, rng);
  TrainOptions opts;
  opts.mode = Mode::Stochastic;
  opts.batch_size = 1;
  opts.steps = 60000;
  opts.tol = 1e-4;
  opts.eig_cadence = 0;
  RngStream r2(2);
  const auto traj =
      train(net, data, make_controller(ControllerKind::AdaLoss, 1.0, 1.0), opts, r2);
  CHECK(traj.reached_tol);
  CHECK_FALSE(traj.diverged);
}

TEST_CASE("bounds and constants formulas") {
  CHECK(dynamical_horizon(1.0, 2.0, 1.0, 1.0) == 4);  // ceil(3) + 1

  TwoLayerBoundsInput in;
  in.lambda0 = 0.19;
  in.h_inf_norm = 2.8;
  in.delta = 0.1;
  in.c_small = 0.01;
  in.n = 50;
  in.m = 2000;
  in.eta = 1.0;
  in.alpha = 1.0;
  in.b0 = 1.0;
  in.u0_residual_norm = 8.0;
  in.uT0_residual_norm = 8.0;
  const auto b = bounds_and_constants(in);
  CHECK(b.r == doctest::Approx(0.01 * 0.19 * 0.1 / 125000.0));
  CHECK(b.c1 <= 1.0);
  CHECK(b.c1 > 0.99);  // R is tiny at this scale
  CHECK(b.c_big >= 1.0);
  CHECK(b.big_b == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(b.r_prime ==
        doctest::Approx(4.0 * std::sqrt(50.0) * 8.0 / (std::sqrt(2000.0) * 0.19)));
  CHECK(b.stochastic_threshold ==
        doctest::Approx(2.0 * 50.0 * (2.0 * std::pow(50.0, -0.75) + 1.0) /
                        (0.19 * b.big_b)));
}

TEST_CASE("dynamical system either/or property") {
  RngStream rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    const double b0 = 0.1 + rng.next_uniform();
    const double big_l = b0 + 0.5 + 3.0 * rng.next_uniform();
    const double gamma = 0.1 + rng.next_uniform();
    const double eps = 0.05 + 0.9 * rng.next_uniform();
    const auto horizon = dynamical_horizon(b0, big_l, gamma, eps);
    double b_sq = b0 * b0;
    double min_a = std::numeric_limits<double>::infinity();
    for (std::uint64_t k = 0; k < horizon; ++k) {
      const double a = rng.next_uniform() * 3.0;
      min_a = std::min(min_a, a);
      b_sq += gamma * a;
    }
    const bool small_signal = min_a <= std::sqrt(eps);
    const bool crossed = std::sqrt(b_sq) >= big_l;
    CHECK((small_signal || crossed));
  }
}

TEST_CASE("monte-carlo expected contraction at a frozen iterate") {
  RngStream rng(53);
  const DataSet data = gen_dataset(20, 10, rng);
  auto net = init_net(512, 10, rng);

  const auto h_inf = gram_infinity(data);
  const auto [hnorm, lambda0] = spectral_extremes(h_inf);
  REQUIRE(lambda0 > 0.0);
  TwoLayerBoundsInput in;
  in.lambda0 = lambda0;
  in.h_inf_norm = hnorm;
  in.n = data.n();
  in.m = net.m();
  in.eta = 1.0;
  in.alpha = 1.0;
  in.b0 = 1.0;
  in.u0_residual_norm = 1.0;
  in.uT0_residual_norm = 1.0;
  const auto bounds = bounds_and_constants(in);

  auto ctrl =
      make_controller(ControllerKind::AdaLoss, bounds.stochastic_threshold * 1.05, 1.0);
  RngStream mc_rng(7);
  const auto result =
      mc_condition2(net, data, ctrl, bounds.stochastic_threshold, 400, mc_rng);
  CHECK(result.above_threshold);
  CHECK(result.pass);
  CHECK(result.mc_mean < result.loss_before);  // strict contraction in expectation
}

TEST_CASE("verify suite on a deterministic adaloss run") {
  RngStream rng(59);
  const DataSet data = gen_dataset(20, 10, rng);
  auto net = init_net(800, 10, rng);
  const auto h_inf = gram_infinity(data);
  const auto [hnorm, lambda0] = spectral_extremes(h_inf);

  TrainOptions opts;
  opts.steps = 400;
  opts.tol = 1e-10;
  opts.eig_cadence = 1;
  RngStream r2(3);
  const auto traj =
      train(net, data, make_controller(ControllerKind::AdaLoss, 1.0, 1.0), opts, r2);

  TwoLayerBoundsInput in;
  in.lambda0 = lambda0;
  in.h_inf_norm = hnorm;
  in.n = data.n();
  in.m = net.m();
  in.eta = 1.0;
  in.alpha = 1.0;
  in.b0 = 1.0;
  in.u0_residual_norm = std::sqrt(traj.steps.front().loss);
  const std::size_t t0 = traj.crossing_t0 >= 0 ? traj.crossing_t0 : 0;
  in.uT0_residual_norm = std::sqrt(traj.steps[t0].loss);
  in.t0 = t0;
  const auto bounds = bounds_and_constants(in);
  const auto report = verify_suite(traj, bounds, ControllerKind::AdaLoss);

  int applicable = 0;
  for (const auto& c : report.checks) {
    INFO(c.name);
    if (c.applicable) {
      ++applicable;
      CHECK(c.pass);
    }
  }
  CHECK(applicable >= 4);
}
