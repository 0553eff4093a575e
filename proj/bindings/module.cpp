#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "adaloss/linreg.hpp"
#include "adaloss/twolayer.hpp"

namespace py = pybind11;
using namespace adaloss;

namespace {

DenseMatrix matrix_from_array(const py::array_t<double, py::array::c_style>& arr) {
  if (arr.ndim() != 2) throw DimensionError("expected a 2-d array");
  DenseMatrix m(arr.shape(0), arr.shape(1));
  std::copy(arr.data(), arr.data() + arr.size(), m.data().begin());
  return m;
}

py::array_t<double> array_from_matrix(const DenseMatrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

ControllerKind kind_from_string(const std::string& name) {
  for (auto kind : {ControllerKind::AdaLoss, ControllerKind::AdaGradNorm,
                    ControllerKind::SquareRuleLoss, ControllerKind::NormRuleLoss,
                    ControllerKind::Constant, ControllerKind::DecaySqrt}) {
    if (name == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unknown controller kind: " + name);
}

Mode mode_from_string(const std::string& name) {
  if (name == "det") return Mode::Deterministic;
  if (name == "stoch") return Mode::Stochastic;
  throw std::invalid_argument("mode must be 'det' or 'stoch'");
}

py::dict linreg_traj_dict(const LinRegTrajectory& traj) {
  py::list loss, error, b, eff_lr;
  for (const auto& s : traj.steps) {
    loss.append(s.loss);
    error.append(s.error);
    b.append(s.b);
    eff_lr.append(s.eff_lr);
  }
  py::dict out;
  out["loss"] = loss;
  out["error"] = error;
  out["b"] = b;
  out["eff_lr"] = eff_lr;
  out["iterations"] = traj.iterations_used;
  out["sup_b"] = traj.sup_b;
  out["diverged"] = traj.diverged;
  out["reached_tol"] = traj.reached_tol;
  return out;
}

py::dict net_traj_dict(const NetTrajectory& traj) {
  py::list loss, b, eff_lr, drift, lmin, lmax;
  for (const auto& s : traj.steps) {
    loss.append(s.loss);
    b.append(s.b);
    eff_lr.append(s.eff_lr);
    drift.append(s.max_drift);
    if (s.has_eigs) {
      lmin.append(s.lambda_min_h);
      lmax.append(s.lambda_max_h);
    }
  }
  py::dict out;
  out["loss"] = loss;
  out["b"] = b;
  out["eff_lr"] = eff_lr;
  out["max_drift"] = drift;
  out["lambda_min_H"] = lmin;
  out["lambda_max_H"] = lmax;
  out["iterations"] = traj.iterations_used;
  out["sup_b"] = traj.sup_b;
  out["diverged"] = traj.diverged;
  out["reached_tol"] = traj.reached_tol;
  out["crossing_t0"] = traj.crossing_t0;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "adaptive-stepsize optimization laboratory";

  m.def(
      "sym_eigendecompose",
      [](const py::array_t<double, py::array::c_style>& a) {
        const auto dec = sym_eigendecompose(matrix_from_array(a));
        return py::make_tuple(dec.eigenvalues, array_from_matrix(dec.basis));
      },
      py::arg("a"),
      "Eigenvalues (descending) and orthonormal eigenvector columns of a "
      "symmetric matrix.");

  m.def(
      "spectral_extremes",
      [](const py::array_t<double, py::array::c_style>& a) {
        return spectral_extremes(matrix_from_array(a));
      },
      py::arg("a"));

  m.def(
      "sample_gaussian_matrix",
      [](std::size_t rows, std::size_t cols, std::uint64_t seed) {
        RngStream rng(seed);
        return array_from_matrix(sample_gaussian_matrix(rows, cols, rng));
      },
      py::arg("rows"), py::arg("cols"), py::arg("seed"));

  m.def(
      "normalize_rows",
      [](const py::array_t<double, py::array::c_style>& a) {
        return array_from_matrix(normalize_rows(matrix_from_array(a)));
      },
      py::arg("a"));

  m.def("hat_dynamics_step", &hat_dynamics_step, py::arg("s_i"), py::arg("b_next"),
        py::arg("eta"), py::arg("lambda_i"));

  py::class_<ControllerState>(m, "StepsizeController")
      .def(py::init([](const std::string& kind, double b0, double eta, double alpha,
                       double c, double c_s) {
             return make_controller(kind_from_string(kind), b0, eta, alpha, c, c_s);
           }),
           py::arg("kind"), py::arg("b0"), py::arg("eta"), py::arg("alpha") = 1.0,
           py::arg("c") = 0.0, py::arg("c_s") = 0.0)
      .def_readonly("b", &ControllerState::b)
      .def_readonly("step_index", &ControllerState::step_index)
      .def("accumulate",
           [](ControllerState& s, double signal) { s = accumulate_signal(s, signal); },
           py::arg("signal"))
      .def("effective_stepsize",
           [](const ControllerState& s) { return effective_stepsize(s); });

  py::class_<LinRegProblem>(m, "LinRegProblem")
      .def_property_readonly("x", [](const LinRegProblem& p) { return array_from_matrix(p.x); })
      .def_property_readonly("y", [](const LinRegProblem& p) { return p.y; })
      .def_property_readonly("w_star", [](const LinRegProblem& p) { return p.w_star; })
      .def_property_readonly("eigenvalues",
                             [](const LinRegProblem& p) { return p.spectral.eigenvalues; })
      .def_property_readonly("lambda1", &LinRegProblem::lambda1)
      .def_property_readonly("lambdan", &LinRegProblem::lambdan);

  m.def(
      "gen_problem",
      [](std::size_t n, std::size_t d, const std::string& conditioning,
         std::uint64_t seed) {
        RngStream rng(seed);
        const auto cond =
            conditioning == "correlated" ? Conditioning::Correlated : Conditioning::IID;
        return gen_problem(n, d, cond, rng);
      },
      py::arg("n"), py::arg("d"), py::arg("conditioning") = "iid", py::arg("seed") = 0);

  m.def(
      "run_linreg",
      [](const LinRegProblem& problem, const std::string& kind, double b0, double eta,
         const std::string& mode, std::uint64_t steps, std::size_t batch, double tol,
         std::uint64_t seed) {
        RngStream rng(seed);
        auto ctrl = make_controller(kind_from_string(kind), b0, eta);
        const auto traj =
            run_linreg(problem, ctrl, mode_from_string(mode), steps, batch, tol, rng);
        return linreg_traj_dict(traj);
      },
      py::arg("problem"), py::arg("kind"), py::arg("b0"), py::arg("eta") = 1.0,
      py::arg("mode") = "det", py::arg("steps") = 5000, py::arg("batch") = 1,
      py::arg("tol") = 1e-8, py::arg("seed") = 0);

  m.def(
      "bound_T",
      [](const LinRegProblem& problem, const std::string& method, double b0, double eta,
         double eps) {
        const Vector w0(problem.d(), 0.0);
        const auto tb = bound_T(problem, kind_from_string(method), b0, eta, eps, w0);
        py::dict out;
        out["case"] = std::string(1, tb.case_label);
        out["t_total"] = tb.t_total;
        out["s"] = tb.s;
        out["delta_s"] = tb.delta_s;
        return out;
      },
      py::arg("problem"), py::arg("method"), py::arg("b0"), py::arg("eta"),
      py::arg("eps"));

  m.def(
      "bound_crossing",
      [](const LinRegProblem& problem, double b0, double eta) {
        const Vector w0(problem.d(), 0.0);
        return bound_crossing(problem, b0, eta, w0);
      },
      py::arg("problem"), py::arg("b0"), py::arg("eta"));

  m.def(
      "bound_b_limit",
      [](const LinRegProblem& problem, double b0, double eta, const std::string& method) {
        const Vector w0(problem.d(), 0.0);
        return bound_b_limit(problem, b0, eta, w0, kind_from_string(method));
      },
      py::arg("problem"), py::arg("b0"), py::arg("eta"), py::arg("method"));

  m.def("bound_stochastic_N", &bound_stochastic_N, py::arg("mu"), py::arg("gamma"),
        py::arg("eps"), py::arg("b0"), py::arg("eta"), py::arg("lambda1"),
        py::arg("delta") = -1.0);

  py::class_<DataSet>(m, "DataSet")
      .def_property_readonly("x", [](const DataSet& d) { return array_from_matrix(d.x); })
      .def_property_readonly("y", [](const DataSet& d) { return d.y; });

  m.def(
      "gen_dataset",
      [](std::size_t n, std::size_t d, std::uint64_t seed) {
        RngStream rng(seed);
        return gen_dataset(n, d, rng);
      },
      py::arg("n"), py::arg("d"), py::arg("seed") = 0);

  m.def(
      "make_dataset",
      [](const py::array_t<double, py::array::c_style>& x, const Vector& y) {
        return make_dataset(matrix_from_array(x), y);
      },
      py::arg("x"), py::arg("y"));

  py::class_<TwoLayerNet>(m, "TwoLayerNetwork")
      .def(py::init([](std::size_t m_width, std::size_t d, std::uint64_t seed) {
             RngStream rng(seed);
             return init_net(m_width, d, rng);
           }),
           py::arg("m"), py::arg("d"), py::arg("seed") = 0)
      .def_property_readonly("w",
                             [](const TwoLayerNet& n) { return array_from_matrix(n.w); })
      .def_property_readonly("a", [](const TwoLayerNet& n) { return n.a; })
      .def_property_readonly("max_drift", &TwoLayerNet::max_drift)
      .def("forward", [](const TwoLayerNet& n, const DataSet& d) { return forward(n, d); },
           py::arg("data"))
      .def(
          "gram",
          [](const TwoLayerNet& n, const DataSet& d) {
            return array_from_matrix(gram_empirical(n, d));
          },
          py::arg("data"))
      .def(
          "per_neuron_gradient",
          [](const TwoLayerNet& n, const DataSet& d) {
            const auto [loss, residual] = loss_and_residual(n, d);
            return array_from_matrix(per_neuron_gradient(n, d, residual));
          },
          py::arg("data"));

  m.def(
      "gram_infinity",
      [](const DataSet& data) { return array_from_matrix(gram_infinity(data)); },
      py::arg("data"));

  m.def(
      "train_twolayer",
      [](TwoLayerNet& net, const DataSet& data, const std::string& kind, double b0,
         double eta, double alpha, const std::string& mode, std::size_t batch,
         std::uint64_t steps, double tol, std::size_t eig_cadence, std::uint64_t seed) {
        TrainOptions opts;
        opts.mode = mode_from_string(mode);
        opts.batch_size = batch;
        opts.steps = steps;
        opts.tol = tol;
        opts.eig_cadence = eig_cadence;
        RngStream rng(seed);
        auto ctrl = make_controller(kind_from_string(kind), b0, eta, alpha);
        return net_traj_dict(train(net, data, ctrl, opts, rng));
      },
      py::arg("net"), py::arg("data"), py::arg("kind"), py::arg("b0"),
      py::arg("eta") = 1.0, py::arg("alpha") = 1.0, py::arg("mode") = "det",
      py::arg("batch") = 1, py::arg("steps") = 1000, py::arg("tol") = 1e-8,
      py::arg("eig_cadence") = 10, py::arg("seed") = 0);

  m.attr("__version__") = "0.1.0";
}
