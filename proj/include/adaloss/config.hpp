#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adaloss/controllers.hpp"
#include "adaloss/linreg.hpp"

namespace adaloss {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Testbed { LinReg, TwoLayer };

enum class OptimizerName {
  AdaLoss,
  AdaGradNorm,
  SgdConst,
  SgdDecaySqrt,
  SquareRule,
  NormRule,
  Adam,
  AdamLoss,
  AdamSqrt,
};

const char* to_string(OptimizerName name);
bool is_adam_family(OptimizerName name);
ControllerKind controller_kind(OptimizerName name);
AdamKind adam_kind(OptimizerName name);

struct ExperimentConfig {
  Testbed testbed = Testbed::LinReg;
  OptimizerName optimizer = OptimizerName::AdaLoss;
  Mode mode = Mode::Deterministic;
  Conditioning conditioning = Conditioning::IID;
  std::size_t n = 0;  // defaults filled per testbed
  std::size_t d = 0;
  std::size_t m = 2000;  // hidden width, two-layer only
  std::uint64_t steps = 5000;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  double b0 = 1.0;
  double eta = 1.0;
  double alpha = 1.0;
  double c = 0.0;
  double c_s = 0.2;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_epsilon = 1e-8;
  std::size_t batch = 1;
  std::size_t eig_cadence = 10;
  std::size_t jobs = 2;
  std::vector<double> b0_grid;  // empty unless sweeping
  std::string out_dir = "out";
  std::string problem_file;  // optional pre-generated problem
  bool plot_data = false;    // also emit two-column series per plotted quantity

  ControllerState make_controller_state() const;
  AdamState make_adam_state(std::size_t dim) const;
};

/// Parses "k=v" lines (with # comments); unknown keys are rejected; flags in
/// `overrides` win over file contents. Defaults are filled per testbed.
ExperimentConfig parse_config(const std::optional<std::string>& path,
                              const std::map<std::string, std::string>& overrides);

/// "1e-3,1e-2,...,1e3" expands to a log grid; a plain comma list passes
/// through.
std::vector<double> expand_grid(const std::string& text);

}  // namespace adaloss
