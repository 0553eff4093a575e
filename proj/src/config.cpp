#include "adaloss/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace adaloss {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d < 0 || d != std::floor(d))
    throw ConfigError("config: key '" + key + "' expects a nonnegative integer");
  return static_cast<std::uint64_t>(d);
}

}  // namespace

const char* to_string(OptimizerName name) {
  switch (name) {
    case OptimizerName::AdaLoss: return "adaloss";
    case OptimizerName::AdaGradNorm: return "adagradnorm";
    case OptimizerName::SgdConst: return "sgd-const";
    case OptimizerName::SgdDecaySqrt: return "sgd-decaysqrt";
    case OptimizerName::SquareRule: return "squarerule";
    case OptimizerName::NormRule: return "normrule";
    case OptimizerName::Adam: return "adam";
    case OptimizerName::AdamLoss: return "adamloss";
    case OptimizerName::AdamSqrt: return "adamsqrt";
  }
  return "?";
}

bool is_adam_family(OptimizerName name) {
  return name == OptimizerName::Adam || name == OptimizerName::AdamLoss ||
         name == OptimizerName::AdamSqrt;
}

ControllerKind controller_kind(OptimizerName name) {
  switch (name) {
    case OptimizerName::AdaLoss: return ControllerKind::AdaLoss;
    case OptimizerName::AdaGradNorm: return ControllerKind::AdaGradNorm;
    case OptimizerName::SgdConst: return ControllerKind::Constant;
    case OptimizerName::SgdDecaySqrt: return ControllerKind::DecaySqrt;
    case OptimizerName::SquareRule: return ControllerKind::SquareRuleLoss;
    case OptimizerName::NormRule: return ControllerKind::NormRuleLoss;
    default:
      throw ConfigError("optimizer is not a scalar-denominator controller");
  }
}

AdamKind adam_kind(OptimizerName name) {
  switch (name) {
    case OptimizerName::Adam: return AdamKind::Adam;
    case OptimizerName::AdamLoss: return AdamKind::AdamLoss;
    case OptimizerName::AdamSqrt: return AdamKind::AdamSqrt;
    default:
      throw ConfigError("optimizer is not in the adam family");
  }
}

ControllerState ExperimentConfig::make_controller_state() const {
  return make_controller(controller_kind(optimizer), b0, eta, alpha, c, c_s);
}

AdamState ExperimentConfig::make_adam_state(std::size_t dim) const {
  const double eta_or_b0 = optimizer == OptimizerName::Adam ? eta : b0;
  return make_adam(adam_kind(optimizer), dim, eta_or_b0, alpha, beta1, beta2, adam_epsilon);
}

std::vector<double> expand_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  if (parts.empty()) throw ConfigError("config: empty b0 grid");

  const auto ell = std::find(parts.begin(), parts.end(), "...");
  if (ell == parts.end()) {
    std::vector<double> out;
    for (const auto& p : parts) out.push_back(parse_double("b0_grid", p));
    return out;
  }
  // first, second, ..., last: a geometric grid with ratio second/first.
  if (ell != parts.begin() + 2 || parts.size() != 4)
    throw ConfigError("config: grid shorthand is 'first,second,...,last'");
  const double first = parse_double("b0_grid", parts[0]);
  const double second = parse_double("b0_grid", parts[1]);
  const double last = parse_double("b0_grid", parts[3]);
  if (!(first > 0.0) || !(second > first) || !(last > second))
    throw ConfigError("config: grid shorthand requires 0 < first < second < last");
  const double ratio = second / first;
  std::vector<double> out{first};
  while (out.back() * ratio <= last * (1.0 + 1e-12)) out.push_back(out.back() * ratio);
  return out;
}

ExperimentConfig parse_config(const std::optional<std::string>& path,
                              const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> kv;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("config: cannot open '" + *path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
      kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
  }
  for (const auto& [k, v] : overrides) kv[k] = v;

  ExperimentConfig cfg;
  bool testbed_set = false;
  bool n_set = false, d_set = false, m_set = false;

  for (const auto& [key, value] : kv) {
    if (key == "testbed") {
      if (value == "linreg") cfg.testbed = Testbed::LinReg;
      else if (value == "twolayer") cfg.testbed = Testbed::TwoLayer;
      else throw ConfigError("config: testbed must be linreg or twolayer");
      testbed_set = true;
    } else if (key == "optimizer") {
      bool found = false;
      for (OptimizerName cand :
           {OptimizerName::AdaLoss, OptimizerName::AdaGradNorm, OptimizerName::SgdConst,
            OptimizerName::SgdDecaySqrt, OptimizerName::SquareRule, OptimizerName::NormRule,
            OptimizerName::Adam, OptimizerName::AdamLoss, OptimizerName::AdamSqrt}) {
        if (value == to_string(cand)) {
          cfg.optimizer = cand;
          found = true;
          break;
        }
      }
      if (!found) throw ConfigError("config: unknown optimizer '" + value + "'");
    } else if (key == "mode") {
      if (value == "det") cfg.mode = Mode::Deterministic;
      else if (value == "stoch") cfg.mode = Mode::Stochastic;
      else throw ConfigError("config: mode must be det or stoch");
    } else if (key == "conditioning") {
      if (value == "iid") cfg.conditioning = Conditioning::IID;
      else if (value == "correlated") cfg.conditioning = Conditioning::Correlated;
      else throw ConfigError("config: conditioning must be iid or correlated");
    } else if (key == "n") {
      cfg.n = parse_count(key, value);
      n_set = true;
    } else if (key == "d") {
      cfg.d = parse_count(key, value);
      d_set = true;
    } else if (key == "m") {
      cfg.m = parse_count(key, value);
      m_set = true;
    } else if (key == "steps") {
      cfg.steps = parse_count(key, value);
    } else if (key == "tol") {
      cfg.tol = parse_double(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_count(key, value);
    } else if (key == "b0") {
      cfg.b0 = parse_double(key, value);
    } else if (key == "eta") {
      cfg.eta = parse_double(key, value);
    } else if (key == "alpha") {
      cfg.alpha = parse_double(key, value);
    } else if (key == "c") {
      cfg.c = parse_double(key, value);
    } else if (key == "c_s") {
      cfg.c_s = parse_double(key, value);
    } else if (key == "beta1") {
      cfg.beta1 = parse_double(key, value);
    } else if (key == "beta2") {
      cfg.beta2 = parse_double(key, value);
    } else if (key == "adam_epsilon") {
      cfg.adam_epsilon = parse_double(key, value);
    } else if (key == "batch") {
      cfg.batch = parse_count(key, value);
    } else if (key == "eig_cadence") {
      cfg.eig_cadence = parse_count(key, value);
    } else if (key == "jobs") {
      cfg.jobs = std::max<std::uint64_t>(1, parse_count(key, value));
    } else if (key == "b0_grid") {
      cfg.b0_grid = expand_grid(value);
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "problem_file") {
      cfg.problem_file = value;
    } else if (key == "plot_data") {
      if (value == "true" || value == "1") cfg.plot_data = true;
      else if (value == "false" || value == "0") cfg.plot_data = false;
      else throw ConfigError("config: key 'plot_data' expects true/false");
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }

  if (!testbed_set && kv.count("testbed") == 0)
    throw ConfigError("config: missing required key 'testbed'");

  // Per-testbed dimension defaults.
  if (cfg.testbed == Testbed::LinReg) {
    if (!n_set) cfg.n = 1000;
    if (!d_set) cfg.d = 20;
  } else {
    if (!n_set) cfg.n = 50;
    if (!d_set) cfg.d = 20;
    if (!m_set) cfg.m = 2000;
  }

  // Validation; errors name the offending key.
  if (!(cfg.eta > 0.0)) throw ConfigError("config: 'eta' must be > 0");
  if (!(cfg.b0 > 0.0)) throw ConfigError("config: 'b0' must be > 0");
  if (!(cfg.alpha > 0.0)) throw ConfigError("config: 'alpha' must be > 0");
  if (!(cfg.tol > 0.0)) throw ConfigError("config: 'tol' must be > 0");
  if (cfg.steps < 1) throw ConfigError("config: 'steps' must be >= 1");
  if (cfg.n < 1) throw ConfigError("config: 'n' must be >= 1");
  if (cfg.d < 1) throw ConfigError("config: 'd' must be >= 1");
  if (cfg.testbed == Testbed::LinReg && cfg.n < cfg.d)
    throw ConfigError("config: 'n' must be >= 'd' for linreg");
  if (cfg.testbed == Testbed::TwoLayer && cfg.m < 1)
    throw ConfigError("config: 'm' must be >= 1");
  if (cfg.batch < 1) throw ConfigError("config: 'batch' must be >= 1");
  if (cfg.mode == Mode::Stochastic && cfg.batch > cfg.n)
    throw ConfigError("config: 'batch' must be <= 'n'");
  if (!(cfg.c_s >= 0.0)) throw ConfigError("config: 'c_s' must be >= 0");
  return cfg;
}

}  // namespace adaloss
