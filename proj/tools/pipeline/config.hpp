#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmhom/cell_solver.hpp"
#include "pmhom/coefficient.hpp"
#include "pmhom/error.hpp"
#include "pmhom/pme.hpp"

namespace pmhom::pipeline {

/// Malformed or unknown configuration content. Maps to the validation exit code.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DomainConfig {
  int dim = 1;
  Point origin{0.0, 0.0};
  double side = 1.0;
};

struct ProblemConfig {
  double m = 2.0;
  double r = 1.0;
  double t_start = 0.0;
  double T = 0.1;
  DomainConfig domain;
  InitialProfile u0;
  PositivityClass positivity = PositivityClass::general;
};

struct CoefficientConfig {
  std::string family = "layered_sin";
  std::vector<double> params{2.0, 1.0, 1.0};
  std::filesystem::path csv;      // tabulated only
  std::filesystem::path sidecar;  // tabulated only
};

struct DiscretizationConfig {
  int n = 512;
  int n_cell = 64;
  int s_nodes = 16;
  int s_steps = 32;
  double dt = 2.5e-4;
  int stride = 1;
};

struct CellConfig {
  double tol = 1e-12;
  double periodic_tol = 1e-9;
  int max_periods = 200;
  double theta_min = 1e-3;
  double theta_max = 1e3;
  int theta_nodes = 24;
};

struct DiagnosticsConfig {
  std::vector<std::string> reports{"solution_error", "corrector_error", "energy",
                                   "local_gradient", "pairing"};
  double rho = 2.0;
  double energy_bound = 1.5;
  double local_bound = 2.0;
  double clamp_fraction = 1e-3;
  std::optional<Box> omega;  // default: centered half box
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> output;
  ProblemConfig problem;
  CoefficientConfig coefficient;
  DiscretizationConfig discretization;
  std::vector<double> eps{0.25, 0.125, 0.0625};
  CellConfig cell;
  NewtonOptions newton;
  DiagnosticsConfig diagnostics;
  int validation_samples = 4096;

  /// Never configurable: follows from r.
  Regime regime() const { return regime_for_exponent(problem.r); }
  nlohmann::json raw;  // the parsed document, echoed into manifests
};

/// Parses and checks the schema. Unknown keys, wrong types and out-of-range values throw
/// ConfigError naming the offending key path. Relative file paths resolve against base.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              const std::filesystem::path& base = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the configuration after defaults are applied.
nlohmann::json canonical_json(const ExperimentConfig& config);
/// Fingerprint of canonical_json, used to refuse mixing artifacts across configs.
std::string config_hash(const ExperimentConfig& config);

}  // namespace pmhom::pipeline
