#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "json.hpp"
#include "pmhom/diagnostics.hpp"

namespace pmhom::pipeline {

enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,  // I/O, usage, missing artifacts
  exit_validation = 2,
  exit_solver = 3,
  exit_diagnostics = 4,
};

/// A required artifact of an earlier stage is absent.
class MissingArtifact : public Error {
 public:
  using Error::Error;
};

/// Diagnostics ran but at least one verdict failed; the report is already written.
class DiagnosticsFailure : public Error {
 public:
  using Error::Error;
};

/// Warnings escalated by --strict.
class StrictWarning : public Error {
 public:
  using Error::Error;
};

/// Maps the exception currently being handled to a process exit code.
int exit_code_for_current_exception();

std::string_view version();

inline constexpr std::string_view kStages[] = {"validate", "cell",  "homogenize",
                                               "solve",    "sweep", "diagnose"};

struct RunOptions {
  std::filesystem::path out;  // empty: config output, else runs/<name>
  int workers = 1;
  bool strict = false;
  std::ostream* log = nullptr;
};

/// Stage runner over one artifact directory:
///
///   manifest.json          config echo, hash, version, wall-clock per stage
///   validation.json
///   cells/ | theta_table/  cell solutions (sub, super) or the theta table (critical)
///   a_hom.json
///   homogenized/           homogenized trajectory
///   sweep/<name>_eps<e>_n<n>_dt<dt>/
///   diagnostics/           report.json, report.csv, energy_*.csv
///
/// A directory whose manifest carries a different config hash is refused. Completed
/// stages with their artifacts present are skipped.
class Pipeline {
 public:
  Pipeline(ExperimentConfig config, RunOptions options);

  const ExperimentConfig& config() const { return config_; }
  const std::filesystem::path& out() const { return out_; }
  const std::string& hash() const { return hash_; }

  void run_stage(std::string_view stage);
  /// All stages in order.
  void run();

  nlohmann::json validate();
  void cell();
  void homogenize();
  void solve();
  void sweep();
  DiagnosticsReport diagnose();

  std::filesystem::path sweep_dir(double eps) const;

 private:
  struct Inputs {
    std::shared_ptr<const CoefficientField> field;
    Grid grid;
    Grid cell_grid;
    PMEProblem problem;
    std::vector<std::string> warnings;
  };
  const Inputs& inputs();
  Inputs check_inputs() const;
  void timed(std::string_view stage, const std::function<void()>& body);
  bool completed(std::string_view stage) const;
  void write_manifest() const;
  void say(const std::string& line) const;
  CellSolveOptions cell_options() const;
  CoefficientMode homogenized_mode();
  CorrectorSet load_correctors() const;
  SweepResult load_sweep() const;

  ExperimentConfig config_;
  RunOptions options_;
  std::filesystem::path out_;
  std::string hash_;
  nlohmann::json stages_ = nlohmann::json::object();
  std::optional<Inputs> inputs_;
};

struct BarenblattRow {
  int n = 0;
  double dt = 0.0;
  double l1_error = 0.0;
  std::optional<double> factor;  // previous error / this error
  std::size_t clamps = 0;
  bool energy_monotone = true;
};

struct BarenblattCheck {
  std::vector<BarenblattRow> rows;
  double min_factor = 1.5;
  double error_bound = 2e-2;  // at n = 256
  bool pass = false;
};

/// a = I, N = 1, m = 2, C = kappa on (-1, 1), t in [0.01, 0.5]; L1 error against the
/// exact profile at the final time for each (n, dt).
BarenblattCheck barenblatt_check(const std::vector<std::pair<int, double>>& ladder = {
                                     {128, 2e-3}, {256, 1e-3}, {512, 5e-4}});
void print_barenblatt(std::ostream& os, const BarenblattCheck& check);

}  // namespace pmhom::pipeline
