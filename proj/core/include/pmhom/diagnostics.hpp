#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmhom/cell_solver.hpp"
#include "pmhom/pme.hpp"

namespace pmhom {

/// Oscillating runs over a decreasing eps ladder plus the homogenized reference run.
struct SweepResult {
  double m = 2.0;
  double r = 1.0;
  std::vector<double> eps;
  std::vector<Trajectory> runs;
  Trajectory homogenized;
};

/// Throws InvalidArgument unless eps is strictly decreasing and every run shares the
/// reference grid and stored stamps.
void check_sweep(const SweepResult& sweep);

/// grad_y Phi_k(y, s) for the regime of the sweep. In the critical regime the correctors
/// depend on theta = m u^(m-1) of the homogenized solution at the evaluation point.
class CorrectorSet {
 public:
  /// Phi = 0 (constant coefficients, or a plain gradient mismatch).
  static CorrectorSet zero(int dim);
  /// One sub or super CellSolution per direction.
  static CorrectorSet from_cells(std::vector<CellSolution> cells);
  /// Critical regime; the table must retain its corrector fields.
  static CorrectorSet from_table(std::shared_ptr<const ThetaTable> table, double m);

  int dim() const { return dim_; }
  std::optional<Regime> regime() const;
  /// grad_y Phi_k at cell coordinates (y, s) given the local homogenized value u.
  Vec gradient(int k, const Point& y, double s, double u) const;
  /// Psi_k(y, s) at theta (critical) or Phi_k(y, s) (sub, super).
  double value(int k, const Point& y, double s, double u) const;

 private:
  int dim_ = 1;
  double m_ = 2.0;
  std::vector<CellSolution> cells_;
  std::shared_ptr<const ThetaTable> table_;
};

/// Integral over space-time of |grad u_eps^m - grad u^m - sum_k d_k u^m grad_y Phi_k|^2,
/// with (y, s) = (frac(x/eps), frac(t/eps^r)); Gauss points in space, trapezoid over the
/// stored stamps. `index` selects the run of the sweep.
double corrector_error(const SweepResult& sweep, const CorrectorSet& correctors,
                       std::size_t index);

struct SolutionNorm {
  enum class Kind { l2_spacetime, lrho_lm1 };
  Kind kind = Kind::l2_spacetime;
  double rho = 2.0;
};
SolutionNorm parse_solution_norm(const std::string& tag, double rho = 2.0);
/// ||u_eps - u|| per run of the sweep.
std::vector<double> solution_error(const SweepResult& sweep, const SolutionNorm& norm);

/// c0 + sum_j coeff_j cos(2 pi freq_j . y); used for b(y) (freq a vector) and c(s).
struct CellMode {
  double constant = 1.0;
  struct Term {
    double coeff = 1.0;
    std::array<int, kMaxDim> freq{1, 0};
  };
  std::vector<Term> terms;
  double operator()(const Point& y, int dim) const;
  double operator()(double s) const;
};

/// Polynomial bump prod_d (1 - ((x_d - c_d) / R_d)^2)^2 on its support box.
struct PolyBump {
  Box support;
  double operator()(const Point& x, int dim) const;
  double operator()(double t) const;
};

struct PairingTest {
  PolyBump phi;
  CellMode b;
  PolyBump psi;  // support.lo[0] .. support.hi[0] in time
  CellMode c;
};

/// integral of u phi(x) b(x/eps) psi(t) c(t/eps^r) over the stored space-time grid.
double two_scale_pairing(const Trajectory& traj, const PairingTest& test, double eps, double r);

/// Named per-eps series and verdicts that are pure functions of the stored values.
struct Series {
  std::string name;
  std::vector<double> eps;
  std::vector<std::optional<double>> values;
  std::vector<std::optional<double>> rates;  // log2(e_{2 eps} / e_eps) per adjacent pair
};

enum class VerdictRule { strictly_decreasing, ratio_bound, upper_bound, lower_bound };
std::string_view rule_name(VerdictRule rule);
VerdictRule rule_from_name(std::string_view name);

struct Verdict {
  std::string name;
  std::string series;
  VerdictRule rule = VerdictRule::strictly_decreasing;
  double threshold = 0.0;
  bool pass = false;
};

struct DiagnosticsReport {
  std::vector<Series> series;
  std::vector<Verdict> verdicts;
  std::vector<std::string> warnings;

  const Series& find(const std::string& name) const;
  void add_series(Series s);
  /// Adds a verdict and evaluates it against the named series.
  void add_verdict(std::string name, const std::string& series, VerdictRule rule,
                   double threshold = 0.0);
  /// Recomputes every verdict from the stored series.
  void reevaluate();
  bool all_pass() const;
  void merge(const DiagnosticsReport& other);
};

/// Rates for ratio-2 ladders (undefined entries flagged as empty); non-ratio-2 ladders
/// get no rates. Adds a strictly_decreasing verdict per series.
DiagnosticsReport convergence_table(const std::vector<Series>& series);
/// Rates per adjacent pair; empty when the ladder is not ratio 2 or a value is not positive.
std::vector<std::optional<double>> observed_rates(const std::vector<double>& eps,
                                                  const std::vector<std::optional<double>>& v);
bool evaluate_verdict(const Verdict& verdict, const Series& series);

struct LocalGradientOptions {
  Box omega;
  double bound = 2.0;
  PositivityClass positivity = PositivityClass::general;
};
/// Per-eps integral over omega x (0,T) of |grad u_eps|^2, plus sup_t of the weight
/// functional for m = 3 (-log u on [u <= 1]) or m > 3 (u^(3-m)). Throws for m < 2 or an
/// omega that is not strictly inside the domain.
DiagnosticsReport local_gradient_estimate(const SweepResult& sweep,
                                          const LocalGradientOptions& options);
/// Centered box of half the side length.
Box centered_half_box(const Grid& grid);

/// Nodal correctors z = sum_k d_k u^m Phi_k and w with z = m u^(m-1) w, at one stamp of
/// the homogenized run. Nodes with u below the floor carry z = w = 0.
struct CorrectorAssembly {
  std::vector<double> u;
  std::vector<double> z;
  std::vector<double> w;
  double floor = 0.0;
};
CorrectorAssembly assemble_correctors(const Trajectory& homogenized, std::size_t stamp,
                                      const CorrectorSet& correctors, double m, double eps,
                                      double r);

nlohmann::json to_json(const DiagnosticsReport& report);
DiagnosticsReport report_from_json(const nlohmann::json& j);
/// Aligned-column CSV: one row per (series, eps).
void write_report_csv(const std::filesystem::path& path, const DiagnosticsReport& report);

}  // namespace pmhom
