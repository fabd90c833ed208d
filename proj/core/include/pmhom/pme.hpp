#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pmhom/cell_solver.hpp"
#include "pmhom/coefficient.hpp"
#include "pmhom/grid.hpp"

namespace pmhom {

/// Integrability class of the initial datum required by the local gradient estimates:
/// log u0 locally integrable when m = 3, u0^(3-m) locally integrable when m > 3.
enum class PositivityClass { general, log_integrable, power_integrable };

std::string_view positivity_name(PositivityClass c);
PositivityClass positivity_from_name(std::string_view name);

/// du/dt = div(a grad u^m) on a Dirichlet box, u = 0 on the boundary, u(t_start) = u0.
struct PMEProblem {
  double m = 2.0;
  double r = 1.0;
  double t_start = 0.0;
  double T = 1.0;
  ScalarField u0;
  PositivityClass positivity = PositivityClass::general;
};

/// Throws ValidationError("H1") for m <= 1 or negative u0 and InvalidArgument for bad times.
void check_problem(const PMEProblem& problem);
/// Hypothesis mismatches that only warrant a warning (class vs m, zeros of u0).
std::vector<std::string> positivity_warnings(const PMEProblem& problem);

struct OscillatingMode {
  std::shared_ptr<const CoefficientField> field;
  double eps = 1.0;
};
struct ConstantMatrixMode {
  HomogenizedMatrix matrix;
};
/// Effective tensor a_hom(theta) with theta = m u^(m-1) taken pointwise.
struct ThetaDependentMode {
  std::shared_ptr<const ThetaTable> table;
  double amplitude = 1.0;  // converts table entries to physical units
};
using CoefficientMode = std::variant<OscillatingMode, ConstantMatrixMode, ThetaDependentMode>;

struct NewtonOptions {
  double tol = 1e-10;      // on ||F|| relative to the step's residual scale
  int max_iter = 40;
  double damping = 0.5;    // backtracking factor
  int max_halvings = 12;
  double linear_tol = 1e-12;
  int picard_sweeps = 3;   // theta-dependent mode only
  double picard_tol = 1e-8;
};

struct StepDiagnostics {
  int step = 0;
  double time = 0.0;
  int newton_iterations = 0;
  int picard_sweeps = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  std::size_t clamped = 0;  // nodes below -delta set to zero
};

struct Trajectory {
  Grid grid;
  double dt = 0.0;
  int steps = 0;
  int stride = 1;
  std::vector<double> times;        // stored stamps
  std::vector<ScalarField> states;  // u at each stored stamp
  std::vector<StepDiagnostics> diagnostics;
  std::size_t clamped_total = 0;
  std::size_t max_clamped_per_step = 0;

  double final_time() const { return times.back(); }
};

struct TimeStepping {
  double dt = 1e-3;
  int stride = 1;  // store every stride-th step; must divide the step count
};

/// Number of backward Euler steps; throws unless dt divides T - t_start within 1e-9.
int step_count(double t_start, double T, double dt);

/// Backward Euler in time, Q1 in space with lumped mass, damped Newton on the nodal u.
/// Negative nodal values are set to zero after each step; those below -delta, with
/// delta = 1e-8 max(1, max u0) the flux regularization, are counted as clamps.
/// Throws InvalidArgument for bad inputs and SolverError on Newton divergence or
/// theta-table overflow.
Trajectory solve_pme(const PMEProblem& problem, const CoefficientMode& mode,
                     const TimeStepping& stepping, const NewtonOptions& newton = {});

struct BarenblattConstants {
  double alpha;
  double kappa;
};
BarenblattConstants barenblatt_constants(int dim, double m);
/// t^-alpha [C - kappa (t^(-alpha/N) |x|)^2]_+^(1/(m-1)).
double barenblatt(int dim, double m, double C, const Point& x, double t);
double barenblatt_radius(int dim, double m, double C, double t);

/// Named initial data on a Dirichlet grid (values at interior nodes).
struct InitialProfile {
  enum class Kind { barenblatt, bump, constant_positive, csv };
  Kind kind = Kind::bump;
  double C = 0.0;          // barenblatt
  double t0 = 0.0;         // barenblatt
  double level = 0.0;      // bump base c0, or the constant value
  double amplitude = 1.0;  // bump
  double radius = 0.25;    // bump, relative to the side length
  std::filesystem::path path;
};
/// barenblatt: B(x - centre, t0); bump: c0 + A cos^2(pi |x - centre| / (2 R)) inside R.
ScalarField make_initial(const Grid& grid, const InitialProfile& profile, double m);

struct EnergyLedger {
  std::vector<double> times;
  std::vector<double> lm1_norm;        // ||u||_{L^{m+1}}, lumped rule
  std::vector<double> grad_um_l2;      // ||grad u^m||_{L^2}
  std::vector<double> dissipation;     // int_0^t ||grad u^m||^2, trapezoid over stamps
  double sup_lm1 = 0.0;
  double sup_lm1_time = 0.0;
  double total_dissipation = 0.0;
  bool lm1_non_increasing = true;
};
EnergyLedger energy_report(const Trajectory& traj, double m);

/// Field with nodal values u^m.
ScalarField power_field(const ScalarField& u, double m);

/// Directory layout: manifest.json plus u_<index>.csv per stored stamp.
void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj,
                     const nlohmann::json& extra = {});
Trajectory load_trajectory(const std::filesystem::path& dir);

}  // namespace pmhom
