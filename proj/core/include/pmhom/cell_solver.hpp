#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pmhom/coefficient.hpp"
#include "pmhom/grid.hpp"

namespace pmhom {

/// Cell-problem regime selected by the temporal scale exponent r.
enum class Regime { sub, critical, super };

/// r < 2 -> sub, r == 2 -> critical, r > 2 -> super. Throws for r <= 0.
Regime regime_for_exponent(double r);
std::string_view regime_name(Regime regime);
Regime regime_from_name(std::string_view name);

struct CellSolveOptions {
  double tol = 1e-12;          // CG relative residual of every elliptic solve
  int max_iter = 0;            // 0: 50 * DOFs
  double periodic_tol = 1e-9;  // relative L2 periodicity defect (critical regime)
  int max_periods = 200;       // period-map evaluations (critical regime)
};

/// Correctors for one direction e_k on the periodic unit cell.
///
/// sub:      fields[i] = Phi_k(., s_i) for the s-parametrized elliptic family.
/// super:    fields[0] = Phi_k for the s-averaged coefficient; s_nodes are the averaging
///           abscissae.
/// critical: fields[i] = Psi_k(., s_i) over one period of the time-periodic problem, and
///           Phi_k = theta * Psi_k.
struct CellSolution {
  Regime regime = Regime::sub;
  int k = 1;
  double theta = 0.0;
  Grid grid;
  std::vector<double> s_nodes;
  std::vector<double> s_weights;
  std::vector<ScalarField> fields;
  double periodicity_defect = 0.0;
  int periods = 0;
  double solver_tol = 0.0;

  /// Index of the stored field closest to s in the periodic sense.
  std::size_t nearest_s(double s) const;
  /// grad_y Phi_k(y, s) (Phi_k = theta Psi_k in the critical regime).
  Vec corrector_gradient(const Point& y, double s) const;
  double corrector_value(const Point& y, double s) const;
};

/// -div_y(a(y,s)[grad Phi_k + e_k]) = 0 at each of s_nodes equally spaced s in [0,1).
CellSolution solve_cp1(const CoefficientField& coeff, const Grid& y_grid, int s_nodes, int k,
                       const CellSolveOptions& options = {});

/// -div_y(abar(y)[grad Phi_k + e_k]) = 0, abar the s_quad-point periodic trapezoid average.
CellSolution solve_cp3(const CoefficientField& coeff, const Grid& y_grid, int s_quad, int k,
                       const CellSolveOptions& options = {});

/// d_s Psi = div_y(a(y,s)[theta grad Psi + e_k]), Psi(.,0) = Psi(.,1), by implicit Euler
/// with s_steps steps per period. The periodic solution is the fixed point of the period
/// map started from zero, found by GMRES on (I - P) Psi = P(0); each Krylov step is one
/// marched period. theta = 0 returns zero fields. Throws SolverError when the periodicity
/// defect is above periodic_tol after max_periods period evaluations.
CellSolution solve_cp2(const CoefficientField& coeff, double theta, const Grid& y_grid,
                       int s_steps, int k, const CellSolveOptions& options = {});

/// Constant effective tensor (or one theta-slice of it in the critical regime).
struct HomogenizedMatrix {
  int dim = 1;
  Tensor value;                 // symmetrized, normalized-coefficient units
  Regime regime = Regime::sub;
  double theta = 0.0;
  double amplitude = 1.0;       // coefficient normalization factor
  double symmetry_defect = 0.0; // before symmetrization
  int cell_cells_per_axis = 0;
  int s_count = 0;
  double tol = 0.0;

  /// In the units of the coefficient before ceiling normalization.
  Tensor unscaled() const { return value.scaled(amplitude); }
  EigenRange eigenvalues() const { return eigen_range(value, dim); }
};

/// a_hom e_k = sum_s w_s integral a(y,s)[grad_y Phi_k + e_k] dy, symmetrized.
/// Expects exactly one solution per direction, all with the same regime, grid and s-nodes.
HomogenizedMatrix assemble_ahom(const CoefficientField& coeff,
                                std::span<const CellSolution> solutions);

/// Double average of a over the cell grid Gauss points and s_nodes periodic trapezoid.
Tensor arithmetic_mean(const CoefficientField& coeff, const Grid& y_grid, int s_nodes);

/// True when the eigenvalues of m lie in [lambda - tol, 1 + tol] and m is symmetric.
bool spectral_sandwich(const HomogenizedMatrix& m, double lambda, double tol = 1e-6);

struct ThetaTableOptions {
  double theta_min = 1e-3;
  double theta_max = 1e3;
  int nodes = 24;       // log-spaced positive nodes in [theta_min, theta_max]
  int s_steps = 32;
  bool keep_fields = false;
};

/// theta -> a_hom(theta) for the critical regime; node 0 is theta = 0.
class ThetaTable {
 public:
  ThetaTable() = default;
  ThetaTable(std::vector<double> thetas, std::vector<HomogenizedMatrix> matrices);

  int dim() const { return matrices_.front().dim; }
  const std::vector<double>& thetas() const { return thetas_; }
  const std::vector<HomogenizedMatrix>& matrices() const { return matrices_; }
  double theta_max() const { return thetas_.back(); }

  struct Query {
    Tensor value;
    bool clamped = false;
  };
  /// Piecewise linear in log(1 + theta); clamps above theta_max and reports it.
  Query query(double theta) const;
  /// Largest max-entry distance between matrices at adjacent positive nodes.
  double max_adjacent_distance() const;

  bool has_fields() const { return !fields_.empty(); }
  /// fields()[node][k-1]; empty unless built with keep_fields.
  const std::vector<std::vector<CellSolution>>& fields() const { return fields_; }
  void set_fields(std::vector<std::vector<CellSolution>> fields) { fields_ = std::move(fields); }
  /// grad_y Phi_k at (y, s) for a given theta, interpolated like query(). Needs fields.
  Vec corrector_gradient(int k, const Point& y, double s, double theta) const;
  /// Psi_k(y, s) (without the theta factor), interpolated like query(). Needs fields.
  double psi_value(int k, const Point& y, double s, double theta) const;

 private:
  struct Bracket {
    std::size_t lo;
    double weight;  // of node lo + 1
    bool clamped;
  };
  Bracket bracket(double theta) const;
  std::vector<double> thetas_;
  std::vector<double> log_nodes_;
  std::vector<HomogenizedMatrix> matrices_;
  std::vector<std::vector<CellSolution>> fields_;
};

ThetaTable build_theta_table(const CoefficientField& coeff, const Grid& y_grid,
                             const ThetaTableOptions& table_options,
                             const CellSolveOptions& options = {}, int workers = 1);

/// Directory layout: manifest.json plus one CSV per stored field.
void save_cell_solutions(const std::filesystem::path& dir,
                         std::span<const CellSolution> solutions,
                         const HomogenizedMatrix& ahom);
std::vector<CellSolution> load_cell_solutions(const std::filesystem::path& dir);
void save_theta_table(const std::filesystem::path& dir, const ThetaTable& table);
ThetaTable load_theta_table(const std::filesystem::path& dir);

/// Manifest form: {"dim", "regime", "theta", "matrix" (row-major), "unscaled", ...}.
nlohmann::json to_json(const HomogenizedMatrix& m);
HomogenizedMatrix homogenized_from_json(const nlohmann::json& j);

}  // namespace pmhom
