#include "pmhom/cell_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pmhom/assembly.hpp"
#include "pmhom/error.hpp"
#include "pmhom/io.hpp"
#include "pmhom/linear_solvers.hpp"
#include "pmhom/parallel.hpp"

namespace pmhom {

namespace {

void check_cell_grid(const Grid& grid) {
  if (grid.boundary() != BoundaryKind::periodic || grid.side_length() != 1.0)
    throw InvalidArgument("cell problems need a periodic grid on the unit cell");
}

void check_direction(int k, int dim) {
  if (k < 1 || k > dim)
    throw InvalidArgument("cell problem direction k = " + std::to_string(k) +
                          " outside 1.." + std::to_string(dim));
}

Vec unit_vector(int k) {
  Vec e{0.0, 0.0};
  e[k - 1] = 1.0;
  return e;
}

std::vector<Tensor> samples_at(const CoefficientField& coeff, const Grid& grid, double s) {
  return sample_at_quadrature(grid, [&](const QuadraturePoint& qp) { return coeff(qp.x, s); });
}

std::vector<Tensor> averaged_samples(const CoefficientField& coeff, const Grid& grid,
                                     std::span<const double> s_nodes,
                                     std::span<const double> weights) {
  std::vector<Tensor> avg;
  for (std::size_t l = 0; l < s_nodes.size(); ++l) {
    const auto at = samples_at(coeff, grid, s_nodes[l]);
    if (avg.empty()) avg.assign(at.size(), Tensor{});
    for (std::size_t q = 0; q < at.size(); ++q) avg[q] = avg[q] + at[q].scaled(weights[l]);
  }
  return avg;
}

SolverOptions solver_options(const CellSolveOptions& o) { return {o.tol, o.max_iter}; }

ScalarField solve_elliptic_cell(const Grid& grid, std::span<const Tensor> samples, int k,
                                const CellSolveOptions& options) {
  const auto op = assemble_stiffness(grid, samples);
  auto rhs = assemble_flux_load(grid, samples, unit_vector(k));
  for (double& v : rhs) v = -v;
  auto res = solve_spd(op, rhs, solver_options(options));
  return ScalarField(grid, std::move(res.x));
}

void uniform_s_nodes(CellSolution& sol, int count) {
  sol.s_nodes.resize(static_cast<std::size_t>(count));
  sol.s_weights.assign(static_cast<std::size_t>(count), 1.0 / count);
  for (int i = 0; i < count; ++i) sol.s_nodes[static_cast<std::size_t>(i)] =
      static_cast<double>(i) / count;
}

}  // namespace

Regime regime_for_exponent(double r) {
  if (!(r > 0.0) || !std::isfinite(r))
    throw InvalidArgument("temporal scale exponent r must be positive and finite");
  if (r < 2.0) return Regime::sub;
  if (r > 2.0) return Regime::super;
  return Regime::critical;
}

std::string_view regime_name(Regime regime) {
  switch (regime) {
    case Regime::sub: return "sub";
    case Regime::critical: return "critical";
    case Regime::super: return "super";
  }
  return "unknown";
}

Regime regime_from_name(std::string_view name) {
  if (name == "sub") return Regime::sub;
  if (name == "critical") return Regime::critical;
  if (name == "super") return Regime::super;
  throw InvalidArgument("unknown regime '" + std::string(name) + "'");
}

std::size_t CellSolution::nearest_s(double s) const {
  if (fields.size() <= 1 || regime == Regime::super) return 0;
  const double count = static_cast<double>(fields.size());
  const double frac = s - std::floor(s);
  return static_cast<std::size_t>(std::llround(frac * count)) % fields.size();
}

Vec CellSolution::corrector_gradient(const Point& y, double s) const {
  Vec g = fields[nearest_s(s)].gradient(y);
  if (regime == Regime::critical) {
    g[0] *= theta;
    g[1] *= theta;
  }
  return g;
}

double CellSolution::corrector_value(const Point& y, double s) const {
  const double v = fields[nearest_s(s)].interpolate(y);
  return regime == Regime::critical ? theta * v : v;
}

CellSolution solve_cp1(const CoefficientField& coeff, const Grid& y_grid, int s_nodes, int k,
                       const CellSolveOptions& options) {
  check_cell_grid(y_grid);
  check_direction(k, coeff.dim());
  if (y_grid.dim() != coeff.dim()) throw InvalidArgument("solve_cp1: grid/coefficient dim");
  if (s_nodes < 1) throw InvalidArgument("solve_cp1: need at least one s-node");
  CellSolution sol;
  sol.regime = Regime::sub;
  sol.k = k;
  sol.grid = y_grid;
  sol.solver_tol = options.tol;
  uniform_s_nodes(sol, s_nodes);
  if (coeff.time_independent()) {
    const auto field = solve_elliptic_cell(y_grid, samples_at(coeff, y_grid, 0.0), k, options);
    sol.fields.assign(static_cast<std::size_t>(s_nodes), field);
    return sol;
  }
  for (double s : sol.s_nodes)
    sol.fields.push_back(solve_elliptic_cell(y_grid, samples_at(coeff, y_grid, s), k, options));
  return sol;
}

CellSolution solve_cp3(const CoefficientField& coeff, const Grid& y_grid, int s_quad, int k,
                       const CellSolveOptions& options) {
  check_cell_grid(y_grid);
  check_direction(k, coeff.dim());
  if (y_grid.dim() != coeff.dim()) throw InvalidArgument("solve_cp3: grid/coefficient dim");
  if (s_quad < 1) throw InvalidArgument("solve_cp3: need at least one s quadrature node");
  CellSolution sol;
  sol.regime = Regime::super;
  sol.k = k;
  sol.grid = y_grid;
  sol.solver_tol = options.tol;
  uniform_s_nodes(sol, s_quad);
  const auto avg = averaged_samples(coeff, y_grid, sol.s_nodes, sol.s_weights);
  sol.fields.push_back(solve_elliptic_cell(y_grid, avg, k, options));
  return sol;
}

CellSolution solve_cp2(const CoefficientField& coeff, double theta, const Grid& y_grid,
                       int s_steps, int k, const CellSolveOptions& options) {
  check_cell_grid(y_grid);
  check_direction(k, coeff.dim());
  if (y_grid.dim() != coeff.dim()) throw InvalidArgument("solve_cp2: grid/coefficient dim");
  if (!(theta >= 0.0) || !std::isfinite(theta))
    throw InvalidArgument("solve_cp2: theta must be a finite nonnegative number");
  if (s_steps < 4) throw InvalidArgument("solve_cp2: need at least 4 s-steps per period");
  CellSolution sol;
  sol.regime = Regime::critical;
  sol.k = k;
  sol.theta = theta;
  sol.grid = y_grid;
  sol.solver_tol = options.tol;
  uniform_s_nodes(sol, s_steps);
  sol.fields.assign(static_cast<std::size_t>(s_steps), ScalarField(y_grid));
  if (theta == 0.0) return sol;  // Phi_k = 0 on the degenerate set

  const std::size_t n = y_grid.dof_count();
  const double ds = 1.0 / s_steps;
  const auto mass = lumped_mass(y_grid);
  const std::size_t distinct = coeff.time_independent() ? 1 : static_cast<std::size_t>(s_steps);
  std::vector<SparseOperator> systems;
  std::vector<std::vector<double>> loads;
  for (std::size_t i = 0; i < distinct; ++i) {
    const double s = static_cast<double>(i + 1) / s_steps;
    const auto samples = samples_at(coeff, y_grid, s);
    systems.push_back(
        assemble_stiffness(y_grid, samples).scaled_plus_diagonal(ds * theta, mass,
                                                                 ConstraintTag::none));
    auto load = assemble_flux_load(y_grid, samples, unit_vector(k));
    for (double& v : load) v *= ds;
    loads.push_back(std::move(load));
  }

  const SolverOptions inner = solver_options(options);
  int periods = 0;
  // One implicit Euler period: (M + ds theta K_i) x_i = M x_{i-1} - ds b_i.
  auto march = [&](std::span<const double> start, bool store) {
    std::vector<double> x(start.begin(), start.end());
    std::vector<double> rhs(n);
    for (int i = 1; i <= s_steps; ++i) {
      const std::size_t idx = distinct == 1 ? 0 : static_cast<std::size_t>(i - 1);
      for (std::size_t d = 0; d < n; ++d) rhs[d] = mass[d] * x[d] - loads[idx][d];
      x = solve_spd(systems[idx], rhs, inner, x).x;
      project_zero_mean(x);
      if (store) {
        auto& f = sol.fields[static_cast<std::size_t>(i % s_steps)];
        std::copy(x.begin(), x.end(), f.values().begin());
      }
    }
    ++periods;
    return x;
  };

  const std::vector<double> zero(n, 0.0);
  const auto offset = march(zero, false);
  GmresOptions gopt;
  gopt.tol = 0.25 * options.periodic_tol;
  gopt.max_matvec = std::max(0, options.max_periods - 2);
  std::vector<double> fixed_point(n, 0.0);
  if (gopt.max_matvec > 0) {
    const LinearMap one_minus_p = [&](std::span<const double> v, std::span<double> out) {
      std::vector<double> w(v.begin(), v.end());
      project_zero_mean(w);
      const auto pv = march(w, false);
      for (std::size_t d = 0; d < n; ++d) out[d] = w[d] - (pv[d] - offset[d]);
    };
    fixed_point = gmres(one_minus_p, offset, gopt).x;
    project_zero_mean(fixed_point);
  }
  const auto end = march(fixed_point, true);
  double diff = 0.0;
  for (std::size_t d = 0; d < n; ++d) diff += (end[d] - fixed_point[d]) * (end[d] - fixed_point[d]);
  const double scale = norm2(end);
  sol.periodicity_defect = scale > 0.0 ? std::sqrt(diff) / scale : std::sqrt(diff);
  sol.periods = periods;
  if (!(sol.periodicity_defect <= options.periodic_tol)) {
    std::ostringstream msg;
    msg << "solve_cp2: periodicity not reached after " << periods
        << " period evaluations (theta = " << theta << ", relative defect "
        << sol.periodicity_defect << ", tolerance " << options.periodic_tol << ")";
    throw SolverError(msg.str(), sol.periodicity_defect, periods);
  }
  return sol;
}

HomogenizedMatrix assemble_ahom(const CoefficientField& coeff,
                                std::span<const CellSolution> solutions) {
  const int dim = coeff.dim();
  if (solutions.size() != static_cast<std::size_t>(dim))
    throw InvalidArgument("assemble_ahom: need one cell solution per direction");
  const CellSolution& first = solutions.front();
  std::vector<int> seen(static_cast<std::size_t>(dim), 0);
  for (const auto& s : solutions) {
    if (s.regime != first.regime) throw InvalidArgument("assemble_ahom: mixed regimes");
    if (!(s.grid == first.grid) || s.s_nodes != first.s_nodes)
      throw InvalidArgument("assemble_ahom: mismatched cell grids or s-nodes");
    if (s.regime == Regime::critical && s.theta != first.theta)
      throw InvalidArgument("assemble_ahom: mismatched theta");
    check_direction(s.k, dim);
    if (seen[static_cast<std::size_t>(s.k - 1)]++)
      throw InvalidArgument("assemble_ahom: duplicate direction");
  }
  const Grid& grid = first.grid;
  const int nq = gauss_points_per_cell(dim);

  Tensor a_hom;
  auto accumulate = [&](std::span<const Tensor> samples, double weight, std::size_t field_index) {
    for (const auto& sol : solutions) {
      const double factor = sol.regime == Regime::critical ? sol.theta : 1.0;
      const ScalarField& field = sol.fields[field_index];
      const Vec e = unit_vector(sol.k);
      std::size_t idx = 0;
      Vec col{0.0, 0.0};
      for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        const auto pts = gauss_points(grid, c);
        for (int q = 0; q < nq; ++q, ++idx) {
          const Vec g = field.cell_gradient(c, pts[q].local);
          const Vec flux = samples[idx].apply({factor * g[0] + e[0], factor * g[1] + e[1]});
          col[0] += pts[q].weight * flux[0];
          col[1] += pts[q].weight * flux[1];
        }
      }
      for (int j = 0; j < dim; ++j) a_hom(j, sol.k - 1) += weight * col[j];
    }
  };

  if (first.regime == Regime::super) {
    accumulate(averaged_samples(coeff, grid, first.s_nodes, first.s_weights), 1.0, 0);
  } else {
    const bool frozen = coeff.time_independent();
    std::vector<Tensor> samples;
    for (std::size_t l = 0; l < first.s_nodes.size(); ++l) {
      if (!frozen || samples.empty()) samples = samples_at(coeff, grid, first.s_nodes[l]);
      accumulate(samples, first.s_weights[l], l);
    }
  }

  HomogenizedMatrix m;
  m.dim = dim;
  m.regime = first.regime;
  m.theta = first.theta;
  m.amplitude = coeff.amplitude();
  m.symmetry_defect = a_hom.symmetry_defect(dim);
  m.value = a_hom.symmetrized();
  m.cell_cells_per_axis = grid.cells_per_axis();
  m.s_count = static_cast<int>(first.s_nodes.size());
  m.tol = first.solver_tol;
  return m;
}

Tensor arithmetic_mean(const CoefficientField& coeff, const Grid& y_grid, int s_nodes) {
  if (s_nodes < 1) throw InvalidArgument("arithmetic_mean: need at least one s-node");
  Tensor mean;
  for (int l = 0; l < s_nodes; ++l) {
    const double s = static_cast<double>(l) / s_nodes;
    for_each_gauss_point(y_grid, [&](const QuadraturePoint& qp) {
      mean = mean + coeff(qp.x, s).scaled(qp.weight / s_nodes);
    });
  }
  return mean;
}

bool spectral_sandwich(const HomogenizedMatrix& m, double lambda, double tol) {
  const auto r = m.eigenvalues();
  return m.value.symmetry_defect(m.dim) <= 1e-10 && r.min >= lambda - tol && r.max <= 1.0 + tol;
}

ThetaTable::ThetaTable(std::vector<double> thetas, std::vector<HomogenizedMatrix> matrices)
    : thetas_(std::move(thetas)), matrices_(std::move(matrices)) {
  if (thetas_.size() < 2 || thetas_.size() != matrices_.size())
    throw InvalidArgument("ThetaTable: need matching theta nodes and matrices (>= 2)");
  if (thetas_.front() != 0.0) throw InvalidArgument("ThetaTable: first node must be theta = 0");
  for (std::size_t i = 1; i < thetas_.size(); ++i)
    if (!(thetas_[i] > thetas_[i - 1])) throw InvalidArgument("ThetaTable: nodes not increasing");
  for (double t : thetas_) log_nodes_.push_back(std::log1p(t));
}

ThetaTable::Bracket ThetaTable::bracket(double theta) const {
  if (!(theta >= 0.0)) throw InvalidArgument("ThetaTable: theta must be nonnegative");
  const std::size_t last = thetas_.size() - 1;
  if (theta >= thetas_[last]) return {last - 1, 1.0, theta > thetas_[last]};
  const auto it = std::upper_bound(thetas_.begin(), thetas_.end(), theta);
  const auto hi = static_cast<std::size_t>(it - thetas_.begin());
  const std::size_t lo = hi - 1;
  const double w = (std::log1p(theta) - log_nodes_[lo]) / (log_nodes_[hi] - log_nodes_[lo]);
  return {lo, std::clamp(w, 0.0, 1.0), false};
}

ThetaTable::Query ThetaTable::query(double theta) const {
  const auto b = bracket(theta);
  Query q;
  q.value = matrices_[b.lo].value.scaled(1.0 - b.weight) +
            matrices_[b.lo + 1].value.scaled(b.weight);
  q.clamped = b.clamped;
  return q;
}

double ThetaTable::max_adjacent_distance() const {
  double d = 0.0;
  for (std::size_t i = 2; i < matrices_.size(); ++i)
    d = std::max(d, (matrices_[i].value - matrices_[i - 1].value).max_abs(dim()));
  return d;
}

Vec ThetaTable::corrector_gradient(int k, const Point& y, double s, double theta) const {
  if (!has_fields()) throw InvalidArgument("ThetaTable: corrector fields were not retained");
  const auto b = bracket(theta);
  const auto idx = static_cast<std::size_t>(k - 1);
  const Vec lo = fields_[b.lo][idx].corrector_gradient(y, s);
  if (b.weight == 0.0) return lo;
  const Vec hi = fields_[b.lo + 1][idx].corrector_gradient(y, s);
  return {(1 - b.weight) * lo[0] + b.weight * hi[0], (1 - b.weight) * lo[1] + b.weight * hi[1]};
}

double ThetaTable::psi_value(int k, const Point& y, double s, double theta) const {
  if (!has_fields()) throw InvalidArgument("ThetaTable: corrector fields were not retained");
  const auto b = bracket(theta);
  const auto idx = static_cast<std::size_t>(k - 1);
  auto at = [&](std::size_t node) {
    const auto& sol = fields_[node][idx];
    return sol.fields[sol.nearest_s(s)].interpolate(y);
  };
  const double lo = at(b.lo);
  return b.weight == 0.0 ? lo : (1 - b.weight) * lo + b.weight * at(b.lo + 1);
}

ThetaTable build_theta_table(const CoefficientField& coeff, const Grid& y_grid,
                             const ThetaTableOptions& opt, const CellSolveOptions& options,
                             int workers) {
  if (opt.nodes < 3) throw InvalidArgument("build_theta_table: need at least 3 positive nodes");
  if (!(opt.theta_min > 0.0) || !(opt.theta_max > opt.theta_min))
    throw InvalidArgument("build_theta_table: need 0 < theta_min < theta_max");
  std::vector<double> thetas{0.0};
  const double ratio = std::log(opt.theta_max / opt.theta_min);
  for (int i = 0; i < opt.nodes; ++i)
    thetas.push_back(opt.theta_min * std::exp(ratio * i / (opt.nodes - 1)));
  thetas.back() = opt.theta_max;

  const auto dim = static_cast<std::size_t>(coeff.dim());
  std::vector<std::vector<CellSolution>> solutions(thetas.size(), std::vector<CellSolution>(dim));
  parallel_for(thetas.size() * dim, workers, [&](std::size_t task) {
    const std::size_t node = task / dim;
    const int k = static_cast<int>(task % dim) + 1;
    solutions[node][static_cast<std::size_t>(k - 1)] =
        solve_cp2(coeff, thetas[node], y_grid, opt.s_steps, k, options);
  });
  std::vector<HomogenizedMatrix> matrices;
  for (const auto& per_node : solutions) matrices.push_back(assemble_ahom(coeff, per_node));
  ThetaTable table(std::move(thetas), std::move(matrices));
  if (opt.keep_fields) table.set_fields(std::move(solutions));
  return table;
}

nlohmann::json to_json(const HomogenizedMatrix& m) {
  nlohmann::json j;
  auto flat = [&](const Tensor& t) {
    std::vector<double> v;
    for (int r = 0; r < m.dim; ++r)
      for (int c = 0; c < m.dim; ++c) v.push_back(t(r, c));
    return v;
  };
  j["dim"] = m.dim;
  j["regime"] = regime_name(m.regime);
  j["theta"] = m.theta;
  j["matrix"] = flat(m.value);
  j["unscaled"] = flat(m.unscaled());
  j["amplitude"] = m.amplitude;
  j["symmetry_defect"] = m.symmetry_defect;
  j["cell_cells_per_axis"] = m.cell_cells_per_axis;
  j["s_count"] = m.s_count;
  j["tol"] = m.tol;
  const auto eig = m.eigenvalues();
  j["eigenvalues"] = {eig.min, eig.max};
  return j;
}

HomogenizedMatrix homogenized_from_json(const nlohmann::json& j) {
  HomogenizedMatrix m;
  try {
    m.dim = j.at("dim").get<int>();
    m.regime = regime_from_name(j.at("regime").get<std::string>());
    m.theta = j.at("theta").get<double>();
    const auto v = j.at("matrix").get<std::vector<double>>();
    if (v.size() != static_cast<std::size_t>(m.dim * m.dim))
      throw InvalidArgument("homogenized matrix: wrong entry count");
    for (int r = 0; r < m.dim; ++r)
      for (int c = 0; c < m.dim; ++c) m.value(r, c) = v[static_cast<std::size_t>(r * m.dim + c)];
    m.amplitude = j.at("amplitude").get<double>();
    m.symmetry_defect = j.at("symmetry_defect").get<double>();
    m.cell_cells_per_axis = j.at("cell_cells_per_axis").get<int>();
    m.s_count = j.at("s_count").get<int>();
    m.tol = j.at("tol").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("homogenized matrix: ") + e.what());
  }
  return m;
}

namespace {

std::string field_file(int k, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "field_k%d_s%03zu.csv", k, i);
  return buf;
}

}  // namespace

void save_cell_solutions(const std::filesystem::path& dir,
                         std::span<const CellSolution> solutions,
                         const HomogenizedMatrix& ahom) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["regime"] = regime_name(ahom.regime);
  manifest["grid"] = solutions.empty() ? nlohmann::json() : grid_to_json(solutions.front().grid);
  manifest["a_hom"] = to_json(ahom);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& sol : solutions) {
    nlohmann::json e;
    e["k"] = sol.k;
    e["regime"] = regime_name(sol.regime);
    e["theta"] = sol.theta;
    e["s_nodes"] = sol.s_nodes;
    e["s_weights"] = sol.s_weights;
    e["periodicity_defect"] = sol.periodicity_defect;
    e["periods"] = sol.periods;
    e["solver_tol"] = sol.solver_tol;
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t i = 0; i < sol.fields.size(); ++i) {
      const auto name = field_file(sol.k, i);
      write_field_csv(dir / name, sol.fields[i]);
      files.push_back(name);
    }
    e["files"] = files;
    list.push_back(e);
  }
  manifest["solutions"] = list;
  write_json(dir / "manifest.json", manifest);
}

std::vector<CellSolution> load_cell_solutions(const std::filesystem::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  std::vector<CellSolution> out;
  try {
    const Grid grid = grid_from_json(manifest.at("grid"));
    for (const auto& e : manifest.at("solutions")) {
      CellSolution sol;
      sol.k = e.at("k").get<int>();
      sol.regime = regime_from_name(e.at("regime").get<std::string>());
      sol.theta = e.at("theta").get<double>();
      sol.grid = grid;
      sol.s_nodes = e.at("s_nodes").get<std::vector<double>>();
      sol.s_weights = e.at("s_weights").get<std::vector<double>>();
      sol.periodicity_defect = e.at("periodicity_defect").get<double>();
      sol.periods = e.at("periods").get<int>();
      sol.solver_tol = e.at("solver_tol").get<double>();
      for (const auto& f : e.at("files")) sol.fields.push_back(read_field_csv(dir / f.get<std::string>(), grid));
      out.push_back(std::move(sol));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(dir.string() + "/manifest.json: " + ex.what());
  }
  return out;
}

void save_theta_table(const std::filesystem::path& dir, const ThetaTable& table) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["regime"] = "critical";
  manifest["interpolation"] = "piecewise linear in log(1 + theta)";
  manifest["thetas"] = table.thetas();
  nlohmann::json mats = nlohmann::json::array();
  for (const auto& m : table.matrices()) mats.push_back(to_json(m));
  manifest["matrices"] = mats;
  manifest["has_fields"] = table.has_fields();
  if (table.has_fields()) {
    for (std::size_t node = 0; node < table.fields().size(); ++node) {
      char name[32];
      std::snprintf(name, sizeof(name), "node_%02zu", node);
      save_cell_solutions(dir / name, table.fields()[node], table.matrices()[node]);
    }
  }
  write_json(dir / "manifest.json", manifest);
}

ThetaTable load_theta_table(const std::filesystem::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  try {
    auto thetas = manifest.at("thetas").get<std::vector<double>>();
    std::vector<HomogenizedMatrix> mats;
    for (const auto& m : manifest.at("matrices")) mats.push_back(homogenized_from_json(m));
    ThetaTable table(std::move(thetas), std::move(mats));
    if (manifest.at("has_fields").get<bool>()) {
      std::vector<std::vector<CellSolution>> fields;
      for (std::size_t node = 0; node < table.thetas().size(); ++node) {
        char name[32];
        std::snprintf(name, sizeof(name), "node_%02zu", node);
        fields.push_back(load_cell_solutions(dir / name));
      }
      table.set_fields(std::move(fields));
    }
    return table;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(dir.string() + "/manifest.json: " + ex.what());
  }
}

}  // namespace pmhom
