#include "pmhom/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "pmhom/assembly.hpp"
#include "pmhom/error.hpp"
#include "pmhom/io.hpp"
#include "pmhom/norms.hpp"

namespace pmhom {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> trapezoid_weights(const std::vector<double>& t) {
  std::vector<double> w(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double half = 0.5 * (t[i] - t[i - 1]);
    w[i - 1] += half;
    w[i] += half;
  }
  return w;
}

double value_at(const ScalarField& u, const QuadraturePoint& qp) {
  const auto shape = q1_shape(u.grid().dim(), qp.local, u.grid().spacing());
  const auto vals = u.cell_values(qp.cell);
  double v = 0.0;
  for (int a = 0; a < u.grid().local_nodes(); ++a) v += shape.value[a] * vals[a];
  return v;
}

void check_pair(const Trajectory& a, const Trajectory& b) {
  if (!(a.grid == b.grid)) throw InvalidArgument("grid mismatch between trajectories");
  if (a.times.size() != b.times.size())
    throw InvalidArgument("time mismatch between trajectories: different stored stamps");
  for (std::size_t i = 0; i < a.times.size(); ++i)
    if (std::abs(a.times[i] - b.times[i]) > 1e-12 * std::max(1.0, std::abs(a.times[i])))
      throw InvalidArgument("time mismatch between trajectories at stamp " + std::to_string(i) +
                            " (" + format_double(a.times[i]) + " vs " +
                            format_double(b.times[i]) + ")");
}

}  // namespace

void check_sweep(const SweepResult& sweep) {
  if (sweep.eps.empty() || sweep.eps.size() != sweep.runs.size())
    throw InvalidArgument("sweep needs one trajectory per eps");
  for (std::size_t i = 0; i < sweep.eps.size(); ++i) {
    if (!(sweep.eps[i] > 0.0)) throw InvalidArgument("eps values must be positive");
    if (i > 0 && !(sweep.eps[i] < sweep.eps[i - 1]))
      throw InvalidArgument("eps ladder must be strictly decreasing");
    check_pair(sweep.runs[i], sweep.homogenized);
  }
  if (sweep.homogenized.times.size() < 2)
    throw InvalidArgument("time quadrature needs at least two stored stamps");
}

CorrectorSet CorrectorSet::zero(int dim) {
  CorrectorSet c;
  c.dim_ = dim;
  return c;
}

CorrectorSet CorrectorSet::from_cells(std::vector<CellSolution> cells) {
  if (cells.empty()) throw InvalidArgument("corrector set needs cell solutions");
  CorrectorSet c;
  c.dim_ = static_cast<int>(cells.size());
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.k < b.k; });
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].k != static_cast<int>(i) + 1)
      throw InvalidArgument("corrector set needs exactly one solution per direction");
    if (cells[i].regime == Regime::critical)
      throw InvalidArgument("critical correctors come from a theta table");
  }
  c.cells_ = std::move(cells);
  return c;
}

CorrectorSet CorrectorSet::from_table(std::shared_ptr<const ThetaTable> table, double m) {
  if (!table || !table->has_fields())
    throw InvalidArgument("critical corrector set needs a table with retained fields");
  CorrectorSet c;
  c.dim_ = table->dim();
  c.m_ = m;
  c.table_ = std::move(table);
  return c;
}

std::optional<Regime> CorrectorSet::regime() const {
  if (table_) return Regime::critical;
  if (!cells_.empty()) return cells_.front().regime;
  return std::nullopt;
}

Vec CorrectorSet::gradient(int k, const Point& y, double s, double u) const {
  if (table_) return table_->corrector_gradient(k, y, s, m_ * std::pow(std::max(u, 0.0), m_ - 1));
  if (cells_.empty()) return {0.0, 0.0};
  return cells_[static_cast<std::size_t>(k - 1)].corrector_gradient(y, s);
}

double CorrectorSet::value(int k, const Point& y, double s, double u) const {
  if (table_) return table_->psi_value(k, y, s, m_ * std::pow(std::max(u, 0.0), m_ - 1));
  if (cells_.empty()) return 0.0;
  return cells_[static_cast<std::size_t>(k - 1)].corrector_value(y, s);
}

double corrector_error(const SweepResult& sweep, const CorrectorSet& correctors,
                       std::size_t index) {
  check_sweep(sweep);
  if (index >= sweep.runs.size()) throw InvalidArgument("corrector_error: run index out of range");
  if (const auto reg = correctors.regime(); reg && *reg != regime_for_exponent(sweep.r))
    throw InvalidArgument("corrector regime " + std::string(regime_name(*reg)) +
                          " does not match r = " + format_double(sweep.r));
  const Trajectory& run = sweep.runs[index];
  const Trajectory& hom = sweep.homogenized;
  const Grid& grid = hom.grid;
  const int dim = grid.dim();
  if (correctors.dim() != dim) throw InvalidArgument("corrector_error: dimension mismatch");
  const double eps = sweep.eps[index];
  const auto tw = trapezoid_weights(hom.times);

  double total = 0.0;
  for (std::size_t i = 0; i < hom.times.size(); ++i) {
    const double t = hom.times[i];
    const auto ue_m = power_field(run.states[i], sweep.m);
    const auto u_m = power_field(hom.states[i], sweep.m);
    double sum = 0.0;
    for_each_gauss_point(grid, [&](const QuadraturePoint& qp) {
      const Vec ge = ue_m.cell_gradient(qp.cell, qp.local);
      const Vec g = u_m.cell_gradient(qp.cell, qp.local);
      const auto [y, s] = oscillating_arguments(qp.x, t, eps, sweep.r, dim);
      const double u = correctors.regime() == Regime::critical ? value_at(hom.states[i], qp) : 0.0;
      Vec diff{ge[0] - g[0], ge[1] - g[1]};
      for (int k = 1; k <= dim; ++k) {
        if (g[k - 1] == 0.0) continue;
        const Vec c = correctors.gradient(k, y, s, u);
        diff[0] -= g[k - 1] * c[0];
        diff[1] -= g[k - 1] * c[1];
      }
      sum += qp.weight * (diff[0] * diff[0] + diff[1] * diff[1]);
    });
    total += tw[i] * sum;
  }
  return total;
}

SolutionNorm parse_solution_norm(const std::string& tag, double rho) {
  if (tag == "L2_spacetime") return {SolutionNorm::Kind::l2_spacetime, 2.0};
  if (tag == "Lrho_Lm1") {
    if (!(rho >= 1.0) || !std::isfinite(rho))
      throw InvalidArgument("Lrho_Lm1 needs rho in [1, inf), got " + format_double(rho));
    return {SolutionNorm::Kind::lrho_lm1, rho};
  }
  throw InvalidArgument("unknown solution norm '" + tag + "'");
}

std::vector<double> solution_error(const SweepResult& sweep, const SolutionNorm& spec) {
  check_sweep(sweep);
  if (spec.kind == SolutionNorm::Kind::lrho_lm1 && (!(spec.rho >= 1.0) || !std::isfinite(spec.rho)))
    throw InvalidArgument("Lrho_Lm1 needs rho in [1, inf)");
  const Trajectory& hom = sweep.homogenized;
  const auto tw = trapezoid_weights(hom.times);
  std::vector<double> out;
  for (const auto& run : sweep.runs) {
    double acc = 0.0;
    for (std::size_t i = 0; i < hom.times.size(); ++i) {
      std::vector<double> d(hom.grid.dof_count());
      for (std::size_t j = 0; j < d.size(); ++j) d[j] = run.states[i][j] - hom.states[i][j];
      const ScalarField diff(hom.grid, std::move(d));
      if (spec.kind == SolutionNorm::Kind::l2_spacetime) {
        const double n = norm(diff, NormSpec::lp(2.0));
        acc += tw[i] * n * n;
      } else {
        acc += tw[i] * std::pow(norm(diff, NormSpec::lp(sweep.m + 1.0)), spec.rho);
      }
    }
    out.push_back(spec.kind == SolutionNorm::Kind::l2_spacetime ? std::sqrt(acc)
                                                                 : std::pow(acc, 1.0 / spec.rho));
  }
  return out;
}

double CellMode::operator()(const Point& y, int dim) const {
  double v = constant;
  for (const auto& t : terms) {
    double arg = t.freq[0] * y[0];
    if (dim == 2) arg += t.freq[1] * y[1];
    v += t.coeff * std::cos(kTwoPi * arg);
  }
  return v;
}

double CellMode::operator()(double s) const {
  double v = constant;
  for (const auto& t : terms) v += t.coeff * std::cos(kTwoPi * t.freq[0] * s);
  return v;
}

double PolyBump::operator()(const Point& x, int dim) const {
  double v = 1.0;
  for (int d = 0; d < dim; ++d) {
    const double c = 0.5 * (support.lo[d] + support.hi[d]);
    const double R = 0.5 * (support.hi[d] - support.lo[d]);
    const double xi = (x[d] - c) / R;
    if (std::abs(xi) >= 1.0) return 0.0;
    v *= (1.0 - xi * xi) * (1.0 - xi * xi);
  }
  return v;
}

double PolyBump::operator()(double t) const { return (*this)(Point{t, 0.0}, 1); }

double two_scale_pairing(const Trajectory& traj, const PairingTest& test, double eps, double r) {
  if (!(eps > 0.0) || !(r > 0.0)) throw InvalidArgument("pairing needs eps > 0 and r > 0");
  const Grid& grid = traj.grid;
  const int dim = grid.dim();
  const Box dom = grid.domain();
  for (int d = 0; d < dim; ++d)
    if (test.phi.support.lo[d] < dom.lo[d] - 1e-12 || test.phi.support.hi[d] > dom.hi[d] + 1e-12 ||
        !(test.phi.support.hi[d] > test.phi.support.lo[d]))
      throw InvalidArgument("pairing: spatial bump support must be a box inside the domain");
  if (test.psi.support.lo[0] < traj.times.front() - 1e-12 ||
      test.psi.support.hi[0] > traj.times.back() + 1e-12 ||
      !(test.psi.support.hi[0] > test.psi.support.lo[0]))
    throw InvalidArgument("pairing: time bump support must lie inside the stored interval");
  const auto tw = trapezoid_weights(traj.times);
  const double period = std::pow(eps, r);
  double total = 0.0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double t = traj.times[i];
    const double tfac = test.psi(t) * test.c(t / period - std::floor(t / period));
    if (tfac == 0.0) continue;
    double sum = 0.0;
    for_each_gauss_point(grid, [&](const QuadraturePoint& qp) {
      Point y{qp.x[0] / eps, qp.x[1] / eps};
      sum += qp.weight * value_at(traj.states[i], qp) * test.phi(qp.x, dim) * test.b(y, dim);
    });
    total += tw[i] * tfac * sum;
  }
  return total;
}

std::string_view rule_name(VerdictRule rule) {
  switch (rule) {
    case VerdictRule::strictly_decreasing: return "strictly_decreasing";
    case VerdictRule::ratio_bound: return "ratio_bound";
    case VerdictRule::upper_bound: return "upper_bound";
    case VerdictRule::lower_bound: return "lower_bound";
  }
  return "unknown";
}

VerdictRule rule_from_name(std::string_view name) {
  if (name == "strictly_decreasing") return VerdictRule::strictly_decreasing;
  if (name == "ratio_bound") return VerdictRule::ratio_bound;
  if (name == "upper_bound") return VerdictRule::upper_bound;
  if (name == "lower_bound") return VerdictRule::lower_bound;
  throw InvalidArgument("unknown verdict rule '" + std::string(name) + "'");
}

bool evaluate_verdict(const Verdict& v, const Series& s) {
  if (s.values.empty()) return false;
  for (const auto& x : s.values)
    if (!x || !std::isfinite(*x)) return false;
  switch (v.rule) {
    case VerdictRule::strictly_decreasing:
      for (std::size_t i = 1; i < s.values.size(); ++i)
        if (!(*s.values[i] < *s.values[i - 1])) return false;
      return true;
    case VerdictRule::ratio_bound: {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (const auto& x : s.values) {
        if (!(*x > 0.0)) return false;
        lo = std::min(lo, *x);
        hi = std::max(hi, *x);
      }
      return hi / lo <= v.threshold;
    }
    case VerdictRule::upper_bound:
      return std::all_of(s.values.begin(), s.values.end(),
                         [&](const auto& x) { return *x <= v.threshold; });
    case VerdictRule::lower_bound:
      return std::all_of(s.values.begin(), s.values.end(),
                         [&](const auto& x) { return *x >= v.threshold; });
  }
  return false;
}

const Series& DiagnosticsReport::find(const std::string& name) const {
  for (const auto& s : series)
    if (s.name == name) return s;
  throw InvalidArgument("report has no series '" + name + "'");
}

void DiagnosticsReport::add_series(Series s) {
  for (auto& existing : series)
    if (existing.name == s.name) {
      existing = std::move(s);
      return;
    }
  series.push_back(std::move(s));
}

void DiagnosticsReport::add_verdict(std::string name, const std::string& series_name,
                                    VerdictRule rule, double threshold) {
  Verdict v{std::move(name), series_name, rule, threshold, false};
  v.pass = evaluate_verdict(v, find(series_name));
  verdicts.push_back(std::move(v));
}

void DiagnosticsReport::reevaluate() {
  for (auto& v : verdicts) v.pass = evaluate_verdict(v, find(v.series));
}

bool DiagnosticsReport::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.pass; });
}

void DiagnosticsReport::merge(const DiagnosticsReport& other) {
  for (const auto& s : other.series) add_series(s);
  verdicts.insert(verdicts.end(), other.verdicts.begin(), other.verdicts.end());
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

std::vector<std::optional<double>> observed_rates(const std::vector<double>& eps,
                                                  const std::vector<std::optional<double>>& v) {
  std::vector<std::optional<double>> rates;
  if (eps.size() < 2 || eps.size() != v.size()) return rates;
  for (std::size_t i = 1; i < eps.size(); ++i)
    if (std::abs(eps[i - 1] / eps[i] - 2.0) > 1e-9) return rates;
  for (std::size_t i = 1; i < eps.size(); ++i) {
    if (v[i - 1] && v[i] && *v[i - 1] > 0.0 && *v[i] > 0.0 && std::isfinite(*v[i - 1]) &&
        std::isfinite(*v[i]))
      rates.emplace_back(std::log2(*v[i - 1] / *v[i]));
    else
      rates.emplace_back(std::nullopt);
  }
  return rates;
}

DiagnosticsReport convergence_table(const std::vector<Series>& input) {
  DiagnosticsReport rep;
  for (auto s : input) {
    s.rates = observed_rates(s.eps, s.values);
    for (const auto& r : s.rates)
      if (!r) rep.warnings.push_back("series " + s.name + ": undefined convergence rate");
    const std::string name = s.name;
    rep.add_series(std::move(s));
    rep.add_verdict(name + " strictly decreasing", name, VerdictRule::strictly_decreasing);
  }
  return rep;
}

Box centered_half_box(const Grid& grid) {
  const Box dom = grid.domain();
  Box b;
  for (int d = 0; d < grid.dim(); ++d) {
    const double c = 0.5 * (dom.lo[d] + dom.hi[d]);
    const double q = 0.25 * (dom.hi[d] - dom.lo[d]);
    b.lo[d] = c - q;
    b.hi[d] = c + q;
  }
  return b;
}

DiagnosticsReport local_gradient_estimate(const SweepResult& sweep,
                                          const LocalGradientOptions& opt) {
  check_sweep(sweep);
  const double m = sweep.m;
  if (m < 2.0)
    throw InvalidArgument("local gradient estimate needs m >= 2 (use the energy report for m < 2)");
  const Grid& grid = sweep.homogenized.grid;
  const Box dom = grid.domain();
  const double margin = 1e-12 * grid.side_length();
  for (int d = 0; d < grid.dim(); ++d)
    if (!(opt.omega.lo[d] > dom.lo[d] + margin) || !(opt.omega.hi[d] < dom.hi[d] - margin))
      throw InvalidArgument("omega must lie strictly inside the domain");
  const auto cells = cells_in_box(grid, opt.omega);
  const auto tw = trapezoid_weights(sweep.homogenized.times);

  DiagnosticsReport rep;
  PMEProblem probe;
  probe.m = m;
  probe.positivity = opt.positivity;
  const bool weighted = m >= 3.0;
  Series grad{"grad_u_sq_omega", sweep.eps, {}, {}};
  Series weight{m == 3.0 ? "neg_log_u_omega" : "u_pow_3_minus_m_omega", sweep.eps, {}, {}};
  for (std::size_t r = 0; r < sweep.runs.size(); ++r) {
    const auto& run = sweep.runs[r];
    probe.u0 = run.states.front();
    for (const auto& w : positivity_warnings(probe))
      rep.warnings.push_back("eps = " + format_double(sweep.eps[r]) + ": " + w);
    double acc = 0.0;
    for (std::size_t i = 0; i < run.states.size(); ++i)
      acc += tw[i] * gradient_energy(run.states[i], cells);
    grad.values.emplace_back(acc);
    if (!weighted) continue;
    double sup = 0.0;
    bool finite = true;
    for (const auto& u : run.states) {
      double sum = 0.0;
      for (auto c : cells) {
        const auto pts = gauss_points(grid, c);
        for (int q = 0; q < gauss_points_per_cell(grid.dim()); ++q) {
          const double v = value_at(u, pts[q]);
          if (v <= 0.0) {
            finite = false;
            continue;
          }
          if (m == 3.0) {
            if (v <= 1.0) sum -= pts[q].weight * std::log(v);
          } else {
            sum += pts[q].weight * std::pow(v, 3.0 - m);
          }
        }
      }
      sup = std::max(sup, sum);
    }
    if (finite) {
      weight.values.emplace_back(sup);
    } else {
      weight.values.emplace_back(std::nullopt);
      rep.warnings.push_back("eps = " + format_double(sweep.eps[r]) +
                             ": u vanishes inside omega, weight functional is infinite");
    }
  }
  rep.add_series(grad);
  rep.add_verdict("grad_u_sq_omega uniformly bounded", grad.name, VerdictRule::ratio_bound,
                  opt.bound);
  if (weighted) {
    const std::string name = weight.name;
    rep.add_series(std::move(weight));
    rep.add_verdict(name + " uniformly bounded", name, VerdictRule::ratio_bound, opt.bound);
  }
  return rep;
}

CorrectorAssembly assemble_correctors(const Trajectory& hom, std::size_t stamp,
                                      const CorrectorSet& correctors, double m, double eps,
                                      double r) {
  if (stamp >= hom.states.size()) throw InvalidArgument("corrector assembly: stamp out of range");
  const Grid& grid = hom.grid;
  const int dim = grid.dim();
  const ScalarField& u = hom.states[stamp];
  const auto um = power_field(u, m);
  const double t = hom.times[stamp];
  CorrectorAssembly out;
  out.u.assign(u.values().begin(), u.values().end());
  out.z.assign(grid.dof_count(), 0.0);
  out.w.assign(grid.dof_count(), 0.0);
  out.floor = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, u.max_value());
  const bool critical = correctors.regime() == Regime::critical;
  for (std::size_t i = 0; i < grid.dof_count(); ++i) {
    const double ui = u[i];
    if (!(ui > out.floor)) continue;
    // Nodal gradient of u^m: mean of the adjacent cell gradients.
    const NodeIndex node = grid.node_of_dof(i);
    Vec g{0.0, 0.0};
    int count = 0;
    for (int dj = -1; dj <= (dim == 2 ? 0 : -1); ++dj)
      for (int di = -1; di <= 0; ++di) {
        const int ci = node[0] + di;
        const int cj = dim == 2 ? node[1] + dj : 0;
        const auto cell = static_cast<std::size_t>(ci) +
                          (dim == 2 ? static_cast<std::size_t>(cj) * grid.cells_per_axis() : 0);
        const Vec local{static_cast<double>(-di), static_cast<double>(-dj)};
        const Vec gc = um.cell_gradient(cell, local);
        g[0] += gc[0];
        g[1] += gc[1];
        ++count;
      }
    g[0] /= count;
    g[1] /= count;
    const auto [y, s] = oscillating_arguments(grid.dof_position(i), t, eps, r, dim);
    double acc = 0.0;
    for (int k = 1; k <= dim; ++k) acc += g[k - 1] * correctors.value(k, y, s, ui);
    const double theta = m * std::pow(ui, m - 1.0);
    if (critical) {
      out.w[i] = acc;
      out.z[i] = theta * acc;
    } else {
      out.z[i] = acc;
      out.w[i] = acc / theta;
    }
  }
  return out;
}

nlohmann::json to_json(const DiagnosticsReport& rep) {
  auto opt_array = [](const std::vector<std::optional<double>>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : v) a.push_back(x && std::isfinite(*x) ? nlohmann::json(*x) : nullptr);
    return a;
  };
  nlohmann::json j;
  j["series"] = nlohmann::json::array();
  for (const auto& s : rep.series)
    j["series"].push_back(
        {{"name", s.name}, {"eps", s.eps}, {"values", opt_array(s.values)}, {"rates", opt_array(s.rates)}});
  j["verdicts"] = nlohmann::json::array();
  for (const auto& v : rep.verdicts)
    j["verdicts"].push_back({{"name", v.name},
                             {"series", v.series},
                             {"rule", rule_name(v.rule)},
                             {"threshold", v.threshold},
                             {"pass", v.pass}});
  j["warnings"] = rep.warnings;
  j["all_pass"] = rep.all_pass();
  return j;
}

DiagnosticsReport report_from_json(const nlohmann::json& j) {
  auto opt_vector = [](const nlohmann::json& a) {
    std::vector<std::optional<double>> v;
    for (const auto& x : a) v.push_back(x.is_null() ? std::nullopt : std::optional(x.get<double>()));
    return v;
  };
  DiagnosticsReport rep;
  try {
    for (const auto& s : j.at("series"))
      rep.series.push_back({s.at("name").get<std::string>(), s.at("eps").get<std::vector<double>>(),
                            opt_vector(s.at("values")), opt_vector(s.at("rates"))});
    for (const auto& v : j.at("verdicts"))
      rep.verdicts.push_back({v.at("name").get<std::string>(), v.at("series").get<std::string>(),
                              rule_from_name(v.at("rule").get<std::string>()),
                              v.at("threshold").get<double>(), v.at("pass").get<bool>()});
    rep.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("diagnostics report: ") + e.what());
  }
  return rep;
}

void write_report_csv(const std::filesystem::path& path, const DiagnosticsReport& rep) {
  std::vector<std::array<std::string, 4>> rows{{"series", "eps", "value", "rate"}};
  for (const auto& s : rep.series)
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const auto& v = s.values[i];
      std::string rate;
      if (i > 0 && i - 1 < s.rates.size() && s.rates[i - 1]) rate = format_double(*s.rates[i - 1]);
      rows.push_back({s.name, format_double(s.eps[i]), v ? format_double(*v) : "nan", rate});
    }
  std::array<std::size_t, 4> width{};
  for (const auto& r : rows)
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], r[c].size());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < 4; ++c) {
      out << r[c];
      if (c + 1 < 4) out << ',' << std::string(width[c] - r[c].size() + 1, ' ');
    }
    out << '\n';
  }
}

}  // namespace pmhom
