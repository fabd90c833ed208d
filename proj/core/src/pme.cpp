#include "pmhom/pme.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

#include "pmhom/assembly.hpp"
#include "pmhom/error.hpp"
#include "pmhom/io.hpp"
#include "pmhom/linear_solvers.hpp"
#include "pmhom/norms.hpp"

namespace pmhom {

std::string_view positivity_name(PositivityClass c) {
  switch (c) {
    case PositivityClass::general: return "general";
    case PositivityClass::log_integrable: return "log_integrable";
    case PositivityClass::power_integrable: return "power_integrable";
  }
  return "general";
}

PositivityClass positivity_from_name(std::string_view name) {
  if (name == "general") return PositivityClass::general;
  if (name == "log_integrable") return PositivityClass::log_integrable;
  if (name == "power_integrable") return PositivityClass::power_integrable;
  throw InvalidArgument("unknown positivity class '" + std::string(name) + "'");
}

void check_problem(const PMEProblem& p) {
  if (!(p.m > 1.0) || !std::isfinite(p.m))
    throw ValidationError("H1", "exponent m = " + format_double(p.m) + " must satisfy m > 1");
  if (!(p.r > 0.0) || !std::isfinite(p.r))
    throw InvalidArgument("temporal scale exponent r must be positive");
  if (!(p.T > p.t_start) || !std::isfinite(p.T))
    throw InvalidArgument("final time must exceed the start time");
  if (p.u0.grid().boundary() != BoundaryKind::dirichlet)
    throw InvalidArgument("the PME is posed on a Dirichlet grid");
  if (p.u0.min_value() < 0.0)
    throw ValidationError("H1", "initial datum has negative nodal values (min " +
                                    format_double(p.u0.min_value()) + ")");
}

std::vector<std::string> positivity_warnings(const PMEProblem& p) {
  std::vector<std::string> out;
  const bool needs_log = p.m == 3.0;
  const bool needs_power = p.m > 3.0;
  if (needs_log && p.positivity != PositivityClass::log_integrable)
    out.push_back("m = 3 needs a log-integrable initial datum (class log_integrable)");
  if (needs_power && p.positivity != PositivityClass::power_integrable)
    out.push_back("m > 3 needs u0^(3-m) locally integrable (class power_integrable)");
  if (p.positivity == PositivityClass::log_integrable && !needs_log)
    out.push_back("class log_integrable only applies to m = 3");
  if (p.positivity == PositivityClass::power_integrable && !needs_power)
    out.push_back("class power_integrable only applies to m > 3");
  if ((needs_log || needs_power) && p.u0.min_value() <= 0.0)
    out.push_back(needs_log ? "u0 vanishes at interior nodes, so log u0 is not locally integrable"
                            : "u0 vanishes at interior nodes, so u0^(3-m) is not locally "
                              "integrable");
  return out;
}

int step_count(double t_start, double T, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("time step dt must be positive");
  const double span = T - t_start;
  const double k = std::round(span / dt);
  if (k < 1.0 || std::abs(k * dt - span) > 1e-9 * std::max(1.0, span))
    throw InvalidArgument("time step " + format_double(dt) + " does not divide the interval [" +
                          format_double(t_start) + ", " + format_double(T) + "]");
  return static_cast<int>(k);
}

ScalarField power_field(const ScalarField& u, double m) {
  std::vector<double> v(u.values().begin(), u.values().end());
  for (double& x : v) x = std::copysign(std::pow(std::abs(x), m), x);
  return ScalarField(u.grid(), std::move(v));
}

namespace {

double signed_power(double u, double m) { return std::copysign(std::pow(std::abs(u), m), u); }

// Builds the stiffness for one step from the mode, given the current guess for u.
class StiffnessSource {
 public:
  StiffnessSource(const CoefficientMode& mode, const Grid& grid, double m, double r)
      : mode_(mode), grid_(grid), m_(m), r_(r) {
    if (const auto* osc = std::get_if<OscillatingMode>(&mode_)) {
      if (!osc->field) throw InvalidArgument("oscillating mode without a coefficient");
      if (!(osc->eps > 0.0)) throw InvalidArgument("oscillating mode needs eps > 0");
      if (osc->field->dim() != grid.dim())
        throw InvalidArgument("coefficient and grid dimensions differ");
      frozen_ = osc->field->time_independent();
    } else if (const auto* c = std::get_if<ConstantMatrixMode>(&mode_)) {
      if (c->matrix.dim != grid.dim())
        throw InvalidArgument("homogenized matrix and grid dimensions differ");
      frozen_ = true;
    } else {
      const auto& th = std::get<ThetaDependentMode>(mode_);
      if (!th.table) throw InvalidArgument("theta-dependent mode without a table");
      if (th.table->dim() != grid.dim())
        throw InvalidArgument("theta table and grid dimensions differ");
    }
  }

  bool depends_on_u() const { return std::holds_alternative<ThetaDependentMode>(mode_); }

  const SparseOperator& at(double t, const ScalarField& u_guess, int step) {
    if (frozen_ && cached_) return stiffness_;
    std::vector<Tensor> samples;
    if (const auto* osc = std::get_if<OscillatingMode>(&mode_)) {
      const auto& field = *osc->field;
      samples = sample_at_quadrature(grid_, [&](const QuadraturePoint& qp) {
        const auto [y, s] = oscillating_arguments(qp.x, t, osc->eps, r_, field.dim());
        return field.unscaled(y, s);
      });
    } else if (const auto* c = std::get_if<ConstantMatrixMode>(&mode_)) {
      const Tensor a = c->matrix.unscaled();
      samples = sample_at_quadrature(grid_, [&](const QuadraturePoint&) { return a; });
    } else {
      const auto& th = std::get<ThetaDependentMode>(mode_);
      samples = sample_at_quadrature(grid_, [&](const QuadraturePoint& qp) {
        const double u = std::max(0.0, interpolate_cell(u_guess, qp));
        const double theta = m_ * std::pow(u, m_ - 1.0);
        if (theta > th.table->theta_max()) {
          std::ostringstream msg;
          msg << "theta table overflow at step " << step << ": theta = " << theta
              << " exceeds theta_max = " << th.table->theta_max();
          throw SolverError(msg.str(), theta, step);
        }
        return th.table->query(theta).value.scaled(th.amplitude);
      });
    }
    stiffness_ = assemble_stiffness(grid_, samples);
    cached_ = true;
    return stiffness_;
  }

 private:
  static double interpolate_cell(const ScalarField& u, const QuadraturePoint& qp) {
    const auto shape = q1_shape(u.grid().dim(), qp.local, u.grid().spacing());
    const auto vals = u.cell_values(qp.cell);
    double v = 0.0;
    for (int a = 0; a < u.grid().local_nodes(); ++a) v += shape.value[a] * vals[a];
    return v;
  }

  const CoefficientMode& mode_;
  Grid grid_;
  double m_;
  double r_;
  bool frozen_ = false;
  bool cached_ = false;
  SparseOperator stiffness_;
};

struct NewtonOutcome {
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
};

// Solves M (u - u_prev) / dt + K phi(u) = 0 for u, starting from u.
NewtonOutcome newton_solve(const SparseOperator& K, std::span<const double> mass,
                           std::span<const double> u_prev, std::vector<double>& u, double dt,
                           double m, double delta, const NewtonOptions& opt, int step) {
  const std::size_t n = u.size();
  std::vector<double> phi(n), F(n), Kphi(n);
  auto residual = [&](std::span<const double> v) {
    for (std::size_t i = 0; i < n; ++i) phi[i] = signed_power(v[i], m);
    K.apply(phi, Kphi);
    for (std::size_t i = 0; i < n; ++i) F[i] = mass[i] * (v[i] - u_prev[i]) / dt + Kphi[i];
    return norm2(F);
  };

  // Residual scale: size of the two terms at the previous state.
  double scale = 0.0;
  {
    std::vector<double> mu(n), phi_prev(n);
    for (std::size_t i = 0; i < n; ++i) {
      mu[i] = mass[i] * u_prev[i] / dt;
      phi_prev[i] = signed_power(u_prev[i], m);
    }
    scale = norm2(mu) + norm2(K.apply(phi_prev));
  }
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * scale;

  NewtonOutcome out;
  double res = residual(u);
  out.initial_residual = res;
  out.final_residual = res;
  if (res <= opt.tol * scale || res <= floor) return out;

  std::vector<double> deriv(n), diag(n), rhs(n), trial(n);
  const SolverOptions lin{opt.linear_tol, 0};
  for (int it = 1; it <= opt.max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      deriv[i] = m * std::pow(u[i] * u[i] + delta * delta, 0.5 * (m - 1.0));
      diag[i] = mass[i] / (dt * deriv[i]);
      rhs[i] = -F[i];
    }
    // J du = -F with J = M/dt + K D, solved as (M D^-1 / dt + K) y = -F, du = D^-1 y.
    const auto system = K.scaled_plus_diagonal(1.0, diag, ConstraintTag::none);
    const auto y = solve_spd(system, rhs, lin).x;

    double lambda = 1.0;
    bool accepted = false;
    double trial_res = res;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] + lambda * y[i] / deriv[i];
      trial_res = residual(trial);
      if (std::isfinite(trial_res) && trial_res < res) {
        accepted = true;
        break;
      }
      lambda *= opt.damping;
    }
    if (!accepted) {
      if (res <= 1e3 * floor) {
        residual(u);
        break;
      }
      std::ostringstream msg;
      msg << "Newton diverged at step " << step << " (iteration " << it
          << "): residual did not decrease through " << opt.max_halvings
          << " damping levels, residual " << res;
      throw SolverError(msg.str(), res, it);
    }
    u = trial;
    res = trial_res;
    out.iterations = it;
    out.final_residual = res;
    if (res <= opt.tol * scale || res <= floor) return out;
  }
  if (res > opt.tol * scale && res > 1e3 * floor) {
    std::ostringstream msg;
    msg << "Newton did not converge at step " << step << " after " << opt.max_iter
        << " iterations, residual " << res << " (scale " << scale << ")";
    throw SolverError(msg.str(), res, opt.max_iter);
  }
  out.final_residual = res;
  return out;
}

}  // namespace

Trajectory solve_pme(const PMEProblem& problem, const CoefficientMode& mode,
                     const TimeStepping& stepping, const NewtonOptions& newton) {
  check_problem(problem);
  const Grid& grid = problem.u0.grid();
  const int steps = step_count(problem.t_start, problem.T, stepping.dt);
  if (stepping.stride < 1 || steps % stepping.stride != 0)
    throw InvalidArgument("storage stride " + std::to_string(stepping.stride) +
                          " must divide the step count " + std::to_string(steps));
  const double dt = (problem.T - problem.t_start) / steps;
  const double m = problem.m;

  StiffnessSource source(mode, grid, m, problem.r);
  if (const auto* th = std::get_if<ThetaDependentMode>(&mode)) {
    const double needed = m * std::pow(problem.u0.max_value(), m - 1.0);
    if (needed > th->table->theta_max())
      throw InvalidArgument("theta table too small: theta_max = " +
                            format_double(th->table->theta_max()) + " but m max(u0)^(m-1) = " +
                            format_double(needed) + " requires theta_max >= " +
                            format_double(needed));
  }

  const auto mass = lumped_mass(grid);
  const double delta = 1e-8 * std::max(1.0, problem.u0.max_value());

  Trajectory traj;
  traj.grid = grid;
  traj.dt = dt;
  traj.steps = steps;
  traj.stride = stepping.stride;
  traj.times.push_back(problem.t_start);
  traj.states.push_back(problem.u0);

  std::vector<double> u(problem.u0.values().begin(), problem.u0.values().end());
  std::vector<double> u_prev = u;
  for (int step = 1; step <= steps; ++step) {
    const double t = step == steps ? problem.T : problem.t_start + step * dt;
    u_prev = u;
    StepDiagnostics diag;
    diag.step = step;
    diag.time = t;
    const int sweeps = source.depends_on_u() ? std::max(1, newton.picard_sweeps) : 1;
    for (int sweep = 1; sweep <= sweeps; ++sweep) {
      const std::vector<double> before = u;
      const auto& K = source.at(t, ScalarField(grid, u), step);
      const auto outcome = newton_solve(K, mass, u_prev, u, dt, m, delta, newton, step);
      if (sweep == 1) diag.initial_residual = outcome.initial_residual;
      diag.newton_iterations += outcome.iterations;
      diag.final_residual = outcome.final_residual;
      diag.picard_sweeps = sweep;
      if (sweeps > 1) {
        double change = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
          change = std::max(change, std::abs(u[i] - before[i]));
        if (change <= newton.picard_tol * std::max(norm_inf(u), 1e-300)) break;
      }
    }
    // Undershoot within the regularization band is round-off and is zeroed silently.
    for (double& v : u) {
      if (v >= 0.0) continue;
      if (v < -delta) ++diag.clamped;
      v = 0.0;
    }
    traj.clamped_total += diag.clamped;
    traj.max_clamped_per_step = std::max(traj.max_clamped_per_step, diag.clamped);
    traj.diagnostics.push_back(diag);
    if (step % stepping.stride == 0) {
      traj.times.push_back(t);
      traj.states.emplace_back(grid, u);
    }
  }
  return traj;
}

BarenblattConstants barenblatt_constants(int dim, double m) {
  if (dim < 1) throw InvalidArgument("barenblatt: dimension must be positive");
  if (!(m > 1.0)) throw InvalidArgument("barenblatt: m must exceed 1");
  const double N = dim;
  const double alpha = N / (N * (m - 1.0) + 2.0);
  return {alpha, alpha * (m - 1.0) / (2.0 * N * m)};
}

double barenblatt(int dim, double m, double C, const Point& x, double t) {
  if (!(t > 0.0)) throw InvalidArgument("barenblatt: t must be positive");
  if (!(C > 0.0)) throw InvalidArgument("barenblatt: C must be positive");
  const auto [alpha, kappa] = barenblatt_constants(dim, m);
  double r2 = 0.0;
  for (int d = 0; d < dim; ++d) r2 += x[d] * x[d];
  const double scaled = std::pow(t, -alpha / dim);
  const double bracket = C - kappa * scaled * scaled * r2;
  if (bracket <= 0.0) return 0.0;
  return std::pow(t, -alpha) * std::pow(bracket, 1.0 / (m - 1.0));
}

double barenblatt_radius(int dim, double m, double C, double t) {
  const auto [alpha, kappa] = barenblatt_constants(dim, m);
  return std::pow(t, alpha / dim) * std::sqrt(C / kappa);
}

ScalarField make_initial(const Grid& grid, const InitialProfile& p, double m) {
  if (grid.boundary() != BoundaryKind::dirichlet)
    throw InvalidArgument("initial data live on a Dirichlet grid");
  const Box dom = grid.domain();
  Point centre{0.0, 0.0};
  for (int d = 0; d < grid.dim(); ++d) centre[d] = 0.5 * (dom.lo[d] + dom.hi[d]);
  auto distance = [&](const Point& x) {
    double r2 = 0.0;
    for (int d = 0; d < grid.dim(); ++d) r2 += (x[d] - centre[d]) * (x[d] - centre[d]);
    return std::sqrt(r2);
  };
  switch (p.kind) {
    case InitialProfile::Kind::barenblatt:
      return interpolate(grid, [&](const Point& x) {
        Point shifted{x[0] - centre[0], x[1] - centre[1]};
        return barenblatt(grid.dim(), m, p.C, shifted, p.t0);
      });
    case InitialProfile::Kind::bump: {
      if (p.level < 0.0 || p.amplitude < 0.0 || !(p.radius > 0.0))
        throw InvalidArgument("bump profile needs level >= 0, amplitude >= 0, radius > 0");
      const double R = p.radius * grid.side_length();
      return interpolate(grid, [&](const Point& x) {
        const double r = distance(x);
        if (r >= R) return p.level;
        const double c = std::cos(0.5 * std::numbers::pi * r / R);
        return p.level + p.amplitude * c * c;
      });
    }
    case InitialProfile::Kind::constant_positive:
      if (!(p.level > 0.0)) throw InvalidArgument("constant_positive profile needs a value > 0");
      return interpolate(grid, [&](const Point&) { return p.level; });
    case InitialProfile::Kind::csv:
      return read_field_csv(p.path, grid);
  }
  throw InvalidArgument("unknown initial profile");
}

EnergyLedger energy_report(const Trajectory& traj, double m) {
  EnergyLedger e;
  const auto lm1 = NormSpec::lp(m + 1.0, NormRule::nodal);
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const double t = traj.times[i];
    const double nrm = norm(traj.states[i], lm1);
    const double grad = norm(power_field(traj.states[i], m), NormSpec::h1_semi());
    e.times.push_back(t);
    e.lm1_norm.push_back(nrm);
    e.grad_um_l2.push_back(grad);
    double acc = 0.0;
    if (i > 0) {
      const double g0 = e.grad_um_l2[i - 1];
      acc = e.dissipation.back() + 0.5 * (t - e.times[i - 1]) * (g0 * g0 + grad * grad);
    }
    e.dissipation.push_back(acc);
    if (i == 0 || nrm > e.sup_lm1) {
      e.sup_lm1 = nrm;
      e.sup_lm1_time = t;
    }
    if (i > 0 && nrm > e.lm1_norm[i - 1]) e.lm1_non_increasing = false;
  }
  e.total_dissipation = e.dissipation.empty() ? 0.0 : e.dissipation.back();
  return e;
}

namespace {

std::string state_file(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u_%05zu.csv", i);
  return buf;
}

}  // namespace

void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj,
                     const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["grid"] = grid_to_json(traj.grid);
  manifest["dt"] = traj.dt;
  manifest["steps"] = traj.steps;
  manifest["stride"] = traj.stride;
  manifest["times"] = traj.times;
  manifest["clamped_total"] = traj.clamped_total;
  manifest["max_clamped_per_step"] = traj.max_clamped_per_step;
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    write_field_csv(dir / state_file(i), traj.states[i]);
    files.push_back(state_file(i));
  }
  manifest["files"] = files;
  nlohmann::json diags = nlohmann::json::array();
  for (const auto& d : traj.diagnostics)
    diags.push_back({{"step", d.step},
                     {"time", d.time},
                     {"newton_iterations", d.newton_iterations},
                     {"picard_sweeps", d.picard_sweeps},
                     {"initial_residual", d.initial_residual},
                     {"final_residual", d.final_residual},
                     {"clamped", d.clamped}});
  manifest["diagnostics"] = diags;
  if (!extra.is_null()) manifest["run"] = extra;
  write_json(dir / "manifest.json", manifest);
}

Trajectory load_trajectory(const std::filesystem::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  Trajectory traj;
  try {
    traj.grid = grid_from_json(manifest.at("grid"));
    traj.dt = manifest.at("dt").get<double>();
    traj.steps = manifest.at("steps").get<int>();
    traj.stride = manifest.at("stride").get<int>();
    traj.times = manifest.at("times").get<std::vector<double>>();
    traj.clamped_total = manifest.at("clamped_total").get<std::size_t>();
    traj.max_clamped_per_step = manifest.at("max_clamped_per_step").get<std::size_t>();
    for (const auto& f : manifest.at("files"))
      traj.states.push_back(read_field_csv(dir / f.get<std::string>(), traj.grid));
    for (const auto& d : manifest.at("diagnostics")) {
      StepDiagnostics s;
      s.step = d.at("step").get<int>();
      s.time = d.at("time").get<double>();
      s.newton_iterations = d.at("newton_iterations").get<int>();
      s.picard_sweeps = d.at("picard_sweeps").get<int>();
      s.initial_residual = d.at("initial_residual").get<double>();
      s.final_residual = d.at("final_residual").get<double>();
      s.clamped = d.at("clamped").get<std::size_t>();
      traj.diagnostics.push_back(s);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(dir.string() + "/manifest.json: " + ex.what());
  }
  if (traj.times.size() != traj.states.size() || traj.times.empty())
    throw InvalidArgument(dir.string() + ": stamps and stored states disagree");
  return traj;
}

}  // namespace pmhom
