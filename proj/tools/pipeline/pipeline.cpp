#include "pipeline.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <sstream>

#include "pmhom/io.hpp"
#include "pmhom/norms.hpp"
#include "pmhom/parallel.hpp"

#ifndef PMHOM_VERSION
#define PMHOM_VERSION "0.0.0"
#endif

namespace pmhom::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kCellsPerPeriod = 8.0;

bool has_manifest(const fs::path& dir) { return fs::exists(dir / "manifest.json"); }

fs::path default_out(const ExperimentConfig& c) {
  return c.output ? *c.output : fs::path("runs") / c.name;
}

std::string format_fixed(double v, int digits) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::string_view version() { return PMHOM_VERSION; }

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const DiagnosticsFailure&) {
    return exit_diagnostics;
  } catch (const SolverError&) {
    return exit_solver;
  } catch (const ValidationError&) {
    return exit_validation;
  } catch (const ConfigError&) {
    return exit_validation;
  } catch (const StrictWarning&) {
    return exit_validation;
  } catch (const InvalidArgument&) {
    return exit_validation;
  } catch (...) {
    return exit_failure;
  }
}

Pipeline::Pipeline(ExperimentConfig config, RunOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  out_ = options_.out.empty() ? default_out(config_) : options_.out;
  hash_ = config_hash(config_);
  if (has_manifest(out_)) {
    const auto old = read_json(out_ / "manifest.json");
    const auto old_hash = old.value("config_hash", std::string{});
    if (old_hash != hash_)
      throw ConfigError("stale artifacts in " + out_.string() + ": they were produced by config " +
                        old_hash + ", this config hashes to " + hash_);
    stages_ = old.value("stages", json::object());
  }
}

void Pipeline::say(const std::string& line) const {
  if (options_.log) *options_.log << line << '\n';
}

CellSolveOptions Pipeline::cell_options() const {
  CellSolveOptions o;
  o.tol = config_.cell.tol;
  o.periodic_tol = config_.cell.periodic_tol;
  o.max_periods = config_.cell.max_periods;
  return o;
}

Pipeline::Inputs Pipeline::check_inputs() const {
  const auto& c = config_;
  const auto& p = c.problem;
  if (!(p.m > 1.0))
    throw ValidationError("H1", "porous medium exponent m = " + format_double(p.m) +
                                    " violates 1 < m");
  if (!(p.r > 0.0))
    throw ConfigError("problem.r = " + format_double(p.r) + " must be positive");
  Inputs in;
  const int dim = p.domain.dim;

  if (c.coefficient.family == "tabulated") {
    in.field = std::make_shared<CoefficientField>(
        make_tabulated(load_tabulated(c.coefficient.csv, c.coefficient.sidecar)));
  } else {
    in.field = std::make_shared<CoefficientField>(
        make_coefficient(c.coefficient.family, c.coefficient.params, dim));
  }
  if (in.field->dim() != dim)
    throw ConfigError("coefficient dimension " + std::to_string(in.field->dim()) +
                      " differs from problem.domain.dim " + std::to_string(dim));
  const auto report = validate_coefficient(*in.field, c.validation_samples, c.seed);
  if (!report.symmetric)
    throw ValidationError("H2", "coefficient is not symmetric (worst defect " +
                                    format_double(report.worst_symmetry_defect) + ")");
  if (!report.periodic)
    throw ValidationError("H2", "coefficient is not 1-periodic (worst defect " +
                                    format_double(report.worst_periodicity_defect) + ")");
  if (!report.elliptic)
    throw ValidationError("H3", "minimum sampled eigenvalue " + format_double(report.eig_min) +
                                    " is not positive");
  if (!report.time_regular)
    in.warnings.push_back("H4: total-variation proxy in s is not finite");

  const auto& d = c.discretization;
  in.grid = build_grid(dim, d.n, BoundaryKind::dirichlet, p.domain.side, p.domain.origin);
  in.cell_grid = build_grid(dim, d.n_cell, BoundaryKind::periodic, 1.0);
  const double per_period = c.eps.back() / in.grid.spacing();
  if (per_period < kCellsPerPeriod - 1e-9)
    throw ConfigError("discretization.n = " + std::to_string(d.n) + " gives " +
                      format_fixed(per_period, 4) + " cells per period at eps = " +
                      format_double(c.eps.back()) + "; at least 8 are required");

  in.problem.m = p.m;
  in.problem.r = p.r;
  in.problem.t_start = p.t_start;
  in.problem.T = p.T;
  in.problem.positivity = p.positivity;
  in.problem.u0 = make_initial(in.grid, p.u0, p.m);
  check_problem(in.problem);
  for (auto& w : positivity_warnings(in.problem)) in.warnings.push_back(std::move(w));

  const int steps = step_count(p.t_start, p.T, d.dt);
  if (steps % d.stride != 0)
    throw ConfigError("discretization.stride = " + std::to_string(d.stride) +
                      " does not divide the " + std::to_string(steps) + " time steps");

  if (c.regime() == Regime::critical) {
    double umax = 0.0;
    for (double v : in.problem.u0.values()) umax = std::max(umax, v);
    const double needed = p.m * std::pow(umax, p.m - 1.0);
    if (c.cell.theta_max < needed)
      throw ConfigError("r = 2 requires cell.theta_max >= " + format_double(needed) +
                        " (m max(u0)^(m-1)); configured " + format_double(c.cell.theta_max));
  }

  const Box dom = in.grid.domain();
  if (c.diagnostics.omega) {
    const Box& w = *c.diagnostics.omega;
    for (int k = 0; k < dim; ++k)
      if (!(w.lo[k] > dom.lo[k] && w.hi[k] < dom.hi[k] && w.lo[k] < w.hi[k]))
        throw ConfigError("diagnostics.omega must lie strictly inside the domain");
  }
  const auto& reports = c.diagnostics.reports;
  if (p.m < 2.0 &&
      std::find(reports.begin(), reports.end(), "local_gradient") != reports.end())
    in.warnings.push_back("local_gradient needs m >= 2; the energy report covers m < 2");
  return in;
}

const Pipeline::Inputs& Pipeline::inputs() {
  if (!inputs_) {
    inputs_ = check_inputs();
    if (options_.strict && !inputs_->warnings.empty()) {
      std::string all;
      for (const auto& w : inputs_->warnings) all += (all.empty() ? "" : "; ") + w;
      throw StrictWarning("warnings are errors under --strict: " + all);
    }
  }
  return *inputs_;
}

bool Pipeline::completed(std::string_view stage) const {
  const std::string key(stage);
  if (!stages_.contains(key) || !stages_[key].value("completed", false)) return false;
  if (stage == "cell")
    return has_manifest(out_ / (config_.regime() == Regime::critical ? "theta_table" : "cells"));
  if (stage == "homogenize") return fs::exists(out_ / "a_hom.json");
  if (stage == "solve") return has_manifest(out_ / "homogenized");
  if (stage == "sweep") {
    for (double e : config_.eps)
      if (!has_manifest(sweep_dir(e))) return false;
    return true;
  }
  return false;
}

void Pipeline::write_manifest() const {
  json j;
  j["config"] = config_.raw;
  j["config_canonical"] = canonical_json(config_);
  j["config_hash"] = hash_;
  j["version"] = std::string(version());
  j["regime"] = std::string(regime_name(config_.regime()));
  j["stages"] = stages_;
  write_json(out_ / "manifest.json", j);
}

void Pipeline::timed(std::string_view stage, const std::function<void()>& body) {
  fs::create_directories(out_);
  if (completed(stage)) {
    say(std::string(stage) + ": artifacts present, skipped");
    return;
  }
  const auto t0 = std::chrono::steady_clock::now();
  body();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  stages_[std::string(stage)] = {{"completed", true}, {"wall_seconds", secs}};
  write_manifest();
  say(std::string(stage) + ": done in " + format_fixed(secs, 3) + " s");
}

void Pipeline::run_stage(std::string_view stage) {
  if (stage == "validate") validate();
  else if (stage == "cell") cell();
  else if (stage == "homogenize") homogenize();
  else if (stage == "solve") solve();
  else if (stage == "sweep") sweep();
  else if (stage == "diagnose") diagnose();
  else throw ConfigError("unknown stage '" + std::string(stage) + "'");
}

void Pipeline::run() {
  for (auto s : kStages) run_stage(s);
}

json Pipeline::validate() {
  json j;
  timed("validate", [&] {
    j["config_hash"] = hash_;
    j["regime"] = std::string(regime_name(config_.regime()));
    try {
      const auto& in = inputs();
      j["pass"] = true;
      j["hypotheses"] = {{"H1", true}, {"H2", true}, {"H3", true}};
      j["warnings"] = in.warnings;
      j["ellipticity"] = in.field->ellipticity();
      j["amplitude"] = in.field->amplitude();
      j["cells_per_finest_period"] = config_.eps.back() / in.grid.spacing();
      write_json(out_ / "validation.json", j);
    } catch (const ValidationError& e) {
      j["pass"] = false;
      j["violated"] = e.hypothesis();
      j["error"] = e.what();
      write_json(out_ / "validation.json", j);
      throw;
    } catch (const Error& e) {
      j["pass"] = false;
      j["error"] = e.what();
      write_json(out_ / "validation.json", j);
      throw;
    }
  });
  return j;
}

void Pipeline::cell() {
  const auto& in = inputs();
  timed("cell", [&] {
    const int dim = in.grid.dim();
    const auto opts = cell_options();
    const auto& d = config_.discretization;
    if (config_.regime() == Regime::critical) {
      ThetaTableOptions t;
      t.theta_min = config_.cell.theta_min;
      t.theta_max = config_.cell.theta_max;
      t.nodes = config_.cell.theta_nodes;
      t.s_steps = d.s_steps;
      t.keep_fields = true;
      const auto table = build_theta_table(*in.field, in.cell_grid, t, opts, options_.workers);
      save_theta_table(out_ / "theta_table", table);
      return;
    }
    std::vector<CellSolution> cells(static_cast<std::size_t>(dim));
    parallel_for(cells.size(), options_.workers, [&](std::size_t i) {
      const int k = static_cast<int>(i) + 1;
      cells[i] = config_.regime() == Regime::sub
                     ? solve_cp1(*in.field, in.cell_grid, d.s_nodes, k, opts)
                     : solve_cp3(*in.field, in.cell_grid, d.s_nodes, k, opts);
    });
    save_cell_solutions(out_ / "cells", cells, assemble_ahom(*in.field, cells));
  });
}

void Pipeline::homogenize() {
  const auto& in = inputs();
  timed("homogenize", [&] {
    const double lambda = in.field->ellipticity();
    const auto mean = arithmetic_mean(*in.field, in.cell_grid, config_.discretization.s_nodes);
    json j;
    bool sandwich = true;
    if (config_.regime() == Regime::critical) {
      if (!has_manifest(out_ / "theta_table"))
        throw MissingArtifact("missing theta table; run the cell stage first");
      const auto table = load_theta_table(out_ / "theta_table");
      json nodes = json::array();
      for (const auto& mtx : table.matrices()) {
        sandwich = sandwich && spectral_sandwich(mtx, lambda);
        nodes.push_back(to_json(mtx));
      }
      j["regime"] = "critical";
      j["thetas"] = table.thetas();
      j["nodes"] = nodes;
      j["max_adjacent_distance"] = table.max_adjacent_distance();
      j["theta0_minus_mean"] =
          (table.matrices().front().value - mean).max_abs(in.grid.dim());
    } else {
      if (!has_manifest(out_ / "cells"))
        throw MissingArtifact("missing cell solutions; run the cell stage first");
      const auto cells = load_cell_solutions(out_ / "cells");
      const auto ahom = assemble_ahom(*in.field, cells);
      sandwich = spectral_sandwich(ahom, lambda);
      j = to_json(ahom);
    }
    j["arithmetic_mean"] = tensor_to_json(mean, in.grid.dim());
    j["ellipticity"] = lambda;
    j["spectral_sandwich"] = sandwich;
    write_json(out_ / "a_hom.json", j);
    if (!sandwich)
      throw SolverError("homogenized tensor violates the spectral sandwich [lambda, 1]", 0.0, 0);
  });
}

CoefficientMode Pipeline::homogenized_mode() {
  const auto& in = inputs();
  if (config_.regime() == Regime::critical) {
    if (!has_manifest(out_ / "theta_table"))
      throw MissingArtifact("missing theta table; run the cell stage first");
    return ThetaDependentMode{
        std::make_shared<const ThetaTable>(load_theta_table(out_ / "theta_table")),
        in.field->amplitude()};
  }
  if (!fs::exists(out_ / "a_hom.json"))
    throw MissingArtifact("missing a_hom.json; run the homogenize stage first");
  return ConstantMatrixMode{homogenized_from_json(read_json(out_ / "a_hom.json"))};
}

void Pipeline::solve() {
  const auto& in = inputs();
  timed("solve", [&] {
    const auto mode = homogenized_mode();
    const auto& d = config_.discretization;
    const auto traj = solve_pme(in.problem, mode, {d.dt, d.stride}, config_.newton);
    save_trajectory(out_ / "homogenized", traj,
                    {{"config_hash", hash_}, {"kind", "homogenized"}});
  });
}

fs::path Pipeline::sweep_dir(double eps) const {
  const auto& d = config_.discretization;
  return out_ / "sweep" /
         (config_.name + "_eps" + format_double(eps) + "_n" + std::to_string(d.n) + "_dt" +
          format_double(d.dt));
}

void Pipeline::sweep() {
  const auto& in = inputs();
  timed("sweep", [&] {
    const auto& d = config_.discretization;
    parallel_for(config_.eps.size(), options_.workers, [&](std::size_t i) {
      const double eps = config_.eps[i];
      const auto dir = sweep_dir(eps);
      if (has_manifest(dir) &&
          read_json(dir / "manifest.json").value("run", json::object()).value("config_hash", "") ==
              hash_)
        return;
      const auto traj =
          solve_pme(in.problem, OscillatingMode{in.field, eps}, {d.dt, d.stride}, config_.newton);
      save_trajectory(dir, traj, {{"config_hash", hash_}, {"kind", "oscillating"}, {"eps", eps}});
    });
  });
}

SweepResult Pipeline::load_sweep() const {
  SweepResult s;
  s.m = config_.problem.m;
  s.r = config_.problem.r;
  s.eps = config_.eps;
  std::vector<std::string> missing;
  if (!has_manifest(out_ / "homogenized")) missing.push_back("homogenized");
  for (double e : config_.eps)
    if (!has_manifest(sweep_dir(e))) missing.push_back(sweep_dir(e).filename().string());
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += " " + m;
    throw MissingArtifact("missing trajectories:" + list + " (run solve and sweep first)");
  }
  auto check_run = [&](const fs::path& dir) {
    const auto run = read_json(dir / "manifest.json").value("run", json::object());
    if (run.value("config_hash", "") != hash_)
      throw ConfigError("stale trajectory in " + dir.string());
  };
  check_run(out_ / "homogenized");
  s.homogenized = load_trajectory(out_ / "homogenized");
  for (double e : config_.eps) {
    check_run(sweep_dir(e));
    s.runs.push_back(load_trajectory(sweep_dir(e)));
  }
  check_sweep(s);
  return s;
}

CorrectorSet Pipeline::load_correctors() const {
  if (config_.regime() == Regime::critical) {
    if (!has_manifest(out_ / "theta_table"))
      throw MissingArtifact("missing theta table; run the cell stage first");
    return CorrectorSet::from_table(
        std::make_shared<const ThetaTable>(load_theta_table(out_ / "theta_table")),
        config_.problem.m);
  }
  if (!has_manifest(out_ / "cells"))
    throw MissingArtifact("missing cell solutions; run the cell stage first");
  return CorrectorSet::from_cells(load_cell_solutions(out_ / "cells"));
}

DiagnosticsReport Pipeline::diagnose() {
  const auto& in = inputs();
  DiagnosticsReport report;
  timed("diagnose", [&] {
    const auto sweep = load_sweep();
    const auto& want = config_.diagnostics.reports;
    auto wants = [&](const char* r) { return std::find(want.begin(), want.end(), r) != want.end(); };
    const auto& eps = config_.eps;
    const double m = config_.problem.m;
    report.warnings = in.warnings;

    std::vector<Series> convergence;
    if (wants("solution_error")) {
      convergence.push_back({"l2_spacetime", eps, {}, {}});
      for (double v : solution_error(sweep, parse_solution_norm("L2_spacetime")))
        convergence.back().values.emplace_back(v);
      Series lm{"lrho_lm1", eps, {}, {}};
      for (double v : solution_error(sweep, parse_solution_norm("Lrho_Lm1", config_.diagnostics.rho)))
        lm.values.emplace_back(v);
      convergence.push_back(std::move(lm));
    }
    if (wants("corrector_error")) {
      const auto correctors = load_correctors();
      Series s{"corrector_error", eps, {}, {}};
      s.values.resize(eps.size());
      parallel_for(eps.size(), options_.workers,
                   [&](std::size_t i) { s.values[i] = corrector_error(sweep, correctors, i); });
      convergence.push_back(std::move(s));
    }
    report.merge(convergence_table(convergence));

    if (wants("energy")) {
      Series sup{"sup_lm1", eps, {}, {}};
      Series dis{"dissipation", eps, {}, {}};
      Series mono{"lm1_non_increasing", eps, {}, {}};
      fs::create_directories(out_ / "diagnostics");
      for (std::size_t i = 0; i < eps.size(); ++i) {
        const auto e = energy_report(sweep.runs[i], m);
        sup.values.emplace_back(e.sup_lm1);
        dis.values.emplace_back(e.total_dissipation);
        mono.values.emplace_back(e.lm1_non_increasing ? 1.0 : 0.0);
        CsvWriter csv(out_ / "diagnostics" /
                      ("energy_" + sweep_dir(eps[i]).filename().string() + ".csv"));
        csv.header({"t", "lm1_norm", "grad_um_l2", "dissipation"});
        for (std::size_t k = 0; k < e.times.size(); ++k)
          csv.row({e.times[k], e.lm1_norm[k], e.grad_um_l2[k], e.dissipation[k]});
      }
      report.add_series(std::move(sup));
      report.add_series(std::move(dis));
      report.add_series(std::move(mono));
      const double bound = config_.diagnostics.energy_bound;
      report.add_verdict("sup_lm1 uniformly bounded", "sup_lm1", VerdictRule::ratio_bound, bound);
      report.add_verdict("dissipation uniformly bounded", "dissipation", VerdictRule::ratio_bound,
                         bound);
      report.add_verdict("lm1 non-increasing in time", "lm1_non_increasing",
                         VerdictRule::lower_bound, 1.0);
    }

    if (wants("local_gradient") && m >= 2.0) {
      LocalGradientOptions lg;
      lg.omega = config_.diagnostics.omega.value_or(centered_half_box(in.grid));
      lg.bound = config_.diagnostics.local_bound;
      lg.positivity = config_.problem.positivity;
      report.merge(local_gradient_estimate(sweep, lg));
    }

    if (wants("pairing")) {
      PairingTest test;
      test.phi.support = centered_half_box(in.grid);
      const double t0 = config_.problem.t_start, t1 = config_.problem.T;
      test.psi.support.lo[0] = t0 + 0.25 * (t1 - t0);
      test.psi.support.hi[0] = t0 + 0.75 * (t1 - t0);
      test.c = CellMode{1.0, {}};
      PairingTest plain = test;
      plain.b = CellMode{1.0, {}};
      test.b = CellMode{0.0, {{1.0, {1, 0}}}};
      const double r = config_.problem.r;
      const double reference = two_scale_pairing(sweep.homogenized, plain, 1.0, r);
      Series osc{"pairing_zero_mean_mode", eps, {}, {}};
      Series gap{"pairing_weak_gap", eps, {}, {}};
      for (std::size_t i = 0; i < eps.size(); ++i) {
        osc.values.emplace_back(std::abs(two_scale_pairing(sweep.runs[i], test, eps[i], r)));
        gap.values.emplace_back(
            std::abs(two_scale_pairing(sweep.runs[i], plain, eps[i], r) - reference));
      }
      osc.rates = observed_rates(osc.eps, osc.values);
      gap.rates = observed_rates(gap.eps, gap.values);
      report.add_series(std::move(osc));
      report.add_series(std::move(gap));
      report.add_verdict("zero-mean mode pairing decreasing", "pairing_zero_mean_mode",
                         VerdictRule::strictly_decreasing);
    }

    Series clamps{"clamp_fraction", eps, {}, {}};
    for (const auto& run : sweep.runs)
      clamps.values.emplace_back(static_cast<double>(run.clamped_total) /
                                 (static_cast<double>(run.steps) *
                                  static_cast<double>(run.grid.dof_count())));
    report.add_series(std::move(clamps));
    report.add_verdict("negativity clamps rare", "clamp_fraction", VerdictRule::upper_bound,
                       config_.diagnostics.clamp_fraction);

    fs::create_directories(out_ / "diagnostics");
    write_json(out_ / "diagnostics" / "report.json", to_json(report));
    write_report_csv(out_ / "diagnostics" / "report.csv", report);
  });
  for (const auto& v : report.verdicts)
    say("  " + std::string(v.pass ? "pass" : "FAIL") + "  " + v.name);
  if (!report.all_pass()) {
    std::string failed;
    for (const auto& v : report.verdicts)
      if (!v.pass) failed += (failed.empty() ? "" : ", ") + v.name;
    throw DiagnosticsFailure("diagnostic verdicts failed: " + failed);
  }
  return report;
}

BarenblattCheck barenblatt_check(const std::vector<std::pair<int, double>>& ladder) {
  constexpr int dim = 1;
  constexpr double m = 2.0, t_start = 0.01, t_end = 0.5;
  const double C = barenblatt_constants(dim, m).kappa;
  BarenblattCheck check;
  HomogenizedMatrix identity;
  identity.dim = dim;
  identity.value = Tensor::identity(dim);
  std::optional<double> prev;
  bool ok = true;
  for (const auto& [n, dt] : ladder) {
    const auto grid = build_grid(dim, n, BoundaryKind::dirichlet, 2.0, {-1.0, 0.0});
    InitialProfile init;
    init.kind = InitialProfile::Kind::barenblatt;
    init.C = C;
    init.t0 = t_start;
    PMEProblem problem;
    problem.m = m;
    problem.t_start = t_start;
    problem.T = t_end;
    problem.u0 = make_initial(grid, init, m);
    const int steps = step_count(t_start, t_end, dt);
    const auto traj = solve_pme(problem, ConstantMatrixMode{identity}, {dt, steps});
    std::vector<double> diff(grid.dof_count());
    for (std::size_t i = 0; i < diff.size(); ++i)
      diff[i] = traj.states.back()[i] - barenblatt(dim, m, C, grid.dof_position(i), t_end);
    BarenblattRow row;
    row.n = n;
    row.dt = dt;
    row.l1_error = norm(ScalarField(grid, std::move(diff)), NormSpec::lp(1.0));
    if (prev) row.factor = *prev / row.l1_error;
    row.clamps = traj.clamped_total;
    row.energy_monotone = energy_report(traj, m).lm1_non_increasing;
    prev = row.l1_error;
    if (row.factor && *row.factor < check.min_factor) ok = false;
    if (n == 256 && row.l1_error > check.error_bound) ok = false;
    check.rows.push_back(row);
  }
  check.pass = ok;
  return check;
}

void print_barenblatt(std::ostream& os, const BarenblattCheck& check) {
  os << std::left << std::setw(8) << "n" << std::setw(12) << "dt" << std::setw(14) << "L1_error"
     << std::setw(10) << "factor" << std::setw(8) << "clamps" << "energy_monotone\n";
  for (const auto& r : check.rows) {
    os << std::setw(8) << r.n << std::setw(12) << format_double(r.dt) << std::setw(14)
       << format_fixed(r.l1_error, 6) << std::setw(10)
       << (r.factor ? format_fixed(*r.factor, 4) : std::string("-")) << std::setw(8) << r.clamps
       << (r.energy_monotone ? "yes" : "no") << '\n';
  }
  os << (check.pass ? "PASS" : "FAIL") << ": factors >= " << format_double(check.min_factor)
     << ", L1 error at n = 256 <= " << format_double(check.error_bound) << '\n';
}

}  // namespace pmhom::pipeline
