#include "config.hpp"

#include <set>

#include "pmhom/io.hpp"

namespace pmhom::pipeline {

namespace {

using nlohmann::json;

// Object reader that remembers which keys were consumed; leftovers are errors.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
  }
  ~Section() = default;

  bool has(const std::string& key) const { return obj_.contains(key); }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    if (!obj_.contains(key)) return fallback;
    return required<T>(key);
  }

  template <class T>
  T required(const std::string& key) {
    seen_.insert(key);
    if (!obj_.contains(key)) throw ConfigError("missing key " + where(key));
    try {
      return obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("wrong type for " + where(key) + ": " + obj_.at(key).dump());
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(obj_.at(key), where(key));
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& item : obj_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown key " + where(item.key()));
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

Point read_point(const std::vector<double>& v, int dim, const std::string& where) {
  require(static_cast<int>(v.size()) == dim,
          where + " needs " + std::to_string(dim) + " coordinate(s)");
  Point p{0.0, 0.0};
  for (int d = 0; d < dim; ++d) p[d] = v[static_cast<std::size_t>(d)];
  return p;
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

InitialProfile read_profile(Section s, const std::filesystem::path& base) {
  InitialProfile u0;
  const auto kind = s.required<std::string>("profile");
  if (kind == "barenblatt") {
    u0.kind = InitialProfile::Kind::barenblatt;
    u0.C = s.required<double>("C");
    u0.t0 = s.required<double>("t0");
    require(u0.C > 0.0 && u0.t0 > 0.0, s.where() + ": barenblatt needs C > 0 and t0 > 0");
  } else if (kind == "bump") {
    u0.kind = InitialProfile::Kind::bump;
    u0.level = s.get<double>("level", 0.0);
    u0.amplitude = s.get<double>("amplitude", 1.0);
    u0.radius = s.get<double>("radius", 0.25);
  } else if (kind == "constant_positive") {
    u0.kind = InitialProfile::Kind::constant_positive;
    u0.level = s.required<double>("value");
  } else if (kind == "csv") {
    u0.kind = InitialProfile::Kind::csv;
    u0.path = resolve(s.required<std::string>("path"), base);
  } else {
    throw ConfigError("unknown initial profile '" + kind + "' at " + s.where("profile"));
  }
  s.finish();
  return u0;
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base) {
  ExperimentConfig c;
  c.raw = doc;
  Section root(doc, "");
  c.name = root.get<std::string>("name", c.name);
  require(!c.name.empty() && c.name.find_first_of("/\\ ") == std::string::npos,
          "name must be a non-empty token without spaces or slashes");
  c.seed = root.get<std::uint64_t>("seed", 0);
  if (root.has("output")) c.output = resolve(root.required<std::string>("output"), base);

  {
    auto p = root.child("problem");
    c.problem.m = p.required<double>("m");
    c.problem.r = p.required<double>("r");
    c.problem.T = p.required<double>("T");
    c.problem.t_start = p.get<double>("t_start", 0.0);
    c.problem.positivity = positivity_from_name(p.get<std::string>("positivity", "general"));
    {
      auto d = p.child("domain");
      c.problem.domain.dim = d.required<int>("dim");
      require(c.problem.domain.dim == 1 || c.problem.domain.dim == 2,
              "problem.domain.dim must be 1 or 2");
      c.problem.domain.side = d.get<double>("side", 1.0);
      require(c.problem.domain.side > 0.0, "problem.domain.side must be positive");
      c.problem.domain.origin = read_point(
          d.get<std::vector<double>>("origin", std::vector<double>(c.problem.domain.dim, 0.0)),
          c.problem.domain.dim, d.where("origin"));
      d.finish();
    }
    c.problem.u0 = read_profile(p.child("u0"), base);
    p.finish();
  }
  {
    auto k = root.child("coefficient");
    c.coefficient.family = k.required<std::string>("family");
    if (c.coefficient.family == "tabulated") {
      c.coefficient.params.clear();
      c.coefficient.csv = resolve(k.required<std::string>("csv"), base);
      c.coefficient.sidecar = resolve(k.required<std::string>("sidecar"), base);
    } else {
      c.coefficient.params = k.required<std::vector<double>>("params");
    }
    k.finish();
  }
  if (root.has("discretization")) {
    auto d = root.child("discretization");
    auto& x = c.discretization;
    x.n = d.get<int>("n", x.n);
    x.n_cell = d.get<int>("n_cell", x.n_cell);
    x.s_nodes = d.get<int>("s_nodes", x.s_nodes);
    x.s_steps = d.get<int>("s_steps", x.s_steps);
    x.dt = d.get<double>("dt", x.dt);
    x.stride = d.get<int>("stride", x.stride);
    d.finish();
    require(x.n >= 2 && x.n_cell >= 2, "discretization: grids need at least 2 cells per axis");
    require(x.s_nodes >= 1 && x.s_steps >= 4, "discretization: s_nodes >= 1 and s_steps >= 4");
    require(x.dt > 0.0, "discretization.dt must be positive");
    require(x.stride >= 1, "discretization.stride must be at least 1");
  }
  if (root.has("sweep")) {
    auto s = root.child("sweep");
    c.eps = s.required<std::vector<double>>("eps");
    s.finish();
  }
  require(!c.eps.empty(), "sweep.eps must not be empty");
  for (std::size_t i = 0; i < c.eps.size(); ++i) {
    require(c.eps[i] > 0.0, "sweep.eps values must be positive");
    require(i == 0 || c.eps[i] < c.eps[i - 1], "sweep.eps must be strictly decreasing");
  }
  if (root.has("cell")) {
    auto s = root.child("cell");
    auto& x = c.cell;
    x.tol = s.get<double>("tol", x.tol);
    x.periodic_tol = s.get<double>("periodic_tol", x.periodic_tol);
    x.max_periods = s.get<int>("max_periods", x.max_periods);
    x.theta_min = s.get<double>("theta_min", x.theta_min);
    x.theta_max = s.get<double>("theta_max", x.theta_max);
    x.theta_nodes = s.get<int>("theta_nodes", x.theta_nodes);
    s.finish();
    require(x.tol > 0.0 && x.periodic_tol > 0.0, "cell tolerances must be positive");
    require(x.max_periods >= 1, "cell.max_periods must be at least 1");
    require(x.theta_min > 0.0 && x.theta_max > x.theta_min, "cell: need 0 < theta_min < theta_max");
    require(x.theta_nodes >= 3, "cell.theta_nodes must be at least 3");
  }
  if (root.has("newton")) {
    auto s = root.child("newton");
    auto& x = c.newton;
    x.tol = s.get<double>("tol", x.tol);
    x.max_iter = s.get<int>("max_iter", x.max_iter);
    x.damping = s.get<double>("damping", x.damping);
    s.finish();
    require(x.tol > 0.0 && x.max_iter >= 1, "newton: tol > 0 and max_iter >= 1");
    require(x.damping > 0.0 && x.damping < 1.0, "newton.damping must lie in (0, 1)");
  }
  if (root.has("diagnostics")) {
    auto s = root.child("diagnostics");
    auto& x = c.diagnostics;
    x.reports = s.get<std::vector<std::string>>("reports", x.reports);
    for (const auto& r : x.reports)
      require(r == "solution_error" || r == "corrector_error" || r == "energy" ||
                  r == "local_gradient" || r == "pairing",
              "unknown diagnostics report '" + r + "'");
    x.rho = s.get<double>("rho", x.rho);
    require(x.rho >= 1.0, "diagnostics.rho must be >= 1");
    x.energy_bound = s.get<double>("energy_bound", x.energy_bound);
    x.local_bound = s.get<double>("local_bound", x.local_bound);
    x.clamp_fraction = s.get<double>("clamp_fraction", x.clamp_fraction);
    if (s.has("omega")) {
      auto o = s.child("omega");
      const int dim = c.problem.domain.dim;
      Box b;
      b.lo = read_point(o.required<std::vector<double>>("lo"), dim, o.where("lo"));
      b.hi = read_point(o.required<std::vector<double>>("hi"), dim, o.where("hi"));
      o.finish();
      x.omega = b;
    }
    s.finish();
  }
  c.validation_samples = root.get<int>("validation_samples", c.validation_samples);
  require(c.validation_samples >= 1, "validation_samples must be positive");
  root.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  nlohmann::json doc;
  try {
    doc = read_json(path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  try {
    return parse_config(doc, path.parent_path());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json canonical_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  const int dim = c.problem.domain.dim;
  auto point = [&](const Point& p) { return std::vector<double>(p.begin(), p.begin() + dim); };
  json u0;
  switch (c.problem.u0.kind) {
    case InitialProfile::Kind::barenblatt:
      u0 = {{"profile", "barenblatt"}, {"C", c.problem.u0.C}, {"t0", c.problem.u0.t0}};
      break;
    case InitialProfile::Kind::bump:
      u0 = {{"profile", "bump"},
            {"level", c.problem.u0.level},
            {"amplitude", c.problem.u0.amplitude},
            {"radius", c.problem.u0.radius}};
      break;
    case InitialProfile::Kind::constant_positive:
      u0 = {{"profile", "constant_positive"}, {"value", c.problem.u0.level}};
      break;
    case InitialProfile::Kind::csv:
      u0 = {{"profile", "csv"}, {"path", c.problem.u0.path.string()}};
      break;
  }
  j["problem"] = {{"m", c.problem.m},
                  {"r", c.problem.r},
                  {"t_start", c.problem.t_start},
                  {"T", c.problem.T},
                  {"positivity", positivity_name(c.problem.positivity)},
                  {"domain",
                   {{"dim", dim}, {"origin", point(c.problem.domain.origin)}, {"side", c.problem.domain.side}}},
                  {"u0", u0}};
  j["coefficient"] = {{"family", c.coefficient.family}, {"params", c.coefficient.params}};
  if (c.coefficient.family == "tabulated") {
    j["coefficient"]["csv"] = c.coefficient.csv.string();
    j["coefficient"]["sidecar"] = c.coefficient.sidecar.string();
  }
  const auto& d = c.discretization;
  j["discretization"] = {{"n", d.n},           {"n_cell", d.n_cell}, {"s_nodes", d.s_nodes},
                         {"s_steps", d.s_steps}, {"dt", d.dt},         {"stride", d.stride}};
  j["sweep"] = {{"eps", c.eps}};
  j["cell"] = {{"tol", c.cell.tol},
               {"periodic_tol", c.cell.periodic_tol},
               {"max_periods", c.cell.max_periods},
               {"theta_min", c.cell.theta_min},
               {"theta_max", c.cell.theta_max},
               {"theta_nodes", c.cell.theta_nodes}};
  j["newton"] = {{"tol", c.newton.tol}, {"max_iter", c.newton.max_iter}, {"damping", c.newton.damping}};
  json diag = {{"reports", c.diagnostics.reports},
               {"rho", c.diagnostics.rho},
               {"energy_bound", c.diagnostics.energy_bound},
               {"local_bound", c.diagnostics.local_bound},
               {"clamp_fraction", c.diagnostics.clamp_fraction}};
  if (c.diagnostics.omega)
    diag["omega"] = {{"lo", point(c.diagnostics.omega->lo)}, {"hi", point(c.diagnostics.omega->hi)}};
  j["diagnostics"] = diag;
  j["validation_samples"] = c.validation_samples;
  return j;
}

std::string config_hash(const ExperimentConfig& c) {
  return hex64(fnv1a(canonical_json(c).dump()));
}

}  // namespace pmhom::pipeline
