#include "pmhom/coefficient.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pmhom/error.hpp"
#include "pmhom/io.hpp"

namespace pmhom {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kCheckerSharpness = 8.0;

double frac(double v) { return v - std::floor(v); }

void require_arity(std::string_view family, std::span<const double> params, std::size_t n) {
  if (params.size() != n) {
    std::ostringstream msg;
    msg << "make_coefficient: family '" << family << "' takes " << n << " parameters, got "
        << params.size();
    throw InvalidArgument(msg.str());
  }
}

[[noreturn]] void h3_violation(std::string_view family, double min_eig) {
  std::ostringstream msg;
  msg << "family '" << family << "' has minimum eigenvalue " << min_eig
      << " <= 0; uniform ellipticity requires a positive lower bound";
  throw ValidationError("H3", msg.str());
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  return out;
}

}  // namespace

std::string_view family_name(CoefficientFamily family) {
  switch (family) {
    case CoefficientFamily::constant: return "constant";
    case CoefficientFamily::layered_sin: return "layered_sin";
    case CoefficientFamily::separable_sin: return "separable_sin";
    case CoefficientFamily::checkerboard_smoothed: return "checkerboard_smoothed";
    case CoefficientFamily::tabulated: return "tabulated";
  }
  return "unknown";
}

CoefficientField make_coefficient(std::string_view family, std::span<const double> params,
                                  int dim) {
  if (dim < 1 || dim > kMaxDim)
    throw InvalidArgument("make_coefficient: unsupported dimension " + std::to_string(dim));
  for (double p : params)
    if (!std::isfinite(p)) throw InvalidArgument("make_coefficient: non-finite parameter");
  CoefficientField f;
  f.dim_ = dim;
  f.params_.assign(params.begin(), params.end());
  double min_eig = 0.0, max_eig = 0.0;

  if (family == "constant") {
    f.family_ = CoefficientFamily::constant;
    require_arity(family, params, dim == 1 ? 1 : 3);
    const Tensor a = dim == 1 ? Tensor::diagonal(params[0], 0.0)
                              : Tensor::symmetric(params[0], params[1], params[2]);
    const auto range = eigen_range(a, dim);
    min_eig = range.min;
    max_eig = range.max;
  } else if (family == "layered_sin") {
    f.family_ = CoefficientFamily::layered_sin;
    require_arity(family, params, 3);
    const double axis = params[2];
    if (axis != std::round(axis) || axis < 1 || axis > dim)
      throw InvalidArgument("make_coefficient: layered_sin axis must be in 1.." +
                            std::to_string(dim));
    min_eig = params[0] - std::abs(params[1]);
    max_eig = params[0] + std::abs(params[1]);
  } else if (family == "separable_sin") {
    f.family_ = CoefficientFamily::separable_sin;
    require_arity(family, params, 3);
    if (params[2] != std::round(params[2]) || params[2] < 0)
      throw InvalidArgument(
          "make_coefficient: separable_sin temporal frequency C must be a nonnegative integer");
    min_eig = params[0] - std::abs(params[1]);
    max_eig = params[0] + std::abs(params[1]);
  } else if (family == "checkerboard_smoothed") {
    f.family_ = CoefficientFamily::checkerboard_smoothed;
    require_arity(family, params, 1);
    if (!(params[0] >= 1.0))
      throw InvalidArgument("make_coefficient: checkerboard contrast must be >= 1");
    min_eig = 1.0 / std::sqrt(params[0]);
    max_eig = std::sqrt(params[0]);
  } else if (family == "tabulated") {
    throw InvalidArgument("make_coefficient: tabulated coefficients are built from a table");
  } else {
    throw InvalidArgument("make_coefficient: unknown family '" + std::string(family) + "'");
  }
  if (!(min_eig > 0.0)) h3_violation(family, min_eig);
  f.amplitude_ = max_eig;
  f.lambda_ = min_eig / max_eig;
  return f;
}

CoefficientField make_tabulated(TabulatedCoefficient table) {
  if (table.dim < 1 || table.dim > kMaxDim)
    throw InvalidArgument("tabulated coefficient: unsupported dimension");
  if (table.dim == 1) table.y_points[1] = 1;
  if (table.y_points[0] < 1 || table.y_points[1] < 1 || table.s_points < 1)
    throw InvalidArgument("tabulated coefficient: lattice sizes must be positive");
  const std::size_t expected =
      static_cast<std::size_t>(table.y_points[0]) * table.y_points[1] * table.s_points;
  if (table.samples.size() != expected)
    throw InvalidArgument("tabulated coefficient: expected " + std::to_string(expected) +
                          " samples, got " + std::to_string(table.samples.size()));
  double min_eig = std::numeric_limits<double>::infinity();
  double max_eig = -min_eig;
  for (const auto& a : table.samples) {
    const auto r = eigen_range(a.symmetrized(), table.dim);
    min_eig = std::min(min_eig, r.min);
    max_eig = std::max(max_eig, r.max);
  }
  if (!(min_eig > 0.0)) h3_violation("tabulated", min_eig);
  CoefficientField f;
  f.dim_ = table.dim;
  f.family_ = CoefficientFamily::tabulated;
  f.amplitude_ = max_eig;
  f.lambda_ = min_eig / max_eig;
  f.table_ = std::make_shared<const TabulatedCoefficient>(std::move(table));
  return f;
}

bool CoefficientField::time_independent() const {
  switch (family_) {
    case CoefficientFamily::separable_sin: return params_[2] == 0.0 || params_[1] == 0.0;
    case CoefficientFamily::tabulated: return table_->s_points == 1;
    default: return true;
  }
}

Tensor CoefficientField::evaluate_raw_unscaled(const Point& y, double s) const {
  switch (family_) {
    case CoefficientFamily::constant:
      return dim_ == 1 ? Tensor::diagonal(params_[0], 0.0)
                       : Tensor::symmetric(params_[0], params_[1], params_[2]);
    case CoefficientFamily::layered_sin: {
      const int axis = static_cast<int>(params_[2]) - 1;
      const double v = params_[0] + params_[1] * std::sin(kTwoPi * frac(y[axis]));
      return Tensor::identity(dim_).scaled(v);
    }
    case CoefficientFamily::separable_sin: {
      const double v = params_[0] + params_[1] * std::sin(kTwoPi * frac(y[0])) *
                                        std::cos(kTwoPi * frac(params_[2] * frac(s)));
      return Tensor::identity(dim_).scaled(v);
    }
    case CoefficientFamily::checkerboard_smoothed: {
      double g = std::sin(kTwoPi * frac(y[0]));
      if (dim_ == 2) g *= std::sin(kTwoPi * frac(y[1]));
      const double v = std::exp(0.5 * std::log(params_[0]) * std::tanh(kCheckerSharpness * g) /
                                std::tanh(kCheckerSharpness));
      return Tensor::identity(dim_).scaled(v);
    }
    case CoefficientFamily::tabulated: {
      const auto& t = *table_;
      const double sy0 = frac(y[0]) * t.y_points[0];
      const double sy1 = dim_ == 2 ? frac(y[1]) * t.y_points[1] : 0.0;
      const double ss = frac(s) * t.s_points;
      const int i0 = std::min(static_cast<int>(sy0), t.y_points[0] - 1);
      const int j0 = std::min(static_cast<int>(sy1), t.y_points[1] - 1);
      const int l0 = std::min(static_cast<int>(ss), t.s_points - 1);
      const double wx = sy0 - i0, wy = sy1 - j0, ws = ss - l0;
      Tensor acc;
      for (int dl = 0; dl < 2; ++dl)
        for (int dj = 0; dj < 2; ++dj)
          for (int di = 0; di < 2; ++di) {
            const double w = (di ? wx : 1 - wx) * (dj ? wy : 1 - wy) * (dl ? ws : 1 - ws);
            if (w == 0.0) continue;
            const int i = (i0 + di) % t.y_points[0];
            const int j = (j0 + dj) % t.y_points[1];
            const int l = (l0 + dl) % t.s_points;
            acc = acc + t.samples[t.index(i, j, l)].scaled(w);
          }
      return acc;
    }
  }
  return {};
}

Tensor CoefficientField::raw(const Point& y, double s) const {
  Tensor a = evaluate_raw_unscaled(y, s);
  for (auto& row : a.v)
    for (double& x : row) x /= amplitude_;
  return a;
}

Tensor CoefficientField::operator()(const Point& y, double s) const {
  return raw(y, s).symmetrized();
}

ValidationReport validate_coefficient(const CoefficientField& field, int n_samples,
                                      std::uint64_t seed) {
  ValidationReport rep;
  rep.samples = std::max(1, n_samples);
  rep.certified_lambda = field.ellipticity();
  rep.eig_min = std::numeric_limits<double>::infinity();
  rep.eig_max = -rep.eig_min;
  const int dim = field.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto record_symmetry = [&](const Tensor& raw, const Point& y, double s) {
    const double defect = raw.symmetry_defect(dim);
    if (defect > rep.worst_symmetry_defect) {
      rep.worst_symmetry_defect = defect;
      rep.worst_symmetry_at = SampleLocation{y, s};
    }
  };

  for (int k = 0; k < rep.samples; ++k) {
    const Point y{unit(rng), dim == 2 ? unit(rng) : 0.0};
    const double s = unit(rng);
    record_symmetry(field.raw(y, s), y, s);
    const Tensor a = field(y, s);
    const auto range = eigen_range(a, dim);
    rep.eig_min = std::min(rep.eig_min, range.min);
    rep.eig_max = std::max(rep.eig_max, range.max);
    // Quadratic form on a random direction, checked against the H3 sandwich.
    const Vec xi{2 * unit(rng) - 1, dim == 2 ? 2 * unit(rng) - 1 : 0.0};
    const double xx = xi[0] * xi[0] + xi[1] * xi[1];
    const Vec axi = a.apply(xi);
    const double form = xi[0] * axi[0] + xi[1] * axi[1];
    if (form < field.ellipticity() * xx - 1e-12 || form > xx + 1e-12) rep.elliptic = false;
    for (int j = 0; j < dim; ++j) {
      Point shifted = y;
      shifted[j] += 1.0;
      rep.worst_periodicity_defect =
          std::max(rep.worst_periodicity_defect, (field(shifted, s) - a).max_abs(dim));
    }
    rep.worst_periodicity_defect =
        std::max(rep.worst_periodicity_defect, (field(y, s + 1.0) - a).max_abs(dim));
  }
  if (const auto* table = field.table()) {
    for (int l = 0; l < table->s_points; ++l)
      for (int j = 0; j < table->y_points[1]; ++j)
        for (int i = 0; i < table->y_points[0]; ++i) {
          const Point y{static_cast<double>(i) / table->y_points[0],
                        dim == 2 ? static_cast<double>(j) / table->y_points[1] : 0.0};
          const double s = static_cast<double>(l) / table->s_points;
          record_symmetry(table->samples[table->index(i, j, l)].scaled(1.0 / field.amplitude()),
                          y, s);
        }
  }
  rep.symmetric = rep.worst_symmetry_defect <= 1e-12;
  rep.periodic = rep.worst_periodicity_defect <= 1e-12;
  rep.elliptic = rep.elliptic && rep.eig_min > 0.0 &&
                 rep.eig_min >= field.ellipticity() - 1e-12 && rep.eig_max <= 1.0 + 1e-12;

  constexpr int kSGrid = 64;
  const int ny = std::min(rep.samples, 64);
  std::vector<Point> ys(ny);
  for (auto& y : ys) y = {unit(rng), dim == 2 ? unit(rng) : 0.0};
  for (int i = 0; i < kSGrid; ++i) {
    const double s0 = static_cast<double>(i) / kSGrid;
    const double s1 = static_cast<double>(i + 1) / kSGrid;
    double jump = 0.0;
    for (const auto& y : ys) jump = std::max(jump, (field(y, s1) - field(y, s0)).max_abs(dim));
    rep.total_variation += jump;
  }
  rep.time_regular = std::isfinite(rep.total_variation);
  return rep;
}

std::pair<Point, double> oscillating_arguments(const Point& x, double t, double eps, double r,
                                               int dim) {
  if (!(eps > 0.0)) throw InvalidArgument("sample_oscillating: eps must be positive");
  if (!(r > 0.0)) throw InvalidArgument("sample_oscillating: r must be positive");
  Point y{0.0, 0.0};
  for (int d = 0; d < dim; ++d) y[d] = frac(x[d] / eps);
  return {y, frac(t / std::pow(eps, r))};
}

Tensor sample_oscillating(const CoefficientField& field, const Point& x, double t, double eps,
                          double r) {
  const auto [y, s] = oscillating_arguments(x, t, eps, r, field.dim());
  return field(y, s);
}

TabulatedCoefficient load_tabulated(const std::filesystem::path& csv,
                                    const std::filesystem::path& sidecar) {
  const auto meta = read_json(sidecar);
  TabulatedCoefficient t;
  try {
    t.dim = meta.at("dim").get<int>();
    const auto yp = meta.at("y_points").get<std::vector<int>>();
    if (static_cast<int>(yp.size()) != t.dim)
      throw InvalidArgument("tabulated sidecar: y_points must have dim entries");
    t.y_points = {yp[0], t.dim == 2 ? yp[1] : 1};
    t.s_points = meta.at("s_points").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("tabulated sidecar " + sidecar.string() + ": " + e.what());
  }
  if (t.dim < 1 || t.dim > 2 || t.y_points[0] < 1 || t.y_points[1] < 1 || t.s_points < 1)
    throw InvalidArgument("tabulated sidecar: invalid lattice sizes");

  std::ifstream in(csv);
  if (!in) throw InvalidArgument("cannot open " + csv.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  std::vector<std::string> expected_sym = t.dim == 1
      ? std::vector<std::string>{"y1", "s", "a11"}
      : std::vector<std::string>{"y1", "y2", "s", "a11", "a12", "a22"};
  std::vector<std::string> expected_full{"y1", "y2", "s", "a11", "a12", "a21", "a22"};
  const bool full = t.dim == 2 && header == expected_full;
  if (header != expected_sym && !full)
    throw InvalidArgument("tabulated csv " + csv.string() + ": unexpected header '" + line + "'");

  const std::size_t count =
      static_cast<std::size_t>(t.y_points[0]) * t.y_points[1] * t.s_points;
  t.samples.assign(count, Tensor{});
  std::vector<char> seen(count, 0);
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw InvalidArgument("tabulated csv row " + std::to_string(row) + ": wrong column count");
    std::vector<double> v;
    for (const auto& c : cells) v.push_back(parse_double(c));
    const int ncoord = t.dim + 1;
    auto lattice = [&](double coord, int n, const char* name) {
      const double k = coord * n;
      const double rk = std::round(k);
      if (std::abs(k - rk) > 1e-8 || rk < 0 || rk >= n)
        throw InvalidArgument("tabulated csv row " + std::to_string(row) + ": " + name +
                              " is not on the declared lattice");
      return static_cast<int>(rk);
    };
    const int i = lattice(v[0], t.y_points[0], "y1");
    const int j = t.dim == 2 ? lattice(v[1], t.y_points[1], "y2") : 0;
    const int l = lattice(v[t.dim], t.s_points, "s");
    Tensor a;
    if (t.dim == 1) {
      a = Tensor::diagonal(v[ncoord], 0.0);
    } else if (full) {
      a(0, 0) = v[ncoord];
      a(0, 1) = v[ncoord + 1];
      a(1, 0) = v[ncoord + 2];
      a(1, 1) = v[ncoord + 3];
    } else {
      a = Tensor::symmetric(v[ncoord], v[ncoord + 1], v[ncoord + 2]);
    }
    const auto idx = t.index(i, j, l);
    if (seen[idx]) throw InvalidArgument("tabulated csv: duplicate lattice node at row " +
                                         std::to_string(row));
    seen[idx] = 1;
    t.samples[idx] = a;
  }
  if (std::count(seen.begin(), seen.end(), 0) != 0)
    throw InvalidArgument("tabulated csv: lattice is incomplete");
  return t;
}

void save_tabulated(const TabulatedCoefficient& t, const std::filesystem::path& csv,
                    const std::filesystem::path& sidecar) {
  nlohmann::json meta;
  meta["dim"] = t.dim;
  meta["y_points"] = t.dim == 1 ? std::vector<int>{t.y_points[0]}
                                : std::vector<int>{t.y_points[0], t.y_points[1]};
  meta["s_points"] = t.s_points;
  write_json(sidecar, meta);
  CsvWriter out(csv);
  if (t.dim == 1)
    out.header({"y1", "s", "a11"});
  else
    out.header({"y1", "y2", "s", "a11", "a12", "a21", "a22"});
  for (int l = 0; l < t.s_points; ++l)
    for (int j = 0; j < t.y_points[1]; ++j)
      for (int i = 0; i < t.y_points[0]; ++i) {
        const Tensor& a = t.samples[t.index(i, j, l)];
        const double y1 = static_cast<double>(i) / t.y_points[0];
        const double s = static_cast<double>(l) / t.s_points;
        if (t.dim == 1)
          out.row({y1, s, a(0, 0)});
        else
          out.row({y1, static_cast<double>(j) / t.y_points[1], s, a(0, 0), a(0, 1), a(1, 0),
                   a(1, 1)});
      }
}

}  // namespace pmhom
