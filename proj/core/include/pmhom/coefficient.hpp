#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmhom/grid.hpp"

namespace pmhom {

enum class CoefficientFamily { constant, layered_sin, separable_sin, checkerboard_smoothed, tabulated };

std::string_view family_name(CoefficientFamily family);

/// Raw coefficient samples on the periodic lattice y_i = i / n_y, s_l = l / n_s.
/// Samples may be asymmetric; the coefficient built from them uses (a + a^T) / 2.
struct TabulatedCoefficient {
  int dim = 1;
  std::array<int, kMaxDim> y_points{1, 1};
  int s_points = 1;
  /// Indexed ((l * y_points[1]) + j) * y_points[0] + i.
  std::vector<Tensor> samples;

  std::size_t index(int i, int j, int l) const {
    return (static_cast<std::size_t>(l) * y_points[1] + j) * y_points[0] + i;
  }
};

/// Reads a tabulated coefficient. The CSV header is `y1[,y2],s,a11[,a12[,a21],a22]`; the
/// JSON sidecar declares {"dim", "y_points": [...], "s_points"}.
TabulatedCoefficient load_tabulated(const std::filesystem::path& csv,
                                    const std::filesystem::path& sidecar);
void save_tabulated(const TabulatedCoefficient& table, const std::filesystem::path& csv,
                    const std::filesystem::path& sidecar);

/// 1-periodic symmetric coefficient a(y, s), normalized so the largest eigenvalue over
/// (y, s) equals 1. `ellipticity()` is the certified lower eigenvalue bound after the
/// normalization and `amplitude()` the factor that was divided out.
class CoefficientField {
 public:
  int dim() const { return dim_; }
  CoefficientFamily family() const { return family_; }
  const std::vector<double>& params() const { return params_; }
  double ellipticity() const { return lambda_; }
  double amplitude() const { return amplitude_; }
  bool time_independent() const;

  /// Symmetric, normalized value at cell coordinates (y, s); wraps periodically.
  Tensor operator()(const Point& y, double s) const;
  /// Symmetric value in the original units (no normalization round trip).
  Tensor unscaled(const Point& y, double s) const {
    return evaluate_raw_unscaled(y, s).symmetrized();
  }
  /// Normalized value before symmetrization (differs from operator() only for tables).
  Tensor raw(const Point& y, double s) const;

  const TabulatedCoefficient* table() const { return table_.get(); }

 private:
  friend CoefficientField make_coefficient(std::string_view, std::span<const double>, int);
  friend CoefficientField make_tabulated(TabulatedCoefficient);
  Tensor evaluate_raw_unscaled(const Point& y, double s) const;

  int dim_ = 1;
  CoefficientFamily family_ = CoefficientFamily::constant;
  std::vector<double> params_;
  double lambda_ = 1.0;
  double amplitude_ = 1.0;
  std::shared_ptr<const TabulatedCoefficient> table_;
};

/// Built-in families and their parameters:
///   constant               dim 1: [a]; dim 2: [a11, a12, a22]
///   layered_sin            [A, B, axis]     (A + B sin 2 pi y_axis) I
///   separable_sin          [A, B, C]        (A + B sin 2 pi y_1 cos 2 pi C s) I, C integer
///   checkerboard_smoothed  [contrast]       exp(ln(contrast)/2 tanh(8 g)/tanh 8) I,
///                                           g = sin 2 pi y_1 [sin 2 pi y_2]
/// Throws InvalidArgument for unknown families or arity, ValidationError("H3") when the
/// minimum eigenvalue is not positive.
CoefficientField make_coefficient(std::string_view family, std::span<const double> params,
                                  int dim);
CoefficientField make_tabulated(TabulatedCoefficient table);

struct SampleLocation {
  Point y{};
  double s = 0.0;
};

struct ValidationReport {
  int samples = 0;
  bool symmetric = true;          // H2, symmetry
  bool periodic = true;           // H2, periodicity
  bool elliptic = true;           // H3
  bool time_regular = true;       // H4 proxy
  double worst_symmetry_defect = 0.0;
  std::optional<SampleLocation> worst_symmetry_at;
  double worst_periodicity_defect = 0.0;
  double eig_min = 0.0;
  double eig_max = 0.0;
  double certified_lambda = 0.0;
  double total_variation = 0.0;   // sum over an s-grid of max_y |a(y,s_{i+1}) - a(y,s_i)|

  bool all_pass() const { return symmetric && periodic && elliptic && time_regular; }
};

/// Samples (y, s) uniformly with a seeded generator and checks H2-H4. Failures are report
/// entries, never exceptions.
ValidationReport validate_coefficient(const CoefficientField& field, int n_samples,
                                      std::uint64_t seed);

/// Cell coordinates (frac(x / eps), frac(t / eps^r)).
std::pair<Point, double> oscillating_arguments(const Point& x, double t, double eps, double r,
                                               int dim);
/// a(x / eps, t / eps^r). Throws InvalidArgument for eps <= 0 or r <= 0.
Tensor sample_oscillating(const CoefficientField& field, const Point& x, double t, double eps,
                          double r);

}  // namespace pmhom
