#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pmhom {

/// Whether the operator acts on the mean-free subspace (periodic stiffness).
enum class ConstraintTag { none, zero_mean };

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Square sparse matrix in CSR layout, immutable after construction.
class SparseOperator {
 public:
  SparseOperator() = default;

  /// Duplicate (row, col) entries are summed.
  static SparseOperator from_triplets(std::size_t n, std::vector<Triplet> triplets,
                                      ConstraintTag tag = ConstraintTag::none);
  static SparseOperator identity(std::size_t n);

  std::size_t size() const { return n_; }
  std::size_t nonzeros() const { return values_.size(); }
  ConstraintTag constraint() const { return tag_; }

  void apply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> apply(std::span<const double> x) const;
  double quadratic_form(std::span<const double> x) const;

  double entry(std::size_t row, std::size_t col) const;
  std::vector<double> diagonal() const;
  /// max |a_ij - a_ji| relative to max |a_ij|.
  double symmetry_defect() const;

  /// Returns a * this + diag(d), keeping the sparsity pattern and tag `tag`.
  SparseOperator scaled_plus_diagonal(double a, std::span<const double> d,
                                      ConstraintTag tag) const;

  std::span<const std::size_t> row_offsets() const { return row_ptr_; }
  std::span<const std::size_t> columns() const { return cols_; }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t n_ = 0;
  ConstraintTag tag_ = ConstraintTag::none;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> cols_;
  std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
/// Subtracts the arithmetic mean in place.
void project_zero_mean(std::span<double> x);

}  // namespace pmhom
