#include "pmhom/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pmhom/error.hpp"

namespace pmhom {

SparseOperator SparseOperator::from_triplets(std::size_t n, std::vector<Triplet> triplets,
                                             ConstraintTag tag) {
  for (const auto& t : triplets)
    if (t.row >= n || t.col >= n) throw InvalidArgument("SparseOperator: index out of range");
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseOperator op;
  op.n_ = n;
  op.tag_ = tag;
  op.row_ptr_.assign(n + 1, 0);
  op.cols_.reserve(triplets.size());
  op.values_.reserve(triplets.size());
  std::size_t i = 0;
  while (i < triplets.size()) {
    const std::size_t row = triplets[i].row;
    const std::size_t col = triplets[i].col;
    double sum = 0.0;
    for (; i < triplets.size() && triplets[i].row == row && triplets[i].col == col; ++i)
      sum += triplets[i].value;
    op.cols_.push_back(col);
    op.values_.push_back(sum);
    ++op.row_ptr_[row + 1];
  }
  std::partial_sum(op.row_ptr_.begin(), op.row_ptr_.end(), op.row_ptr_.begin());
  return op;
}

SparseOperator SparseOperator::identity(std::size_t n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, std::move(t));
}

void SparseOperator::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != n_ || y.size() != n_) throw InvalidArgument("SparseOperator::apply: size");
  for (std::size_t r = 0; r < n_; ++r) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[cols_[k]];
    y[r] = s;
  }
}

std::vector<double> SparseOperator::apply(std::span<const double> x) const {
  std::vector<double> y(n_);
  apply(x, y);
  return y;
}

double SparseOperator::quadratic_form(std::span<const double> x) const {
  const auto y = apply(x);
  return dot(x, y);
}

double SparseOperator::entry(std::size_t row, std::size_t col) const {
  const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
  const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
  const auto it = std::lower_bound(first, last, col);
  return (it != last && *it == col) ? values_[static_cast<std::size_t>(it - cols_.begin())]
                                    : 0.0;
}

std::vector<double> SparseOperator::diagonal() const {
  std::vector<double> d(n_);
  for (std::size_t i = 0; i < n_; ++i) d[i] = entry(i, i);
  return d;
}

double SparseOperator::symmetry_defect() const {
  double scale = 0.0;
  for (double v : values_) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double defect = 0.0;
  for (std::size_t r = 0; r < n_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      defect = std::max(defect, std::abs(values_[k] - entry(cols_[k], r)));
  return defect / scale;
}

SparseOperator SparseOperator::scaled_plus_diagonal(double a, std::span<const double> d,
                                                    ConstraintTag tag) const {
  if (d.size() != n_) throw InvalidArgument("scaled_plus_diagonal: size mismatch");
  SparseOperator out = *this;
  out.tag_ = tag;
  for (double& v : out.values_) v *= a;
  for (std::size_t r = 0; r < n_; ++r) {
    bool found = false;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      if (cols_[k] == r) {
        out.values_[k] += d[r];
        found = true;
      }
    if (!found) throw InvalidArgument("scaled_plus_diagonal: missing diagonal entry");
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

void project_zero_mean(std::span<double> x) {
  if (x.empty()) return;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  for (double& v : x) v -= mean;
}

}  // namespace pmhom
