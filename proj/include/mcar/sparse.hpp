#pragma once

#include "mcar/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <iosfwd>
#include <memory>
#include <vector>

namespace mcar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

// Symmetric sparse matrix. The upper triangle (column-major) is the
// canonical store and feeds the factorization; a full row-major copy is kept
// for row access in the samplers. Explicit zeros are retained so the pattern
// of a model precision does not depend on parameter values.
class SparseSymMatrix {
public:
  SparseSymMatrix() = default;

  // Entries may come from either triangle; (i, j) and (j, i) address the
  // same entry and duplicates are summed.
  static SparseSymMatrix from_triplets(int n, const std::vector<Triplet> &entries);
  // Throws ValidationError if the input is not exactly symmetric. Entries with
  // |x| <= drop are omitted, except the diagonal.
  static SparseSymMatrix from_dense(const Matrix &dense, double drop = 0.0);

  int dim() const { return static_cast<int>(upper_.rows()); }
  const SparseColMatrix &upper() const { return upper_; }
  const SparseRowMatrix &full() const { return full_; }
  long nonzeros() const { return static_cast<long>(full_.nonZeros()); }

  double coeff(int i, int j) const;
  Vector diagonal() const;
  double max_abs() const;
  Matrix to_dense() const;
  Vector multiply(const Vector &x) const;

private:
  SparseColMatrix upper_;
  SparseRowMatrix full_;
};

// x' Q y summed over the stored entries.
double quad_form(const SparseSymMatrix &q, const Vector &x, const Vector &y);

// "row col value" per stored upper-triangle entry, 1-based, 17 digits.
void write_coordinate(std::ostream &out, const SparseSymMatrix &q);

// Sparse Cholesky P Q P' = L L' with an AMD fill-reducing permutation.
// A factor can be refactored with new values; when the pattern is unchanged
// the symbolic analysis is reused.
class CholeskyFactor {
public:
  CholeskyFactor();
  ~CholeskyFactor();
  CholeskyFactor(CholeskyFactor &&) noexcept;
  CholeskyFactor &operator=(CholeskyFactor &&) noexcept;

  // Pivot tolerance: a pivot L_kk^2 <= pivot_tol * max diag(Q) is a failure.
  static constexpr double pivot_tol = 1e-12;

  // Throws NotPositiveDefinite; the factor is then invalid until the next
  // successful refactor.
  void refactor(const SparseSymMatrix &q);
  bool valid() const { return valid_; }
  int dim() const { return dim_; }

  double log_det() const;
  Vector solve(const Vector &rhs) const;
  // Draw from N(0, Q^{-1}) given standard normal z: solve L' y = z, x = P' y.
  Vector sample(const Vector &z) const;
  Vector sample(Rng &rng) const;

  Matrix lower_dense() const;
  // perm[k] = row of Q placed at position k, so (P Q P')(a, b) = Q(perm[a], perm[b]).
  std::vector<int> permutation() const;
  // P' L L' P.
  Matrix reconstruct() const;

  // Number of times symbolic analysis ran (diagnostic for pattern caching).
  int analyses() const { return analyses_; }

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  bool valid_ = false;
  int dim_ = 0;
  int analyses_ = 0;
};

CholeskyFactor cholesky(const SparseSymMatrix &q);
double log_det(const CholeskyFactor &f);
Vector solve(const CholeskyFactor &f, const Vector &rhs);
Vector sample_gaussian_precision(const CholeskyFactor &f, Rng &rng);

// Dense helpers shared by the small J x J / I x I computations.
bool is_positive_definite(const Matrix &m);
double dense_log_det_pd(const Matrix &m); // throws NotPositiveDefinite

} // namespace mcar
