#include "mcar/sparse.hpp"

#include "mcar/error.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace mcar {

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string &text) {
  std::istringstream is(text);
  is >> engine_;
  if (!is)
    throw ValidationError("rng: malformed engine state");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

SparseSymMatrix SparseSymMatrix::from_triplets(int n, const std::vector<Triplet> &entries) {
  if (n <= 0)
    throw ValidationError("sparse matrix: dimension must be positive");
  std::vector<Triplet> upper;
  upper.reserve(entries.size());
  for (const auto &t : entries) {
    if (t.row() < 0 || t.col() < 0 || t.row() >= n || t.col() >= n)
      throw DimensionMismatch("sparse matrix: entry out of range");
    if (t.row() <= t.col())
      upper.push_back(t);
    else
      upper.emplace_back(t.col(), t.row(), t.value());
  }
  SparseSymMatrix m;
  m.upper_.resize(n, n);
  m.upper_.setFromTriplets(upper.begin(), upper.end());
  m.upper_.makeCompressed();
  SparseColMatrix full = m.upper_.selfadjointView<Eigen::Upper>();
  m.full_ = full;
  m.full_.makeCompressed();
  return m;
}

SparseSymMatrix SparseSymMatrix::from_dense(const Matrix &dense, double drop) {
  if (dense.rows() != dense.cols())
    throw DimensionMismatch("sparse matrix: dense input not square");
  if (dense != dense.transpose())
    throw ValidationError("sparse matrix: dense input not symmetric");
  std::vector<Triplet> t;
  const int n = static_cast<int>(dense.rows());
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i)
      if (i == j || std::abs(dense(i, j)) > drop)
        t.emplace_back(i, j, dense(i, j));
  return from_triplets(n, t);
}

double SparseSymMatrix::coeff(int i, int j) const {
  if (i > j)
    std::swap(i, j);
  return upper_.coeff(i, j);
}

Vector SparseSymMatrix::diagonal() const { return upper_.diagonal(); }

double SparseSymMatrix::max_abs() const {
  double m = 0.0;
  for (int k = 0; k < upper_.outerSize(); ++k)
    for (SparseColMatrix::InnerIterator it(upper_, k); it; ++it)
      m = std::max(m, std::abs(it.value()));
  return m;
}

Matrix SparseSymMatrix::to_dense() const { return Matrix(full_); }

Vector SparseSymMatrix::multiply(const Vector &x) const {
  if (x.size() != dim())
    throw DimensionMismatch("multiply: length mismatch");
  return full_ * x;
}

double quad_form(const SparseSymMatrix &q, const Vector &x, const Vector &y) {
  if (x.size() != q.dim() || y.size() != q.dim())
    throw DimensionMismatch("quad_form: length mismatch");
  const auto &u = q.upper();
  double s = 0.0;
  for (int j = 0; j < u.outerSize(); ++j)
    for (SparseColMatrix::InnerIterator it(u, j); it; ++it) {
      const int i = it.row();
      if (i == j)
        s += it.value() * x[i] * y[i];
      else
        s += it.value() * (x[i] * y[j] + x[j] * y[i]);
    }
  return s;
}

void write_coordinate(std::ostream &out, const SparseSymMatrix &q) {
  const auto &u = q.upper();
  out << std::setprecision(17);
  for (int j = 0; j < u.outerSize(); ++j)
    for (SparseColMatrix::InnerIterator it(u, j); it; ++it)
      out << it.row() + 1 << " " << j + 1 << " " << it.value() << "\n";
}

struct CholeskyFactor::Impl {
  Eigen::SimplicialLLT<SparseColMatrix, Eigen::Upper, Eigen::AMDOrdering<int>> llt;
  std::vector<int> outer, inner;
};

CholeskyFactor::CholeskyFactor() : impl_(std::make_unique<Impl>()) {}
CholeskyFactor::~CholeskyFactor() = default;
CholeskyFactor::CholeskyFactor(CholeskyFactor &&) noexcept = default;
CholeskyFactor &CholeskyFactor::operator=(CholeskyFactor &&) noexcept = default;

void CholeskyFactor::refactor(const SparseSymMatrix &q) {
  const auto &u = q.upper();
  const int n = q.dim();
  const bool same_pattern =
      analyses_ > 0 && dim_ == n &&
      impl_->inner.size() == static_cast<std::size_t>(u.nonZeros()) &&
      std::equal(impl_->outer.begin(), impl_->outer.end(), u.outerIndexPtr()) &&
      std::equal(impl_->inner.begin(), impl_->inner.end(), u.innerIndexPtr());
  valid_ = false;
  if (!same_pattern) {
    impl_->llt.analyzePattern(u);
    impl_->outer.assign(u.outerIndexPtr(), u.outerIndexPtr() + n + 1);
    impl_->inner.assign(u.innerIndexPtr(), u.innerIndexPtr() + u.nonZeros());
    dim_ = n;
    ++analyses_;
  }
  impl_->llt.factorize(u);
  if (impl_->llt.info() != Eigen::Success)
    throw NotPositiveDefinite("cholesky: non-positive pivot");
  const double max_diag = q.diagonal().cwiseAbs().maxCoeff();
  const double min_pivot = impl_->llt.matrixL().nestedExpression().diagonal().cwiseAbs2().minCoeff();
  if (!(min_pivot > pivot_tol * max_diag))
    throw NotPositiveDefinite("cholesky: pivot below tolerance");
  valid_ = true;
}

double CholeskyFactor::log_det() const {
  if (!valid_)
    throw NumericalError("log_det: invalid factor");
  const auto &l = impl_->llt.matrixL().nestedExpression();
  return 2.0 * l.diagonal().array().log().sum();
}

Vector CholeskyFactor::solve(const Vector &rhs) const {
  if (!valid_)
    throw NumericalError("solve: invalid factor");
  if (rhs.size() != dim_)
    throw DimensionMismatch("solve: length mismatch");
  return impl_->llt.solve(rhs);
}

Vector CholeskyFactor::sample(const Vector &z) const {
  if (!valid_)
    throw NumericalError("sample: invalid factor");
  if (z.size() != dim_)
    throw DimensionMismatch("sample: length mismatch");
  Vector y = impl_->llt.matrixU().solve(z);
  return impl_->llt.permutationPinv() * y;
}

Vector CholeskyFactor::sample(Rng &rng) const {
  Vector z(dim_);
  for (int k = 0; k < dim_; ++k)
    z[k] = rng.normal();
  return sample(z);
}

Matrix CholeskyFactor::lower_dense() const {
  return Matrix(impl_->llt.matrixL());
}

std::vector<int> CholeskyFactor::permutation() const {
  const auto &idx = impl_->llt.permutationPinv().indices();
  return std::vector<int>(idx.data(), idx.data() + idx.size());
}

Matrix CholeskyFactor::reconstruct() const {
  Matrix l = lower_dense();
  Matrix llt = l * l.transpose();
  const auto perm = permutation();
  Matrix out(dim_, dim_);
  for (int a = 0; a < dim_; ++a)
    for (int b = 0; b < dim_; ++b)
      out(perm[a], perm[b]) = llt(a, b);
  return out;
}

CholeskyFactor cholesky(const SparseSymMatrix &q) {
  CholeskyFactor f;
  f.refactor(q);
  return f;
}

double log_det(const CholeskyFactor &f) { return f.log_det(); }
Vector solve(const CholeskyFactor &f, const Vector &rhs) { return f.solve(rhs); }
Vector sample_gaussian_precision(const CholeskyFactor &f, Rng &rng) { return f.sample(rng); }

bool is_positive_definite(const Matrix &m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    return false;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    return false;
  const double max_diag = m.diagonal().cwiseAbs().maxCoeff();
  return llt.matrixLLT().diagonal().cwiseAbs2().minCoeff() > CholeskyFactor::pivot_tol * max_diag;
}

double dense_log_det_pd(const Matrix &m) {
  if (!is_positive_definite(m))
    throw NotPositiveDefinite("dense matrix not positive definite");
  Eigen::LLT<Matrix> llt(m);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

} // namespace mcar
