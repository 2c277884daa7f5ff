#include "mcar/kernels.hpp"

#include "mcar/error.hpp"

#include <omp.h>

namespace mcar::kernels {

int max_threads() { return omp_get_max_threads(); }

Vector matvec(const SparseRowMatrix &a, const Vector &x, Exec exec) {
  if (a.cols() != x.size())
    throw DimensionMismatch("matvec: length mismatch");
  const long n = a.rows();
  Vector y(n);
  const int *outer = a.outerIndexPtr();
  const int *inner = a.innerIndexPtr();
  const double *val = a.valuePtr();
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (long r = 0; r < n; ++r) {
    double s = 0.0;
    for (int k = outer[r]; k < outer[r + 1]; ++k)
      s += val[k] * x[inner[k]];
    y[r] = s;
  }
  return y;
}

Matrix collapse_blocks(const SparseRowMatrix &a, int block, Exec exec) {
  if (block <= 0 || a.rows() != a.cols() || a.rows() % block != 0)
    throw DimensionMismatch("collapse_blocks: dimension not a multiple of block");
  const int nb = static_cast<int>(a.rows() / block);
  Matrix h = Matrix::Zero(nb, nb);
  const int *outer = a.outerIndexPtr();
  const int *inner = a.innerIndexPtr();
  const double *val = a.valuePtr();
  // One block-row of H per iteration; each row is accumulated in order.
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (int bj = 0; bj < nb; ++bj)
    for (int r = bj * block; r < (bj + 1) * block; ++r)
      for (int k = outer[r]; k < outer[r + 1]; ++k)
        h(bj, inner[k] / block) += val[k];
  return h;
}

Vector collapse_vector(const Vector &x, int block) {
  if (block <= 0 || x.size() % block != 0)
    throw DimensionMismatch("collapse_vector: length not a multiple of block");
  const long nb = x.size() / block;
  Vector out(nb);
  for (long b = 0; b < nb; ++b)
    out[b] = x.segment(b * block, block).sum();
  return out;
}

Matrix congruence(const SparseRowMatrix &q, const Matrix &u, Exec exec) {
  if (q.rows() != q.cols() || q.cols() != u.rows())
    throw DimensionMismatch("congruence: dimension mismatch");
  const long n = u.rows();
  const long k = u.cols();
  Matrix qu(n, k);
  const int *outer = q.outerIndexPtr();
  const int *inner = q.innerIndexPtr();
  const double *val = q.valuePtr();
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (long r = 0; r < n; ++r)
    for (long c = 0; c < k; ++c) {
      double s = 0.0;
      for (int e = outer[r]; e < outer[r + 1]; ++e)
        s += val[e] * u(inner[e], c);
      qu(r, c) = s;
    }
  Matrix out(k, k);
  const long pairs = k * k;
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (long p = 0; p < pairs; ++p) {
    const long a = p / k, b = p % k;
    double s = 0.0;
    for (long r = 0; r < n; ++r)
      s += u(r, a) * qu(r, b);
    out(a, b) = s;
  }
  // Exact symmetry regardless of rounding in the two triangles.
  for (long a = 0; a < k; ++a)
    for (long b = a + 1; b < k; ++b)
      out(b, a) = out(a, b);
  return out;
}

Matrix outer_congruence(const Matrix &u, const Matrix &w, Exec exec) {
  if (w.rows() != w.cols() || w.rows() != u.cols())
    throw DimensionMismatch("outer_congruence: dimension mismatch");
  const long n = u.rows();
  const long k = u.cols();
  Matrix uw(n, k);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (long r = 0; r < n; ++r)
    for (long c = 0; c < k; ++c) {
      double s = 0.0;
      for (long e = 0; e < k; ++e)
        s += u(r, e) * w(e, c);
      uw(r, c) = s;
    }
  Matrix out(n, n);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (long a = 0; a < n; ++a)
    for (long b = a; b < n; ++b) {
      double s = 0.0;
      for (long c = 0; c < k; ++c)
        s += uw(a, c) * u(b, c);
      out(a, b) = s;
      out(b, a) = s;
    }
  return out;
}

} // namespace mcar::kernels
