#pragma once

// Data-parallel inner loops of the sampler. Each kernel has an OpenMP path
// and a serial reference path; the two produce bit-identical results because
// every reduction runs over a fixed partition and is combined in order.

#include "mcar/sparse.hpp"

#include <cstddef>
#include <vector>

namespace mcar::kernels {

enum class Exec { serial, parallel };

// Partition size for ordered reductions; independent of the thread count.
inline constexpr std::size_t reduction_chunk = 256;

Vector matvec(const SparseRowMatrix &a, const Vector &x, Exec exec = Exec::parallel);

// H(j, j') = 1' A_{jj'} 1 over a J x J grid of block x block blocks.
Matrix collapse_blocks(const SparseRowMatrix &a, int block, Exec exec = Exec::parallel);

// Sums of consecutive length-`block` segments.
Vector collapse_vector(const Vector &x, int block);

// U' Q U for sparse n x n Q and dense n x k U.
Matrix congruence(const SparseRowMatrix &q, const Matrix &u, Exec exec = Exec::parallel);

// U W U' for dense n x k U and dense k x k W.
Matrix outer_congruence(const Matrix &u, const Matrix &w, Exec exec = Exec::parallel);

// Sum of f(0..n-1) with a fixed chunked order.
template <class F> double ordered_sum(std::size_t n, F &&f, Exec exec = Exec::parallel) {
  const std::size_t chunks = (n + reduction_chunk - 1) / reduction_chunk;
  std::vector<double> partial(chunks, 0.0);
  const long nc = static_cast<long>(chunks);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel && nc > 1)
  for (long c = 0; c < nc; ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * reduction_chunk;
    const std::size_t hi = lo + reduction_chunk < n ? lo + reduction_chunk : n;
    double s = 0.0;
    for (std::size_t k = lo; k < hi; ++k)
      s += f(k);
    partial[static_cast<std::size_t>(c)] = s;
  }
  double total = 0.0;
  for (double p : partial)
    total += p;
  return total;
}

int max_threads();

} // namespace mcar::kernels
