// Serial reference kernels against the OpenMP versions on grid-sized inputs.

#include "mcar/graph.hpp"
#include "mcar/kernels.hpp"
#include "mcar/precision.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

namespace {

using mcar::kernels::Exec;

mcar::SparseSymMatrix grid_precision(int side) {
  return mcar::car_precision(mcar::grid_graph(side, side), 0.9);
}

mcar::Matrix field(long rows, long cols) {
  mcar::Matrix u(rows, cols);
  for (long c = 0; c < cols; ++c)
    for (long r = 0; r < rows; ++r)
      u(r, c) = std::sin(0.37 * static_cast<double>(r) + 1.3 * static_cast<double>(c));
  return u;
}

Exec exec_of(const benchmark::State &state) { return state.range(1) ? Exec::parallel : Exec::serial; }

void BM_matvec(benchmark::State &state) {
  const auto q = grid_precision(static_cast<int>(state.range(0)));
  const mcar::Vector x = field(q.dim(), 1).col(0);
  for (auto _ : state)
    benchmark::DoNotOptimize(mcar::kernels::matvec(q.full(), x, exec_of(state)));
}

void BM_congruence(benchmark::State &state) {
  const auto q = grid_precision(static_cast<int>(state.range(0)));
  const mcar::Matrix u = field(q.dim(), 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(mcar::kernels::congruence(q.full(), u, exec_of(state)));
}

void BM_collapse_blocks(benchmark::State &state) {
  const int side = static_cast<int>(state.range(0));
  const auto q = grid_precision(side);
  for (auto _ : state)
    benchmark::DoNotOptimize(mcar::kernels::collapse_blocks(q.full(), side, exec_of(state)));
}

void BM_ordered_sum(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0)) * static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(mcar::kernels::ordered_sum(
        n, [](std::size_t k) { return std::log1p(static_cast<double>(k)); }, exec_of(state)));
}

void sizes(benchmark::internal::Benchmark *b) {
  for (int side : {32, 128, 512})
    for (int parallel : {0, 1})
      b->Args({side, parallel});
  b->ArgNames({"side", "parallel"});
}

BENCHMARK(BM_matvec)->Apply(sizes);
BENCHMARK(BM_congruence)->Apply(sizes);
BENCHMARK(BM_collapse_blocks)->Apply(sizes);
BENCHMARK(BM_ordered_sum)->Apply(sizes);

} // namespace

BENCHMARK_MAIN();
