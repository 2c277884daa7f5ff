#pragma once

#include "mcar/graph.hpp"
#include "mcar/precision.hpp"
#include "mcar/rng.hpp"
#include "mcar/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

namespace mcar::test {

inline double unif(Rng &rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

inline int unif_int(Rng &rng, int lo, int hi) {
  return std::min(hi, lo + static_cast<int>(rng.uniform() * (hi - lo + 1)));
}

// Erdos-Renyi graph.
inline AdjacencyGraph random_graph(int n, double p, Rng &rng) {
  std::vector<Edge> e;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (rng.uniform() < p)
        e.emplace_back(a, b);
  return AdjacencyGraph::from_edges(n, e);
}

// Random graph with no isolated vertex: a random spanning path plus extras.
inline AdjacencyGraph random_connected_graph(int n, double p, Rng &rng) {
  if (n == 1)
    return AdjacencyGraph(1);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    order[k] = k;
  for (int k = n - 1; k > 0; --k)
    std::swap(order[k], order[unif_int(rng, 0, k)]);
  std::vector<Edge> e;
  for (int k = 0; k + 1 < n; ++k)
    e.emplace_back(std::min(order[k], order[k + 1]), std::max(order[k], order[k + 1]));
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (rng.uniform() < p && std::find(e.begin(), e.end(), Edge(a, b)) == e.end())
        e.emplace_back(a, b);
  return AdjacencyGraph::from_edges(n, e);
}

inline Matrix dense_adjacency_matrix(const AdjacencyGraph &g) {
  const int n = g.n_vertices();
  const auto a = g.dense_adjacency();
  Matrix m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      m(r, c) = a[static_cast<std::size_t>(r) * n + c];
  return m;
}

// Kronecker product in the vec(U) layout: (A (x) B)[(j,i),(j',i')] = A(j,j') B(i,i').
inline Matrix kron(const Matrix &a, const Matrix &b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (long r = 0; r < a.rows(); ++r)
    for (long c = 0; c < a.cols(); ++c)
      k.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return k;
}

// Diagonally dominant PD matrix supported on I + C.
inline Matrix random_pd_on_pattern(const AdjacencyGraph &g, Rng &rng) {
  const int n = g.n_vertices();
  Matrix m = Matrix::Zero(n, n);
  for (auto [a, b] : g.edges())
    m(a, b) = m(b, a) = unif(rng, -1.0, 1.0);
  for (int a = 0; a < n; ++a)
    m(a, a) = m.row(a).cwiseAbs().sum() + unif(rng, 0.5, 1.5);
  return m;
}

inline ModelParams random_params(int model, const ModelGraphs &g, Rng &rng, double bound = 0.95) {
  const int J = g.n_responses();
  if (model == 1) {
    Model1Params p;
    p.delta.resize(J);
    p.lambda.resize(J);
    for (int j = 0; j < J; ++j) {
      p.delta[j] = unif(rng, 0.3, 3.0);
      p.lambda[j] = unif(rng, -bound, bound);
    }
    for (std::size_t e = 0; e < g.response.n_edges(); ++e) {
      p.psi.push_back(unif(rng, -bound, bound));
      p.phi.push_back(unif(rng, -bound, bound));
    }
    return p;
  }
  if (model == 2)
    return Model2Params{unif(rng, -bound, bound), random_pd_on_pattern(g.response, rng)};
  Model3Params p;
  p.omega_r = random_pd_on_pattern(g.response, rng);
  p.omega_r /= p.omega_r(0, 0);
  p.omega_r(0, 0) = 1.0;
  p.omega_s = random_pd_on_pattern(g.spatial, rng);
  p.z = unif(rng, 0.5, 2.0);
  return p;
}

// Closed-form joint precision built densely from the Kronecker displays.
inline Matrix dense_closed_form(const ModelParams &params, const ModelGraphs &g) {
  const int I = g.n_units(), J = g.n_responses();
  const Matrix cs = dense_adjacency_matrix(g.spatial);
  const Matrix cr = dense_adjacency_matrix(g.response);
  const Matrix ii = Matrix::Identity(I, I);
  if (const auto *p = std::get_if<Model1Params>(&params)) {
    Matrix d = Matrix::Zero(I * J, I * J);
    for (int j = 0; j < J; ++j)
      for (int i = 0; i < I; ++i)
        d(j * I + i, j * I + i) = g.response.degree(j) * g.spatial.degree(i) + g.response.degree(j) +
                                  g.spatial.degree(i);
    Matrix psi = Matrix::Zero(J, J), phi = Matrix::Zero(J, J);
    const auto edges = g.response.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
      auto [a, b] = edges[e];
      psi(a, b) = psi(b, a) = p->psi[e];
      phi(a, b) = phi(b, a) = p->phi[e];
    }
    const Matrix m = d - kron(Matrix(p->lambda.asDiagonal()), cs) - kron(psi.cwiseProduct(cr), ii) -
                     kron(phi.cwiseProduct(cr), cs);
    const Vector s = p->delta.cwiseSqrt().cwiseInverse();
    const Matrix sk = kron(Matrix(s.asDiagonal()), ii);
    return sk * m * sk;
  }
  if (const auto *p = std::get_if<Model2Params>(&params)) {
    Matrix ds = Matrix::Zero(I, I);
    for (int i = 0; i < I; ++i)
      ds(i, i) = g.spatial.degree(i);
    return kron(p->omega, ds - p->rho * cs);
  }
  const auto &p = std::get<Model3Params>(params);
  return kron(p.omega_r, p.omega_s);
}

inline double max_abs_diff(const Matrix &a, const Matrix &b) { return (a - b).cwiseAbs().maxCoeff(); }

inline std::filesystem::path scratch_dir(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("mcar_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

} // namespace mcar::test
