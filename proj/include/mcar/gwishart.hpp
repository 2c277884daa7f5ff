#pragma once

#include "mcar/graph.hpp"
#include "mcar/rng.hpp"
#include "mcar/sparse.hpp"

namespace mcar {

// GWis(b, V) on the cone of PD matrices with zeros off I + C(graph).
// Density kernel |W|^{(b-2)/2} exp(-tr(V W)/2).
struct GWishartParams {
  double b = 3.0;
  Matrix scale;
  AdjacencyGraph graph;

  // Throws ValidationError unless b > 2, V is PD, and dimensions agree.
  void validate() const;
};

// ((b-2)/2) log|W| - tr(V W)/2, without the normalizing constant.
// Throws OffPatternEntry or NotPositiveDefinite.
double gwishart_logdensity_unnorm(const Matrix &omega, const GWishartParams &p);

// Bartlett construction; E[W] = df * scale. Requires df > dim - 1.
Matrix wishart_sample(double df, const Matrix &scale, Rng &rng);

// Block Gibbs over maximal cliques in the listed order: each clique block is
// redrawn from its Wishart full conditional (Schur-complement correction from
// the rest of the matrix). The running inverse is maintained with low-rank
// updates. Returns the state after `sweeps` full scans.
Matrix gwishart_sample(const GWishartParams &p, const CliqueSet &cliques, const Matrix &state,
                       int sweeps, Rng &rng);

// Same chain, recomputing each Schur complement from a fresh factorization of
// the complement block. Reference path for tests; consumes the random stream
// identically to gwishart_sample.
Matrix gwishart_sample_reference(const GWishartParams &p, const CliqueSet &cliques,
                                 const Matrix &state, int sweeps, Rng &rng);

// Conjugate update: GWis(b + n, V + S) on the same graph.
GWishartParams gwishart_posterior(const GWishartParams &prior, const Matrix &scatter, int n);

// Identity restricted to the pattern; a valid initial state for any graph.
Matrix gwishart_initial_state(const AdjacencyGraph &g);

} // namespace mcar
