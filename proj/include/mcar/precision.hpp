#pragma once

#include "mcar/graph.hpp"
#include "mcar/sparse.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mcar {

// Spatial graph, response graph and their full joint adjacency.
struct ModelGraphs {
  AdjacencyGraph spatial;
  AdjacencyGraph response;
  JointAdjacency joint;

  static ModelGraphs make(AdjacencyGraph spatial, AdjacencyGraph response);
  int n_units() const { return spatial.n_vertices(); }
  int n_responses() const { return response.n_vertices(); }
  int dim() const { return n_units() * n_responses(); }
};

// Multifold model. psi and phi are indexed by response.edges().
struct Model1Params {
  Vector delta;
  Vector lambda;
  std::vector<double> psi;
  std::vector<double> phi;
};

// Separable model with a common spatial smoothing rho. omega is J x J and
// zero off the pattern I + C^(r).
struct Model2Params {
  double rho = 0.0;
  Matrix omega;
};

// Separable model with a spatial G-Wishart factor. omega_r(0, 0) == 1 and z
// is the auxiliary scale of the identification constraint.
struct Model3Params {
  Matrix omega_r;
  Matrix omega_s;
  double z = 1.0;
};

using ModelParams = std::variant<Model1Params, Model2Params, Model3Params>;

int model_id(const ModelParams &p);

// Element-wise specification: B (zero diagonal, not symmetric in general)
// and the conditional variances tau^2 = diag(T).
struct ElementSpec {
  SparseRowMatrix b;
  Vector tau2;
};

ElementSpec model1_BT(const Model1Params &p, const ModelGraphs &g);
ElementSpec model2_BT(const Model2Params &p, const ModelGraphs &g);
ElementSpec model3_BT(const Model3Params &p, const ModelGraphs &g);
ElementSpec element_spec(const ModelParams &p, const ModelGraphs &g);

// Dense T^{-1}(I - B).
Matrix dense_precision_from_spec(const ElementSpec &spec);

// D - Lambda (x) C^(s) - (Psi o C^(r)) (x) I - (Phi o C^(r)) (x) C^(s).
SparseSymMatrix model1_inner(const Model1Params &p, const ModelGraphs &g);
SparseSymMatrix model1_precision(const Model1Params &p, const ModelGraphs &g);
SparseSymMatrix model2_precision(const Model2Params &p, const ModelGraphs &g);
SparseSymMatrix model3_precision(const Model3Params &p, const ModelGraphs &g);
SparseSymMatrix precision(const ModelParams &p, const ModelGraphs &g);

// D^(s) - rho C^(s).
SparseSymMatrix car_precision(const AdjacencyGraph &g, double rho);
// Values of a dense matrix on the pattern I + C, explicit zeros included.
SparseSymMatrix restrict_to_pattern(const Matrix &m, const AdjacencyGraph &g);
// (A o (I + C_a)) (x) B, vertex (i, j) at j * n_b + i.
SparseSymMatrix kron_on_pattern(const Matrix &a, const AdjacencyGraph &a_pattern,
                                const SparseSymMatrix &b);

// Conditional mean and variance of u_ij given the rest of U, evaluated from
// the conditional-mean displays of each model. u is I x J.
struct ConditionalMoments {
  double mean;
  double variance;
};
ConditionalMoments conditional_moments(const ModelParams &p, const ModelGraphs &g,
                                       const Matrix &u, int unit, int response);

struct Violation {
  std::string parameter;
  std::string message;
};

// First violated constraint, if any.
std::optional<Violation> validate(const ModelParams &p, const ModelGraphs &g);
void validate_or_throw(const ModelParams &p, const ModelGraphs &g);

// True when m has no nonzero entry off the pattern I + C.
bool on_pattern(const Matrix &m, const AdjacencyGraph &g);

// Free parameter count: 2 nu(C^r), nu(C^r) + 1, nu(C^r) + nu(C^s).
long parameter_count(int model, const ModelGraphs &g);

} // namespace mcar
