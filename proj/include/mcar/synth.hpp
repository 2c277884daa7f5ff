#pragma once

#include "mcar/data.hpp"
#include "mcar/precision.hpp"
#include "mcar/rng.hpp"

#include <vector>

namespace mcar {

// One exact draw of U (I x J) with the model's joint precision.
Matrix simulate_U(const ModelParams &params, const ModelGraphs &graphs, Rng &rng);

// y_ij ~ Bin(n_ij, logistic(beta_j + u_ij)) or Poisson(E_ij exp(beta_j + u_ij)).
// exposures is vec(I x J), tags one per response.
ArealDataset simulate_counts(const Matrix &u, const Vector &beta, const std::vector<double> &exposures,
                             const std::vector<Likelihood> &tags, Rng &rng);

} // namespace mcar
