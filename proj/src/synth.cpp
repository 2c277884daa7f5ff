#include "mcar/synth.hpp"

#include "mcar/error.hpp"

#include <cmath>

namespace mcar {

Matrix simulate_U(const ModelParams &params, const ModelGraphs &graphs, Rng &rng) {
  validate_or_throw(params, graphs);
  const auto factor = cholesky(precision(params, graphs));
  const Vector x = sample_gaussian_precision(factor, rng);
  return Eigen::Map<const Matrix>(x.data(), graphs.n_units(), graphs.n_responses());
}

ArealDataset simulate_counts(const Matrix &u, const Vector &beta, const std::vector<double> &exposures,
                             const std::vector<Likelihood> &tags, Rng &rng) {
  const int I = static_cast<int>(u.rows()), J = static_cast<int>(u.cols());
  if (beta.size() != J || tags.size() != static_cast<std::size_t>(J) ||
      exposures.size() != static_cast<std::size_t>(I) * static_cast<std::size_t>(J))
    throw DimensionMismatch("simulate_counts: inconsistent dimensions");
  ArealDataset d;
  d.n_units = I;
  d.n_responses = J;
  d.likelihood = tags;
  d.exposure = exposures;
  d.y.resize(exposures.size());
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < I; ++i) {
      const int m = d.index(i, j);
      const double g = beta[j] + u(i, j);
      if (tags[j] == Likelihood::binomial_logit) {
        const double n = exposures[m];
        if (n != std::floor(n) || n < 0)
          throw ValidationError("simulate_counts: binomial trials must be nonnegative integers");
        d.y[m] = rng.binomial(static_cast<long>(n), mean_parameter(g, tags[j]));
      } else {
        if (!(exposures[m] > 0.0))
          throw ValidationError("simulate_counts: expected counts must be positive");
        d.y[m] = rng.poisson(exposures[m] * std::exp(g));
      }
    }
  d.validate();
  return d;
}

} // namespace mcar
