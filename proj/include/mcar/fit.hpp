#pragma once

#include "mcar/data.hpp"
#include "mcar/graph.hpp"
#include "mcar/gwishart.hpp"
#include "mcar/mcmc.hpp"
#include "mcar/precision.hpp"
#include "mcar/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mcar {

struct PriorSettings {
  double tau0_sq = 1000.0;      // beta_j ~ N(0, tau0^2)
  Vector a, b;                  // model 1: delta_j ~ IG(a_j, b_j); empty -> 0.1
  double gw_b = 3.0;            // model 2 Omega / model 3 Omega_r
  Matrix gw_scale;              // empty -> identity
  double gw_b_spatial = 3.0;    // model 3 Omega_s
  Matrix gw_scale_spatial;      // empty -> identity
};

struct FitConfig {
  int model = 2;
  long iterations = 1000;
  long burn_in = 500;
  long thin = 1;
  int gwishart_sweeps = 1;
  std::uint64_t seed = 1;
  PriorSettings priors;
  // Starting hyperparameters; defaults per model when absent.
  std::optional<ModelParams> initial;
  // Hold hyperparameters at their initial values (debug runs).
  bool fix_hyper = false;

  // Throws ValidationError.
  void validate(const ModelGraphs &g) const;
};

// Default starting hyperparameters: delta = 1 and zero linkages (model 1),
// rho = 0 and Omega = I (model 2), Omega_r = Omega_s = I and z = 1 (model 3).
ModelParams default_hyper(int model, const ModelGraphs &g);

// Flattened hyperparameters and their names (see hyper_names).
std::vector<double> flatten_hyper(const ModelParams &p, const ModelGraphs &g);
std::vector<std::string> hyper_names(int model, const ModelGraphs &g);
ModelParams unflatten_hyper(int model, const std::vector<double> &values, const ModelGraphs &g);

struct ChainState {
  Vector gamma; // vec(I x J), gamma_ij = beta_j + u_ij
  Vector beta;
  ModelParams hyper;
  long iteration = 0;
  Rng rng;
  std::vector<MHKernel> gamma_kernels;
  std::vector<MHKernel> hyper_kernels;

  // U = gamma - 1 beta', as I x J.
  Matrix u(int n_units) const;
};

struct PosteriorSamples {
  int model = 0;
  int n_units = 0;
  int n_responses = 0;
  std::vector<std::string> hyper_names;
  std::vector<long> iteration;
  std::vector<double> deviance;
  std::vector<Vector> gamma;
  std::vector<Vector> beta;
  std::vector<std::vector<double>> hyper;

  std::size_t size() const { return iteration.size(); }
  bool operator==(const PosteriorSamples &) const = default;
};

// One chain's sampler. Holds the data, graphs, priors and the factorization
// caches; all mutable chain state lives in ChainState.
class Sampler {
public:
  Sampler(ArealDataset data, ModelGraphs graphs, FitConfig config);

  ChainState initial_state(std::uint64_t seed) const;

  // Recompute the joint precision and its collapsed block sums from the
  // current hyperparameters.
  void refresh(const ChainState &s);

  // Systematic scan: gamma, beta, hyperparameters; then refresh.
  void step(ChainState &s);

  void update_gamma(ChainState &s);
  void update_beta(ChainState &s);
  void update_hyper(ChainState &s);
  void update_model1(ChainState &s);
  void update_model2(ChainState &s);
  void update_model3(ChainState &s);

  // Prior conditional mean and precision of gamma_m used by update_gamma.
  struct GammaConditional {
    double mean;
    double precision;
  };
  GammaConditional gamma_conditional(const ChainState &s, int m) const;

  // Log full conditional of a Model 1 linkage scalar given the rest; `kind`
  // is 0 (lambda_j), 1 (psi_e), 2 (phi_e). -inf outside the support or when
  // M is not positive definite.
  double model1_linkage_logpdf(const ChainState &s, int kind, int index, double value);
  // Log full conditional of rho (model 2), -inf outside (-1, 1).
  double model2_rho_logpdf(const ChainState &s, double rho);

  // Scatter matrices of the conjugate updates.
  Matrix model2_scatter(const ChainState &s) const;                  // U'(D - rho C)U
  Matrix model3_scatter_response(const ChainState &s) const;         // U' Omega_s U
  Matrix model3_scatter_spatial(const ChainState &s) const;          // U Omega_r U'
  // Shape and rate of the Gamma full conditional of z.
  std::pair<double, double> model3_z_conditional(const ChainState &s) const;

  const SparseSymMatrix &precision() const { return q_; }
  const Matrix &collapsed_precision() const { return h_; }
  const ArealDataset &data() const { return data_; }
  const ModelGraphs &graphs() const { return graphs_; }
  const FitConfig &config() const { return config_; }
  const Matrix &gw_scale() const { return gw_scale_; }
  const Matrix &gw_scale_spatial() const { return gw_scale_spatial_; }

  void record(const ChainState &s, PosteriorSamples &out) const;
  PosteriorSamples empty_samples() const;

private:
  double model1_log_det_inner(const Model1Params &p);

  ArealDataset data_;
  ModelGraphs graphs_;
  FitConfig config_;
  Vector a_, b_;
  Matrix gw_scale_, gw_scale_spatial_;
  CliqueSet response_cliques_, spatial_cliques_;
  SparseRowMatrix spatial_adjacency_;
  SparseSymMatrix q_;
  Matrix h_;
  CholeskyFactor inner_factor_; // model 1: M, model 2: D - rho C
};

// Runs from `state` (fresh or resumed) to config.iterations, appending
// thinned post-burn-in draws to `samples`.
void run_chain(Sampler &sampler, ChainState &state, PosteriorSamples &samples);
PosteriorSamples run_chain(const ArealDataset &data, const ModelGraphs &graphs,
                           const FitConfig &config);

// Independent chains with seeds derive_seed(config.seed, c), run
// concurrently.
std::vector<PosteriorSamples> run_chains(const ArealDataset &data, const ModelGraphs &graphs,
                                         const FitConfig &config, int n_chains);

// Versioned text checkpoint of ChainState plus the draws stored so far.
void write_checkpoint(std::ostream &out, const ChainState &s, const PosteriorSamples &samples,
                      const ModelGraphs &g);
std::pair<ChainState, PosteriorSamples> read_checkpoint(std::istream &in, const ModelGraphs &g);

// Samples CSV: iteration, deviance, beta, hyperparameters, gamma.
void write_samples_csv(std::ostream &out, const PosteriorSamples &s);
PosteriorSamples read_samples_csv(std::istream &in);

} // namespace mcar
