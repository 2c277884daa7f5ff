#include "mcar/fit.hpp"

#include "mcar/error.hpp"

#include <cmath>
#include <exception>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace mcar {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

std::string pair_name(const std::string &base, int a, int b) {
  return base + "[" + std::to_string(a + 1) + "," + std::to_string(b + 1) + "]";
}

// Upper-triangle pattern entries (a <= b) of I + C in row-major order.
std::vector<Edge> upper_pattern(const AdjacencyGraph &g) {
  std::vector<Edge> out;
  for (int a = 0; a < g.n_vertices(); ++a) {
    out.emplace_back(a, a);
    for (int b : g.neighbors(a))
      if (b > a)
        out.emplace_back(a, b);
  }
  return out;
}

Matrix scale_or_identity(const Matrix &m, int n, const char *what) {
  if (m.size() == 0)
    return Matrix::Identity(n, n);
  if (m.rows() != n || m.cols() != n)
    throw DimensionMismatch(std::string(what) + ": expected " + std::to_string(n) + " x " +
                            std::to_string(n));
  return m;
}

SparseRowMatrix adjacency_matrix(const AdjacencyGraph &g) {
  std::vector<Triplet> t;
  for (int a = 0; a < g.n_vertices(); ++a)
    for (int b : g.neighbors(a))
      t.emplace_back(a, b, 1.0);
  SparseRowMatrix m(g.n_vertices(), g.n_vertices());
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

} // namespace

void FitConfig::validate(const ModelGraphs &g) const {
  if (model < 1 || model > 3)
    throw ValidationError("fit: model must be 1, 2 or 3");
  if (iterations < 0 || burn_in < 0 || thin < 1)
    throw ValidationError("fit: iterations and burn-in must be nonnegative, thin >= 1");
  if (burn_in > iterations)
    throw ValidationError("fit: burn-in exceeds iterations");
  if (gwishart_sweeps < 1)
    throw ValidationError("fit: gwishart_sweeps must be >= 1");
  if (!(priors.tau0_sq > 0.0))
    throw ValidationError("fit: tau0_sq must be positive");
  const int J = g.n_responses();
  for (const auto *v : {&priors.a, &priors.b})
    if (v->size() != 0) {
      if (v->size() != J)
        throw ValidationError("fit: inverse-gamma prior vectors need one entry per response");
      if (!(v->array() > 0.0).all())
        throw ValidationError("fit: inverse-gamma prior parameters must be positive");
    }
  if (!(priors.gw_b > 2.0) || !(priors.gw_b_spatial > 2.0))
    throw ValidationError("fit: G-Wishart degrees of freedom must exceed 2");
  const Matrix vr = scale_or_identity(priors.gw_scale, J, "fit: G-Wishart scale");
  if (!is_positive_definite(vr))
    throw ValidationError("fit: G-Wishart scale not positive definite");
  if (model == 3) {
    const Matrix vs = scale_or_identity(priors.gw_scale_spatial, g.n_units(), "fit: spatial G-Wishart scale");
    if (!is_positive_definite(vs))
      throw ValidationError("fit: spatial G-Wishart scale not positive definite");
  }
  if (initial) {
    if (model_id(*initial) != model)
      throw ValidationError("fit: initial hyperparameters belong to a different model");
    validate_or_throw(*initial, g);
  } else {
    validate_or_throw(default_hyper(model, g), g);
  }
}

ModelParams default_hyper(int model, const ModelGraphs &g) {
  const int J = g.n_responses();
  const auto E = static_cast<std::size_t>(g.response.n_edges());
  switch (model) {
  case 1:
    return Model1Params{Vector::Ones(J), Vector::Zero(J), std::vector<double>(E, 0.0),
                        std::vector<double>(E, 0.0)};
  case 2:
    return Model2Params{0.0, Matrix::Identity(J, J)};
  case 3:
    return Model3Params{Matrix::Identity(J, J), Matrix::Identity(g.n_units(), g.n_units()), 1.0};
  default:
    throw ValidationError("unknown model " + std::to_string(model));
  }
}

std::vector<std::string> hyper_names(int model, const ModelGraphs &g) {
  std::vector<std::string> names;
  const int J = g.n_responses();
  const auto redges = g.response.edges();
  switch (model) {
  case 1:
    for (int j = 0; j < J; ++j)
      names.push_back("delta[" + std::to_string(j + 1) + "]");
    for (int j = 0; j < J; ++j)
      names.push_back("lambda[" + std::to_string(j + 1) + "]");
    for (auto [a, b] : redges)
      names.push_back(pair_name("psi", a, b));
    for (auto [a, b] : redges)
      names.push_back(pair_name("phi", a, b));
    break;
  case 2:
    names.push_back("rho");
    for (auto [a, b] : upper_pattern(g.response))
      names.push_back(pair_name("omega", a, b));
    break;
  case 3:
    names.push_back("z");
    for (auto [a, b] : upper_pattern(g.response))
      names.push_back(pair_name("omega_r", a, b));
    for (auto [a, b] : upper_pattern(g.spatial))
      names.push_back(pair_name("omega_s", a, b));
    break;
  default:
    throw ValidationError("unknown model " + std::to_string(model));
  }
  return names;
}

std::vector<double> flatten_hyper(const ModelParams &params, const ModelGraphs &g) {
  std::vector<double> v;
  if (const auto *p = std::get_if<Model1Params>(&params)) {
    v.insert(v.end(), p->delta.data(), p->delta.data() + p->delta.size());
    v.insert(v.end(), p->lambda.data(), p->lambda.data() + p->lambda.size());
    v.insert(v.end(), p->psi.begin(), p->psi.end());
    v.insert(v.end(), p->phi.begin(), p->phi.end());
  } else if (const auto *p = std::get_if<Model2Params>(&params)) {
    v.push_back(p->rho);
    for (auto [a, b] : upper_pattern(g.response))
      v.push_back(p->omega(a, b));
  } else {
    const auto &q = std::get<Model3Params>(params);
    v.push_back(q.z);
    for (auto [a, b] : upper_pattern(g.response))
      v.push_back(q.omega_r(a, b));
    for (auto [a, b] : upper_pattern(g.spatial))
      v.push_back(q.omega_s(a, b));
  }
  return v;
}

ModelParams unflatten_hyper(int model, const std::vector<double> &values, const ModelGraphs &g) {
  const auto expected = hyper_names(model, g).size();
  if (values.size() != expected)
    throw DimensionMismatch("hyperparameter vector has " + std::to_string(values.size()) +
                            " entries, expected " + std::to_string(expected));
  const int J = g.n_responses();
  std::size_t k = 0;
  auto fill = [&](const AdjacencyGraph &graph) {
    Matrix m = Matrix::Zero(graph.n_vertices(), graph.n_vertices());
    for (auto [a, b] : upper_pattern(graph)) {
      m(a, b) = values[k];
      m(b, a) = values[k];
      ++k;
    }
    return m;
  };
  if (model == 1) {
    Model1Params p;
    const auto E = g.response.n_edges();
    p.delta = Eigen::Map<const Vector>(values.data(), J);
    p.lambda = Eigen::Map<const Vector>(values.data() + J, J);
    p.psi.assign(values.begin() + 2 * J, values.begin() + 2 * J + static_cast<long>(E));
    p.phi.assign(values.begin() + 2 * J + static_cast<long>(E), values.end());
    return p;
  }
  if (model == 2) {
    Model2Params p;
    p.rho = values[k++];
    p.omega = fill(g.response);
    return p;
  }
  Model3Params p;
  p.z = values[k++];
  p.omega_r = fill(g.response);
  p.omega_s = fill(g.spatial);
  return p;
}

Matrix ChainState::u(int n_units) const {
  const auto J = beta.size();
  Matrix out(n_units, J);
  for (long j = 0; j < J; ++j)
    out.col(j) = gamma.segment(j * n_units, n_units).array() - beta[j];
  return out;
}

Sampler::Sampler(ArealDataset data, ModelGraphs graphs, FitConfig config)
    : data_(std::move(data)), graphs_(std::move(graphs)), config_(std::move(config)) {
  data_.validate();
  if (data_.n_units != graphs_.n_units() || data_.n_responses != graphs_.n_responses())
    throw DimensionMismatch("fit: data has " + std::to_string(data_.n_units) + " units x " +
                            std::to_string(data_.n_responses) + " responses but graphs have " +
                            std::to_string(graphs_.n_units()) + " x " +
                            std::to_string(graphs_.n_responses()));
  config_.validate(graphs_);
  const int I = graphs_.n_units(), J = graphs_.n_responses();
  a_ = config_.priors.a.size() ? config_.priors.a : Vector::Constant(J, 0.1);
  b_ = config_.priors.b.size() ? config_.priors.b : Vector::Constant(J, 0.1);
  gw_scale_ = scale_or_identity(config_.priors.gw_scale, J, "G-Wishart scale");
  if (config_.model == 3)
    gw_scale_spatial_ = scale_or_identity(config_.priors.gw_scale_spatial, I, "spatial G-Wishart scale");
  response_cliques_ = maximal_cliques(graphs_.response);
  if (config_.model == 3)
    spatial_cliques_ = maximal_cliques(graphs_.spatial);
  spatial_adjacency_ = adjacency_matrix(graphs_.spatial);
}

ChainState Sampler::initial_state(std::uint64_t seed) const {
  const int I = graphs_.n_units(), J = graphs_.n_responses();
  ChainState s;
  s.rng = Rng(seed);
  s.gamma.resize(I * J);
  s.gamma_kernels.resize(static_cast<std::size_t>(I * J));
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < I; ++i) {
      const int m = data_.index(i, j);
      const double y = static_cast<double>(data_.y[m]);
      const double e = data_.exposure[m];
      double g, info;
      if (data_.likelihood[j] == Likelihood::binomial_logit) {
        const double p = (y + 0.5) / (e + 1.0);
        g = std::log(p) - std::log1p(-p);
        info = e * p * (1.0 - p);
      } else {
        g = std::log((y + 0.5) / (e + 0.5));
        info = y + 0.5;
      }
      s.gamma[m] = g;
      s.gamma_kernels[m].scale = std::min(1.0, 2.4 / std::sqrt(info + 1.0));
    }
  s.beta.resize(J);
  for (int j = 0; j < J; ++j)
    s.beta[j] = s.gamma.segment(j * I, I).mean();
  s.hyper = config_.initial ? *config_.initial : default_hyper(config_.model, graphs_);
  std::size_t n_hyper_kernels = 0;
  if (config_.model == 1)
    n_hyper_kernels = static_cast<std::size_t>(2 * J) + 2 * graphs_.response.n_edges();
  else if (config_.model == 2)
    n_hyper_kernels = 1;
  s.hyper_kernels.assign(n_hyper_kernels, MHKernel{});
  for (auto &k : s.hyper_kernels)
    k.scale = 0.1;
  return s;
}

void Sampler::refresh(const ChainState &s) {
  q_ = mcar::precision(s.hyper, graphs_);
  h_ = kernels::collapse_blocks(q_.full(), graphs_.n_units());
}

Sampler::GammaConditional Sampler::gamma_conditional(const ChainState &s, int m) const {
  const auto &q = q_.full();
  const int I = graphs_.n_units();
  double diag = 0.0, off = 0.0;
  for (SparseRowMatrix::InnerIterator it(q, m); it; ++it) {
    const int k = static_cast<int>(it.col());
    if (k == m)
      diag = it.value();
    else
      off += it.value() * (s.gamma[k] - s.beta[k / I]);
  }
  return {s.beta[m / I] - off / diag, diag};
}

void Sampler::update_gamma(ChainState &s) {
  const int I = graphs_.n_units();
  for (int m = 0; m < static_cast<int>(s.gamma.size()); ++m) {
    const auto cond = gamma_conditional(s, m);
    const long y = data_.y[m];
    const double e = data_.exposure[m];
    const Likelihood tag = data_.likelihood[m / I];
    auto logpdf = [&](double g) {
      const double r = g - cond.mean;
      return loglik_element(y, e, g, tag) - 0.5 * cond.precision * r * r;
    };
    s.gamma[m] = mh_step(logpdf, s.gamma[m], s.gamma_kernels[m], s.rng).value;
  }
}

void Sampler::update_beta(ChainState &s) {
  const int I = graphs_.n_units(), J = graphs_.n_responses();
  const Vector collapsed = kernels::collapse_vector(kernels::matvec(q_.full(), s.gamma), I);
  Matrix prec = h_;
  prec.diagonal().array() += 1.0 / config_.priors.tau0_sq;
  Eigen::LLT<Matrix> llt(prec);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("update_beta: H + I / tau0^2 not positive definite");
  const Vector mean = llt.solve(collapsed);
  Vector z(J);
  for (int j = 0; j < J; ++j)
    z[j] = s.rng.normal();
  s.beta = mean + Vector(llt.matrixU().solve(z));
}

void Sampler::update_hyper(ChainState &s) {
  switch (config_.model) {
  case 1: update_model1(s); break;
  case 2: update_model2(s); break;
  case 3: update_model3(s); break;
  }
}

double Sampler::model1_log_det_inner(const Model1Params &p) {
  try {
    inner_factor_.refactor(model1_inner(p, graphs_));
  } catch (const NotPositiveDefinite &) {
    return neg_inf;
  }
  return inner_factor_.log_det();
}

double Sampler::model1_linkage_logpdf(const ChainState &s, int kind, int index, double value) {
  if (!(std::abs(value) < 1.0))
    return neg_inf;
  Model1Params p = std::get<Model1Params>(s.hyper);
  const int I = graphs_.n_units();
  Matrix w = s.u(I);
  for (int j = 0; j < w.cols(); ++j)
    w.col(j) /= std::sqrt(p.delta[j]);
  double coef;
  if (kind == 0) {
    p.lambda[index] = value;
    coef = 0.5 * w.col(index).dot(spatial_adjacency_ * w.col(index));
  } else {
    const auto [a, b] = graphs_.response.edges()[static_cast<std::size_t>(index)];
    if (kind == 1) {
      p.psi[index] = value;
      coef = w.col(a).dot(w.col(b));
    } else {
      p.phi[index] = value;
      coef = w.col(a).dot(spatial_adjacency_ * w.col(b));
    }
  }
  const double logdet = model1_log_det_inner(p);
  if (!std::isfinite(logdet))
    return neg_inf;
  return 0.5 * logdet + value * coef;
}

void Sampler::update_model1(ChainState &s) {
  auto &p = std::get<Model1Params>(s.hyper);
  const int I = graphs_.n_units(), J = graphs_.n_responses();
  const auto redges = graphs_.response.edges();
  const int E = static_cast<int>(redges.size());
  const Matrix u = s.u(I);
  const Matrix cu = spatial_adjacency_ * u;

  // Variance components: ARS on theta = delta^{-1/2}, whose log density
  // (I + 2a - 1) log t - (A/2 + b) t^2 + B t is concave.
  for (int j = 0; j < J; ++j) {
    double quad = 0.0;
    for (int i = 0; i < I; ++i)
      quad += graphs_.joint.degree(i, j) * u(i, j) * u(i, j);
    quad -= p.lambda[j] * u.col(j).dot(cu.col(j));
    double cross = 0.0;
    for (int j2 : graphs_.response.neighbors(j)) {
      const int e = graphs_.response.edge_index(j, j2);
      cross += (p.psi[e] * u.col(j).dot(u.col(j2)) + p.phi[e] * u.col(j).dot(cu.col(j2))) /
               std::sqrt(p.delta[j2]);
    }
    const double power = I + 2.0 * a_[j] - 1.0;
    const double curvature = 0.5 * quad + b_[j];
    auto h = [=](double t) { return power * std::log(t) - curvature * t * t + cross * t; };
    auto dh = [=](double t) { return power / t - 2.0 * curvature * t + cross; };
    const double t0 = 1.0 / std::sqrt(p.delta[j]);
    try {
      const double t = ars_sample(h, dh, 0.0, std::numeric_limits<double>::infinity(),
                                  {0.5 * t0, t0, 2.0 * t0}, s.rng);
      p.delta[j] = 1.0 / (t * t);
    } catch (const ConcavityViolation &) {
      // Random walk on log delta; the log Jacobian is log delta.
      auto logpdf = [&](double eta) {
        const double d = std::exp(eta);
        return -(0.5 * I + a_[j]) * eta - (0.5 * quad + b_[j]) / d + cross / std::sqrt(d);
      };
      p.delta[j] = std::exp(mh_step(logpdf, std::log(p.delta[j]), s.hyper_kernels[j], s.rng).value);
    }
  }

  // Linkage scalars, one at a time, each on (-1, 1).
  Matrix w = u;
  for (int j = 0; j < J; ++j)
    w.col(j) /= std::sqrt(p.delta[j]);
  const Matrix cw = spatial_adjacency_ * w;
  double logdet = model1_log_det_inner(p);
  if (!std::isfinite(logdet))
    throw NotPositiveDefinite("model 1: inner matrix not positive definite at the current state");

  auto update_scalar = [&](double &param, double coef, MHKernel &kernel) {
    auto logpdf = [&](double v) {
      const double saved = param;
      param = v;
      const double ld = model1_log_det_inner(p);
      param = saved;
      return std::isfinite(ld) ? 0.5 * ld + v * coef : neg_inf;
    };
    const double current_lp = 0.5 * logdet + param * coef;
    const auto r = mh_step(logpdf, param, current_lp, kernel, s.rng, Support{-1.0, 1.0});
    if (r.accepted) {
      param = r.value;
      logdet = 2.0 * (r.logpdf - param * coef);
    }
  };
  for (int j = 0; j < J; ++j)
    update_scalar(p.lambda[j], 0.5 * w.col(j).dot(cw.col(j)), s.hyper_kernels[J + j]);
  for (int e = 0; e < E; ++e) {
    const auto [a, b] = redges[e];
    update_scalar(p.psi[e], w.col(a).dot(w.col(b)), s.hyper_kernels[2 * J + e]);
  }
  for (int e = 0; e < E; ++e) {
    const auto [a, b] = redges[e];
    update_scalar(p.phi[e], w.col(a).dot(cw.col(b)), s.hyper_kernels[2 * J + E + e]);
  }
}

double Sampler::model2_rho_logpdf(const ChainState &s, double rho) {
  if (!(std::abs(rho) < 1.0))
    return neg_inf;
  const auto &p = std::get<Model2Params>(s.hyper);
  const Matrix u = s.u(graphs_.n_units());
  const Matrix utcu = kernels::congruence(spatial_adjacency_, u);
  try {
    inner_factor_.refactor(car_precision(graphs_.spatial, rho));
  } catch (const NotPositiveDefinite &) {
    return neg_inf;
  }
  const double J = graphs_.n_responses();
  return 0.5 * J * inner_factor_.log_det() + 0.5 * rho * p.omega.cwiseProduct(utcu).sum();
}

Matrix Sampler::model2_scatter(const ChainState &s) const {
  const auto &p = std::get<Model2Params>(s.hyper);
  return kernels::congruence(car_precision(graphs_.spatial, p.rho).full(), s.u(graphs_.n_units()));
}

void Sampler::update_model2(ChainState &s) {
  auto &p = std::get<Model2Params>(s.hyper);
  const int I = graphs_.n_units();
  const double J = graphs_.n_responses();
  const Matrix u = s.u(I);
  const double quad = p.omega.cwiseProduct(kernels::congruence(spatial_adjacency_, u)).sum();
  auto logpdf = [&](double rho) {
    try {
      inner_factor_.refactor(car_precision(graphs_.spatial, rho));
    } catch (const NotPositiveDefinite &) {
      return neg_inf;
    }
    return 0.5 * J * inner_factor_.log_det() + 0.5 * rho * quad;
  };
  p.rho = mh_step(logpdf, p.rho, s.hyper_kernels[0], s.rng, Support{-1.0, 1.0}).value;

  const GWishartParams prior{config_.priors.gw_b, gw_scale_, graphs_.response};
  const auto post = gwishart_posterior(prior, model2_scatter(s), I);
  p.omega = gwishart_sample(post, response_cliques_, p.omega, config_.gwishart_sweeps, s.rng);
}

std::pair<double, double> Sampler::model3_z_conditional(const ChainState &s) const {
  const auto &p = std::get<Model3Params>(s.hyper);
  const double J = graphs_.n_responses();
  const double shape = J * (config_.priors.gw_b - 2.0) / 2.0 + static_cast<double>(nu(graphs_.response));
  const double rate = 0.5 * (p.omega_r * gw_scale_).trace();
  return {shape, rate};
}

Matrix Sampler::model3_scatter_response(const ChainState &s) const {
  const auto &p = std::get<Model3Params>(s.hyper);
  return kernels::congruence(restrict_to_pattern(p.omega_s, graphs_.spatial).full(),
                             s.u(graphs_.n_units()));
}

Matrix Sampler::model3_scatter_spatial(const ChainState &s) const {
  const auto &p = std::get<Model3Params>(s.hyper);
  return kernels::outer_congruence(s.u(graphs_.n_units()), p.omega_r);
}

void Sampler::update_model3(ChainState &s) {
  auto &p = std::get<Model3Params>(s.hyper);
  const int I = graphs_.n_units(), J = graphs_.n_responses();

  const auto [shape, rate] = model3_z_conditional(s);
  p.z = s.rng.gamma(shape, rate);

  const GWishartParams prior_r{config_.priors.gw_b + I, p.z * gw_scale_ + model3_scatter_response(s),
                               graphs_.response};
  const Matrix draw = gwishart_sample(prior_r, response_cliques_, p.omega_r, config_.gwishart_sweeps, s.rng);
  // Restore omega_r[1,1] = 1; the scale moves to omega_s so the Kronecker
  // product is unchanged.
  const double c = draw(0, 0);
  p.omega_r = draw / c;
  p.omega_r(0, 0) = 1.0;
  p.omega_s *= c;

  const GWishartParams prior_s{config_.priors.gw_b_spatial + J,
                               gw_scale_spatial_ + model3_scatter_spatial(s), graphs_.spatial};
  p.omega_s = gwishart_sample(prior_s, spatial_cliques_, p.omega_s, config_.gwishart_sweeps, s.rng);
}

void Sampler::step(ChainState &s) {
  update_gamma(s);
  update_beta(s);
  if (!config_.fix_hyper) {
    update_hyper(s);
    refresh(s);
  }
}

PosteriorSamples Sampler::empty_samples() const {
  PosteriorSamples out;
  out.model = config_.model;
  out.n_units = graphs_.n_units();
  out.n_responses = graphs_.n_responses();
  out.hyper_names = hyper_names(config_.model, graphs_);
  return out;
}

void Sampler::record(const ChainState &s, PosteriorSamples &out) const {
  out.iteration.push_back(s.iteration);
  out.deviance.push_back(deviance(data_, s.gamma));
  out.gamma.push_back(s.gamma);
  out.beta.push_back(s.beta);
  out.hyper.push_back(flatten_hyper(s.hyper, graphs_));
}

void run_chain(Sampler &sampler, ChainState &state, PosteriorSamples &samples) {
  const auto &cfg = sampler.config();
  sampler.refresh(state);
  auto for_each_kernel = [&](auto &&f) {
    for (auto &k : state.gamma_kernels)
      f(k);
    for (auto &k : state.hyper_kernels)
      f(k);
  };
  while (state.iteration < cfg.iterations) {
    const long it = state.iteration;
    if (it == cfg.burn_in)
      for_each_kernel([](MHKernel &k) { k.frozen = true; });
    try {
      sampler.step(state);
    } catch (const NumericalError &e) {
      throw NumericalError("iteration " + std::to_string(it + 1) + ": " + e.what());
    }
    state.iteration = it + 1;
    if (it < cfg.burn_in)
      for_each_kernel([](MHKernel &k) { mh_maybe_adapt(k); });
    else if ((it - cfg.burn_in) % cfg.thin == 0)
      sampler.record(state, samples);
  }
}

PosteriorSamples run_chain(const ArealDataset &data, const ModelGraphs &graphs, const FitConfig &config) {
  Sampler sampler(data, graphs, config);
  ChainState state = sampler.initial_state(config.seed);
  PosteriorSamples samples = sampler.empty_samples();
  run_chain(sampler, state, samples);
  return samples;
}

std::vector<PosteriorSamples> run_chains(const ArealDataset &data, const ModelGraphs &graphs,
                                         const FitConfig &config, int n_chains) {
  if (n_chains < 1)
    throw ValidationError("fit: chains must be >= 1");
  std::vector<PosteriorSamples> out(static_cast<std::size_t>(n_chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_chains));
#pragma omp parallel for schedule(dynamic, 1)
  for (int c = 0; c < n_chains; ++c) {
    try {
      FitConfig cfg = config;
      cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(c));
      out[c] = run_chain(data, graphs, cfg);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
  return out;
}

namespace {

constexpr const char *checkpoint_magic = "mcar-checkpoint";
constexpr int checkpoint_version = 1;

void write_vector(std::ostream &out, const char *tag, const double *v, std::size_t n) {
  out << tag << " " << n;
  for (std::size_t k = 0; k < n; ++k)
    out << " " << v[k];
  out << "\n";
}

std::vector<double> read_vector(std::istream &in, const char *tag) {
  std::string t;
  std::size_t n = 0;
  if (!(in >> t >> n) || t != tag)
    throw ParseError(std::string("checkpoint: expected '") + tag + "'", 0);
  std::vector<double> v(n);
  for (auto &x : v)
    if (!(in >> x))
      throw ParseError(std::string("checkpoint: truncated '") + tag + "'", 0);
  return v;
}

void write_kernels(std::ostream &out, const char *tag, const std::vector<MHKernel> &ks) {
  out << tag << " " << ks.size() << "\n";
  for (const auto &k : ks)
    out << k.scale << " " << k.target << " " << k.window << " " << k.window_accepted << " "
        << k.window_proposed << " " << k.total_accepted << " " << k.total_proposed << " "
        << (k.frozen ? 1 : 0) << "\n";
}

std::vector<MHKernel> read_kernels(std::istream &in, const char *tag) {
  std::string t;
  std::size_t n = 0;
  if (!(in >> t >> n) || t != tag)
    throw ParseError(std::string("checkpoint: expected '") + tag + "'", 0);
  std::vector<MHKernel> ks(n);
  for (auto &k : ks) {
    int frozen = 0;
    if (!(in >> k.scale >> k.target >> k.window >> k.window_accepted >> k.window_proposed >>
          k.total_accepted >> k.total_proposed >> frozen))
      throw ParseError("checkpoint: truncated kernel list", 0);
    k.frozen = frozen != 0;
  }
  return ks;
}

Vector to_vector(const std::vector<double> &v) { return Eigen::Map<const Vector>(v.data(), static_cast<long>(v.size())); }

} // namespace

void write_checkpoint(std::ostream &out, const ChainState &s, const PosteriorSamples &samples,
                      const ModelGraphs &g) {
  out << std::setprecision(17);
  out << checkpoint_magic << " " << checkpoint_version << "\n";
  out << "model " << model_id(s.hyper) << " units " << g.n_units() << " responses " << g.n_responses() << "\n";
  out << "iteration " << s.iteration << "\n";
  out << "rng " << s.rng.state() << "\n";
  write_vector(out, "gamma", s.gamma.data(), static_cast<std::size_t>(s.gamma.size()));
  write_vector(out, "beta", s.beta.data(), static_cast<std::size_t>(s.beta.size()));
  const auto hyper = flatten_hyper(s.hyper, g);
  write_vector(out, "hyper", hyper.data(), hyper.size());
  write_kernels(out, "gamma_kernels", s.gamma_kernels);
  write_kernels(out, "hyper_kernels", s.hyper_kernels);
  out << "samples " << samples.size() << "\n";
  for (std::size_t k = 0; k < samples.size(); ++k) {
    out << "draw " << samples.iteration[k] << " " << samples.deviance[k] << "\n";
    write_vector(out, "gamma", samples.gamma[k].data(), static_cast<std::size_t>(samples.gamma[k].size()));
    write_vector(out, "beta", samples.beta[k].data(), static_cast<std::size_t>(samples.beta[k].size()));
    write_vector(out, "hyper", samples.hyper[k].data(), samples.hyper[k].size());
  }
  out << "end\n";
}

std::pair<ChainState, PosteriorSamples> read_checkpoint(std::istream &in, const ModelGraphs &g) {
  std::string magic, word;
  int version = 0, model = 0, units = 0, responses = 0;
  if (!(in >> magic >> version) || magic != checkpoint_magic)
    throw ParseError("checkpoint: not a checkpoint file", 0);
  if (version != checkpoint_version)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), 0);
  if (!(in >> word >> model) || word != "model" || !(in >> word >> units) || word != "units" ||
      !(in >> word >> responses) || word != "responses")
    throw ParseError("checkpoint: malformed header", 0);
  if (units != g.n_units() || responses != g.n_responses())
    throw DimensionMismatch("checkpoint: dimensions do not match the graphs");
  ChainState s;
  if (!(in >> word >> s.iteration) || word != "iteration")
    throw ParseError("checkpoint: missing iteration", 0);
  if (!(in >> word) || word != "rng")
    throw ParseError("checkpoint: missing rng state", 0);
  std::string rng_state;
  std::getline(in, rng_state);
  s.rng.set_state(rng_state);
  s.gamma = to_vector(read_vector(in, "gamma"));
  s.beta = to_vector(read_vector(in, "beta"));
  s.hyper = unflatten_hyper(model, read_vector(in, "hyper"), g);
  s.gamma_kernels = read_kernels(in, "gamma_kernels");
  s.hyper_kernels = read_kernels(in, "hyper_kernels");
  if (s.gamma.size() != g.dim() || s.beta.size() != g.n_responses() ||
      s.gamma_kernels.size() != static_cast<std::size_t>(g.dim()))
    throw DimensionMismatch("checkpoint: state dimensions do not match the graphs");

  PosteriorSamples samples;
  samples.model = model;
  samples.n_units = units;
  samples.n_responses = responses;
  samples.hyper_names = hyper_names(model, g);
  std::size_t n = 0;
  if (!(in >> word >> n) || word != "samples")
    throw ParseError("checkpoint: missing samples", 0);
  for (std::size_t k = 0; k < n; ++k) {
    long it = 0;
    double dev = 0.0;
    if (!(in >> word >> it >> dev) || word != "draw")
      throw ParseError("checkpoint: malformed draw", 0);
    samples.iteration.push_back(it);
    samples.deviance.push_back(dev);
    samples.gamma.push_back(to_vector(read_vector(in, "gamma")));
    samples.beta.push_back(to_vector(read_vector(in, "beta")));
    samples.hyper.push_back(read_vector(in, "hyper"));
  }
  if (!(in >> word) || word != "end")
    throw ParseError("checkpoint: missing end marker", 0);
  return {std::move(s), std::move(samples)};
}

void write_samples_csv(std::ostream &out, const PosteriorSamples &s) {
  out << std::setprecision(17);
  out << "# mcar-samples model=" << s.model << " units=" << s.n_units << " responses=" << s.n_responses << "\n";
  out << "iteration,deviance";
  for (int j = 0; j < s.n_responses; ++j)
    out << ",beta[" << j + 1 << "]";
  for (const auto &n : s.hyper_names)
    out << "," << csv_field(n);
  for (int j = 0; j < s.n_responses; ++j)
    for (int i = 0; i < s.n_units; ++i)
      out << ",\"gamma[" << i + 1 << "," << j + 1 << "]\"";
  out << "\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    out << s.iteration[k] << "," << s.deviance[k];
    for (long j = 0; j < s.beta[k].size(); ++j)
      out << "," << s.beta[k][j];
    for (double v : s.hyper[k])
      out << "," << v;
    for (long m = 0; m < s.gamma[k].size(); ++m)
      out << "," << s.gamma[k][m];
    out << "\n";
  }
}

PosteriorSamples read_samples_csv(std::istream &in) {
  PosteriorSamples s;
  std::string line;
  bool have_meta = false, have_header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty())
      continue;
    if (line[0] == '#') {
      if (line.rfind("# mcar-samples", 0) == 0) {
        std::istringstream ms(line.substr(15));
        std::string kv;
        while (ms >> kv) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos)
            continue;
          const auto key = kv.substr(0, eq);
          const int val = std::stoi(kv.substr(eq + 1));
          if (key == "model")
            s.model = val;
          else if (key == "units")
            s.n_units = val;
          else if (key == "responses")
            s.n_responses = val;
        }
        have_meta = true;
      }
      continue;
    }
    const auto fields = split_csv(line, line_no);
    if (!have_header) {
      if (!have_meta)
        throw ParseError("samples: missing '# mcar-samples' metadata line", line_no);
      const std::size_t fixed = 2 + static_cast<std::size_t>(s.n_responses);
      const std::size_t ng = static_cast<std::size_t>(s.n_units) * static_cast<std::size_t>(s.n_responses);
      if (fields.size() < fixed + ng || fields[0] != "iteration" || fields[1] != "deviance")
        throw ParseError("samples: unexpected column header", line_no);
      s.hyper_names.assign(fields.begin() + static_cast<long>(fixed), fields.end() - static_cast<long>(ng));
      have_header = true;
      continue;
    }
    const std::size_t J = static_cast<std::size_t>(s.n_responses);
    const std::size_t H = s.hyper_names.size();
    const std::size_t G = static_cast<std::size_t>(s.n_units) * J;
    if (fields.size() != 2 + J + H + G)
      throw ParseError("samples: wrong number of fields", line_no);
    try {
      s.iteration.push_back(std::stol(fields[0]));
      s.deviance.push_back(std::stod(fields[1]));
      Vector beta(static_cast<long>(J)), gamma(static_cast<long>(G));
      std::vector<double> hyper(H);
      for (std::size_t k = 0; k < J; ++k)
        beta[static_cast<long>(k)] = std::stod(fields[2 + k]);
      for (std::size_t k = 0; k < H; ++k)
        hyper[k] = std::stod(fields[2 + J + k]);
      for (std::size_t k = 0; k < G; ++k)
        gamma[static_cast<long>(k)] = std::stod(fields[2 + J + H + k]);
      s.beta.push_back(std::move(beta));
      s.hyper.push_back(std::move(hyper));
      s.gamma.push_back(std::move(gamma));
    } catch (const std::exception &) {
      throw ParseError("samples: malformed number", line_no);
    }
  }
  if (!have_header)
    throw ParseError("samples: no header", 0);
  return s;
}

} // namespace mcar
