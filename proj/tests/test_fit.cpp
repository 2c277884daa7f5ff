#include "doctest.h"
#include "support.hpp"

#include "mcar/diagnostics.hpp"
#include "mcar/error.hpp"
#include "mcar/fit.hpp"
#include "mcar/synth.hpp"

#include <sstream>

using namespace mcar;
using namespace mcar::test;

namespace {

struct Problem {
  ModelGraphs graphs;
  ArealDataset data;
  Matrix u;
};

Problem make_problem(int model, std::uint64_t seed, int rows = 4, int cols = 4, int J = 2) {
  Rng rng(seed);
  auto g = ModelGraphs::make(grid_graph(rows, cols), complete_graph(J));
  const auto p = random_params(model, g, rng, 0.5);
  const Matrix u = simulate_U(p, g, rng);
  std::vector<double> exposure(static_cast<std::size_t>(g.dim()), 40.0);
  std::vector<Likelihood> tags(static_cast<std::size_t>(J), Likelihood::binomial_logit);
  tags.back() = Likelihood::poisson_lognormal;
  auto d = simulate_counts(u, Vector::Zero(J), exposure, tags, rng);
  return {std::move(g), std::move(d), u};
}

FitConfig small_config(int model, long iterations = 60, long burn_in = 20) {
  FitConfig c;
  c.model = model;
  c.iterations = iterations;
  c.burn_in = burn_in;
  c.seed = 42;
  return c;
}

// Sampler state whose gamma equals beta + U exactly.
ChainState state_at(const Sampler &s, const Matrix &u, std::uint64_t seed) {
  ChainState st = s.initial_state(seed);
  st.beta.setZero();
  st.gamma = Eigen::Map<const Vector>(u.data(), u.size());
  return st;
}

double dense_gauss_logdensity(const Matrix &q, const Vector &x) {
  return 0.5 * std::log(q.determinant()) - 0.5 * x.dot(q * x);
}

} // namespace

TEST_CASE("hyperparameter flattening round trips") {
  Rng rng(3);
  const auto g = ModelGraphs::make(grid_graph(2, 3), path_graph(3));
  for (int model = 1; model <= 3; ++model) {
    const auto p = random_params(model, g, rng);
    const auto flat = flatten_hyper(p, g);
    CHECK(flat.size() == hyper_names(model, g).size());
    CHECK(flatten_hyper(unflatten_hyper(model, flat, g), g) == flat);
    CHECK_THROWS_AS(unflatten_hyper(model, std::vector<double>(flat.size() + 1), g), DimensionMismatch);
  }
  const auto names = hyper_names(2, g);
  CHECK(names.front() == "rho");
  CHECK(names[1] == "omega[1,1]");
  CHECK(names[2] == "omega[1,2]");
  CHECK(hyper_names(1, g)[6] == "psi[1,2]");
  CHECK(hyper_names(3, g).front() == "z");
}

TEST_CASE("configuration validation") {
  const auto pb = make_problem(2, 1);
  auto c = small_config(1);
  c.initial = Model1Params{Vector::Ones(2), Vector::Constant(2, 1.5), {0.0}, {0.0}};
  CHECK_THROWS_AS(Sampler(pb.data, pb.graphs, c), ValidationError);
  c = small_config(2);
  c.burn_in = 100;
  CHECK_THROWS_AS(Sampler(pb.data, pb.graphs, c), ValidationError);
  c = small_config(2);
  c.initial = Model3Params{};
  CHECK_THROWS_AS(Sampler(pb.data, pb.graphs, c), ValidationError);
  const auto other = ModelGraphs::make(grid_graph(3, 3), complete_graph(2));
  CHECK_THROWS_AS(Sampler(pb.data, other, small_config(2)), DimensionMismatch);
  const auto isolated = ModelGraphs::make(empty_graph(16), complete_graph(2));
  CHECK_THROWS_AS(Sampler(pb.data, isolated, small_config(2)), ValidationError);
  CHECK_NOTHROW(Sampler(pb.data, isolated, small_config(3)));
}

TEST_CASE("gamma prior conditional matches the dense precision") {
  Rng rng(5);
  for (int model = 1; model <= 3; ++model) {
    const auto pb = make_problem(model, 10 + model);
    auto c = small_config(model);
    c.initial = random_params(model, pb.graphs, rng);
    Sampler s(pb.data, pb.graphs, c);
    ChainState st = s.initial_state(1);
    for (long k = 0; k < st.beta.size(); ++k)
      st.beta[k] = rng.normal();
    s.refresh(st);
    const Matrix q = dense_closed_form(*c.initial, pb.graphs);
    const int I = pb.graphs.n_units();
    for (int m = 0; m < pb.graphs.dim(); ++m) {
      double off = 0.0;
      for (int k = 0; k < pb.graphs.dim(); ++k)
        if (k != m)
          off += q(m, k) * (st.gamma[k] - st.beta[k / I]);
      const auto cond = s.gamma_conditional(st, m);
      CHECK(cond.precision == doctest::Approx(q(m, m)).epsilon(1e-12));
      CHECK(cond.mean == doctest::Approx(st.beta[m / I] - off / q(m, m)).epsilon(1e-10));
    }
    CHECK(max_abs_diff(s.precision().to_dense(), q) < 1e-12 * q.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("rho full conditional differences match the dense Gaussian density") {
  Rng rng(8);
  const auto pb = make_problem(2, 4);
  auto c = small_config(2);
  auto p = std::get<Model2Params>(random_params(2, pb.graphs, rng));
  c.initial = p;
  Sampler s(pb.data, pb.graphs, c);
  const ChainState st = state_at(s, pb.u, 1);
  const Vector x = Eigen::Map<const Vector>(pb.u.data(), pb.u.size());
  auto dense = [&](double rho) {
    p.rho = rho;
    return dense_gauss_logdensity(dense_closed_form(p, pb.graphs), x);
  };
  const double ref = s.model2_rho_logpdf(st, 0.1) - dense(0.1);
  for (double rho : {-0.8, -0.2, 0.5, 0.95})
    CHECK(s.model2_rho_logpdf(st, rho) - dense(rho) == doctest::Approx(ref).epsilon(1e-9));
  CHECK(s.model2_rho_logpdf(st, 1.0) == -std::numeric_limits<double>::infinity());
  CHECK(max_abs_diff(s.model2_scatter(st),
                     pb.u.transpose() *
                         car_precision(pb.graphs.spatial, std::get<Model2Params>(st.hyper).rho).to_dense() *
                         pb.u) < 1e-10);
}

TEST_CASE("model 1 linkage conditionals match the dense Gaussian density") {
  Rng rng(9);
  const auto pb = make_problem(1, 6, 3, 3, 3);
  auto c = small_config(1);
  const auto base = std::get<Model1Params>(random_params(1, pb.graphs, rng, 0.4));
  c.initial = base;
  Sampler s(pb.data, pb.graphs, c);
  const ChainState st = state_at(s, pb.u, 1);
  const Vector x = Eigen::Map<const Vector>(pb.u.data(), pb.u.size());
  for (int kind = 0; kind < 3; ++kind) {
    auto dense = [&](double v) {
      auto p = base;
      (kind == 0 ? p.lambda[1] : kind == 1 ? p.psi[1] : p.phi[1]) = v;
      return dense_gauss_logdensity(dense_closed_form(p, pb.graphs), x);
    };
    const double ref = s.model1_linkage_logpdf(st, kind, 1, 0.0) - dense(0.0);
    for (double v : {-0.3, 0.2, 0.35})
      CHECK(s.model1_linkage_logpdf(st, kind, 1, v) - dense(v) == doctest::Approx(ref).epsilon(1e-9));
    CHECK(s.model1_linkage_logpdf(st, kind, 1, 1.0) == -std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("model 3 conditionals") {
  Rng rng(10);
  const auto pb = make_problem(3, 7);
  auto c = small_config(3);
  const auto p = std::get<Model3Params>(random_params(3, pb.graphs, rng));
  c.initial = p;
  Sampler s(pb.data, pb.graphs, c);
  ChainState st = state_at(s, pb.u, 1);
  const auto [shape, rate] = s.model3_z_conditional(st);
  CHECK(shape == doctest::Approx(2 * (3.0 - 2.0) / 2 + 3.0));
  CHECK(rate == doctest::Approx(0.5 * p.omega_r.trace()));
  CHECK(max_abs_diff(s.model3_scatter_response(st), pb.u.transpose() * p.omega_s * pb.u) < 1e-10);
  CHECK(max_abs_diff(s.model3_scatter_spatial(st), pb.u * p.omega_r * pb.u.transpose()) < 1e-10);
  for (int k = 0; k < 20; ++k) {
    s.update_model3(st);
    const auto &q = std::get<Model3Params>(st.hyper);
    CHECK(q.omega_r(0, 0) == 1.0);
    CHECK(on_pattern(q.omega_s, pb.graphs.spatial));
    CHECK(q.z > 0.0);
  }
}

TEST_CASE("beta draw has the collapsed Gaussian conditional") {
  const auto pb = make_problem(2, 3);
  Sampler s(pb.data, pb.graphs, small_config(2));
  ChainState st = s.initial_state(5);
  s.refresh(st);
  const Matrix q = s.precision().to_dense();
  const int I = pb.graphs.n_units();
  Matrix h(2, 2);
  Vector rhs(2);
  for (int a = 0; a < 2; ++a) {
    rhs[a] = (q.middleRows(a * I, I) * st.gamma).sum();
    for (int b = 0; b < 2; ++b)
      h(a, b) = q.block(a * I, b * I, I, I).sum();
  }
  const Matrix prec = h + Matrix::Identity(2, 2) / 1000.0;
  const Vector mean = prec.ldlt().solve(rhs);
  const Matrix cov = prec.inverse();
  Vector acc = Vector::Zero(2);
  Matrix acc2 = Matrix::Zero(2, 2);
  const int n = 40000;
  for (int k = 0; k < n; ++k) {
    s.update_beta(st);
    acc += st.beta;
    acc2 += (st.beta - mean) * (st.beta - mean).transpose();
  }
  acc /= n;
  acc2 /= n;
  CHECK((acc - mean).cwiseAbs().maxCoeff() < 4 * std::sqrt(cov.diagonal().maxCoeff() / n) + 1e-12);
  CHECK(max_abs_diff(acc2, cov) < 0.05 * cov.cwiseAbs().maxCoeff());
}

TEST_CASE("model 1 scales are recovered from an observed field") {
  Rng rng(77);
  const auto g = ModelGraphs::make(grid_graph(14, 14), complete_graph(2));
  Model1Params truth{Vector(2), Vector(2), {0.4}, {0.3}};
  truth.delta << 0.5, 2.0;
  truth.lambda << 0.6, 0.2;
  const Matrix u = simulate_U(truth, g, rng);
  ArealDataset d{g.n_units(), 2, std::vector<long>(static_cast<std::size_t>(g.dim()), 0),
                 std::vector<double>(static_cast<std::size_t>(g.dim()), 1.0),
                 {Likelihood::binomial_logit, Likelihood::binomial_logit}};
  Sampler s(d, g, small_config(1));
  ChainState st = state_at(s, u, 3);
  std::vector<std::vector<double>> draws;
  for (int it = 0; it < 3000; ++it) {
    s.update_hyper(st);
    if (it < 500)
      for (auto &k : st.hyper_kernels)
        mh_maybe_adapt(k);
    else
      draws.push_back(flatten_hyper(st.hyper, g));
  }
  const auto truth_flat = flatten_hyper(truth, g);
  const auto names = hyper_names(1, g);
  // The linkages are weakly identified at this size; only the scales are checked.
  for (std::size_t k = 0; k < truth_flat.size(); ++k) {
    if (names[k].rfind("delta", 0) != 0)
      continue;
    std::vector<double> trace;
    for (const auto &dr : draws)
      trace.push_back(dr[k]);
    const auto sm = summarize_trace(names[k], trace);
    INFO(names[k] << " truth " << truth_flat[k] << " interval " << sm.q025 << " .. " << sm.q975);
    CHECK((truth_flat[k] > sm.q025 - 0.05 && truth_flat[k] < sm.q975 + 0.05));
  }
}

TEST_CASE("chains are reproducible and resume bit-exactly") {
  for (int model = 1; model <= 3; ++model) {
    const auto pb = make_problem(model, 20 + model);
    const auto full = run_chain(pb.data, pb.graphs, small_config(model));
    CHECK(full.size() == 40);
    CHECK(full == run_chain(pb.data, pb.graphs, small_config(model)));

    Sampler first(pb.data, pb.graphs, small_config(model, 30, 20));
    ChainState st = first.initial_state(42);
    PosteriorSamples part = first.empty_samples();
    run_chain(first, st, part);
    CHECK(part.size() == 10);
    std::stringstream ckpt;
    write_checkpoint(ckpt, st, part, pb.graphs);
    auto [resumed, samples] = read_checkpoint(ckpt, pb.graphs);
    CHECK(resumed.rng == st.rng);
    Sampler second(pb.data, pb.graphs, small_config(model));
    run_chain(second, resumed, samples);
    CHECK(samples == full);
  }
}

TEST_CASE("empty post-burn-in sample and fixed hyperparameters") {
  const auto pb = make_problem(2, 2);
  auto c = small_config(2, 10, 10);
  CHECK(run_chain(pb.data, pb.graphs, c).size() == 0);
  c = small_config(2, 15, 5);
  c.fix_hyper = true;
  c.initial = Model2Params{0.3, Matrix::Identity(2, 2)};
  const auto s = run_chain(pb.data, pb.graphs, c);
  for (const auto &h : s.hyper)
    CHECK(h.front() == 0.3);
}

TEST_CASE("independent chains use derived seeds") {
  const auto pb = make_problem(2, 2);
  const auto chains = run_chains(pb.data, pb.graphs, small_config(2), 2);
  REQUIRE(chains.size() == 2);
  CHECK_FALSE(chains[0] == chains[1]);
  auto c = small_config(2);
  c.seed = derive_seed(42, 1);
  CHECK(chains[1] == run_chain(pb.data, pb.graphs, c));
}

TEST_CASE("samples CSV round trips exactly") {
  const auto pb = make_problem(3, 5);
  const auto s = run_chain(pb.data, pb.graphs, small_config(3, 30, 25));
  std::stringstream ss;
  write_samples_csv(ss, s);
  CHECK(read_samples_csv(ss) == s);
  std::istringstream bad("iteration,deviance\n");
  CHECK_THROWS_AS(read_samples_csv(bad), ParseError);
}

TEST_CASE("checkpoint rejects mismatched graphs and garbage") {
  const auto pb = make_problem(2, 5);
  Sampler s(pb.data, pb.graphs, small_config(2, 5, 0));
  ChainState st = s.initial_state(1);
  PosteriorSamples out = s.empty_samples();
  run_chain(s, st, out);
  std::stringstream ckpt;
  write_checkpoint(ckpt, st, out, pb.graphs);
  const auto other = ModelGraphs::make(grid_graph(3, 3), complete_graph(2));
  CHECK_THROWS_AS(read_checkpoint(ckpt, other), DimensionMismatch);
  std::istringstream garbage("hello");
  CHECK_THROWS_AS(read_checkpoint(garbage, pb.graphs), ParseError);
}
