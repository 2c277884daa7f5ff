#include "doctest.h"
#include "support.hpp"

#include "mcar/data.hpp"
#include "mcar/error.hpp"
#include "mcar/synth.hpp"

#include <sstream>

using namespace mcar;
using namespace mcar::test;

TEST_CASE("likelihood tags") {
  CHECK(parse_likelihood("binlogit") == Likelihood::binomial_logit);
  CHECK(parse_likelihood("poislognorm") == Likelihood::poisson_lognormal);
  CHECK(likelihood_tag(Likelihood::poisson_lognormal) == "poislognorm");
  CHECK_THROWS_AS(parse_likelihood("gaussian"), ValidationError);
}

TEST_CASE("element log likelihoods") {
  const double g = 0.3, p = 1.0 / (1.0 + std::exp(-g));
  const double binom = std::lgamma(11.0) - std::lgamma(5.0) - std::lgamma(7.0) + 4 * std::log(p) + 6 * std::log(1 - p);
  CHECK(loglik_element(4, 10, g, Likelihood::binomial_logit) == doctest::Approx(binom).epsilon(1e-13));
  CHECK(loglik_element(0, 0, g, Likelihood::binomial_logit) == 0.0);
  const double eta = std::exp(g), e = 2.5;
  const double pois = -e * eta + 3 * std::log(e * eta) - std::lgamma(4.0);
  CHECK(loglik_element(3, e, g, Likelihood::poisson_lognormal) == doctest::Approx(pois).epsilon(1e-13));
  // large |gamma| stays finite
  CHECK(std::isfinite(loglik_element(5, 10, 800.0, Likelihood::binomial_logit)));
  CHECK(std::isfinite(loglik_element(5, 10, -800.0, Likelihood::binomial_logit)));
  CHECK(linear_predictor(mean_parameter(0.7, Likelihood::binomial_logit), Likelihood::binomial_logit) ==
        doctest::Approx(0.7).epsilon(1e-14));
  CHECK(linear_predictor(mean_parameter(0.7, Likelihood::poisson_lognormal), Likelihood::poisson_lognormal) ==
        doctest::Approx(0.7).epsilon(1e-14));
}

TEST_CASE("deviance is minus twice the total log likelihood") {
  ArealDataset d{2, 1, {1, 2}, {3.0, 4.0}, {Likelihood::binomial_logit}};
  Vector g(2);
  g << 0.1, -0.2;
  const double ll = loglik_element(1, 3, 0.1, Likelihood::binomial_logit) + loglik_element(2, 4, -0.2, Likelihood::binomial_logit);
  CHECK(total_loglik(d, g) == doctest::Approx(ll).epsilon(1e-14));
  CHECK(deviance(d, g) == doctest::Approx(-2 * ll).epsilon(1e-14));
}

TEST_CASE("dataset validation") {
  ArealDataset d{2, 1, {1, 5}, {3.0, 4.0}, {Likelihood::binomial_logit}};
  CHECK_THROWS_AS(d.validate(), ValidationError); // y > n
  d.y[1] = 2;
  CHECK_NOTHROW(d.validate());
  d.exposure[0] = 2.5;
  CHECK_THROWS_AS(d.validate(), ValidationError); // fractional trials
  ArealDataset p{1, 1, {-1}, {1.0}, {Likelihood::poisson_lognormal}};
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("dataset CSV round trip and errors") {
  Rng rng(2);
  const auto g = ModelGraphs::make(grid_graph(3, 3), complete_graph(2));
  const Matrix u = simulate_U(Model2Params{0.5, Matrix::Identity(2, 2)}, g, rng);
  std::vector<double> exposure(18);
  for (int k = 0; k < 18; ++k)
    exposure[k] = k < 9 ? 50.0 : 12.345678901234567;
  const auto d = simulate_counts(u, Vector::Zero(2), exposure,
                                 {Likelihood::binomial_logit, Likelihood::poisson_lognormal}, rng);
  std::stringstream ss;
  write_dataset(ss, d);
  CHECK(read_dataset(ss) == d);

  auto parse = [](const std::string &body) {
    std::istringstream in("unit,response,y,exposure,likelihood\n" + body);
    return read_dataset(in);
  };
  auto message = [&](const std::string &body) {
    try {
      parse(body);
    } catch (const ValidationError &e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("1,1,2,5,binlogit\n1,1,2,5,binlogit\n").find("line 3") != std::string::npos);
  CHECK(message("1,1,2,5,binlogit\n2,1,2,5,poislognorm\n").find("line 3") != std::string::npos);
  CHECK(message("0,1,2,5,binlogit\n").find("line 2") != std::string::npos);
  CHECK(message("1,1,x,5,binlogit\n").find("line 2") != std::string::npos);
  CHECK(message("1,1,2,5,binlogit\n1,2,2,5,binlogit\n2,1,2,5,binlogit\n") != "no error"); // missing (2,2)
  std::istringstream bad_header("unit,y\n");
  CHECK_THROWS_AS(read_dataset(bad_header), ParseError);
}

TEST_CASE("simulate_U covariance matches the inverse precision") {
  const auto g = ModelGraphs::make(path_graph(2), AdjacencyGraph(1));
  const Model2Params p{0.5, Matrix::Identity(1, 1)};
  const Matrix cov = car_precision(g.spatial, 0.5).to_dense().inverse();
  Rng rng(14);
  Matrix acc = Matrix::Zero(2, 2);
  const int n = 50000;
  for (int k = 0; k < n; ++k) {
    const Matrix u = simulate_U(p, g, rng);
    acc += u.col(0) * u.col(0).transpose();
  }
  acc /= n;
  CHECK(max_abs_diff(acc, cov) < 0.05 * cov.cwiseAbs().maxCoeff());
}

TEST_CASE("simulate_U special cases") {
  Rng rng(3);
  const auto g = ModelGraphs::make(grid_graph(2, 2), complete_graph(2));
  double sq = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k)
    sq += simulate_U(Model3Params{Matrix::Identity(2, 2), Matrix::Identity(4, 4), 1.0}, g, rng).squaredNorm();
  CHECK(sq / (8.0 * n) == doctest::Approx(1.0).epsilon(0.02));
  Rng a(5), b(5);
  CHECK(max_abs_diff(simulate_U(Model2Params{0.3, Matrix::Identity(2, 2)}, g, a),
                     simulate_U(Model2Params{0.3, Matrix::Identity(2, 2)}, g, b)) == 0.0);
  CHECK_THROWS_AS(simulate_U(Model2Params{1.5, Matrix::Identity(2, 2)}, g, a), ValidationError);
}

TEST_CASE("simulate_counts moments") {
  Rng rng(8);
  const Matrix u = Matrix::Zero(1, 2);
  auto d = simulate_counts(u, Vector::Zero(2), {0.0, 1000.0}, {Likelihood::binomial_logit, Likelihood::poisson_lognormal}, rng);
  CHECK(d.y[0] == 0);
  CHECK(std::abs(d.y[1] - 1000) < 4 * std::sqrt(1000.0));
  d = simulate_counts(u, Vector::Zero(2), {1e6, 1.0}, {Likelihood::binomial_logit, Likelihood::poisson_lognormal}, rng);
  CHECK(d.y[0] / 1e6 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("csv fields with commas and quotes round trip") {
  const std::vector<std::string> cells{"omega[1,2]", "plain", "say \"hi\"", ""};
  std::string line;
  for (std::size_t k = 0; k < cells.size(); ++k)
    line += (k ? "," : "") + mcar::csv_field(cells[k]);
  CHECK(line == "\"omega[1,2]\",plain,\"say \"\"hi\"\"\",");
  CHECK(mcar::split_csv(line) == cells);
  CHECK_THROWS_AS(mcar::split_csv("\"open,end", 4), mcar::ParseError);
}
