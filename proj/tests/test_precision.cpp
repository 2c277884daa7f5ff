#include "doctest.h"
#include "support.hpp"

#include "mcar/error.hpp"
#include "mcar/precision.hpp"

using namespace mcar;
using namespace mcar::test;

namespace {

ModelGraphs random_graphs(Rng &rng, int max_i = 6, int max_j = 4) {
  return ModelGraphs::make(random_connected_graph(unif_int(rng, 2, max_i), 0.4, rng),
                           random_graph(unif_int(rng, 1, max_j), 0.6, rng));
}

} // namespace

TEST_CASE("element specification equals the closed-form precision") {
  Rng rng(21);
  for (int model = 1; model <= 3; ++model)
    for (int rep = 0; rep < 30; ++rep) {
      const auto g = random_graphs(rng);
      const auto p = random_params(model, g, rng);
      const Matrix oracle = dense_closed_form(p, g);
      const double scale = oracle.cwiseAbs().maxCoeff();
      CHECK(max_abs_diff(dense_precision_from_spec(element_spec(p, g)), oracle) <= 1e-12 * scale);
      CHECK(max_abs_diff(precision(p, g).to_dense(), oracle) <= 1e-12 * scale);
    }
}

TEST_CASE("model 1 entries from the element rules") {
  const auto g = ModelGraphs::make(path_graph(2), path_graph(2));
  Model1Params p{Vector::Constant(2, 1.0), Vector::Constant(2, 0.5), {0.25}, {0.125}};
  p.delta[1] = 4.0;
  const auto spec = model1_BT(p, g);
  // every joint degree is 3 on K4
  CHECK(spec.tau2[0] == doctest::Approx(1.0 / 3.0));
  CHECK(spec.tau2[2] == doctest::Approx(4.0 / 3.0));
  CHECK(spec.b.coeff(0, 1) == doctest::Approx(0.5 / 3.0));                   // spatial
  CHECK(spec.b.coeff(0, 2) == doctest::Approx(0.25 / 3.0 * std::sqrt(0.25))); // response
  CHECK(spec.b.coeff(0, 3) == doctest::Approx(0.125 / 3.0 * std::sqrt(0.25))); // interaction
  CHECK(spec.b.coeff(2, 0) == doctest::Approx(0.25 / 3.0 * 2.0));
}

TEST_CASE("model 2 with rho = 0 and identity omega is diagonal") {
  const auto g = ModelGraphs::make(grid_graph(2, 3), complete_graph(2));
  const Model2Params p{0.0, Matrix::Identity(2, 2)};
  const Matrix q = precision(p, g).to_dense();
  CHECK(max_abs_diff(q, Matrix(q.diagonal().asDiagonal())) == 0.0);
  for (int i = 0; i < 6; ++i)
    CHECK(q(i, i) == g.spatial.degree(i));
}

TEST_CASE("model 2 with J = 1 is the proper CAR precision") {
  const auto g = ModelGraphs::make(grid_graph(3, 3), AdjacencyGraph(1));
  Model2Params p{0.6, Matrix::Constant(1, 1, 2.0)};
  CHECK(max_abs_diff(precision(p, g).to_dense(), 2.0 * car_precision(g.spatial, 0.6).to_dense()) == 0.0);
}

TEST_CASE("precision pattern is independent of parameter values") {
  Rng rng(8);
  const auto g = ModelGraphs::make(grid_graph(3, 3), path_graph(3));
  for (int model = 1; model <= 3; ++model) {
    ModelParams base = random_params(model, g, rng);
    if (auto *m1 = std::get_if<Model1Params>(&base)) {
      m1->lambda.setZero();
      std::fill(m1->psi.begin(), m1->psi.end(), 0.0);
      std::fill(m1->phi.begin(), m1->phi.end(), 0.0);
    } else if (auto *m2 = std::get_if<Model2Params>(&base)) {
      m2->rho = 0.0;
      m2->omega = Matrix::Identity(3, 3);
    } else {
      auto &m3 = std::get<Model3Params>(base);
      m3.omega_r = Matrix::Identity(3, 3);
      m3.omega_s = Matrix::Identity(9, 9);
    }
    const auto zero = precision(base, g);
    const auto other = precision(random_params(model, g, rng), g);
    CHECK(zero.nonzeros() == other.nonzeros());
  }
}

TEST_CASE("conditional moments agree with the joint precision") {
  Rng rng(31);
  for (int model = 1; model <= 3; ++model)
    for (int rep = 0; rep < 20; ++rep) {
      const auto g = random_graphs(rng);
      const auto p = random_params(model, g, rng);
      const Matrix q = dense_closed_form(p, g);
      const int I = g.n_units(), J = g.n_responses();
      Matrix u(I, J);
      for (long k = 0; k < u.size(); ++k)
        u.data()[k] = rng.normal();
      const Vector x = Eigen::Map<const Vector>(u.data(), u.size());
      for (int m = 0; m < I * J; ++m) {
        const double mean = -(q.row(m).dot(x) - q(m, m) * x[m]) / q(m, m);
        const auto c = conditional_moments(p, g, u, m % I, m / I);
        CHECK(c.mean == doctest::Approx(mean).epsilon(1e-10));
        CHECK(c.variance == doctest::Approx(1.0 / q(m, m)).epsilon(1e-10));
      }
    }
}

TEST_CASE("validation") {
  const auto g = ModelGraphs::make(path_graph(3), complete_graph(2));
  Model1Params m1{Vector::Ones(2), Vector::Zero(2), {0.0}, {0.0}};
  CHECK_FALSE(validate(m1, g));
  m1.lambda[1] = 1.5;
  auto v = validate(m1, g);
  REQUIRE(v);
  CHECK(v->parameter.rfind("lambda", 0) == 0);
  CHECK_THROWS_AS(validate_or_throw(m1, g), ValidationError);
  m1.lambda[1] = 0.0;
  m1.delta[0] = 0.0;
  CHECK(validate(m1, g));

  Model2Params m2{1.0, Matrix::Identity(2, 2)};
  CHECK(validate(m2, g));
  m2.rho = 0.5;
  CHECK_FALSE(validate(m2, g));
  m2.omega(0, 1) = m2.omega(1, 0) = 2.0;
  CHECK(validate(m2, g)); // not PD

  const auto gp = ModelGraphs::make(path_graph(3), empty_graph(2));
  Model2Params off{0.5, Matrix::Constant(2, 2, 0.1)};
  off.omega.diagonal().setOnes();
  CHECK(validate(off, gp)); // off pattern

  Model3Params m3{Matrix::Identity(2, 2), Matrix::Identity(3, 3), 1.0};
  CHECK_FALSE(validate(m3, g));
  m3.omega_r(0, 0) = 2.0;
  v = validate(m3, g);
  REQUIRE(v);
  CHECK(v->message.find("omega_r[1,1]") != std::string::npos);

  const auto isolated = ModelGraphs::make(empty_graph(3), complete_graph(2));
  CHECK(validate(Model2Params{0.0, Matrix::Identity(2, 2)}, isolated));
  CHECK_FALSE(validate(Model3Params{Matrix::Identity(2, 2), Matrix::Identity(3, 3), 1.0}, isolated));
}

TEST_CASE("parameter counts") {
  const auto g = ModelGraphs::make(grid_graph(2, 2), path_graph(3));
  CHECK(parameter_count(1, g) == 2 * 5);
  CHECK(parameter_count(2, g) == 5 + 1);
  CHECK(parameter_count(3, g) == 5 + 8);
}

TEST_CASE("pattern helpers") {
  const auto g = path_graph(3);
  Matrix m = Matrix::Identity(3, 3);
  m(0, 1) = m(1, 0) = 0.5;
  CHECK(on_pattern(m, g));
  m(0, 2) = m(2, 0) = 0.1;
  CHECK_FALSE(on_pattern(m, g));
  const auto r = restrict_to_pattern(m, g);
  CHECK(r.coeff(0, 2) == 0.0);
  CHECK(r.coeff(0, 1) == 0.5);
}
