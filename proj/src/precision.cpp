#include "mcar/precision.hpp"

#include "mcar/error.hpp"

#include <cmath>
#include <sstream>

namespace mcar {

ModelGraphs ModelGraphs::make(AdjacencyGraph spatial, AdjacencyGraph response) {
  ModelGraphs g;
  g.joint = build_joint_adjacency(spatial, response, JointVariant::full);
  g.spatial = std::move(spatial);
  g.response = std::move(response);
  return g;
}

int model_id(const ModelParams &p) { return static_cast<int>(p.index()) + 1; }

namespace {

std::string idx1(int a) { return "[" + std::to_string(a + 1) + "]"; }
std::string idx2(int a, int b) { return "[" + std::to_string(a + 1) + "," + std::to_string(b + 1) + "]"; }

// J x J table of response-edge indices, -1 off the graph.
std::vector<int> edge_table(const AdjacencyGraph &r) {
  const int J = r.n_vertices();
  std::vector<int> t(static_cast<std::size_t>(J * J), -1);
  const auto edges = r.edges();
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
    auto [a, b] = edges[e];
    t[a * J + b] = e;
    t[b * J + a] = e;
  }
  return t;
}

ElementSpec assemble_spec(int n, std::vector<Triplet> &b, Vector tau2) {
  ElementSpec s;
  s.b.resize(n, n);
  s.b.setFromTriplets(b.begin(), b.end());
  s.b.makeCompressed();
  s.tau2 = std::move(tau2);
  return s;
}

void check_model1_dims(const Model1Params &p, const ModelGraphs &g) {
  const auto J = g.n_responses();
  const auto E = static_cast<std::size_t>(g.response.n_edges());
  if (p.delta.size() != J || p.lambda.size() != J || p.psi.size() != E || p.phi.size() != E)
    throw DimensionMismatch("model 1: parameter dimensions do not match the response graph");
}

void check_square(const Matrix &m, int n, const char *what) {
  if (m.rows() != n || m.cols() != n)
    throw DimensionMismatch(std::string(what) + ": expected " + std::to_string(n) + " x " +
                            std::to_string(n));
}

} // namespace

ElementSpec model1_BT(const Model1Params &p, const ModelGraphs &g) {
  check_model1_dims(p, g);
  const int I = g.n_units(), J = g.n_responses();
  const auto edge = edge_table(g.response);
  std::vector<Triplet> b;
  Vector tau2(I * J);
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < I; ++i) {
      const int m = g.joint.index(i, j);
      const double d = g.joint.graph.degree(m);
      if (d == 0)
        throw ValidationError("model 1: element " + idx2(i, j) + " has zero joint degree");
      for (int i2 : g.spatial.neighbors(i))
        b.emplace_back(m, g.joint.index(i2, j), p.lambda[j] / d);
      for (int j2 : g.response.neighbors(j)) {
        const int e = edge[j * J + j2];
        const double scale = std::sqrt(p.delta[j] / p.delta[j2]);
        b.emplace_back(m, g.joint.index(i, j2), p.psi[e] / d * scale);
        for (int i2 : g.spatial.neighbors(i))
          b.emplace_back(m, g.joint.index(i2, j2), p.phi[e] / d * scale);
      }
      tau2[m] = p.delta[j] / d;
    }
  return assemble_spec(I * J, b, std::move(tau2));
}

ElementSpec model2_BT(const Model2Params &p, const ModelGraphs &g) {
  const int I = g.n_units(), J = g.n_responses();
  check_square(p.omega, J, "model 2 omega");
  std::vector<Triplet> b;
  Vector tau2(I * J);
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < I; ++i) {
      const int m = g.joint.index(i, j);
      const double d = g.spatial.degree(i);
      if (d == 0)
        throw ValidationError("model 2: unit " + idx1(i) + " has no spatial neighbour");
      const double wjj = p.omega(j, j);
      for (int i2 : g.spatial.neighbors(i))
        b.emplace_back(m, g.joint.index(i2, j), p.rho / d);
      for (int j2 : g.response.neighbors(j)) {
        const double w = p.omega(j, j2);
        b.emplace_back(m, g.joint.index(i, j2), -w / wjj);
        for (int i2 : g.spatial.neighbors(i))
          b.emplace_back(m, g.joint.index(i2, j2), p.rho * w / (d * wjj));
      }
      tau2[m] = 1.0 / (d * wjj);
    }
  return assemble_spec(I * J, b, std::move(tau2));
}

ElementSpec model3_BT(const Model3Params &p, const ModelGraphs &g) {
  const int I = g.n_units(), J = g.n_responses();
  check_square(p.omega_r, J, "model 3 omega_r");
  check_square(p.omega_s, I, "model 3 omega_s");
  std::vector<Triplet> b;
  Vector tau2(I * J);
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < I; ++i) {
      const int m = g.joint.index(i, j);
      const double sii = p.omega_s(i, i), rjj = p.omega_r(j, j);
      if (!(sii > 0.0) || !(rjj > 0.0))
        throw ValidationError("model 3: nonpositive diagonal at element " + idx2(i, j));
      for (int i2 : g.spatial.neighbors(i))
        b.emplace_back(m, g.joint.index(i2, j), -p.omega_s(i, i2) / sii);
      for (int j2 : g.response.neighbors(j)) {
        b.emplace_back(m, g.joint.index(i, j2), -p.omega_r(j, j2) / rjj);
        for (int i2 : g.spatial.neighbors(i))
          b.emplace_back(m, g.joint.index(i2, j2),
                         -p.omega_s(i, i2) * p.omega_r(j, j2) / (sii * rjj));
      }
      tau2[m] = 1.0 / (sii * rjj);
    }
  return assemble_spec(I * J, b, std::move(tau2));
}

ElementSpec element_spec(const ModelParams &p, const ModelGraphs &g) {
  return std::visit(
      [&](const auto &q) -> ElementSpec {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, Model1Params>)
          return model1_BT(q, g);
        else if constexpr (std::is_same_v<T, Model2Params>)
          return model2_BT(q, g);
        else
          return model3_BT(q, g);
      },
      p);
}

Matrix dense_precision_from_spec(const ElementSpec &spec) {
  const auto n = spec.tau2.size();
  Matrix ib = Matrix::Identity(n, n) - Matrix(spec.b);
  return spec.tau2.cwiseInverse().asDiagonal() * ib;
}

SparseSymMatrix model1_inner(const Model1Params &p, const ModelGraphs &g) {
  check_model1_dims(p, g);
  const int I = g.n_units(), J = g.n_responses();
  const auto edge = edge_table(g.response);
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(I * J) + g.joint.graph.n_edges());
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < I; ++i) {
      const int m = g.joint.index(i, j);
      t.emplace_back(m, m, static_cast<double>(g.joint.graph.degree(m)));
      for (int i2 : g.spatial.neighbors(i))
        if (i2 > i)
          t.emplace_back(m, g.joint.index(i2, j), -p.lambda[j]);
      for (int j2 : g.response.neighbors(j)) {
        if (j2 < j)
          continue;
        const int e = edge[j * J + j2];
        t.emplace_back(m, g.joint.index(i, j2), -p.psi[e]);
        for (int i2 : g.spatial.neighbors(i))
          t.emplace_back(m, g.joint.index(i2, j2), -p.phi[e]);
      }
    }
  return SparseSymMatrix::from_triplets(I * J, t);
}

SparseSymMatrix model1_precision(const Model1Params &p, const ModelGraphs &g) {
  const auto m = model1_inner(p, g);
  const int I = g.n_units();
  Vector s(m.dim());
  for (int v = 0; v < m.dim(); ++v)
    s[v] = 1.0 / std::sqrt(p.delta[v / I]);
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(m.upper().nonZeros()));
  const auto &u = m.upper();
  for (int c = 0; c < u.outerSize(); ++c)
    for (SparseColMatrix::InnerIterator it(u, c); it; ++it)
      t.emplace_back(it.row(), c, s[it.row()] * it.value() * s[c]);
  return SparseSymMatrix::from_triplets(m.dim(), t);
}

SparseSymMatrix car_precision(const AdjacencyGraph &g, double rho) {
  std::vector<Triplet> t;
  for (int i = 0; i < g.n_vertices(); ++i) {
    t.emplace_back(i, i, static_cast<double>(g.degree(i)));
    for (int i2 : g.neighbors(i))
      if (i2 > i)
        t.emplace_back(i, i2, -rho);
  }
  return SparseSymMatrix::from_triplets(g.n_vertices(), t);
}

SparseSymMatrix restrict_to_pattern(const Matrix &m, const AdjacencyGraph &g) {
  check_square(m, g.n_vertices(), "restrict_to_pattern");
  std::vector<Triplet> t;
  for (int i = 0; i < g.n_vertices(); ++i) {
    t.emplace_back(i, i, m(i, i));
    for (int i2 : g.neighbors(i))
      if (i2 > i)
        t.emplace_back(i, i2, m(i, i2));
  }
  return SparseSymMatrix::from_triplets(g.n_vertices(), t);
}

SparseSymMatrix kron_on_pattern(const Matrix &a, const AdjacencyGraph &a_pattern,
                                const SparseSymMatrix &b) {
  const int J = a_pattern.n_vertices();
  check_square(a, J, "kron_on_pattern");
  const int n = b.dim();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(J + 2 * a_pattern.n_edges()) *
            static_cast<std::size_t>(b.nonzeros()));
  auto add_block = [&](int j, int j2, const auto &mat) {
    const double w = a(j, j2);
    for (int c = 0; c < mat.outerSize(); ++c)
      for (typename std::decay_t<decltype(mat)>::InnerIterator it(mat, c); it; ++it)
        t.emplace_back(j * n + static_cast<int>(it.row()), j2 * n + static_cast<int>(it.col()),
                       w * it.value());
  };
  for (int j = 0; j < J; ++j) {
    add_block(j, j, b.upper());
    for (int j2 : a_pattern.neighbors(j))
      if (j2 > j)
        add_block(j, j2, b.full());
  }
  return SparseSymMatrix::from_triplets(J * n, t);
}

SparseSymMatrix model2_precision(const Model2Params &p, const ModelGraphs &g) {
  check_square(p.omega, g.n_responses(), "model 2 omega");
  return kron_on_pattern(p.omega, g.response, car_precision(g.spatial, p.rho));
}

SparseSymMatrix model3_precision(const Model3Params &p, const ModelGraphs &g) {
  check_square(p.omega_r, g.n_responses(), "model 3 omega_r");
  return kron_on_pattern(p.omega_r, g.response, restrict_to_pattern(p.omega_s, g.spatial));
}

SparseSymMatrix precision(const ModelParams &p, const ModelGraphs &g) {
  return std::visit(
      [&](const auto &q) -> SparseSymMatrix {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, Model1Params>)
          return model1_precision(q, g);
        else if constexpr (std::is_same_v<T, Model2Params>)
          return model2_precision(q, g);
        else
          return model3_precision(q, g);
      },
      p);
}

ConditionalMoments conditional_moments(const ModelParams &params, const ModelGraphs &g,
                                       const Matrix &u, int i, int j) {
  if (u.rows() != g.n_units() || u.cols() != g.n_responses())
    throw DimensionMismatch("conditional_moments: field has wrong shape");
  const auto &sn = g.spatial.neighbors(i);
  const auto &rn = g.response.neighbors(j);

  if (const auto *p = std::get_if<Model1Params>(&params)) {
    // Weighted average over spatial, response and interaction neighbours.
    const double d = g.joint.degree(i, j);
    double spatial = 0.0;
    for (int i2 : sn)
      spatial += u(i2, j);
    double cross = 0.0;
    for (int j2 : rn) {
      const int e = g.response.edge_index(j, j2);
      const double scale = std::sqrt(p->delta[j] / p->delta[j2]);
      double inter = 0.0;
      for (int i2 : sn)
        inter += u(i2, j2);
      cross += p->psi[e] * scale * u(i, j2) + p->phi[e] * scale * inter;
    }
    return {(p->lambda[j] * spatial + cross) / d, p->delta[j] / d};
  }

  if (const auto *p = std::get_if<Model2Params>(&params)) {
    // Difference from the CAR smoother regressed on the other responses'
    // differences.
    const double d = g.spatial.degree(i);
    auto smoothed = [&](int col) {
      double s = 0.0;
      for (int i2 : sn)
        s += u(i2, col);
      return p->rho / d * s;
    };
    double regression = 0.0;
    for (int j2 : rn)
      regression -= p->omega(j, j2) / p->omega(j, j) * (u(i, j2) - smoothed(j2));
    return {smoothed(j) + regression, 1.0 / (d * p->omega(j, j))};
  }

  const auto &p = std::get<Model3Params>(params);
  const double sii = p.omega_s(i, i);
  auto smoothed = [&](int col) {
    double s = 0.0;
    for (int i2 : sn)
      s += p.omega_s(i, i2) * u(i2, col);
    return -s / sii;
  };
  double regression = 0.0;
  for (int j2 : rn)
    regression -= p.omega_r(j, j2) / p.omega_r(j, j) * (u(i, j2) - smoothed(j2));
  return {smoothed(j) + regression, 1.0 / (sii * p.omega_r(j, j))};
}

bool on_pattern(const Matrix &m, const AdjacencyGraph &g) {
  const int n = g.n_vertices();
  if (m.rows() != n || m.cols() != n)
    return false;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b && m(a, b) != 0.0 && !g.has_edge(a, b))
        return false;
  return true;
}

namespace {

std::optional<Violation> check_gw_matrix(const Matrix &m, const AdjacencyGraph &g,
                                         const std::string &name) {
  const int n = g.n_vertices();
  if (m.rows() != n || m.cols() != n)
    return Violation{name, "expected " + std::to_string(n) + " x " + std::to_string(n) + " matrix"};
  if (m != m.transpose())
    return Violation{name, "not symmetric"};
  if (!on_pattern(m, g))
    return Violation{name, "nonzero entry off the graph pattern"};
  if (!is_positive_definite(m))
    return Violation{name, "not positive definite"};
  return std::nullopt;
}

} // namespace

std::optional<Violation> validate(const ModelParams &params, const ModelGraphs &g) {
  const int I = g.n_units(), J = g.n_responses();

  if (const auto *p = std::get_if<Model1Params>(&params)) {
    const auto E = static_cast<std::size_t>(g.response.n_edges());
    if (p->delta.size() != J || p->lambda.size() != J || p->psi.size() != E || p->phi.size() != E)
      return Violation{"dimensions", "model 1 parameters do not match the response graph"};
    for (int j = 0; j < J; ++j)
      for (int i = 0; i < I; ++i)
        if (g.joint.degree(i, j) == 0)
          return Violation{"graph", "element " + idx2(i, j) + " has zero joint degree"};
    for (int j = 0; j < J; ++j)
      if (!(p->delta[j] > 0.0))
        return Violation{"delta" + idx1(j), "variance component must be positive"};
    const std::string cond = "sufficient condition |lambda|, |psi|, |phi| < 1 violated";
    for (int j = 0; j < J; ++j)
      if (!(std::abs(p->lambda[j]) < 1.0))
        return Violation{"lambda" + idx1(j), cond};
    const auto edges = g.response.edges();
    for (std::size_t e = 0; e < E; ++e) {
      if (!(std::abs(p->psi[e]) < 1.0))
        return Violation{"psi" + idx2(edges[e].first, edges[e].second), cond};
      if (!(std::abs(p->phi[e]) < 1.0))
        return Violation{"phi" + idx2(edges[e].first, edges[e].second), cond};
    }
    return std::nullopt;
  }

  if (const auto *p = std::get_if<Model2Params>(&params)) {
    for (int i = 0; i < I; ++i)
      if (g.spatial.degree(i) == 0)
        return Violation{"graph", "unit " + idx1(i) + " has no spatial neighbour"};
    if (!(std::abs(p->rho) < 1.0))
      return Violation{"rho", "smoothing parameter requires |rho| < 1"};
    return check_gw_matrix(p->omega, g.response, "omega");
  }

  const auto &p = std::get<Model3Params>(params);
  if (p.omega_r.rows() != J || p.omega_r.cols() != J)
    return Violation{"omega_r", "expected " + std::to_string(J) + " x " + std::to_string(J) + " matrix"};
  if (std::abs(p.omega_r(0, 0) - 1.0) > 1e-12)
    return Violation{"omega_r[1,1]", "identification constraint omega_r[1,1] = 1 violated"};
  if (auto v = check_gw_matrix(p.omega_r, g.response, "omega_r"))
    return v;
  if (auto v = check_gw_matrix(p.omega_s, g.spatial, "omega_s"))
    return v;
  if (!(p.z > 0.0))
    return Violation{"z", "auxiliary scale must be positive"};
  return std::nullopt;
}

void validate_or_throw(const ModelParams &p, const ModelGraphs &g) {
  if (auto v = validate(p, g))
    throw ValidationError("model " + std::to_string(model_id(p)) + ": " + v->parameter + ": " +
                          v->message);
}

long parameter_count(int model, const ModelGraphs &g) {
  switch (model) {
  case 1: return 2 * nu(g.response);
  case 2: return nu(g.response) + 1;
  case 3: return nu(g.response) + nu(g.spatial);
  default: throw ValidationError("unknown model " + std::to_string(model));
  }
}

} // namespace mcar
