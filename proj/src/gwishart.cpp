#include "mcar/gwishart.hpp"

#include "mcar/error.hpp"
#include "mcar/precision.hpp"

#include <cmath>

namespace mcar {

void GWishartParams::validate() const {
  if (!(b > 2.0))
    throw ValidationError("G-Wishart: degrees of freedom must exceed 2");
  if (scale.rows() != graph.n_vertices() || scale.cols() != graph.n_vertices())
    throw DimensionMismatch("G-Wishart: scale matrix does not match graph");
  if (!is_positive_definite(scale))
    throw ValidationError("G-Wishart: scale matrix not positive definite");
}

double gwishart_logdensity_unnorm(const Matrix &omega, const GWishartParams &p) {
  const int n = p.graph.n_vertices();
  if (omega.rows() != n || omega.cols() != n || p.scale.rows() != n || p.scale.cols() != n)
    throw DimensionMismatch("G-Wishart density: dimension mismatch");
  if (!on_pattern(omega, p.graph))
    throw OffPatternEntry("G-Wishart density: nonzero entry off the graph pattern");
  const double logdet = dense_log_det_pd(omega);
  return 0.5 * (p.b - 2.0) * logdet - 0.5 * (p.scale * omega).trace();
}

Matrix wishart_sample(double df, const Matrix &scale, Rng &rng) {
  const int d = static_cast<int>(scale.rows());
  if (scale.cols() != d || d == 0)
    throw DimensionMismatch("wishart: scale must be square");
  if (!(df > d - 1))
    throw ValidationError("wishart: degrees of freedom must exceed dim - 1");
  Eigen::LLT<Matrix> llt(scale);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("wishart: scale not positive definite");
  Matrix a = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(df - i));
    for (int j = 0; j < i; ++j)
      a(i, j) = rng.normal();
  }
  Matrix la = llt.matrixL() * a;
  Matrix w = la * la.transpose();
  return 0.5 * (w + w.transpose());
}

GWishartParams gwishart_posterior(const GWishartParams &prior, const Matrix &scatter, int n) {
  if (scatter.rows() != prior.scale.rows() || scatter.cols() != prior.scale.cols())
    throw DimensionMismatch("G-Wishart posterior: scatter matrix dimension mismatch");
  if (n < 0)
    throw ValidationError("G-Wishart posterior: negative sample size");
  return {prior.b + n, prior.scale + scatter, prior.graph};
}

Matrix gwishart_initial_state(const AdjacencyGraph &g) {
  return Matrix::Identity(g.n_vertices(), g.n_vertices());
}

namespace {

Matrix submatrix(const Matrix &m, const std::vector<int> &rows, const std::vector<int> &cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      out(a, b) = m(rows[a], cols[b]);
  return out;
}

std::vector<int> complement(const std::vector<int> &c, int n) {
  std::vector<int> out;
  std::size_t k = 0;
  for (int v = 0; v < n; ++v) {
    if (k < c.size() && c[k] == v)
      ++k;
    else
      out.push_back(v);
  }
  return out;
}

// Wishart draw of the clique Schur complement, optionally jittered.
Matrix draw_clique_block(const GWishartParams &p, const std::vector<int> &c, Rng &rng,
                         int attempt) {
  const Matrix v_cc = submatrix(p.scale, c, c);
  const Matrix scale = v_cc.inverse();
  Matrix k = wishart_sample(p.b + static_cast<double>(c.size()) - 1.0, 0.5 * (scale + scale.transpose()), rng);
  if (attempt > 0)
    k.diagonal().array() += 1e-10 * attempt * k.diagonal().mean();
  return k;
}

void check_state(const GWishartParams &p, const Matrix &state, int sweeps) {
  p.validate();
  if (sweeps < 1)
    throw ValidationError("G-Wishart sampler: sweeps must be >= 1");
  if (state.rows() != p.graph.n_vertices() || state.cols() != p.graph.n_vertices())
    throw DimensionMismatch("G-Wishart sampler: state dimension mismatch");
  if (!on_pattern(state, p.graph))
    throw OffPatternEntry("G-Wishart sampler: state has entries off the pattern");
}

template <class Sweep>
Matrix run_sweeps(const Matrix &state, int sweeps, Sweep &&sweep) {
  Matrix omega = state;
  constexpr int max_retries = 3;
  for (int s = 0; s < sweeps; ++s) {
    for (int attempt = 0;; ++attempt) {
      Matrix next = omega;
      bool ok = true;
      try {
        sweep(next, attempt);
      } catch (const NumericalError &) {
        ok = false;
      }
      if (ok && is_positive_definite(next)) {
        omega = std::move(next);
        break;
      }
      if (attempt == max_retries)
        throw NotPositiveDefinite("G-Wishart sampler: degenerate state after retries");
    }
  }
  return omega;
}

} // namespace

Matrix gwishart_sample(const GWishartParams &p, const CliqueSet &cliques, const Matrix &state,
                       int sweeps, Rng &rng) {
  check_state(p, state, sweeps);
  const int n = p.graph.n_vertices();
  return run_sweeps(state, sweeps, [&](Matrix &omega, int attempt) {
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("G-Wishart sampler: state not positive definite");
    Matrix sigma = llt.solve(Matrix::Identity(n, n));
    for (const auto &c : cliques.cliques) {
      const int k = static_cast<int>(c.size());
      const Matrix block = draw_clique_block(p, c, rng, attempt);
      const Matrix old_cc = submatrix(omega, c, c);
      Matrix new_cc = block;
      if (k < n) {
        // Omega_CR Omega_RR^{-1} Omega_RC = Omega_CC - (Sigma_CC)^{-1}.
        Eigen::LLT<Matrix> s_cc(submatrix(sigma, c, c));
        if (s_cc.info() != Eigen::Success)
          throw NotPositiveDefinite("G-Wishart sampler: running inverse degenerate");
        new_cc += old_cc - s_cc.solve(Matrix::Identity(k, k));
      }
      new_cc = (0.5 * (new_cc + new_cc.transpose())).eval();
      const Matrix delta = new_cc - old_cc;
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
          omega(c[a], c[b]) = new_cc(a, b);
      // (Omega + E D E')^{-1} = Sigma - Sigma E D (I + E' Sigma E D)^{-1} E' Sigma.
      Matrix sigma_c(n, k);
      for (int a = 0; a < k; ++a)
        sigma_c.col(a) = sigma.col(c[a]);
      const Matrix inner = Matrix::Identity(k, k) + submatrix(sigma, c, c) * delta;
      Eigen::PartialPivLU<Matrix> lu(inner);
      const Matrix correction = sigma_c * delta * lu.solve(sigma_c.transpose());
      sigma -= correction;
      sigma = (0.5 * (sigma + sigma.transpose())).eval();
    }
  });
}

Matrix gwishart_sample_reference(const GWishartParams &p, const CliqueSet &cliques,
                                 const Matrix &state, int sweeps, Rng &rng) {
  check_state(p, state, sweeps);
  const int n = p.graph.n_vertices();
  return run_sweeps(state, sweeps, [&](Matrix &omega, int attempt) {
    for (const auto &c : cliques.cliques) {
      const Matrix block = draw_clique_block(p, c, rng, attempt);
      Matrix new_cc = block;
      const auto rest = complement(c, n);
      if (!rest.empty()) {
        const Matrix o_cr = submatrix(omega, c, rest);
        Eigen::LLT<Matrix> rr(submatrix(omega, rest, rest));
        if (rr.info() != Eigen::Success)
          throw NotPositiveDefinite("G-Wishart reference: complement block not PD");
        new_cc += o_cr * rr.solve(o_cr.transpose());
      }
      new_cc = (0.5 * (new_cc + new_cc.transpose())).eval();
      for (std::size_t a = 0; a < c.size(); ++a)
        for (std::size_t b = 0; b < c.size(); ++b)
          omega(c[a], c[b]) = new_cc(a, b);
    }
  });
}

} // namespace mcar
