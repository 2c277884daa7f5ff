#include "mcar/diagnostics.hpp"

#include "mcar/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace mcar {

namespace {

// Sum after sorting so the result does not depend on draw order.
double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0);
}

double sorted_mean(const std::vector<double> &v) { return sorted_sum(v) / static_cast<double>(v.size()); }

} // namespace

DICReport dic(const PosteriorSamples &samples, const ArealDataset &data) {
  if (samples.size() < 2)
    throw ValidationError("dic: need at least two stored draws");
  const int I = data.n_units;
  const long n = static_cast<long>(I) * data.n_responses;
  if (samples.gamma.front().size() != n)
    throw DimensionMismatch("dic: samples and data dimensions differ");
  Vector plug(n);
  std::vector<double> buf(samples.size());
  for (long m = 0; m < n; ++m) {
    const Likelihood tag = data.likelihood[static_cast<std::size_t>(m / I)];
    for (std::size_t k = 0; k < samples.size(); ++k)
      buf[k] = mean_parameter(samples.gamma[k][m], tag);
    plug[m] = linear_predictor(sorted_mean(buf), tag);
  }
  DICReport r;
  r.model = "model" + std::to_string(samples.model);
  r.dbar = sorted_mean(samples.deviance);
  r.dhat = deviance(data, plug);
  r.pd = r.dbar - r.dhat;
  r.dic = r.dbar + r.pd;
  return r;
}

DICReport dic_from(const std::string &model, double dbar, double pd) {
  DICReport r;
  r.model = model;
  r.dbar = dbar;
  r.pd = pd;
  r.dhat = dbar - pd;
  r.dic = dbar + pd;
  return r;
}

std::vector<DICReport> compare(const std::vector<DICReport> &reports) {
  if (reports.size() < 2)
    throw ValidationError("compare: need at least two DIC reports");
  auto out = reports;
  std::stable_sort(out.begin(), out.end(), [](const DICReport &a, const DICReport &b) { return a.dic < b.dic; });
  return out;
}

void write_dic_csv(std::ostream &out, const std::vector<DICReport> &reports) {
  out << std::setprecision(17);
  out << "model,Dbar,pD,DIC,Dhat,focus\n";
  for (const auto &r : reports)
    out << r.model << "," << r.dbar << "," << r.pd << "," << r.dic << "," << r.dhat << "," << csv_field(r.focus) << "\n";
}

std::vector<DICReport> read_dic_csv(std::istream &in) {
  std::vector<DICReport> out;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#')
      continue;
    const auto f = split_csv(line, line_no);
    if (!header) {
      if (f.size() < 4 || f[0] != "model" || f[1] != "Dbar" || f[2] != "pD" || f[3] != "DIC")
        throw ParseError("dic: expected header 'model,Dbar,pD,DIC,...'", line_no);
      header = true;
      continue;
    }
    if (f.size() < 4)
      throw ParseError("dic: expected at least 4 fields", line_no);
    try {
      DICReport r = dic_from(f[0], std::stod(f[1]), std::stod(f[2]));
      const double stated = std::stod(f[3]);
      // Tabulated reports may round each column to one decimal.
      if (std::abs(stated - r.dic) > 0.1 + 1e-9 * std::abs(stated))
        throw ParseError("dic: DIC differs from Dbar + pD", line_no);
      if (f.size() > 4 && !f[4].empty())
        r.dhat = std::stod(f[4]);
      if (f.size() > 5)
        r.focus = f[5];
      out.push_back(r);
    } catch (const std::invalid_argument &) {
      throw ParseError("dic: malformed number", line_no);
    } catch (const std::out_of_range &) {
      throw ParseError("dic: number out of range", line_no);
    }
  }
  if (!header)
    throw ParseError("dic: empty file", 0);
  return out;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty())
    throw ValidationError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Summary summarize_trace(const std::string &name, const std::vector<double> &trace) {
  if (trace.empty())
    throw ValidationError("summarize: empty trace for " + name);
  Summary s;
  s.name = name;
  std::vector<double> sorted = trace;
  std::sort(sorted.begin(), sorted.end());
  s.mean = sorted_mean(sorted);
  if (sorted.size() > 1) {
    std::vector<double> sq(sorted.size());
    for (std::size_t k = 0; k < sorted.size(); ++k)
      sq[k] = (sorted[k] - s.mean) * (sorted[k] - s.mean);
    s.sd = std::sqrt(sorted_sum(sq) / static_cast<double>(sorted.size() - 1));
  }
  s.q025 = quantile(sorted, 0.025);
  s.median = quantile(sorted, 0.5);
  s.q975 = quantile(sorted, 0.975);
  return s;
}

std::vector<Summary> summarize(const PosteriorSamples &samples) {
  if (samples.size() == 0)
    throw ValidationError("summarize: empty sample set");
  std::vector<Summary> out;
  out.push_back(summarize_trace("deviance", samples.deviance));
  std::vector<double> trace(samples.size());
  for (int j = 0; j < samples.n_responses; ++j) {
    for (std::size_t k = 0; k < samples.size(); ++k)
      trace[k] = samples.beta[k][j];
    out.push_back(summarize_trace("beta[" + std::to_string(j + 1) + "]", trace));
  }
  for (std::size_t h = 0; h < samples.hyper_names.size(); ++h) {
    for (std::size_t k = 0; k < samples.size(); ++k)
      trace[k] = samples.hyper[k][h];
    out.push_back(summarize_trace(samples.hyper_names[h], trace));
  }
  return out;
}

void write_summary_csv(std::ostream &out, const std::vector<Summary> &rows) {
  out << std::setprecision(17);
  out << "parameter,mean,sd,q025,median,q975\n";
  for (const auto &r : rows)
    out << csv_field(r.name) << "," << r.mean << "," << r.sd << "," << r.q025 << "," << r.median << "," << r.q975 << "\n";
}

UPosterior posterior_u(const PosteriorSamples &samples) {
  if (samples.size() == 0)
    throw ValidationError("posterior_u: empty sample set");
  const int I = samples.n_units, J = samples.n_responses;
  UPosterior u{Matrix(I, J), Matrix(I, J)};
  std::vector<double> trace(samples.size());
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < I; ++i) {
      for (std::size_t k = 0; k < samples.size(); ++k)
        trace[k] = samples.gamma[k][j * I + i] - samples.beta[k][j];
      const auto s = summarize_trace("u", trace);
      u.mean(i, j) = s.mean;
      u.sd(i, j) = s.sd;
    }
  return u;
}

void write_u_means_csv(std::ostream &out, const UPosterior &u) {
  out << std::setprecision(17);
  out << "unit,response,mean,sd\n";
  for (long j = 0; j < u.mean.cols(); ++j)
    for (long i = 0; i < u.mean.rows(); ++i)
      out << i + 1 << "," << j + 1 << "," << u.mean(i, j) << "," << u.sd(i, j) << "\n";
}

Matrix column_correlations(const Matrix &m) {
  const long J = m.cols();
  const Matrix centered = m.rowwise() - m.colwise().mean();
  const Vector norms = centered.colwise().norm();
  Matrix r(J, J);
  for (long a = 0; a < J; ++a)
    for (long b = 0; b < J; ++b) {
      if (norms[a] == 0.0 || norms[b] == 0.0)
        r(a, b) = std::numeric_limits<double>::quiet_NaN();
      else if (a == b)
        r(a, b) = 1.0;
      else
        r(a, b) = centered.col(a).dot(centered.col(b)) / (norms[a] * norms[b]);
    }
  return r;
}

Matrix posterior_u_correlations(const PosteriorSamples &samples) {
  return column_correlations(posterior_u(samples).mean);
}

} // namespace mcar
