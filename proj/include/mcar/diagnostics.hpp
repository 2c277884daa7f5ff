#pragma once

#include "mcar/data.hpp"
#include "mcar/fit.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mcar {

struct DICReport {
  std::string model; // label, e.g. "model2"
  double dbar = 0.0; // posterior mean deviance
  double dhat = 0.0; // deviance at posterior-mean p / eta
  double pd = 0.0;   // dbar - dhat
  double dic = 0.0;  // dbar + pd
  std::string focus = "mid-level (p, eta)";
};

// Throws ValidationError with fewer than two stored draws.
DICReport dic(const PosteriorSamples &samples, const ArealDataset &data);
// Report from given Dbar and pD; Dhat = Dbar - pD.
DICReport dic_from(const std::string &model, double dbar, double pd);

// Sorted by DIC ascending; ties keep input order. Throws ValidationError on
// fewer than two reports.
std::vector<DICReport> compare(const std::vector<DICReport> &reports);

// The DIC column is recomputed as Dbar + pD on input; a stated value that
// differs by more than one-decimal rounding is a parse error.
void write_dic_csv(std::ostream &out, const std::vector<DICReport> &reports);
std::vector<DICReport> read_dic_csv(std::istream &in);

struct Summary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0; // n - 1 denominator; 0 for one draw
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
};

// Quantile by linear interpolation of order statistics, p in [0, 1].
double quantile(std::vector<double> values, double p);
Summary summarize_trace(const std::string &name, const std::vector<double> &trace);

// Deviance, beta and hyperparameters. Throws ValidationError when empty.
std::vector<Summary> summarize(const PosteriorSamples &samples);
void write_summary_csv(std::ostream &out, const std::vector<Summary> &rows);

// Posterior mean and sd of u_ij = gamma_ij - beta_j, as I x J matrices.
struct UPosterior {
  Matrix mean;
  Matrix sd;
};
UPosterior posterior_u(const PosteriorSamples &samples);
// "unit,response,mean,sd", 1-based ids.
void write_u_means_csv(std::ostream &out, const UPosterior &u);

// Correlation across units of the posterior-mean columns of U. Entries
// involving a zero-variance column are NaN.
Matrix posterior_u_correlations(const PosteriorSamples &samples);
Matrix column_correlations(const Matrix &m);

} // namespace mcar
