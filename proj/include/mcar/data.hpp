#pragma once

#include "mcar/kernels.hpp"
#include "mcar/sparse.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mcar {

enum class Likelihood { binomial_logit, poisson_lognormal };

Likelihood parse_likelihood(const std::string &tag);
std::string likelihood_tag(Likelihood l); // "binlogit" / "poislognorm"

// Counts y_ij with exposures (trials n_ij or expected counts E_ij). Element
// (i, j) is stored at j * n_units + i.
struct ArealDataset {
  int n_units = 0;
  int n_responses = 0;
  std::vector<long> y;
  std::vector<double> exposure;
  std::vector<Likelihood> likelihood; // per response

  int index(int unit, int response) const { return response * n_units + unit; }
  // Throws ValidationError on size or range problems.
  void validate() const;
  bool operator==(const ArealDataset &) const = default;
};

// Binomial: log C(n, y) + y g - n log(1 + e^g).
// Poisson:  -E e^g + y (log E + g) - log y!.
double loglik_element(long y, double exposure, double gamma, Likelihood tag);

// gamma is vec of the I x J linear predictor.
double total_loglik(const ArealDataset &data, const Vector &gamma,
                    kernels::Exec exec = kernels::Exec::parallel);
double deviance(const ArealDataset &data, const Vector &gamma,
                kernels::Exec exec = kernels::Exec::parallel);

// Mid-level parameter: p = logistic(g) or eta = exp(g), and its inverse.
double mean_parameter(double gamma, Likelihood tag);
double linear_predictor(double mean, Likelihood tag);

// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string &text);
// Splits one CSV line, honouring double-quoted fields. Throws ParseError on
// an unterminated quote.
std::vector<std::string> split_csv(const std::string &line, int line_no = 0);

// CSV "unit,response,y,exposure,likelihood" with 1-based ids. Lines starting
// with '#' are ignored on input.
ArealDataset read_dataset(std::istream &in);
ArealDataset read_dataset_file(const std::string &path);
void write_dataset(std::ostream &out, const ArealDataset &data);

} // namespace mcar
