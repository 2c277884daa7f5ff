#include "mcar/data.hpp"

#include "mcar/error.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mcar {

Likelihood parse_likelihood(const std::string &tag) {
  if (tag == "binlogit")
    return Likelihood::binomial_logit;
  if (tag == "poislognorm")
    return Likelihood::poisson_lognormal;
  throw ValidationError("unknown likelihood '" + tag + "' (expected binlogit or poislognorm)");
}

std::string likelihood_tag(Likelihood l) {
  return l == Likelihood::binomial_logit ? "binlogit" : "poislognorm";
}

void ArealDataset::validate() const {
  const auto n = static_cast<std::size_t>(n_units) * static_cast<std::size_t>(n_responses);
  if (n_units < 1 || n_responses < 1)
    throw ValidationError("dataset: needs at least one unit and one response");
  if (y.size() != n || exposure.size() != n ||
      likelihood.size() != static_cast<std::size_t>(n_responses))
    throw DimensionMismatch("dataset: array sizes do not match I x J");
  for (int j = 0; j < n_responses; ++j)
    for (int i = 0; i < n_units; ++i) {
      const auto k = static_cast<std::size_t>(index(i, j));
      const std::string where = " at unit " + std::to_string(i + 1) + ", response " + std::to_string(j + 1);
      if (y[k] < 0)
        throw ValidationError("dataset: negative count" + where);
      if (likelihood[j] == Likelihood::binomial_logit) {
        if (exposure[k] < 0 || exposure[k] != std::floor(exposure[k]))
          throw ValidationError("dataset: binomial trials must be a nonnegative integer" + where);
        if (static_cast<double>(y[k]) > exposure[k])
          throw ValidationError("dataset: count exceeds trials" + where);
      } else if (!(exposure[k] > 0.0)) {
        throw ValidationError("dataset: Poisson exposure must be positive" + where);
      }
    }
}

namespace {

// log(1 + e^g) without overflow.
double softplus(double g) { return g > 0.0 ? g + std::log1p(std::exp(-g)) : std::log1p(std::exp(g)); }

} // namespace

double loglik_element(long y, double exposure, double gamma, Likelihood tag) {
  const double yd = static_cast<double>(y);
  if (tag == Likelihood::binomial_logit) {
    if (exposure == 0.0)
      return 0.0;
    const double log_choose =
        std::lgamma(exposure + 1.0) - std::lgamma(yd + 1.0) - std::lgamma(exposure - yd + 1.0);
    return log_choose + yd * gamma - exposure * softplus(gamma);
  }
  return -exposure * std::exp(gamma) + yd * (std::log(exposure) + gamma) - std::lgamma(yd + 1.0);
}

double total_loglik(const ArealDataset &data, const Vector &gamma, kernels::Exec exec) {
  if (static_cast<std::size_t>(gamma.size()) != data.y.size())
    throw DimensionMismatch("total_loglik: predictor length mismatch");
  const int I = data.n_units;
  return kernels::ordered_sum(
      data.y.size(),
      [&](std::size_t k) {
        return loglik_element(data.y[k], data.exposure[k], gamma[static_cast<long>(k)],
                              data.likelihood[k / static_cast<std::size_t>(I)]);
      },
      exec);
}

double deviance(const ArealDataset &data, const Vector &gamma, kernels::Exec exec) {
  return -2.0 * total_loglik(data, gamma, exec);
}

double mean_parameter(double gamma, Likelihood tag) {
  if (tag == Likelihood::binomial_logit)
    return gamma >= 0.0 ? 1.0 / (1.0 + std::exp(-gamma)) : std::exp(gamma) / (1.0 + std::exp(gamma));
  return std::exp(gamma);
}

double linear_predictor(double mean, Likelihood tag) {
  if (tag == Likelihood::binomial_logit)
    return std::log(mean) - std::log1p(-mean);
  return std::log(mean);
}

std::string csv_field(const std::string &text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos)
    return text;
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"')
      out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string &line, int line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch != '"')
        fields.back() += ch;
      else if (k + 1 < line.size() && line[k + 1] == '"')
        fields.back() += line[++k];
      else
        quoted = false;
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted)
    throw ParseError("unterminated quoted field", line_no);
  return fields;
}

ArealDataset read_dataset(std::istream &in) {
  struct Row {
    long unit, response, y;
    double exposure;
    Likelihood tag;
    int line;
  };
  std::vector<Row> rows;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;
    if (!header) {
      if (line != "unit,response,y,exposure,likelihood")
        throw ParseError("expected header 'unit,response,y,exposure,likelihood'", line_no);
      header = true;
      continue;
    }
    const auto f = split_csv(line, line_no);
    if (f.size() != 5)
      throw ParseError("expected 5 fields", line_no);
    try {
      std::size_t pos = 0;
      Row r{};
      r.unit = std::stol(f[0], &pos);
      r.response = std::stol(f[1]);
      r.y = std::stol(f[2]);
      r.exposure = std::stod(f[3]);
      r.tag = parse_likelihood(f[4]);
      r.line = line_no;
      if (r.unit < 1 || r.response < 1)
        throw ParseError("ids are 1-based", line_no);
      rows.push_back(r);
    } catch (const ParseError &) {
      throw;
    } catch (const ValidationError &e) {
      throw ParseError(e.what(), line_no);
    } catch (const std::exception &) {
      throw ParseError("malformed number", line_no);
    }
  }
  if (!header)
    throw ParseError("empty dataset", 0);
  ArealDataset d;
  for (const auto &r : rows) {
    d.n_units = std::max<int>(d.n_units, static_cast<int>(r.unit));
    d.n_responses = std::max<int>(d.n_responses, static_cast<int>(r.response));
  }
  const auto n = static_cast<std::size_t>(d.n_units) * static_cast<std::size_t>(d.n_responses);
  d.y.assign(n, -1);
  d.exposure.assign(n, 0.0);
  std::vector<int> tag_set(static_cast<std::size_t>(d.n_responses), -1);
  d.likelihood.assign(static_cast<std::size_t>(d.n_responses), Likelihood::binomial_logit);
  for (const auto &r : rows) {
    const int i = static_cast<int>(r.unit - 1), j = static_cast<int>(r.response - 1);
    const auto k = static_cast<std::size_t>(d.index(i, j));
    if (d.y[k] != -1)
      throw ParseError("duplicate row for unit " + std::to_string(r.unit) + ", response " +
                           std::to_string(r.response),
                       r.line);
    d.y[k] = r.y;
    d.exposure[k] = r.exposure;
    const int t = static_cast<int>(r.tag);
    if (tag_set[j] >= 0 && tag_set[j] != t)
      throw ParseError("response " + std::to_string(r.response) + " mixes likelihoods", r.line);
    tag_set[j] = t;
    d.likelihood[j] = r.tag;
  }
  if (rows.size() != n)
    throw ParseError("expected " + std::to_string(n) + " rows for " + std::to_string(d.n_units) +
                         " units x " + std::to_string(d.n_responses) + " responses, found " +
                         std::to_string(rows.size()),
                     0);
  d.validate();
  return d;
}

ArealDataset read_dataset_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open data file '" + path + "'");
  try {
    return read_dataset(in);
  } catch (const ParseError &e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void write_dataset(std::ostream &out, const ArealDataset &data) {
  out << "unit,response,y,exposure,likelihood\n" << std::setprecision(17);
  for (int j = 0; j < data.n_responses; ++j)
    for (int i = 0; i < data.n_units; ++i) {
      const auto k = static_cast<std::size_t>(data.index(i, j));
      out << i + 1 << "," << j + 1 << "," << data.y[k] << "," << data.exposure[k] << ","
          << likelihood_tag(data.likelihood[j]) << "\n";
    }
}

} // namespace mcar
