#pragma once

#include "mcar/rng.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mcar {

// Open interval of admissible values for a scalar parameter.
struct Support {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool contains(double x) const { return x > lower && x < upper; }
};

// Scalar Gaussian random-walk proposal with windowed acceptance tracking.
struct MHKernel {
  double scale = 1.0;
  double target = 0.44;
  int window = 50;
  long window_accepted = 0;
  long window_proposed = 0;
  long total_accepted = 0;
  long total_proposed = 0;
  bool frozen = false;

  static constexpr double min_scale = 1e-6;
  static constexpr double max_scale = 1e6;

  double acceptance_rate() const {
    return total_proposed ? static_cast<double>(total_accepted) / total_proposed : 0.0;
  }
};

struct MHResult {
  double value;
  bool accepted;
  double logpdf; // log density at `value`
};

// One random-walk step. Proposals outside `support` are rejected without
// evaluating the density. `current_logpdf` must be finite.
template <class LogPdf>
MHResult mh_step(LogPdf &&logpdf, double current, double current_logpdf, MHKernel &kernel, Rng &rng,
                 Support support = {}) {
  if (!std::isfinite(current_logpdf))
    throw std::logic_error("mh_step: log density not finite at the current state");
  const double proposal = current + kernel.scale * rng.normal();
  ++kernel.window_proposed;
  ++kernel.total_proposed;
  if (!support.contains(proposal))
    return {current, false, current_logpdf};
  const double lp = logpdf(proposal);
  if (std::log(rng.uniform()) < lp - current_logpdf) {
    ++kernel.window_accepted;
    ++kernel.total_accepted;
    return {proposal, true, lp};
  }
  return {current, false, current_logpdf};
}

template <class LogPdf>
MHResult mh_step(LogPdf &&logpdf, double current, MHKernel &kernel, Rng &rng, Support support = {}) {
  const double lp = logpdf(current);
  return mh_step(logpdf, current, lp, kernel, rng, support);
}

// Rescale the proposal toward the target acceptance using the current
// window, then reset the window. No-op once frozen.
void mh_adapt(MHKernel &kernel);
// mh_adapt when a full window has been collected.
void mh_maybe_adapt(MHKernel &kernel);

// Piecewise-exponential envelope for adaptive rejection sampling of a
// log-concave density on (lower, upper).
class ArsEnvelope {
public:
  using Fn = std::function<double(double)>;

  ArsEnvelope(Fn logpdf, Fn dlogpdf, double lower, double upper, std::vector<double> init);

  // Throws ConcavityViolation if the density is found not to be log-concave.
  double sample(Rng &rng, int max_iterations = 10000);

  double upper_hull(double x) const;
  double lower_hull(double x) const;
  const std::vector<double> &abscissae() const { return x_; }
  long density_evaluations() const { return evaluations_; }
  long squeeze_accepts() const { return squeeze_accepts_; }

  static constexpr std::size_t max_abscissae = 64;

private:
  void insert(double x, double hx, double dhx);
  void rebuild();
  void check_concave() const;

  Fn h_, dh_;
  double lower_, upper_;
  std::vector<double> x_, hx_, dhx_;
  std::vector<double> z_;        // segment boundaries, size K + 1
  std::vector<double> log_mass_; // per segment
  long evaluations_ = 0;
  long squeeze_accepts_ = 0;
};

// One exact draw from the density proportional to exp(logpdf) on
// (lower, upper), starting from the given abscissae.
double ars_sample(const ArsEnvelope::Fn &logpdf, const ArsEnvelope::Fn &dlogpdf, double lower,
                  double upper, std::vector<double> init, Rng &rng);

} // namespace mcar
