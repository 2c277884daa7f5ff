#include "mcar/mcmc.hpp"

#include "mcar/error.hpp"

#include <algorithm>
#include <numeric>

namespace mcar {

void mh_adapt(MHKernel &kernel) {
  if (kernel.frozen || kernel.window_proposed == 0)
    return;
  const double rate = static_cast<double>(kernel.window_accepted) / kernel.window_proposed;
  kernel.scale *= std::exp(2.0 * (rate - kernel.target));
  kernel.scale = std::clamp(kernel.scale, MHKernel::min_scale, MHKernel::max_scale);
  kernel.window_accepted = 0;
  kernel.window_proposed = 0;
}

void mh_maybe_adapt(MHKernel &kernel) {
  if (kernel.window_proposed >= kernel.window)
    mh_adapt(kernel);
}

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double> &v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m))
    return m;
  double s = 0.0;
  for (double x : v)
    s += std::exp(x - m);
  return m + std::log(s);
}

} // namespace

ArsEnvelope::ArsEnvelope(Fn logpdf, Fn dlogpdf, double lower, double upper, std::vector<double> init)
    : h_(std::move(logpdf)), dh_(std::move(dlogpdf)), lower_(lower), upper_(upper) {
  if (!(lower < upper))
    throw ValidationError("ars: empty domain");
  std::sort(init.begin(), init.end());
  init.erase(std::unique(init.begin(), init.end()), init.end());
  init.erase(std::remove_if(init.begin(), init.end(),
                            [&](double x) { return !(x > lower && x < upper); }),
             init.end());
  if (init.empty())
    throw ValidationError("ars: no initial abscissa inside the domain");
  for (double x : init) {
    x_.push_back(x);
    hx_.push_back(h_(x));
    dhx_.push_back(dh_(x));
    ++evaluations_;
    if (!std::isfinite(hx_.back()) || !std::isfinite(dhx_.back()))
      throw NumericalError("ars: log density not finite at an initial abscissa");
  }
  // An unbounded side needs a tangent that decays toward it.
  auto extend = [&](bool left) {
    double step = std::max(1.0, std::abs(left ? x_.front() : x_.back()));
    for (int tries = 0; tries < 60; ++tries) {
      const double d = left ? dhx_.front() : dhx_.back();
      if (left ? d > 0.0 : d < 0.0)
        return;
      const double x = left ? x_.front() - step : x_.back() + step;
      const double hx = h_(x), dhx = dh_(x);
      ++evaluations_;
      if (!std::isfinite(hx) || !std::isfinite(dhx))
        throw NumericalError("ars: log density not finite while bracketing the mode");
      if (left) {
        x_.insert(x_.begin(), x);
        hx_.insert(hx_.begin(), hx);
        dhx_.insert(dhx_.begin(), dhx);
      } else {
        x_.push_back(x);
        hx_.push_back(hx);
        dhx_.push_back(dhx);
      }
      check_concave();
      step *= 2.0;
    }
    throw NumericalError("ars: could not bracket the mode (improper density?)");
  };
  check_concave();
  if (!std::isfinite(lower_))
    extend(true);
  if (!std::isfinite(upper_))
    extend(false);
  rebuild();
}

void ArsEnvelope::check_concave() const {
  for (std::size_t k = 0; k + 1 < x_.size(); ++k) {
    const double tol = 1e-9 * (1.0 + std::abs(dhx_[k]) + std::abs(dhx_[k + 1]));
    if (dhx_[k + 1] > dhx_[k] + tol)
      throw ConcavityViolation("ars: derivative increases between abscissae");
  }
}

void ArsEnvelope::rebuild() {
  const std::size_t n = x_.size();
  z_.assign(n + 1, 0.0);
  z_[0] = lower_;
  z_[n] = upper_;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double ds = dhx_[k] - dhx_[k + 1];
    double z;
    if (ds <= 1e-12 * (1.0 + std::abs(dhx_[k])))
      z = 0.5 * (x_[k] + x_[k + 1]);
    else
      z = (hx_[k + 1] - hx_[k] - x_[k + 1] * dhx_[k + 1] + x_[k] * dhx_[k]) / ds;
    z_[k + 1] = std::clamp(z, x_[k], x_[k + 1]);
  }
  log_mass_.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = z_[k], b = z_[k + 1], s = dhx_[k];
    const double w = b - a;
    auto u = [&](double x) { return hx_[k] + s * (x - x_[k]); };
    if (w <= 0.0)
      log_mass_[k] = -inf;
    else if (std::isfinite(w) && std::abs(s) * w < 1e-12)
      log_mass_[k] = u(0.5 * (a + b)) + std::log(w);
    else if (s < 0.0)
      log_mass_[k] = u(a) + std::log(-std::expm1(s * w)) - std::log(-s);
    else if (s > 0.0)
      log_mass_[k] = u(b) + std::log(-std::expm1(-s * w)) - std::log(s);
    else
      throw NumericalError("ars: envelope has infinite mass");
    if (std::isnan(log_mass_[k]) || log_mass_[k] == inf)
      throw NumericalError("ars: envelope has infinite mass");
  }
}

double ArsEnvelope::upper_hull(double x) const {
  const auto it = std::upper_bound(z_.begin() + 1, z_.end() - 1, x);
  const auto k = static_cast<std::size_t>(std::distance(z_.begin() + 1, it));
  return hx_[k] + dhx_[k] * (x - x_[k]);
}

double ArsEnvelope::lower_hull(double x) const {
  if (x < x_.front() || x > x_.back())
    return -inf;
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  if (it == x_.end())
    return hx_.back();
  const auto k = static_cast<std::size_t>(std::distance(x_.begin(), it)) - 1;
  const double t = (x - x_[k]) / (x_[k + 1] - x_[k]);
  return (1.0 - t) * hx_[k] + t * hx_[k + 1];
}

void ArsEnvelope::insert(double x, double hx, double dhx) {
  if (x_.size() >= max_abscissae)
    return;
  const auto it = std::lower_bound(x_.begin(), x_.end(), x);
  if (it != x_.end() && *it == x)
    return;
  const auto pos = std::distance(x_.begin(), it);
  x_.insert(it, x);
  hx_.insert(hx_.begin() + pos, hx);
  dhx_.insert(dhx_.begin() + pos, dhx);
  check_concave();
  rebuild();
}

double ArsEnvelope::sample(Rng &rng, int max_iterations) {
  for (int iter = 0; iter < max_iterations; ++iter) {
    // Segment by mass, then inverse CDF of the exponential piece.
    const double total = log_sum_exp(log_mass_);
    double target = rng.uniform();
    std::size_t k = 0;
    for (; k + 1 < log_mass_.size(); ++k) {
      const double p = std::exp(log_mass_[k] - total);
      if (target < p)
        break;
      target -= p;
    }
    const double a = z_[k], b = z_[k + 1], s = dhx_[k], w = b - a;
    const double t = rng.uniform();
    double x;
    if (std::isfinite(w) && std::abs(s) * w < 1e-12)
      x = a + t * w;
    else if (s < 0.0)
      x = a - std::log1p(t * std::expm1(s * w)) / (-s);
    else
      x = b + std::log1p(t * std::expm1(-s * w)) / s;
    x = std::clamp(x, a, b);
    if (!(x > lower_ && x < upper_))
      continue;

    const double ux = upper_hull(x);
    const double lx = lower_hull(x);
    if (lx > ux + 1e-9 * (1.0 + std::abs(ux)))
      throw ConcavityViolation("ars: squeeze exceeds hull");
    const double log_w = std::log(rng.uniform());
    if (log_w <= lx - ux) {
      ++squeeze_accepts_;
      return x;
    }
    const double hx = h_(x), dhx = dh_(x);
    ++evaluations_;
    if (!std::isfinite(hx) || !std::isfinite(dhx))
      throw NumericalError("ars: log density not finite at a candidate");
    if (hx > ux + 1e-8 * (1.0 + std::abs(ux)))
      throw ConcavityViolation("ars: log density above the upper hull");
    insert(x, hx, dhx);
    if (log_w <= hx - ux)
      return x;
  }
  throw NumericalError("ars: no acceptance within the iteration limit");
}

double ars_sample(const ArsEnvelope::Fn &logpdf, const ArsEnvelope::Fn &dlogpdf, double lower,
                  double upper, std::vector<double> init, Rng &rng) {
  ArsEnvelope env(logpdf, dlogpdf, lower, upper, std::move(init));
  return env.sample(rng);
}

} // namespace mcar
