#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace mcar {

// Seeded random stream. Distribution objects are constructed per call so the
// engine state alone determines every future draw; this is what makes
// checkpoints resume bit-exactly.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }
  double chi_squared(double df) { return gamma(0.5 * df, 0.5); }
  long binomial(long n, double p) {
    if (n <= 0)
      return 0;
    return std::binomial_distribution<long>(n, p)(engine_);
  }
  long poisson(double mean) {
    if (mean <= 0.0)
      return 0;
    return std::poisson_distribution<long>(mean)(engine_);
  }

  std::mt19937_64 &engine() { return engine_; }

  std::string state() const;
  void set_state(const std::string &text);

  bool operator==(const Rng &other) const { return engine_ == other.engine_; }

private:
  std::mt19937_64 engine_;
};

// Independent per-chain seed derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

} // namespace mcar
