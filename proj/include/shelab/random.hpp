#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>

namespace shelab {

// SplitMix64 finaliser, used to spread (master seed, stream id) into engine seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic random stream.  Samplers are hand-rolled on top of
// mt19937_64 (whose output sequence is fixed by the standard) instead of the
// std:: distributions, whose algorithms are implementation-defined.  This is
// what makes replica paths reproducible bit for bit regardless of how the
// replicas are scheduled across threads.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

  // uniform on (0, 1); never returns an endpoint
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller with the spare value cached
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double a = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double exponential() { return -std::log(uniform()); }

  // Exact sampling by counting unit-rate arrivals; O(mean) but safe for the
  // intensities this project ever requests (the samplers cap mean upstream).
  long long poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
    long long k = -1;
    double acc = 0.0;
    do {
      acc += exponential();
      ++k;
    } while (acc <= mean);
    return k;
  }

  double rademacher() { return (eng_() & 1ULL) ? 1.0 : -1.0; }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Replica stream derivation: (master_seed, replica index[, purpose]) maps to an
// independent stream.  Identical inputs reproduce identical paths.
struct SeedPolicy {
  std::uint64_t master_seed = 0;

  RandomStream stream(std::uint64_t replica, std::uint64_t purpose = 0) const {
    std::uint64_t s = mix64(master_seed);
    s = mix64(s ^ mix64(replica + 0x517cc1b727220a95ULL));
    s = mix64(s ^ mix64(purpose + 0x2545f4914f6cdd1dULL));
    return RandomStream(s);
  }
};

}  // namespace shelab
