#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "shelab/random.hpp"

namespace shelab {

struct SampleStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double stderr_mean = 0.0;
  std::size_t count = 0;
};

inline SampleStats sample_stats(const std::vector<double>& xs) {
  if (xs.size() < 2) throw std::invalid_argument("sample_stats: need at least 2 samples");
  SampleStats s;
  s.count = xs.size();
  for (double v : xs) s.mean += v;
  s.mean /= static_cast<double>(xs.size());
  for (double v : xs) s.variance += (v - s.mean) * (v - s.mean);
  s.variance /= static_cast<double>(xs.size() - 1);
  s.stderr_mean = std::sqrt(s.variance / static_cast<double>(xs.size()));
  return s;
}

// Standard error of the sample variance via the empirical fourth moment.
inline double variance_stderr(const std::vector<double>& xs) {
  const SampleStats s = sample_stats(xs);
  double m4 = 0.0;
  for (double v : xs) {
    const double d = v - s.mean;
    m4 += d * d * d * d;
  }
  m4 /= static_cast<double>(xs.size());
  const double var_of_var = std::max(0.0, m4 - s.variance * s.variance);
  return std::sqrt(var_of_var / static_cast<double>(xs.size()));
}

inline double normal_cdf(double v, double mean = 0.0, double sd = 1.0) {
  return 0.5 * std::erfc(-(v - mean) / (sd * std::numbers::sqrt2));
}

struct KsResult {
  double statistic = 0.0;
  std::size_t n_samples = 0;
};

// One-sample Kolmogorov-Smirnov distance against a reference CDF.
inline KsResult ks_statistic(std::vector<double> samples,
                             const std::function<double(double)>& cdf) {
  if (samples.size() < 50) throw std::invalid_argument("ks_statistic: need at least 50 samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::max((i + 1.0) / n - f, f - static_cast<double>(i) / n));
  }
  return {d, samples.size()};
}

inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("ks_two_sample: too few samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

// Bootstrap standard error of an arbitrary sample statistic.
inline double bootstrap_stderr(const std::vector<double>& xs,
                               const std::function<double(const std::vector<double>&)>& stat,
                               int b_rounds, RandomStream& rng) {
  if (xs.empty() || b_rounds < 2) throw std::invalid_argument("bootstrap_stderr: bad arguments");
  std::vector<double> reps(b_rounds);
  std::vector<double> resample(xs.size());
  for (int b = 0; b < b_rounds; ++b) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const std::size_t k = static_cast<std::size_t>(rng.uniform() * xs.size());
      resample[i] = xs[std::min(k, xs.size() - 1)];
    }
    reps[b] = stat(resample);
  }
  return std::sqrt(sample_stats(reps).variance);
}

inline double moment(const std::vector<double>& xs, int m) {
  double acc = 0.0;
  for (double v : xs) acc += std::pow(v, m);
  return acc / static_cast<double>(xs.size());
}

}  // namespace shelab
