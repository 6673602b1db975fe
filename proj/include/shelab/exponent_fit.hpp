#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace shelab {

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Least-squares line through (log h, log value).
inline ExponentFit fit_exponent(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 4) throw std::invalid_argument("fit_exponent: need at least 4 pairs");
  std::vector<double> lx, ly;
  lx.reserve(pairs.size());
  ly.reserve(pairs.size());
  for (const auto& [h, v] : pairs) {
    if (!(h > 0.0) || !(v > 0.0))
      throw std::invalid_argument("fit_exponent: scales and values must be positive");
    lx.push_back(std::log(h));
    ly.push_back(std::log(v));
  }
  const double n = static_cast<double>(pairs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_exponent: scales must be distinct");
  ExponentFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += r * r;
  }
  fit.r_squared = (syy > 0.0) ? std::max(0.0, 1.0 - ss_res / syy) : 1.0;
  return fit;
}

}  // namespace shelab
