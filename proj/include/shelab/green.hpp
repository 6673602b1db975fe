#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace shelab {

inline constexpr double kKernelTolDefault = 1e-12;

// Crossover between the two series: below it the reflection series needs at
// most three image pairs at tol 1e-12, above it the eigenfunction series
// needs at most five modes.
inline constexpr double kGreenSeriesSwitch = 1.0 / (std::numbers::pi * std::numbers::pi);

namespace detail {

inline void check_green_args(double t, double x, double y, double tol) {
  if (!(t > 0.0)) throw std::domain_error("green: t must be positive (kernel is singular at t=0)");
  if (!(tol > 0.0)) throw std::invalid_argument("green: tol must be positive");
  if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0)
    throw std::invalid_argument("green: positions must lie in [0,1]");
}

}  // namespace detail

// Batched evaluation request for the kernel.
struct GreenEval {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double tol = kKernelTolDefault;
};

// Sine eigenfunction series 2 sum_k sin(k pi x) sin(k pi y) e^{-k^2 pi^2 t}.
// Terms are added until the geometric tail bound drops below tol.
inline double green_spectral(double t, double x, double y, double tol = kKernelTolDefault) {
  detail::check_green_args(t, x, y, tol);
  if (x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0) return 0.0;  // Dirichlet wall
  const double pi = std::numbers::pi;
  const double a = pi * pi * t;
  double sum = 0.0;
  for (int k = 1;; ++k) {
    sum += 2.0 * std::sin(k * pi * x) * std::sin(k * pi * y) * std::exp(-a * k * k);
    // tail: 2 sum_{m>k} e^{-a m^2} <= 2 e^{-a(k+1)^2} / (1 - e^{-2a(k+1)})
    const double head = 2.0 * std::exp(-a * (k + 1.0) * (k + 1.0));
    if (head / (1.0 - std::exp(-2.0 * a * (k + 1.0))) < tol) break;
    if (k > 100000) throw std::domain_error("green_spectral: series did not truncate (t too small)");
  }
  return sum;
}

// Reflection series (4 pi t)^{-1/2} sum_n [ e^{-(x-y-2n)^2/4t} - e^{-(x+y-2n)^2/4t} ].
inline double green_image(double t, double x, double y, double tol = kKernelTolDefault) {
  detail::check_green_args(t, x, y, tol);
  if (x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0) return 0.0;  // exact pair cancellation
  const double pref = 1.0 / std::sqrt(4.0 * std::numbers::pi * t);
  const double inv4t = 1.0 / (4.0 * t);
  auto pair_term = [&](int n) {
    const double d = x - y - 2.0 * n;
    const double r = x + y - 2.0 * n;
    return std::exp(-d * d * inv4t) - std::exp(-r * r * inv4t);
  };
  double sum = pair_term(0);
  for (int n = 1;; ++n) {
    sum += pair_term(n) + pair_term(-n);
    // for |m| > n every exponent argument is at least (2n-1)^2/4t
    const double edge = (2.0 * n - 1.0);
    const double head = 4.0 * std::exp(-edge * edge * inv4t);
    if (head * pref / (1.0 - std::exp(-inv4t)) < tol) break;
    if (n > 10000) throw std::domain_error("green_image: series did not truncate");
  }
  return pref * sum;
}

// Dispatcher: reflection series for short times, eigenfunction series otherwise.
inline double green(double t, double x, double y, double tol = kKernelTolDefault) {
  return (t < kGreenSeriesSwitch) ? green_image(t, x, y, tol) : green_spectral(t, x, y, tol);
}

inline double green(const GreenEval& e) { return green(e.t, e.x, e.y, e.tol); }

// Gaussian envelope (2 pi t)^{-1/2} e^{-(x-y)^2/4t} minus the kernel; the
// contract is that this never drops below -1e-10.
inline double gaussian_bound_margin(double t, double x, double y) {
  if (!(t > 0.0)) throw std::domain_error("gaussian_bound_margin: t must be positive");
  const double env =
      std::exp(-(x - y) * (x - y) / (4.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t);
  return env - green(t, x, y);
}

// ---------------------------------------------------------------------------
// Period-2 heat kernel on the circle and its antiderivative.  The Dirichlet
// kernel factors as G_t(x,y) = g_t(x-y) - g_t(x+y) with g the periodic
// kernel; the convolution tables are built from g and from F with F' = g,
// F(0) = 0 (cell-averaged kernel values when a cell is narrower than the
// kernel spike).
// ---------------------------------------------------------------------------

inline double periodic_heat_kernel(double tau, double w, double tol = kKernelTolDefault) {
  if (!(tau > 0.0)) throw std::domain_error("periodic_heat_kernel: tau must be positive");
  const double pi = std::numbers::pi;
  if (tau >= kGreenSeriesSwitch) {
    const double a = pi * pi * tau;
    double sum = 0.5;
    for (int k = 1;; ++k) {
      sum += std::cos(k * pi * w) * std::exp(-a * k * k);
      const double head = std::exp(-a * (k + 1.0) * (k + 1.0));
      if (head / (1.0 - std::exp(-2.0 * a * (k + 1.0))) < tol) break;
    }
    return sum;
  }
  const double pref = 1.0 / std::sqrt(4.0 * pi * tau);
  const double inv4t = 1.0 / (4.0 * tau);
  // centre the image sum on the nearest period
  const int c = static_cast<int>(std::lround(w / 2.0));
  double sum = 0.0;
  for (int n = 0;; ++n) {
    double term;
    if (n == 0) {
      const double d = w - 2.0 * c;
      term = std::exp(-d * d * inv4t);
    } else {
      const double dp = w - 2.0 * (c + n);
      const double dm = w - 2.0 * (c - n);
      term = std::exp(-dp * dp * inv4t) + std::exp(-dm * dm * inv4t);
    }
    sum += term;
    // omitted images have |w - 2(c +- m)| >= 2n+1 for m >= n+1
    const double edge = 2.0 * n + 1.0;
    const double head = 2.0 * std::exp(-edge * edge * inv4t);
    if (head * pref / (1.0 - std::exp(-inv4t)) < tol) break;
    if (n > 10000) throw std::domain_error("periodic_heat_kernel: series did not truncate");
  }
  return pref * sum;
}

// F(z) = int_0^z g_tau(w) dw.
inline double periodic_heat_primitive(double tau, double z, double tol = kKernelTolDefault) {
  if (!(tau > 0.0)) throw std::domain_error("periodic_heat_primitive: tau must be positive");
  const double pi = std::numbers::pi;
  if (tau >= kGreenSeriesSwitch) {
    const double a = pi * pi * tau;
    double sum = 0.5 * z;
    for (int k = 1;; ++k) {
      sum += std::sin(k * pi * z) * std::exp(-a * k * k) / (k * pi);
      const double head = std::exp(-a * (k + 1.0) * (k + 1.0));
      if (head / (1.0 - std::exp(-2.0 * a * (k + 1.0))) < tol) break;
    }
    return sum;
  }
  const double inv2rt = 1.0 / (2.0 * std::sqrt(tau));
  // sum_n (1/2)[erf((z-2n)/2sqrt(tau)) - erf(-2n/2sqrt(tau))]; each bracket
  // vanishes for |2n| >> max(|z|, sqrt(tau)), so truncation is immediate.
  const int reach = 2 + static_cast<int>(std::ceil((std::abs(z) + 14.0 * std::sqrt(tau)) / 2.0));
  double sum = 0.0;
  for (int n = -reach; n <= reach; ++n) {
    sum += 0.5 * (std::erf((z - 2.0 * n) * inv2rt) - std::erf((-2.0 * n) * inv2rt));
  }
  return sum;
}

}  // namespace shelab
