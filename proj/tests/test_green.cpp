#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "shelab/exponent_fit.hpp"
#include "shelab/green.hpp"
#include "shelab/lemma_integrals.hpp"

using namespace shelab;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent oracle: the eigenfunction series summed far past the tolerance
// the implementation is allowed to stop at.
double spectral_oracle(double t, double x, double y, int terms = 4000) {
  double s = 0.0;
  for (int k = terms; k >= 1; --k)
    s += 2.0 * std::sin(k * kPi * x) * std::sin(k * kPi * y) * std::exp(-k * k * kPi * kPi * t);
  return s;
}

// 1D reduction of the alpha = 2 kernel integrals via the semigroup identity
// int_0^1 G_u(x,z) G_u(y,z) dz = G_{2u}(x,y); the remaining time integral is
// regularised by u = v^2 and handled with composite Simpson.
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int q = 1; q < n; ++q) acc += (q % 2 ? 4.0 : 2.0) * f(a + q * h);
  return acc * h / 3.0;
}

// Split composite Simpson in the substituted variable v = sqrt(u/range): a
// dense block over the crossover scale, a regular block over the rest.
double split_simpson01(const std::function<double(double)>& f, double v_split) {
  v_split = std::min(0.5, v_split);
  return simpson(f, 0.0, v_split, 4000) + simpson(f, v_split, 1.0, 4000);
}

double tail_alpha2_oracle(double s, double t, double x) {
  const double range = t - s;
  if (range <= 0.0) return 0.0;
  auto f = [&](double v) {
    const double u = range * v * v;
    // v -> 0 limit: 2 R v (8 pi R v^2)^{-1/2} = sqrt(R/(2 pi))
    if (u < 1e-300) return std::sqrt(range / (2.0 * kPi));
    return 2.0 * range * v * green(2.0 * u, x, x, 1e-14);
  };
  return simpson(f, 0.0, 1.0, 4000);
}

double space_alpha2_oracle(double t, double x, double y) {
  const double h = std::abs(y - x);
  auto f = [&](double v) {
    const double u = t * v * v;
    if (u < 1e-300) return std::sqrt(2.0 * t / kPi);
    const double g = green(2.0 * u, x, x, 1e-14) + green(2.0 * u, y, y, 1e-14) -
                     2.0 * green(2.0 * u, x, y, 1e-14);
    return 2.0 * t * v * g;
  };
  return split_simpson01(f, 20.0 * h / std::sqrt(t));
}

double time_alpha2_oracle(double s, double t, double x) {
  const double h = t - s;
  auto f = [&](double v) {
    const double u = s * v * v;
    if (u < 1e-300) return std::sqrt(s / (2.0 * kPi));
    const double g = green(2.0 * (u + h), x, x, 1e-14) - 2.0 * green(2.0 * u + h, x, x, 1e-14) +
                     green(2.0 * u, x, x, 1e-14);
    return 2.0 * s * v * g;
  };
  return split_simpson01(f, 8.0 * std::sqrt(h / s));
}

}  // namespace

TEST_CASE("spectral series basics", "[green]") {
  // Dirichlet boundary: sin(0) = 0
  CHECK(green_spectral(0.1, 0.5, 0.0) == 0.0);
  CHECK(green_spectral(0.2, 1.0, 0.3) == 0.0);

  // value frozen from the tail-bounded series oracle
  const double v = green_spectral(0.1, 0.5, 0.5, 1e-12);
  CHECK(v == Catch::Approx(0.745693231264826).epsilon(1e-12));
  CHECK(v == Catch::Approx(spectral_oracle(0.1, 0.5, 0.5)).margin(1e-12));

  // symmetry in x, y
  for (double t : {0.02, 0.3, 1.5}) {
    CHECK(green_spectral(t, 0.3, 0.8) == Catch::Approx(green_spectral(t, 0.8, 0.3)).margin(1e-15));
  }

  CHECK_THROWS_AS(green_spectral(0.0, 0.5, 0.5), std::domain_error);
  CHECK_THROWS_AS(green_spectral(-1.0, 0.5, 0.5), std::domain_error);
  CHECK_THROWS_AS(green_spectral(0.1, 0.5, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("image series basics", "[green]") {
  // at x = y far from the boundary only the direct n = 0 image survives
  const double pref = 1.0 / std::sqrt(4.0 * kPi * 1e-4);
  CHECK(green_image(1e-4, 0.5, 0.5, 1e-12) == Catch::Approx(pref).margin(1e-12));

  // cross-series agreement at moderate t
  CHECK(std::abs(green_image(0.1, 0.5, 0.5, 1e-12) - green_spectral(0.1, 0.5, 0.5, 1e-12)) <
        1e-9);

  // boundary cancellation of image pairs
  CHECK(std::abs(green_image(0.05, 0.0, 0.3)) < 1e-12);
  CHECK(std::abs(green_image(0.05, 0.3, 1.0)) < 1e-12);
}

TEST_CASE("series agreement on the interior lattice", "[green]") {
  double max_err = 0.0;
  for (double t : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    for (int a = 1; a <= 33; ++a)
      for (int b = 1; b <= 33; ++b)
        max_err = std::max(max_err, std::abs(green_spectral(t, a / 34.0, b / 34.0, 1e-12) -
                                             green_image(t, a / 34.0, b / 34.0, 1e-12)));
  }
  CHECK(max_err <= 1e-9);
}

TEST_CASE("dispatcher is continuous across the switch and respects boundaries", "[green]") {
  const double below = kGreenSeriesSwitch * (1.0 - 1e-12);
  const double above = kGreenSeriesSwitch * (1.0 + 1e-12);
  for (double x : {0.2, 0.5, 0.9}) {
    for (double y : {0.1, 0.5, 0.7}) {
      CHECK(std::abs(green(below, x, y) - green(above, x, y)) < 1e-9);
      CHECK(std::abs(green(below, x, y) - green_spectral(below, x, y, 1e-12)) < 1e-9);
    }
  }
  CHECK(green(0.3, 0.4, 1.0) == 0.0);
  CHECK_THROWS_AS(green(0.0, 0.5, 0.5), std::domain_error);

  const GreenEval e{0.2, 0.5, 0.25, 1e-12};
  CHECK(green(e) == green(0.2, 0.5, 0.25, 1e-12));
}

TEST_CASE("kernel is nonnegative and below the Gaussian envelope", "[green]") {
  // 50 x 50 x 50 lattice scan
  for (int it = 1; it <= 50; ++it) {
    const double t = it * (1.0 / 50.0);
    for (int a = 0; a <= 49; ++a) {
      for (int b = 0; b <= 49; ++b) {
        const double x = a / 49.0, y = b / 49.0;
        const double g = green(t, x, y);
        REQUIRE(g >= -1e-12);
        REQUIRE(gaussian_bound_margin(t, x, y) >= -1e-10);
      }
    }
  }
  // at the boundary the margin equals the full envelope
  const double env = std::exp(-0.25 / (4.0 * 0.1)) / std::sqrt(2.0 * kPi * 0.1);
  CHECK(gaussian_bound_margin(0.1, 0.5, 0.0) == Catch::Approx(env).margin(1e-12));
  CHECK(gaussian_bound_margin(0.1, 0.5, 0.5) >= 0.0);
}

TEST_CASE("Chapman-Kolmogorov composition", "[green]") {
  auto compose = [](double s, double t, double x, double y) {
    const int n = 512;
    double acc = 0.0;
    for (int q = 0; q < n; ++q) {
      const double z = (q + 0.5) / n;
      acc += green(s, x, z, 1e-13) * green(t, z, y, 1e-13);
    }
    return acc / n;
  };
  for (auto [s, t, x, y] : {std::array<double, 4>{0.05, 0.1, 0.3, 0.6},
                            std::array<double, 4>{0.2, 0.15, 0.5, 0.5},
                            std::array<double, 4>{0.08, 0.4, 0.7, 0.2}}) {
    CHECK(compose(s, t, x, y) == Catch::Approx(green(s + t, x, y, 1e-13)).margin(1e-6));
  }
}

TEST_CASE("periodic kernel and primitive are consistent with the series", "[green]") {
  for (double tau : {0.003, 0.05, 0.2}) {
    for (double x : {0.25, 0.5, 0.85}) {
      for (double y : {0.1, 0.5, 0.95}) {
        const double via_periodic =
            periodic_heat_kernel(tau, x - y) - periodic_heat_kernel(tau, x + y);
        CHECK(via_periodic == Catch::Approx(green(tau, x, y, 1e-13)).margin(1e-10));
      }
    }
  }
  // F(b) - F(a) equals a dense quadrature of g over [a, b]
  for (double tau : {0.004, 0.08}) {
    for (auto [a, b] : {std::pair{0.1, 0.35}, std::pair{0.8, 1.3}}) {
      const int n = 4000;
      double acc = 0.0;
      for (int q = 0; q < n; ++q)
        acc += periodic_heat_kernel(tau, a + (q + 0.5) * (b - a) / n);
      acc *= (b - a) / n;
      CHECK(periodic_heat_primitive(tau, b) - periodic_heat_primitive(tau, a) ==
            Catch::Approx(acc).margin(1e-8));
    }
  }
}

TEST_CASE("lemma integral trivia and argument checks", "[green]") {
  CHECK(lemma_b1_integral(LemmaPart::tail, 2.0, {.t = 0.5, .s = 0.5, .x = 0.5}) == 0.0);
  CHECK(lemma_b1_integral(LemmaPart::space_incr, 2.0, {.t = 0.3, .x = 0.4, .y = 0.4}) == 0.0);
  CHECK_THROWS_AS(lemma_b1_integral(LemmaPart::space_incr, 1.2, {.t = 0.3, .x = 0.2, .y = 0.4}),
                  std::invalid_argument);
  CHECK_THROWS_AS(lemma_b1_integral(LemmaPart::tail, 0.9, {.t = 0.5, .s = 0.4, .x = 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(lemma_b1_integral(LemmaPart::tail, 3.0, {.t = 0.5, .s = 0.4, .x = 0.5}),
                  std::invalid_argument);
}

TEST_CASE("lemma integrals match the alpha=2 reduction oracle", "[green]") {
  // tail
  for (double h : {1e-3, 1e-2, 1e-1}) {
    const double got = lemma_b1_integral(LemmaPart::tail, 2.0, {.t = 0.5, .s = 0.5 - h, .x = 0.5});
    const double want = tail_alpha2_oracle(0.5 - h, 0.5, 0.5);
    CHECK(got == Catch::Approx(want).epsilon(2e-4));
  }
  // space increment
  for (double h : {1e-3, 1e-2, 1e-1}) {
    const double got = lemma_b1_integral(LemmaPart::space_incr, 2.0,
                                         {.t = 0.3, .x = 0.5 - h / 2, .y = 0.5 + h / 2});
    const double want = space_alpha2_oracle(0.3, 0.5 - h / 2, 0.5 + h / 2);
    CHECK(got == Catch::Approx(want).epsilon(3e-4));
  }
  // time increment
  for (double h : {1e-3, 1e-2}) {
    const double got =
        lemma_b1_integral(LemmaPart::time_incr, 2.0, {.t = 0.3 + h, .s = 0.3, .x = 0.5});
    const double want = time_alpha2_oracle(0.3, 0.3 + h, 0.5);
    CHECK(got == Catch::Approx(want).epsilon(3e-4));
  }
}

TEST_CASE("lemma integrals reproduce the free-space constants at small scales", "[green]") {
  // space increment ~ h/2, time increment ~ (sqrt(2)-1) sqrt(h/(2 pi)),
  // tail ~ sqrt(h/(2 pi)); corrections at h = 1e-4 are far below 1%.
  const double h = 1e-4;
  CHECK(lemma_b1_integral(LemmaPart::space_incr, 2.0,
                          {.t = 0.3, .x = 0.5 - h / 2, .y = 0.5 + h / 2}) ==
        Catch::Approx(h / 2).epsilon(5e-3));
  CHECK(lemma_b1_integral(LemmaPart::time_incr, 2.0, {.t = 0.3 + h, .s = 0.3, .x = 0.5}) ==
        Catch::Approx((std::numbers::sqrt2 - 1.0) * std::sqrt(h / (2.0 * kPi))).epsilon(5e-3));
  CHECK(lemma_b1_integral(LemmaPart::tail, 2.0, {.t = 0.5, .s = 0.5 - h, .x = 0.5}) ==
        Catch::Approx(std::sqrt(h / (2.0 * kPi))).epsilon(5e-3));
}

TEST_CASE("tail value sits under the fitted envelope", "[green]") {
  std::vector<std::pair<double, double>> pairs;
  for (int q = 0; q < 7; ++q) {
    const double h = std::pow(10.0, -4.0 + 0.5 * q);
    pairs.emplace_back(h, lemma_b1_integral(LemmaPart::tail, 2.0, {.t = 0.5, .s = 0.5 - h, .x = 0.5}));
  }
  const ExponentFit fit = fit_exponent(pairs);
  const double c = 1.2 * std::exp(fit.intercept);
  const double v = lemma_b1_integral(LemmaPart::tail, 2.0, {.t = 0.5, .s = 0.4, .x = 0.5});
  CHECK(v > 0.0);
  CHECK(v <= c * std::sqrt(0.1));
}

TEST_CASE("fit_exponent on exact power laws and lemma slopes", "[green]") {
  std::vector<std::pair<double, double>> exact;
  for (double h : {0.1, 0.2, 0.4, 0.8, 1.6}) exact.emplace_back(h, h * h);
  const ExponentFit f = fit_exponent(exact);
  CHECK(f.slope == Catch::Approx(2.0).margin(1e-10));
  CHECK(f.r_squared == Catch::Approx(1.0).margin(1e-12));

  CHECK_THROWS_AS(fit_exponent({{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_exponent({{1.0, 1.0}, {2.0, -2.0}, {3.0, 3.0}, {4.0, 4.0}}),
                  std::invalid_argument);

  std::vector<std::pair<double, double>> piii, pi;
  for (int q = 0; q < 7; ++q) {
    const double h = std::pow(10.0, -4.0 + 0.5 * q);
    piii.emplace_back(h, lemma_b1_integral(LemmaPart::tail, 2.0, {.t = 0.5, .s = 0.5 - h, .x = 0.5}));
    pi.emplace_back(h, lemma_b1_integral(LemmaPart::space_incr, 2.0,
                                         {.t = 0.3, .x = 0.5 - h / 2, .y = 0.5 + h / 2}));
  }
  CHECK(fit_exponent(piii).slope == Catch::Approx(0.5).margin(0.05));
  CHECK(fit_exponent(pi).slope == Catch::Approx(1.0).margin(0.1));
}
