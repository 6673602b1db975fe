#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "shelab/lab.hpp"
#include "shelab/parallel.hpp"
#include "shelab/solver.hpp"
#include "shelab/stats.hpp"

using namespace shelab;

namespace {

constexpr double kPi = std::numbers::pi;

void require_positive_stderrs(const ConvergenceReport& rep) {
  for (const auto& row : rep.rows) {
    INFO(row.statistic);
    REQUIRE(row.stderr_ > 0.0);
  }
}

}  // namespace

TEST_CASE("ks statistic basics", "[lab]") {
  RandomStream rng(1);
  std::vector<double> normals(2000);
  for (double& v : normals) v = rng.normal();
  auto cdf = [](double v) { return normal_cdf(v); };
  const KsResult ks = ks_statistic(normals, cdf);
  CHECK(ks.n_samples == 2000);
  CHECK(ks.statistic < 0.04);  // 95% Kolmogorov quantile is ~0.0304 at M=2000
  CHECK(ks.statistic > 0.0);

  std::vector<double> constant(100, 0.0);
  CHECK(ks_statistic(constant, cdf).statistic >= 0.5);
  CHECK(ks_statistic(constant, cdf).statistic <= 1.0);

  std::vector<double> few(10, 0.0);
  CHECK_THROWS_AS(ks_statistic(few, cdf), std::invalid_argument);
}

TEST_CASE("ks statistic is invariant under monotone reparametrisation", "[lab]") {
  RandomStream rng(2);
  std::vector<double> xs(500), ys(500);
  for (int i = 0; i < 500; ++i) {
    xs[i] = rng.normal();
    ys[i] = 3.0 * xs[i] + 2.0;  // affine image
  }
  auto cdf = [](double v) { return normal_cdf(v); };
  auto cdf_affine = [](double v) { return normal_cdf((v - 2.0) / 3.0); };
  CHECK(ks_statistic(xs, cdf).statistic ==
        Catch::Approx(ks_statistic(ys, cdf_affine).statistic).margin(1e-12));
}

TEST_CASE("linear functional identities", "[lab]") {
  const GridSpec grid(1.0, 32, 32);
  RandomStream rng = SeedPolicy{61}.stream(0);
  const ScalarField theta = donsker_field(rng, 8, grid, ZLaw{ZLawKind::rademacher});

  // empty rectangle acts as the zero function
  const TestFunctionSpec zero = TestFunctionSpec::rectangle(0.3, 0.3, 0.2, 0.2);
  CHECK(linear_functional(theta, zero) == 0.0);

  // whole-domain indicator reproduces zeta(T, 1) exactly
  const TestFunctionSpec whole = TestFunctionSpec::rectangle(0.0, 1.0, 0.0, 1.0);
  CHECK(linear_functional(theta, whole) == integrate_zeta(theta, 1.0, 1.0));

  // linearity on cell-aligned indicators, to machine precision
  const TestFunctionSpec a = TestFunctionSpec::rectangle(0.0, 0.5, 0.0, 1.0);
  const TestFunctionSpec b = TestFunctionSpec::rectangle(0.5, 1.0, 0.0, 1.0);
  CHECK(linear_functional(theta, a) + linear_functional(theta, b) ==
        Catch::Approx(linear_functional(theta, whole)).margin(1e-13));
}

TEST_CASE("green-section functional reproduces the stochastic convolution", "[lab]") {
  const GridSpec grid(0.5, 128, 128);
  ScalarField theta(grid, Centering::cell);
  for (int i = 0; i < grid.nt; ++i)
    for (int j = 0; j < grid.nx; ++j)
      theta(i, j) = std::sin(kPi * grid.mid_x(j)) * (1.0 + grid.mid_t(i));
  const MildConvolver conv(grid);
  const double t_star = grid.node_t(96), x_star = grid.node_x(64);
  const double direct = conv.at(theta, 96, 64);
  const double via_functional =
      linear_functional(theta, TestFunctionSpec::green_section(t_star, x_star));
  CHECK(via_functional == Catch::Approx(direct).margin(2e-4 * std::abs(direct) + 1e-6));
}

TEST_CASE("test function norms", "[lab]") {
  const TestFunctionSpec rect = TestFunctionSpec::rectangle(0.25, 0.5, 0.25, 0.5);
  CHECK(rect.l2_norm_sq(1.0) == Catch::Approx(0.0625).margin(1e-15));
  CHECK(rect.lq_norm_pow(2.5, 1.0) == Catch::Approx(0.0625).margin(1e-15));

  const TestFunctionSpec sine = TestFunctionSpec::sine(2, 3, 1.0);
  CHECK(sine.l2_norm_sq(1.0) == Catch::Approx(0.25).margin(1e-15));
  // int |sin(pi u)|^2 du = 1/2 via the gamma formula as well
  CHECK(sine.lq_norm_pow(2.0, 1.0) == Catch::Approx(0.25).margin(1e-12));

  const TestFunctionSpec gs = TestFunctionSpec::green_section(0.3, 0.5);
  CHECK(gs.l2_norm_sq(1.0) == Catch::Approx(white_solution_variance(0.3, 0.5)).margin(1e-15));
  CHECK_THROWS_AS(gs.lq_norm_pow(3.0, 1.0), std::invalid_argument);
}

TEST_CASE("rectangle spec doubling constraints", "[lab]") {
  RectangleSpec ok{0.3, 0.5, 0.3, 0.5};
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.implied_alpha() == 1.0);
  CHECK(ok.kac_stroock_m2_bound() == Catch::Approx(2.25).margin(1e-15));

  RectangleSpec bad{0.2, 0.5, 0.3, 0.5};  // s1 >= 2 s0
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  RectangleSpec badx{0.3, 0.5, 0.2, 0.45};  // x1 >= 2 x0
  CHECK_THROWS_AS(badx.validate(), std::invalid_argument);
}

TEST_CASE("fdd check is at the null level for the exact white sampler", "[lab]") {
  NoiseSpec white;
  FddOptions opt;
  opt.replicas = 1000;
  opt.seed = 71;
  const ConvergenceReport rep = fdd_convergence(white, {}, opt);
  CHECK(rep.status == CheckStatus::pass);
  require_positive_stderrs(rep);
  for (const auto& row : rep.rows) CHECK(row.value < 1.628 / std::sqrt(1000.0));
}

TEST_CASE("fdd replica floor", "[lab]") {
  NoiseSpec ks;
  ks.model = NoiseModel::kac_stroock;
  FddOptions opt;
  opt.replicas = 10;
  CHECK_THROWS_AS(fdd_convergence(ks, {4, 16}, opt), std::invalid_argument);
}

TEST_CASE("fdd smoke run on small indices", "[lab]") {
  NoiseSpec don;
  don.model = NoiseModel::donsker;
  FddOptions opt;
  opt.replicas = 600;
  opt.seed = 72;
  opt.final_threshold = 0.25;  // smoke run stops at n = 16
  const ConvergenceReport rep = fdd_convergence(don, {4, 16}, opt);
  require_positive_stderrs(rep);
  REQUIRE(rep.rows.size() == 4);  // marginal + projection per n
  for (const auto& row : rep.rows) {
    CHECK(row.value >= 0.0);
    CHECK(row.value <= 1.0);
  }
}

TEST_CASE("hypothesis 2 refuses p = 1 and degenerate f reports zero", "[lab]") {
  NoiseSpec ks;
  ks.model = NoiseModel::kac_stroock;
  CHECK_THROWS_WITH(hypothesis2_check(ks, {TestFunctionSpec::sine(1, 1)}, 1.0, {4}),
                    Catch::Matchers::ContainsSubstring("p must be > 1"));

  MomentCheckOptions opt;
  opt.replicas = 60;
  opt.seed = 73;
  const ConvergenceReport rep =
      hypothesis2_check(ks, {TestFunctionSpec::rectangle(0.3, 0.3, 0.2, 0.2)}, 1.25, {4}, opt);
  for (const auto& row : rep.rows) CHECK(row.value == 0.0);
}

TEST_CASE("hypothesis 2 ratio is stable across n for kac-stroock", "[lab]") {
  NoiseSpec ks;
  ks.model = NoiseModel::kac_stroock;
  MomentCheckOptions opt;
  opt.replicas = 800;
  opt.seed = 74;
  const ConvergenceReport rep = hypothesis2_check(
      ks, {TestFunctionSpec::rectangle(0.25, 0.5, 0.25, 0.5)}, 1.25, {4, 16, 64}, opt);
  CHECK(rep.status != CheckStatus::fail);
  require_positive_stderrs(rep);
}

TEST_CASE("hypothesis 3 m=2 kac-stroock ratio honours the lemma bound", "[lab]") {
  NoiseSpec ks;
  ks.model = NoiseModel::kac_stroock;
  const RectangleSpec rect{0.3, 0.5, 0.3, 0.5};
  MomentCheckOptions opt;
  opt.replicas = 2000;
  opt.seed = 75;
  const ConvergenceReport rep = hypothesis3_check(
      ks, TestFunctionSpec::rectangle(0.0, 1.0, 0.0, 1.0), rect, 2, {4, 16, 64}, opt);
  CHECK(rep.status != CheckStatus::fail);
  const double bound = rect.kac_stroock_m2_bound();
  for (const auto& row : rep.rows) {
    INFO(row.statistic);
    REQUIRE(row.value <= bound + 3.0 * row.stderr_);
  }
}

TEST_CASE("hypothesis 3 argument checks", "[lab]") {
  NoiseSpec ks;
  ks.model = NoiseModel::kac_stroock;
  const TestFunctionSpec f = TestFunctionSpec::rectangle(0.0, 1.0, 0.0, 1.0);
  CHECK_THROWS_AS(
      hypothesis3_check(ks, f, RectangleSpec{0.2, 0.5, 0.3, 0.5}, 2, {4}), std::invalid_argument);
  CHECK_THROWS_AS(
      hypothesis3_check(ks, f, RectangleSpec{0.3, 0.5, 0.3, 0.5}, 3, {4}), std::invalid_argument);
}

TEST_CASE("hypothesis 3 m=10 donsker ratios are finite and stable", "[lab][heavy]") {
  NoiseSpec don;
  don.model = NoiseModel::donsker;
  don.z_law.kind = ZLawKind::rademacher;
  MomentCheckOptions opt;
  opt.replicas = 100000;
  opt.seed = 76;
  const RectangleSpec rect{0.3, 0.5, 0.3, 0.5};
  const ConvergenceReport rep = hypothesis3_check(
      don, TestFunctionSpec::rectangle(0.0, 1.0, 0.0, 1.0), rect, 10, {4, 16, 64}, opt);
  require_positive_stderrs(rep);
  CHECK(rep.status != CheckStatus::fail);
  double lo = 1e300, hi = 0.0;
  for (const auto& row : rep.rows) {
    REQUIRE(std::isfinite(row.value));
    REQUIRE(row.value > 0.0);
    // stability is judged where the rectangle spans >= 2 noise cells per
    // axis; n = 4 leaves the 0.2-wide rectangle inside a single 1/4-cell,
    // where the functional degenerates to one scaled variable
    if (row.n * 0.2 >= 2.0) {
      lo = std::min(lo, row.value);
      hi = std::max(hi, row.value);
    }
  }
  CHECK(hi <= 5.0 * lo);
}

TEST_CASE("donsker moment check: exact isometry at m=2 on aligned rectangles", "[lab]") {
  MomentCheckOptions opt;
  opt.replicas = 4000;
  opt.seed = 77;
  const ConvergenceReport rep = donsker_moment_check(
      {4, 16, 64}, 2, {TestFunctionSpec::rectangle(0.25, 0.75, 0.25, 0.75)},
      ZLaw{ZLawKind::rademacher}, opt);
  CHECK(rep.status != CheckStatus::fail);
  for (const auto& row : rep.rows) {
    INFO(row.statistic);
    REQUIRE(std::abs(row.value - 1.0) <= 3.0 * row.stderr_);
  }
}

TEST_CASE("donsker moment check: m=4 smooth mode stays bounded", "[lab]") {
  MomentCheckOptions opt;
  opt.replicas = 3000;
  opt.seed = 78;
  const ConvergenceReport rep = donsker_moment_check(
      {4, 16, 64}, 4, {TestFunctionSpec::sine(1, 1, 1.0)}, ZLaw{ZLawKind::rademacher}, opt);
  double lo = 1e300, hi = 0.0;
  for (const auto& row : rep.rows) {
    lo = std::min(lo, row.value);
    hi = std::max(hi, row.value);
  }
  CHECK(hi <= 3.0 * lo);
  CHECK_THROWS_AS(donsker_moment_check({4}, 3, {TestFunctionSpec::sine(1, 1)}, ZLaw{}, opt),
                  std::invalid_argument);
}

TEST_CASE("increment scaling slopes for the exact white solution", "[lab]") {
  NoiseSpec white;
  IncrementOptions opt;
  opt.replicas = 4000;
  opt.seed = 79;
  const auto space = increment_scaling(white, 2, IncrementAxis::space, opt);
  CHECK(space.fit.slope == Catch::Approx(1.0).margin(0.1));
  const auto time = increment_scaling(white, 2, IncrementAxis::time, opt);
  CHECK(time.fit.slope == Catch::Approx(0.5).margin(0.1));
  require_positive_stderrs(space.report);

  CHECK_THROWS_AS(increment_scaling(white, 3, IncrementAxis::space, opt), std::invalid_argument);
  IncrementOptions bad = opt;
  bad.separation_multiples = {1, 2};
  CHECK_THROWS_AS(increment_scaling(white, 2, IncrementAxis::space, bad), std::invalid_argument);
  IncrementOptions edge = opt;
  edge.anchor = {0.5, 1.0};
  CHECK_THROWS_AS(increment_scaling(white, 2, IncrementAxis::space, edge), std::invalid_argument);
}

TEST_CASE("increment scaling for kac-stroock noise at n=256", "[lab][heavy]") {
  NoiseSpec ks;
  ks.model = NoiseModel::kac_stroock;
  ks.n = 256;
  IncrementOptions opt;
  opt.replicas = 1500;
  opt.seed = 80;
  // separations above the 1/(2n) decorrelation scale of the noise, where the
  // diffusive increment regime is visible
  opt.separation_multiples = {8, 16, 32, 64};
  const auto space = increment_scaling(ks, 2, IncrementAxis::space, opt);
  CHECK(space.fit.slope == Catch::Approx(1.0).margin(0.15));
}

TEST_CASE("manthey integral values and monotone growth", "[lab]") {
  CHECK_THROWS_AS(manthey_integral(1, 1.0), std::invalid_argument);

  // vanishing integration domain as x -> 1
  CHECK(manthey_integral_at(8, 1.0, 0.999) < manthey_integral_at(8, 1.0, 0.5));
  CHECK(manthey_integral_at(8, 1.0, 0.999999) < 1e-3);

  // frozen from an independent high-precision quadrature of the reduced form
  const std::vector<std::pair<int, double>> frozen = {
      {8, 0.39884517297}, {32, 0.472491704092}, {128, 0.534411687258}, {512, 0.593951282723}};
  double prev = 0.0;
  for (const auto& [n, want] : frozen) {
    const double got = manthey_integral(n, 1.0);
    INFO("n=" << n);
    REQUIRE(got == Catch::Approx(want).epsilon(5e-3));
    REQUIRE(got > prev);
    prev = got;
  }
}

TEST_CASE("manthey conditions: donsker bounded, kac-stroock growing", "[lab]") {
  ConditionsOptions opt;
  opt.replicas = 200;
  opt.seed = 81;

  NoiseSpec don;
  don.model = NoiseModel::donsker;
  const ConvergenceReport rd = manthey_conditions_report(don, {4, 16, 64}, opt);
  CHECK(rd.status != CheckStatus::fail);
  require_positive_stderrs(rd);
  std::vector<double> c4;
  for (const auto& row : rd.rows)
    if (row.statistic == "cond_iv_cov_integral") c4.push_back(row.value);
  REQUIRE(c4.size() == 3);
  CHECK(*std::max_element(c4.begin(), c4.end()) <= 2.0 * *std::min_element(c4.begin(), c4.end()));

  NoiseSpec ks;
  ks.model = NoiseModel::kac_stroock;
  const ConvergenceReport rk = manthey_conditions_report(ks, {4, 16, 64}, opt);
  CHECK(rk.status != CheckStatus::fail);
  std::vector<double> k4;
  for (const auto& row : rk.rows)
    if (row.statistic == "cond_iv_cov_integral") k4.push_back(row.value);
  REQUIRE(k4.size() == 3);
  CHECK(k4[0] < k4[1]);
  CHECK(k4[1] < k4[2]);

  NoiseSpec white;
  const ConvergenceReport rw = manthey_conditions_report(white, {}, opt);
  for (const auto& row : rw.rows)
    if (row.statistic == "cond_iii_mean") CHECK(std::abs(row.value) <= 3.0 * row.stderr_);
}

TEST_CASE("lab grids resolve the noise", "[lab]") {
  const GridSpec g1 = lab_grid_for(NoiseModel::kac_stroock, 256, 1.0);
  CHECK(g1.nt == 512);
  CHECK(g1.nx == 512);
  const GridSpec g2 = lab_grid_for(NoiseModel::donsker, 48, 1.0);
  CHECK(g2.nx % 48 == 0);
  CHECK(g2.nx >= 64);
  const GridSpec g3 = lab_grid_for(NoiseModel::white, 1, 0.5);
  CHECK(g3.t_max == 0.5);
}
