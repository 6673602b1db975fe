#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "shelab/errors.hpp"
#include "shelab/grid.hpp"
#include "shelab/poisson_plane.hpp"
#include "shelab/random.hpp"

namespace shelab {

// Law of the i.i.d. driving variables of the Donsker kernels; every variant
// is centred with unit variance and has all the moments the checks need.
enum class ZLawKind { rademacher, centered_uniform, shifted_exponential };

struct ZLaw {
  ZLawKind kind = ZLawKind::rademacher;

  double sample(RandomStream& rng) const {
    switch (kind) {
      case ZLawKind::rademacher:
        return rng.rademacher();
      case ZLawKind::centered_uniform: {
        constexpr double r = 1.7320508075688772;  // sqrt(3)
        return rng.uniform(-r, r);
      }
      case ZLawKind::shifted_exponential:
        return rng.exponential() - 1.0;
    }
    return 0.0;
  }

  const char* name() const {
    switch (kind) {
      case ZLawKind::rademacher: return "rademacher";
      case ZLawKind::centered_uniform: return "centered-uniform";
      case ZLawKind::shifted_exponential: return "shifted-exponential";
    }
    return "?";
  }
};

enum class NoiseModel { white, kac_stroock, donsker };

struct NoiseSpec {
  NoiseModel model = NoiseModel::white;
  int n = 1;        // approximation index; unused for white
  ZLaw z_law{};     // donsker only

  void validate() const {
    if (model != NoiseModel::white && n < 1)
      throw std::invalid_argument("NoiseSpec: n must be >= 1");
  }

  std::string name() const {
    switch (model) {
      case NoiseModel::white: return "white";
      case NoiseModel::kac_stroock: return "kac-stroock(n=" + std::to_string(n) + ")";
      case NoiseModel::donsker:
        return std::string("donsker(n=") + std::to_string(n) + "," + z_law.name() + ")";
    }
    return "?";
  }
};

// Expected Poisson point count above this is refused outright.
inline constexpr double kPoissonCapacity = 1e8;

// theta_n(t,x) = n sqrt(tx) (-1)^{N(sqrt(n) t, sqrt(n) x)} sampled at cell
// midpoints.  One point set per replica, shared by every midpoint query.
inline ScalarField kac_stroock_field(RandomStream& rng, int n, const GridSpec& grid) {
  if (n < 1) throw std::invalid_argument("kac_stroock_field: n must be >= 1");
  grid.validate();
  const double intensity = static_cast<double>(n) * grid.t_max;
  if (intensity > kPoissonCapacity)
    throw capacity_error("kac_stroock_field: expected point count n*T exceeds 1e8");
  const double rn = std::sqrt(static_cast<double>(n));
  PoissonPointSet pps = sample_poisson_plane(rng, rn * grid.t_max, rn);

  std::vector<std::pair<double, double>> queries;
  queries.reserve(static_cast<std::size_t>(grid.nt) * grid.nx);
  for (int i = 0; i < grid.nt; ++i)
    for (int j = 0; j < grid.nx; ++j) queries.emplace_back(rn * grid.mid_t(i), rn * grid.mid_x(j));
  const std::vector<int> par = parity_count(pps, queries);

  ScalarField theta(grid, Centering::cell);
  std::size_t q = 0;
  for (int i = 0; i < grid.nt; ++i) {
    const double t = grid.mid_t(i);
    for (int j = 0; j < grid.nx; ++j, ++q) {
      const double amp = n * std::sqrt(t * grid.mid_x(j));
      theta(i, j) = par[q] ? -amp : amp;
    }
  }
  return theta;
}

// theta_n(t,x) = n * Z_k on the 1/n-cell containing (t,x); only cells meeting
// [0,T]x[0,1] are materialised, drawn in row-major order.
inline ScalarField donsker_field(RandomStream& rng, int n, const GridSpec& grid,
                                 const ZLaw& law = {}) {
  if (n < 1) throw std::invalid_argument("donsker_field: n must be >= 1");
  grid.validate();
  const int kt = static_cast<int>(std::floor(grid.t_max * n)) + 1;
  const int kx = n;  // midpoints stay strictly below x = 1
  std::vector<double> z(static_cast<std::size_t>(kt) * kx);
  for (double& v : z) v = law.sample(rng);

  ScalarField theta(grid, Centering::cell);
  for (int i = 0; i < grid.nt; ++i) {
    const int ct = std::min(static_cast<int>(grid.mid_t(i) * n), kt - 1);
    for (int j = 0; j < grid.nx; ++j) {
      const int cx = std::min(static_cast<int>(grid.mid_x(j) * n), kx - 1);
      theta(i, j) = n * z[static_cast<std::size_t>(ct) * kx + cx];
    }
  }
  return theta;
}

// Independent centred Gaussian cell increments, variance = cell area.
inline std::vector<double> brownian_sheet_increments(RandomStream& rng, const GridSpec& grid) {
  grid.validate();
  const double sd = std::sqrt(grid.dt() * grid.dx());
  std::vector<double> inc(static_cast<std::size_t>(grid.nt) * grid.nx);
  for (double& v : inc) v = sd * rng.normal();
  return inc;
}

// Cell-centred white-noise density: sheet increments divided by cell area.
// This is the grid-level stand-in for theta when the driving noise is white.
inline ScalarField white_noise_field(RandomStream& rng, const GridSpec& grid) {
  ScalarField theta(grid, Centering::cell);
  const double area = grid.dt() * grid.dx();
  const std::vector<double> inc = brownian_sheet_increments(rng, grid);
  for (std::size_t q = 0; q < inc.size(); ++q) theta.values()[q] = inc[q] / area;
  return theta;
}

inline ScalarField sample_noise_field(const NoiseSpec& spec, RandomStream& rng,
                                      const GridSpec& grid) {
  spec.validate();
  switch (spec.model) {
    case NoiseModel::white: return white_noise_field(rng, grid);
    case NoiseModel::kac_stroock: return kac_stroock_field(rng, spec.n, grid);
    case NoiseModel::donsker: return donsker_field(rng, spec.n, grid, spec.z_law);
  }
  throw std::invalid_argument("sample_noise_field: unknown model");
}

// zeta(t,x) = int_0^t int_0^x theta, midpoint rule over whole cells; (t,x)
// must be grid nodes.  Exact for Donsker fields on 1/n-aligned grids.
inline double integrate_zeta(const ScalarField& theta, double t, double x) {
  if (theta.centering() != Centering::cell)
    throw std::invalid_argument("integrate_zeta: theta must be cell-centred");
  const GridSpec& g = theta.grid();
  const int it = g.t_index(t);
  const int jx = g.x_index(x);
  double acc = 0.0;
  for (int i = 0; i < it; ++i) {
    const double* row = theta.row(i);
    for (int j = 0; j < jx; ++j) acc += row[j];
  }
  return acc * g.dt() * g.dx();
}

// E[(-1)^{N_n(s,y) + N_n(t,x)}]; four cases depending on the ordering of the
// two corners, each an explicit exponential.
inline double parity_covariance_exact(int n, double s, double y, double t, double x) {
  const double a = 2.0 * n;
  if (s <= t && y <= x) return std::exp(-a * ((t - s) * x + (x - y) * s));
  if (s <= t && y >= x) return std::exp(-a * ((t - s) * x + (y - x) * s));
  if (s >= t && y <= x) return std::exp(-a * ((s - t) * y + (x - y) * t));
  return std::exp(-a * ((s - t) * y + (y - x) * t));
}

// E[theta_n(s,y) theta_n(t,x)] for the Kac-Stroock process.
inline double kac_stroock_covariance_exact(int n, double s, double y, double t, double x) {
  return static_cast<double>(n) * n * std::sqrt(s * y * t * x) *
         parity_covariance_exact(n, s, y, t, x);
}

}  // namespace shelab
