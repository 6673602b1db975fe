#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "shelab/errors.hpp"
#include "shelab/green.hpp"
#include "shelab/grid.hpp"
#include "shelab/noise.hpp"
#include "shelab/parallel.hpp"
#include "shelab/random.hpp"

namespace shelab {

// Default spectral truncation of the white-noise solution sampler.  The
// omitted modes carry ~8e-4 of stationary variance at x = 1/2, two orders of
// magnitude below the Monte Carlo resolution of every check that consumes
// these samples; the closed-form variance routines below are exact.
inline constexpr int kDefaultSpectralModes = 64;

// ---------------------------------------------------------------------------
// Problem data
// ---------------------------------------------------------------------------

// Globally Lipschitz drift with a caller-declared bound.  The bound is
// spot-checked at registration so that a mis-declared constant fails loudly
// instead of silently breaking the contraction diagnostics.
struct DriftSpec {
  std::function<double(double)> b;
  double lipschitz_bound = 0.0;
  bool is_zero = false;

  static DriftSpec zero() {
    DriftSpec d;
    d.b = [](double) { return 0.0; };
    d.lipschitz_bound = 0.0;
    d.is_zero = true;
    return d;
  }

  static DriftSpec checked(std::function<double(double)> fn, double lipschitz) {
    if (!fn) throw std::invalid_argument("DriftSpec: missing callable");
    if (lipschitz < 0.0) throw std::invalid_argument("DriftSpec: negative Lipschitz bound");
    RandomStream probe(0x5eedb0b5u);
    for (int k = 0; k < 1000; ++k) {
      const double u = probe.uniform(-8.0, 8.0);
      const double v = probe.uniform(-8.0, 8.0);
      if (std::abs(fn(u) - fn(v)) > lipschitz * std::abs(u - v) * (1.0 + 1e-9) + 1e-12)
        throw std::invalid_argument("DriftSpec: declared Lipschitz bound violated on spot check");
    }
    DriftSpec d;
    d.b = std::move(fn);
    d.lipschitz_bound = lipschitz;
    return d;
  }
};

struct InitialData {
  std::function<double(double)> u0;
  bool boundary_compatible = false;
  bool is_zero = false;

  static InitialData zero() {
    InitialData d;
    d.u0 = [](double) { return 0.0; };
    d.boundary_compatible = true;
    d.is_zero = true;
    return d;
  }

  static InitialData checked(std::function<double(double)> fn, bool compatible) {
    if (!fn) throw std::invalid_argument("InitialData: missing callable");
    for (double x : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      if (!std::isfinite(fn(x))) throw std::invalid_argument("InitialData: u0 not finite on [0,1]");
    }
    if (compatible && (std::abs(fn(0.0)) > 1e-12 || std::abs(fn(1.0)) > 1e-12))
      throw std::invalid_argument("InitialData: boundary-compatible flag but u0(0) or u0(1) != 0");
    InitialData d;
    d.u0 = std::move(fn);
    d.boundary_compatible = compatible;
    return d;
  }
};

// ---------------------------------------------------------------------------
// Deterministic initial term  int_0^1 G_t(x,y) u0(y) dy
// ---------------------------------------------------------------------------

namespace detail {

// 8-point Gauss-Legendre nodes/weights on [-1, 1]
inline constexpr double kGlNode[4] = {0.1834346424956498, 0.5255324099163290,
                                      0.7966664774136267, 0.9602898564975363};
inline constexpr double kGlWeight[4] = {0.3626837833783620, 0.3137066458778873,
                                        0.2223810344533745, 0.1012285362903763};

// Composite Gauss-Legendre over [0,1]; panel count scales with the kernel
// spike width so short times stay accurate.
template <typename Fn>
double integrate01_gl(Fn&& f, int panels) {
  const double h = 1.0 / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double c = (p + 0.5) * h;
    for (int q = 0; q < 4; ++q) {
      const double d = 0.5 * h * kGlNode[q];
      acc += kGlWeight[q] * (f(c - d) + f(c + d));
    }
  }
  return acc * 0.5 * h;
}

inline int initial_panels(double t, int min_panels) {
  const int p = static_cast<int>(std::ceil(4.0 / std::sqrt(t)));
  return std::clamp(p, std::max(min_panels, 16), 8192);
}

}  // namespace detail

inline double initial_term(const InitialData& u0, double t, double x, int min_panels = 16) {
  if (t < 0.0) throw std::invalid_argument("initial_term: t must be >= 0");
  if (u0.is_zero) return 0.0;
  if (t == 0.0) return u0.u0(x);
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const int panels = detail::initial_panels(t, min_panels);
  return detail::integrate01_gl(
      [&](double y) { return green(t, x, y, 1e-13) * u0.u0(y); }, panels);
}

// Initial term on every grid node; u0 is evaluated once per quadrature node
// and shared across the row.
inline ScalarField initial_field(const InitialData& u0, const GridSpec& grid,
                                 int min_panels = 16) {
  ScalarField out(grid, Centering::node);
  if (u0.is_zero) return out;
  for (int j = 0; j <= grid.nx; ++j) out(0, j) = u0.u0(grid.node_x(j));
  for (int i = 1; i <= grid.nt; ++i) {
    const double t = grid.node_t(i);
    const int panels = detail::initial_panels(t, min_panels);
    const double h = 1.0 / panels;
    std::vector<double> ys, uy;
    ys.reserve(static_cast<std::size_t>(panels) * 8);
    for (int p = 0; p < panels; ++p) {
      const double c = (p + 0.5) * h;
      for (int q = 0; q < 4; ++q) {
        ys.push_back(c - 0.5 * h * detail::kGlNode[q]);
        ys.push_back(c + 0.5 * h * detail::kGlNode[q]);
      }
    }
    uy.resize(ys.size());
    for (std::size_t k = 0; k < ys.size(); ++k) uy[k] = u0.u0(ys[k]);
    for (int j = 1; j < grid.nx; ++j) {
      const double x = grid.node_x(j);
      double acc = 0.0;
      std::size_t k = 0;
      for (int p = 0; p < panels; ++p) {
        for (int q = 0; q < 4; ++q) {
          acc += detail::kGlWeight[q] * (green(t, x, ys[k], 1e-13) * uy[k] +
                                         green(t, x, ys[k + 1], 1e-13) * uy[k + 1]);
          k += 2;
        }
      }
      out(i, j) = acc * 0.5 * h;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stochastic convolution X(t,x) = int_0^t int_0^1 G_{t-s}(x,y) theta(s,y) dy ds
// ---------------------------------------------------------------------------

// Per-grid kernel tables for the convolution quadrature.  Time cells are
// integrated by the midpoint rule against the cell-midpoint noise values; the
// final (singular) time cell is split geometrically toward s = t, and any
// slice whose kernel spike is narrower than a space cell switches from
// pointwise kernel values to exact cell averages of the kernel.  Immutable
// after construction; concurrent evaluation is safe.
class MildConvolver {
 public:
  explicit MildConvolver(const GridSpec& grid, double kernel_tol = 1e-12, int refine_levels = 12)
      : grid_(grid), dt_(grid.dt()), dx_(grid.dx()) {
    grid_.validate();
    slices_.resize(grid_.nt >= 2 ? grid_.nt - 1 : 0);
    // each slice row carries the kernel averaged in time across its cell
    // (2-point Gauss-Legendre), so the only time-discretisation left is the
    // midpoint sampling of the noise itself
    constexpr double gl = 0.28867513459481287;  // 1/(2 sqrt(3))
    for (int di = 2; di <= grid_.nt; ++di) {
      const double c = (di - 0.5) * dt_;
      const std::vector<double> ra = build_row(c - gl * dt_, kernel_tol);
      const std::vector<double> rb = build_row(c + gl * dt_, kernel_tol);
      std::vector<double> row(grid_.nx);
      for (int k = 0; k < grid_.nx; ++k) row[k] = 0.5 * (ra[k] + rb[k]);
      slices_[di - 2] = std::move(row);
    }
    // final cell: geometric halving toward the evaluation time
    double hi = dt_;
    for (int l = 0; l < refine_levels; ++l) {
      const double lo = 0.5 * hi;
      const double w = 0.5 * (hi - lo);
      final_segs_.emplace_back(w, build_row(lo + 0.25 * (hi - lo), kernel_tol));
      final_segs_.emplace_back(w, build_row(lo + 0.75 * (hi - lo), kernel_tol));
      hi = lo;
    }
    final_segs_.emplace_back(hi, build_row(0.5 * hi, kernel_tol));
  }

  const GridSpec& grid() const { return grid_; }

  double at(const ScalarField& theta, int i, int j) const {
    check_theta(theta);
    if (i < 0 || i > grid_.nt || j < 0 || j > grid_.nx)
      throw std::invalid_argument("MildConvolver: node out of range");
    if (i == 0 || j == 0 || j == grid_.nx) return 0.0;
    std::vector<int> k1(grid_.nx), k2(grid_.nx);
    fold_indices(j, k1.data(), k2.data());
    return value(theta, i, k1.data(), k2.data());
  }

  ScalarField at_nodes(const ScalarField& theta,
                       const std::vector<std::pair<int, int>>& nodes) const {
    ScalarField out(grid_, Centering::node);
    for (const auto& [i, j] : nodes) out(i, j) = at(theta, i, j);
    return out;
  }

  ScalarField full(const ScalarField& theta, int threads = 1) const {
    check_theta(theta);
    ScalarField out(grid_, Centering::node);
    parallel_for(static_cast<std::size_t>(grid_.nx) - 1, threads, [&](std::size_t q) {
      const int j = static_cast<int>(q) + 1;
      std::vector<int> k1(grid_.nx), k2(grid_.nx);
      fold_indices(j, k1.data(), k2.data());
      for (int i = 1; i <= grid_.nt; ++i) out(i, j) = value(theta, i, k1.data(), k2.data());
    });
    return out;
  }

 private:
  void check_theta(const ScalarField& theta) const {
    if (theta.centering() != Centering::cell || !(theta.grid() == grid_))
      throw std::invalid_argument("MildConvolver: theta must be cell-centred on this grid");
  }

  // G(x_j, y_m) = g((2(j-m)-1) dx/2) - g((2(j+m)+1) dx/2); both arguments are
  // odd multiples of dx/2, folded into [0,1] by evenness and 2-periodicity.
  void fold_indices(int j, int* k1, int* k2) const {
    const int nx = grid_.nx;
    for (int m = 0; m < nx; ++m) {
      int r1 = 2 * (j - m) - 1;
      if (r1 < 0) r1 = -r1;
      k1[m] = (r1 - 1) / 2;
      int r2 = 2 * (j + m) + 1;
      if (r2 > 2 * nx) r2 = 4 * nx - r2;
      k2[m] = (r2 - 1) / 2;
    }
  }

  double value(const ScalarField& theta, int i, const int* k1, const int* k2) const {
    const int nx = grid_.nx;
    double acc = 0.0;
    for (int di = 2; di <= i; ++di) {
      const double* row = slices_[di - 2].data();
      const double* th = theta.row(i - di);
      double s = 0.0;
      for (int m = 0; m < nx; ++m) s += (row[k1[m]] - row[k2[m]]) * th[m];
      acc += s;
    }
    acc *= dt_;
    const double* th = theta.row(i - 1);
    for (const auto& [w, rowv] : final_segs_) {
      const double* row = rowv.data();
      double s = 0.0;
      for (int m = 0; m < nx; ++m) s += (row[k1[m]] - row[k2[m]]) * th[m];
      acc += w * s;
    }
    return acc * dx_;
  }

  std::vector<double> build_row(double tau, double tol) const {
    const int nx = grid_.nx;
    std::vector<double> r(nx);
    if (4.0 * tau >= 9.0 * dx_ * dx_) {
      for (int k = 0; k < nx; ++k)
        r[k] = periodic_heat_kernel(tau, (2 * k + 1) * 0.5 * dx_, tol);
    } else {
      std::vector<double> F(nx + 1);
      for (int k = 0; k <= nx; ++k) F[k] = periodic_heat_primitive(tau, k * dx_, tol);
      for (int k = 0; k < nx; ++k) r[k] = (F[k + 1] - F[k]) / dx_;
    }
    return r;
  }

  GridSpec grid_{};
  double dt_ = 0.0;
  double dx_ = 0.0;
  std::vector<std::vector<double>> slices_;                    // di = 2 .. nt
  std::vector<std::pair<double, std::vector<double>>> final_segs_;  // (time weight, row)
};

inline ScalarField convolve_mild(const ScalarField& theta, const GridSpec& grid,
                                 const std::vector<std::pair<int, int>>& eval_nodes) {
  MildConvolver conv(grid);
  return conv.at_nodes(theta, eval_nodes);
}

inline ScalarField convolve_mild_full(const ScalarField& theta, const GridSpec& grid,
                                      int threads = 1) {
  MildConvolver conv(grid);
  return conv.full(theta, threads);
}

// ---------------------------------------------------------------------------
// Exact sampling of the white-noise solution via Ornstein-Uhlenbeck modes
// ---------------------------------------------------------------------------

// Truncated variance sum_{k<=K} sin^2(k pi x)(1 - e^{-2 k^2 pi^2 t})/(k^2 pi^2):
// the variance actually carried by a K-mode sampler.
inline double white_solution_variance(double t, double x, int modes) {
  if (t < 0.0) throw std::invalid_argument("white_solution_variance: t must be >= 0");
  if (modes < 1) throw std::invalid_argument("white_solution_variance: modes must be >= 1");
  const double pi = std::numbers::pi;
  double acc = 0.0;
  for (int k = 1; k <= modes; ++k) {
    const double s = std::sin(k * pi * x);
    const double lam = k * k * pi * pi;
    acc += s * s * (1.0 - std::exp(-2.0 * lam * t)) / lam;
  }
  return acc;
}

namespace detail {

// A(s) = sum_k sin(k pi x1) sin(k pi x2) e^{-k^2 pi^2 s} / (k^2 pi^2).
// A(0) has the closed form min(x1,x2)(1 - max(x1,x2))/2; for s > 0 the series
// is summed to machine accuracy.
inline double sine_decay_series(double s, double x1, double x2) {
  if (s < 0.0) throw std::invalid_argument("sine_decay_series: s must be >= 0");
  if (s == 0.0) return 0.5 * std::min(x1, x2) * (1.0 - std::max(x1, x2));
  const double pi = std::numbers::pi;
  double acc = 0.0;
  for (int k = 1;; ++k) {
    const double lam = k * k * pi * pi;
    acc += std::sin(k * pi * x1) * std::sin(k * pi * x2) * std::exp(-lam * s) / lam;
    const double kl = (k + 1.0) * (k + 1.0) * pi * pi;
    if (std::exp(-kl * s) / kl / (1.0 - std::exp(-2.0 * (k + 1.0) * pi * pi * s)) < 1e-18) break;
    if (k > 2000000) break;
  }
  return acc;
}

}  // namespace detail

// Exact variance E X(t,x)^2 = int_0^t int_0^1 G^2 (full series).
inline double white_solution_variance(double t, double x) {
  if (t < 0.0) throw std::invalid_argument("white_solution_variance: t must be >= 0");
  if (t == 0.0) return 0.0;
  return 0.5 * x * (1.0 - x) - detail::sine_decay_series(2.0 * t, x, x);
}

// Exact covariance of the white-noise solution at two space-time points.
inline double white_solution_covariance(double t1, double x1, double t2, double x2) {
  if (t1 < 0.0 || t2 < 0.0) throw std::invalid_argument("white_solution_covariance: t >= 0");
  if (t1 == 0.0 || t2 == 0.0) return 0.0;
  return detail::sine_decay_series(std::abs(t1 - t2), x1, x2) -
         detail::sine_decay_series(t1 + t2, x1, x2);
}

// K Ornstein-Uhlenbeck mode amplitudes of the white-noise solution, advanced
// with exact transitions: a_k(t+d) = e^{-k^2 pi^2 d} a_k(t) + N(0, (1 - e^{-2
// k^2 pi^2 d})/(2 k^2 pi^2)).
struct SpectralState {
  std::vector<double> a;
  double t_current = 0.0;

  explicit SpectralState(int modes = kDefaultSpectralModes) : a(modes, 0.0) {
    if (modes < 1) throw std::invalid_argument("SpectralState: modes must be >= 1");
  }

  int modes() const { return static_cast<int>(a.size()); }

  void advance(double delta, RandomStream& rng) {
    if (delta < 0.0) throw std::invalid_argument("SpectralState: negative step");
    const double pi = std::numbers::pi;
    for (std::size_t k = 1; k <= a.size(); ++k) {
      const double lam = static_cast<double>(k) * k * pi * pi;
      const double decay = std::exp(-lam * delta);
      const double sd = std::sqrt((1.0 - decay * decay) / (2.0 * lam));
      a[k - 1] = decay * a[k - 1] + sd * rng.normal();
    }
    t_current += delta;
  }

  double eval(double x) const {
    const double pi = std::numbers::pi;
    double acc = 0.0;
    for (std::size_t k = 1; k <= a.size(); ++k)
      acc += std::numbers::sqrt2 * std::sin(static_cast<double>(k) * pi * x) * a[k - 1];
    return acc;
  }
};

// Exact-in-distribution white-noise solution on the grid nodes.
inline ScalarField sample_white_solution(RandomStream& rng, const GridSpec& grid,
                                         int modes = kDefaultSpectralModes) {
  grid.validate();
  const double pi = std::numbers::pi;
  // sine table with the boundary columns pinned to exact zeros
  std::vector<double> sins(static_cast<std::size_t>(modes) * (grid.nx + 1), 0.0);
  for (int k = 1; k <= modes; ++k)
    for (int j = 1; j < grid.nx; ++j)
      sins[static_cast<std::size_t>(k - 1) * (grid.nx + 1) + j] =
          std::numbers::sqrt2 * std::sin(k * pi * grid.node_x(j));

  ScalarField out(grid, Centering::node);
  SpectralState st(modes);
  for (int i = 1; i <= grid.nt; ++i) {
    st.advance(grid.dt(), rng);
    for (int j = 1; j < grid.nx; ++j) {
      double acc = 0.0;
      for (int k = 0; k < modes; ++k)
        acc += sins[static_cast<std::size_t>(k) * (grid.nx + 1) + j] * st.a[k];
      out(i, j) = acc;
    }
  }
  return out;
}

// Exact marginal sampling at a handful of space-time points (sorted internal
// time sweep; results returned in input order).
class WhitePointSampler {
 public:
  WhitePointSampler(std::vector<std::pair<double, double>> points,
                    int modes = kDefaultSpectralModes)
      : points_(std::move(points)), modes_(modes) {
    times_.reserve(points_.size());
    for (const auto& [t, x] : points_) {
      if (t < 0.0 || x < 0.0 || x > 1.0)
        throw std::invalid_argument("WhitePointSampler: point outside the domain");
      times_.push_back(t);
    }
    std::sort(times_.begin(), times_.end());
    times_.erase(std::unique(times_.begin(), times_.end()), times_.end());
    if (!times_.empty() && times_.front() == 0.0) times_.erase(times_.begin());
  }

  std::vector<double> sample(RandomStream& rng) const {
    SpectralState st(modes_);
    std::vector<double> out(points_.size(), 0.0);
    for (double t : times_) {
      st.advance(t - st.t_current, rng);
      for (std::size_t p = 0; p < points_.size(); ++p)
        if (points_[p].first == t) out[p] = st.eval(points_[p].second);
    }
    return out;
  }

 private:
  std::vector<std::pair<double, double>> points_;
  std::vector<double> times_;
  int modes_;
};

// ---------------------------------------------------------------------------
// The quasi-linear functional psi and the composed solvers
// ---------------------------------------------------------------------------

struct PsiOptions {
  double tol = 1e-10;  // sup-norm change between Picard iterates
  int max_iter = 200;
  int threads = 1;
};

struct PsiResult {
  ScalarField field;
  int iterations = 0;
  std::vector<double> residuals;
};

// Fixed point of z = initial_term + int int G b(z) + eta by Picard iteration.
inline PsiResult psi_functional(const ScalarField& eta, const InitialData& u0,
                                const DriftSpec& b, const MildConvolver& conv,
                                const PsiOptions& opt = {}) {
  if (eta.centering() != Centering::node)
    throw std::invalid_argument("psi_functional: eta must be node-centred");
  if (!(eta.grid() == conv.grid()))
    throw std::invalid_argument("psi_functional: eta grid does not match the convolver");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("psi_functional: tol must be positive");
  const GridSpec& grid = eta.grid();

  ScalarField base = initial_field(u0, grid);
  for (std::size_t q = 0; q < base.values().size(); ++q) base.values()[q] += eta.values()[q];

  PsiResult res;
  res.field = base;
  if (b.is_zero) return res;

  ScalarField z = base;
  ScalarField bz(grid, Centering::cell);
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    // drift evaluated at the nodes, averaged to cell midpoints
    for (int i = 0; i < grid.nt; ++i) {
      const double* r0 = z.row(i);
      const double* r1 = z.row(i + 1);
      double* w = bz.row(i);
      for (int m = 0; m < grid.nx; ++m)
        w[m] = 0.25 * (b.b(r0[m]) + b.b(r0[m + 1]) + b.b(r1[m]) + b.b(r1[m + 1]));
    }
    ScalarField c = conv.full(bz, opt.threads);
    for (std::size_t q = 0; q < c.values().size(); ++q) c.values()[q] += base.values()[q];
    const double resid = sup_distance(c, z);
    res.residuals.push_back(resid);
    z = std::move(c);
    res.iterations = iter;
    if (resid < opt.tol) {
      res.field = std::move(z);
      return res;
    }
  }
  throw convergence_error("psi_functional: Picard iteration did not converge",
                          res.residuals.back());
}

inline PsiResult psi_functional(const ScalarField& eta, const InitialData& u0,
                                const DriftSpec& b, const PsiOptions& opt = {}) {
  MildConvolver conv(eta.grid());
  return psi_functional(eta, u0, b, conv, opt);
}

// U_n = psi(X_n) for sampled noise; U = psi(X) for the white driver.
inline ScalarField solve_quasilinear(const NoiseSpec& spec, const InitialData& u0,
                                     const DriftSpec& b, const GridSpec& grid, RandomStream& rng,
                                     const MildConvolver& conv, const PsiOptions& opt = {},
                                     int modes = kDefaultSpectralModes) {
  spec.validate();
  ScalarField eta(grid, Centering::node);
  if (spec.model == NoiseModel::white) {
    eta = sample_white_solution(rng, grid, modes);
  } else {
    const ScalarField theta = sample_noise_field(spec, rng, grid);
    eta = conv.full(theta, opt.threads);
  }
  if (b.is_zero) {
    ScalarField out = initial_field(u0, grid);
    for (std::size_t q = 0; q < out.values().size(); ++q) out.values()[q] += eta.values()[q];
    return out;
  }
  return psi_functional(eta, u0, b, conv, opt).field;
}

inline ScalarField solve_quasilinear(const NoiseSpec& spec, const InitialData& u0,
                                     const DriftSpec& b, const GridSpec& grid, RandomStream& rng,
                                     const PsiOptions& opt = {},
                                     int modes = kDefaultSpectralModes) {
  MildConvolver conv(grid);
  return solve_quasilinear(spec, u0, b, grid, rng, conv, opt, modes);
}

}  // namespace shelab
