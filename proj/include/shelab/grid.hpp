#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace shelab {

// Uniform space-time lattice on [0, t_max] x [0, 1].  Node (i, j) sits at
// (i * t_max / nt, j / nx); cell (i, j) is the rectangle between nodes.
struct GridSpec {
  double t_max = 1.0;
  int nt = 64;
  int nx = 64;

  GridSpec() = default;
  GridSpec(double t_max_, int nt_, int nx_) : t_max(t_max_), nt(nt_), nx(nx_) { validate(); }

  void validate() const {
    if (!(t_max > 0.0)) throw std::invalid_argument("GridSpec: t_max must be positive");
    if (nt < 1 || nx < 1) throw std::invalid_argument("GridSpec: nt and nx must be >= 1");
  }

  double dt() const { return t_max / nt; }
  double dx() const { return 1.0 / nx; }

  double node_t(int i) const { return t_max * i / nt; }
  double node_x(int j) const { return static_cast<double>(j) / nx; }
  double mid_t(int i) const { return t_max * (i + 0.5) / nt; }
  double mid_x(int j) const { return (j + 0.5) / nx; }

  // Node index of an on-grid coordinate; off-grid queries are rejected.
  int t_index(double t) const {
    const long long i = std::llround(t / dt());
    if (i < 0 || i > nt || std::abs(t - node_t(static_cast<int>(i))) > 1e-9 * std::max(1.0, t_max))
      throw std::invalid_argument("GridSpec: t is not a grid node");
    return static_cast<int>(i);
  }
  int x_index(double x) const {
    const long long j = std::llround(x * nx);
    if (j < 0 || j > nx || std::abs(x - node_x(static_cast<int>(j))) > 1e-9)
      throw std::invalid_argument("GridSpec: x is not a grid node");
    return static_cast<int>(j);
  }

  bool operator==(const GridSpec&) const = default;
};

// Where field values live relative to the lattice.  Solutions and forcing
// paths are node-centred; sampled noise is cell-centred (one value per cell
// midpoint), which is what the midpoint quadratures downstream consume.
enum class Centering { node, cell };

class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(const GridSpec& grid, Centering centering, double fill = 0.0)
      : grid_(grid), centering_(centering) {
    grid_.validate();
    values_.assign(static_cast<std::size_t>(rows()) * cols(), fill);
  }

  const GridSpec& grid() const { return grid_; }
  Centering centering() const { return centering_; }

  int rows() const { return centering_ == Centering::node ? grid_.nt + 1 : grid_.nt; }
  int cols() const { return centering_ == Centering::node ? grid_.nx + 1 : grid_.nx; }

  double& operator()(int i, int j) { return values_[static_cast<std::size_t>(i) * cols() + j]; }
  double operator()(int i, int j) const {
    return values_[static_cast<std::size_t>(i) * cols() + j];
  }

  double* row(int i) { return values_.data() + static_cast<std::size_t>(i) * cols(); }
  const double* row(int i) const { return values_.data() + static_cast<std::size_t>(i) * cols(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  // Coordinate of entry (i, j) under the field's centering.
  double coord_t(int i) const { return centering_ == Centering::node ? grid_.node_t(i) : grid_.mid_t(i); }
  double coord_x(int j) const { return centering_ == Centering::node ? grid_.node_x(j) : grid_.mid_x(j); }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  bool same_shape(const ScalarField& other) const {
    return grid_ == other.grid_ && centering_ == other.centering_;
  }

  bool operator==(const ScalarField&) const = default;

 private:
  GridSpec grid_{};
  Centering centering_ = Centering::node;
  std::vector<double> values_;
};

inline double sup_distance(const ScalarField& a, const ScalarField& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("sup_distance: shape mismatch");
  double m = 0.0;
  for (std::size_t q = 0; q < a.values().size(); ++q)
    m = std::max(m, std::abs(a.values()[q] - b.values()[q]));
  return m;
}

}  // namespace shelab
