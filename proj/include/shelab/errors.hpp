#pragma once

#include <stdexcept>
#include <string>

namespace shelab {

// Fixed-point iteration ran out of iterations; carries the last sup-norm residual.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Refusal to draw a pathologically large sample (see the Poisson sampler guard).
class capacity_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace shelab
