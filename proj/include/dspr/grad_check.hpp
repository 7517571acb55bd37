#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dspr/autodiff.hpp"

namespace dspr {

/// Records the function under test on `tape` given its input leaves. A
/// non-scalar result is contracted with fixed random weights before
/// differentiation.
using GradCheckFn = std::function<Var(Tape<double>&, std::span<const Var>)>;

struct GradCheckOptions {
  double step = 1e-4;
  double tol = 1e-4;
  /// Coordinates sampled across all inputs; 0 checks every coordinate.
  Index coords = 0;
  std::uint64_t seed = 0;
  /// Denominator floor for the relative error.
  double floor = 1e-6;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  Index checked = 0;
  /// Coordinates whose +/- step evaluations change a LeakyReLU sign pattern.
  Index skipped = 0;
  bool passed = false;
};

/// Central differences against reverse-mode gradients, double precision.
/// Passes iff at least one coordinate was checked and every checked one is
/// within tol.
GradCheckReport grad_check(const GradCheckFn& fn, const std::vector<Tensor4<double>>& inputs,
                           const GradCheckOptions& opts = {});

}  // namespace dspr
