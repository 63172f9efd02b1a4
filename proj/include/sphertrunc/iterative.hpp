#pragma once

// Fixed-point inversion of the truncation map, lambda_k <- mu_k alpha / alpha_k.

#include <stdexcept>
#include <string>
#include <vector>

#include "sphertrunc/errors.hpp"
#include "sphertrunc/spectrum.hpp"

namespace sphertrunc {

struct IterationTrace {
  /// Iterates, starting with lambda^0 = mu.
  std::vector<std::vector<double>> iterates;
  /// ||forward_map(iterate) - mu||_inf for each iterate.
  std::vector<double> residuals;
  int steps = 0;
  bool converged = false;
};

class NonConvergenceError : public NumericError {
 public:
  NonConvergenceError(const std::string& what, IterationTrace trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const IterationTrace& trace() const { return trace_; }

 private:
  IterationTrace trace_;
};

struct FixedPointOptions {
  /// Stop when the forward residual is <= tol * ||mu||_inf.
  double tol = 1e-10;
  int max_iter = 10000;
  /// lambda <- (1 - damping) lambda + damping * update, in (0, 1].
  double damping = 1.0;
  /// Keep every iterate in the trace (residuals are always kept).
  bool keep_iterates = true;
};

struct FixedPointResult {
  Spectrum lambda;
  IterationTrace trace;
};

/// Throws NonConvergenceError, carrying the trace, when max_iter is exhausted.
FixedPointResult fixed_point_solve(const Spectrum& mu, double rho, const FixedPointOptions& options = {});

}  // namespace sphertrunc
