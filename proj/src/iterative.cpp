#include "sphertrunc/iterative.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sphertrunc/forward.hpp"

namespace sphertrunc {

FixedPointResult fixed_point_solve(const Spectrum& mu, double rho, const FixedPointOptions& options) {
  if (!(rho > 0.0)) throw DomainError("fixed_point_solve: rho must be positive");
  if (!(options.damping > 0.0 && options.damping <= 1.0)) throw DomainError("fixed_point_solve: damping must be in (0, 1]");
  if (options.max_iter < 0) throw DomainError("fixed_point_solve: negative max_iter");
  const std::size_t v = mu.size();
  double mu_norm = 0.0;
  for (double m : mu.values()) mu_norm = std::max(mu_norm, std::fabs(m));
  const double target = options.tol * mu_norm;

  IterationTrace trace;
  std::vector<double> lambda = mu.vector();
  for (int step = 0;; ++step) {
    const ForwardResult f = forward_map(rho, Spectrum(lambda));
    double res = 0.0;
    for (std::size_t k = 0; k < v; ++k) res = std::max(res, std::fabs(f.mu[k] - mu[k]));
    if (options.keep_iterates) trace.iterates.push_back(lambda);
    trace.residuals.push_back(res);
    trace.steps = step;
    if (res <= target) {
      trace.converged = true;
      const bool ascending = mu.ascending() && std::is_sorted(lambda.begin(), lambda.end());
      return {Spectrum(std::move(lambda), ascending), std::move(trace)};
    }
    if (step >= options.max_iter) break;
    for (std::size_t k = 0; k < v; ++k) {
      const double update = mu[k] * f.alpha / f.alpha_k[k];
      lambda[k] = (1.0 - options.damping) * lambda[k] + options.damping * update;
    }
  }
  std::ostringstream msg;
  msg << "fixed_point_solve: no convergence after " << options.max_iter << " steps (residual "
      << trace.residuals.back() << ", target " << target << ")";
  throw NonConvergenceError(msg.str(), std::move(trace));
}

}  // namespace sphertrunc
