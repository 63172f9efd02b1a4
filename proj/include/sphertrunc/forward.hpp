#pragma once

// Exact truncation map for a diagonal covariance: the probability that a
// centered normal vector falls inside the ball x'x < rho, the second moments
// of the truncated vector, and a Monte Carlo cross-check of both.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sphertrunc/spectrum.hpp"

namespace sphertrunc {

enum class Chi2Method { series, imhof };

std::string to_string(Chi2Method m);

struct WeightedChi2Result {
  double value;
  /// Truncation bound for the series; an estimate of the neglected tail for
  /// the numerical inversion.
  double error_bound;
  Chi2Method method;
  /// Series terms or quadrature pieces used.
  int terms;
  /// True when the series was attempted and abandoned.
  bool fell_back;
};

/// P(sum_k w_k Y_k <= t) for independent Y_k ~ chi^2 with dofs[k] degrees of
/// freedom. Uses the mixture-of-central-chi-square series about min(w) and
/// switches to characteristic-function inversion when max(w)/min(w) > 1e4 or
/// the series does not reach its target within the term cap.
WeightedChi2Result weighted_chi2_cdf(std::span<const double> weights, std::span<const int> dofs, double t);

/// Series only. Throws NumericError if the remainder bound stays above
/// `target` after `max_terms` terms.
WeightedChi2Result weighted_chi2_cdf_series(std::span<const double> weights, std::span<const int> dofs, double t,
                                            double target = 1e-13, int max_terms = 5000);

/// Imhof inversion integral, integrated piecewise over half-periods.
WeightedChi2Result weighted_chi2_cdf_imhof(std::span<const double> weights, std::span<const int> dofs, double t);

/// Truncation probability P(sum_k lambda_k W_k <= rho), W_k ~ chi^2_1.
WeightedChi2Result alpha(double rho, const Spectrum& lambda);

/// E[(X_k^2 / lambda_k) 1{X in ball}]; equals the weighted chi-square
/// probability with weight k carrying 3 degrees of freedom. k is 0-based.
WeightedChi2Result alpha_k(double rho, const Spectrum& lambda, int k);

struct ForwardResult {
  Spectrum mu;
  double alpha;
  std::vector<double> alpha_k;
  /// Largest error bound among the v + 1 probabilities.
  double error_bound;
  /// imhof if any probability needed the fallback.
  Chi2Method method;
  bool fell_back;
};

/// mu_k = lambda_k alpha_k / alpha, keeping the ordering flag of the input.
ForwardResult forward_map(double rho, const Spectrum& lambda);

struct MonteCarloEstimate {
  std::uint64_t samples;
  double alpha;
  double alpha_se;
  std::vector<double> alpha_k;
  std::vector<double> alpha_k_se;
};

/// Plain Monte Carlo over X ~ N(0, diag lambda), in fixed blocks with seeds
/// derived from (seed, block); bit-identical for a given seed whatever the
/// thread count.
MonteCarloEstimate mc_oracle(double rho, const Spectrum& lambda, std::uint64_t n_samples, std::uint64_t seed,
                             unsigned threads = 0);

struct SquareCovariance {
  int v;
  std::uint64_t accepted;
  /// Row-major v x v covariance of (X_1^2, ..., X_v^2) given X in the ball.
  std::vector<double> cov;
  /// Batch-means standard errors of `cov`.
  std::vector<double> se;

  double at(int i, int j) const { return cov[static_cast<std::size_t>(i * v + j)]; }
  double se_at(int i, int j) const { return se[static_cast<std::size_t>(i * v + j)]; }
};

SquareCovariance mc_square_covariance(double rho, const Spectrum& lambda, std::uint64_t n_samples,
                                      std::uint64_t seed, unsigned threads = 0);

struct DomainReport {
  /// Entries of mu sorted ascending.
  std::vector<double> sorted;
  /// min(rho/3, rho/(v-k+1)) for the k-th smallest entry (k from 1).
  std::vector<double> component_bound;
  std::vector<bool> component_ok;
  double sum;
  double sum_bound;
  bool sum_ok;
  bool verdict;
};

/// Necessary-side screen for reconstructability. Passing does not prove that
/// mu lies in the image of the truncation map.
DomainReport domain_check(const Spectrum& mu, double rho);

}  // namespace sphertrunc
