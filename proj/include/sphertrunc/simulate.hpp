#pragma once

// Sample-space study: draw populations from N(0, diag lambda), keep the
// points inside the ball, estimate the truncated spectrum and reconstruct it
// with every estimator.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sphertrunc/errors.hpp"
#include "sphertrunc/spectrum.hpp"

namespace sphertrunc {

class DegenerateSampleError : public NumericError {
 public:
  using NumericError::NumericError;
};

struct Estimator {
  enum class Kind {
    iterative,
    perturbative,
    /// The truncated sample spectrum itself, with no reconstruction.
    truncated,
  };
  Kind kind = Kind::iterative;
  int order = 0;

  static Estimator iterative() { return {Kind::iterative, 0}; }
  static Estimator perturbative(int order);
  static Estimator truncated() { return {Kind::truncated, 0}; }
  /// "iterative", "order1" .. "order4", "truncated".
  std::string name() const;
  static Estimator parse(const std::string& text);

  bool operator==(const Estimator&) const = default;
};

/// N x v matrix of draws from N(0, diag lambda).
Eigen::MatrixXd draw_population(const Spectrum& lambda, int n, std::uint64_t seed);

struct TruncatedSample {
  Spectrum mu_hat;
  int m;
};

/// Keeps the rows with x'x < rho and returns the ascending eigenvalues of
/// their covariance about the truncated mean (divisor M - 1). Throws
/// DegenerateSampleError when M < 2 or the covariance is singular.
TruncatedSample truncated_covariance(const Eigen::MatrixXd& population, double rho);

TruncatedSample sample_truncated_covariance(const Spectrum& lambda, double rho, int n, std::uint64_t seed);

/// var * sqrt(2/(R-1) + kappa/R) for R samples, kappa the sample excess
/// kurtosis. Needs at least 4 samples.
double stderr_of_variance(std::span<const double> samples);

struct SimulationRecord {
  double rho;
  int n;
  /// Replicas that produced an estimate.
  int replicas;
  int failures;
  std::string estimator;
  /// 0-based eigenvalue index.
  int k;
  double mean;
  double bias;
  double bias_se;
  double variance;
  double variance_se;
  /// Mean number of in-ball points per replica.
  double mean_m;
};

struct SweepConfig {
  std::vector<double> rhos;
  std::vector<int> ns;
  int replicas = 500;
  std::vector<Estimator> estimators;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct SweepResult {
  std::vector<SimulationRecord> records;
  /// Replicas where the truncated sample itself was unusable, per (rho, N).
  std::vector<int> degenerate;

  /// Throws ContractError when the record is absent.
  const SimulationRecord& find(double rho, int n, const std::string& estimator, int k) const;
};

/// Populations are drawn once per (N, replica) from seeds derived from
/// (seed, N, replica) and reused for every rho. Failed estimates are counted
/// and left out of the aggregates. Results do not depend on the thread count.
SweepResult bias_variance_sweep(const Spectrum& lambda, const SweepConfig& config);

struct LinearFit {
  double slope;
  double intercept;
  double r2;
};

/// Ordinary least squares y = slope x + intercept.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Least squares through the origin, y = slope x.
double slope_through_origin(std::span<const double> x, std::span<const double> y);

/// Header plus one row per record, numbers with 17 significant digits.
void write_records_csv(std::ostream& out, const std::vector<SimulationRecord>& records);

}  // namespace sphertrunc
