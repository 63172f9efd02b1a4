#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace sphertrunc {

/// Lower regularized incomplete gamma P(dof/2, x/2), i.e. the chi-square CDF.
/// Throws DomainError for dof < 1 or x < 0.
double chi2_cdf(int dof, double x);

/// Probability density of a chi-square variable with `dof` degrees of freedom.
double chi2_pdf(int dof, double x);

/// Product of CDFs F_{v+o_1}(x)...F_{v+o_n}(x) divided by F_v(x)^p.
///
/// Offsets are even dof increments above the base dimension v, kept sorted in
/// descending order. For the ratios that arise from the perturbative
/// expansion the denominator power equals the number of numerator factors,
/// which is what from_offsets() produces. An empty offset list is the
/// constant ratio 1.
struct ChiSquareRatioKey {
  std::vector<int> offsets;
  int denominator_power = 0;

  static ChiSquareRatioKey from_offsets(std::vector<int> offsets);

  /// Sum of the numerator offsets, i.e. the aggregate degree 2K.
  int aggregate_degree() const;
  /// Text form used in tables and CLI output: "F(6,2)" for F_{v+6}F_{v+2}/F_v^2.
  std::string to_string() const;
  static ChiSquareRatioKey parse(const std::string& text);

  auto operator<=>(const ChiSquareRatioKey&) const = default;
};

/// Evaluates a chi-square ratio at x > 0. Throws DomainError at x <= 0.
double chi2_ratio(int v, const ChiSquareRatioKey& key, double x);

/// Kummer confluent hypergeometric function M(a, b, z) for z >= 0 by its
/// power series, summed in e^{-z}-scaled form so that z up to ~700 stays
/// finite. Throws NumericError when the series does not settle within the
/// iteration cap or the result overflows.
double kummer_m(double a, double b, double z);

/// n!! for odd n >= -1 (with (-1)!! = 1) and n = 0. Even n >= 2 are rejected.
std::int64_t double_factorial(int n);

std::int64_t binomial(int n, int k);

/// Unsigned Stirling numbers of the first kind [n, j].
std::int64_t stirling_first_unsigned(int n, int j);

/// Stirling numbers of the second kind {j, t}.
std::int64_t stirling_second(int j, int t);

namespace detail {
std::int64_t checked_mul(std::int64_t a, std::int64_t b);
std::int64_t checked_add(std::int64_t a, std::int64_t b);
}  // namespace detail

}  // namespace sphertrunc
