#pragma once

// Quantities evaluable at a fully degenerate spectrum (all variances equal
// to lambda_tilde). Every integral collapses to chi-square CDFs evaluated at
// the working ratio x = rho / lambda_tilde.

#include <cstdint>
#include <span>
#include <vector>

#include "sphertrunc/combinatorics.hpp"

namespace sphertrunc {

struct TallisPoint {
  TallisPoint(int v, double lambda_tilde, double rho);

  int v;
  double lambda_tilde;
  double rho;

  double x() const { return rho / lambda_tilde; }
};

/// F_{v+2s}(x) for s = 0..max_step, evaluated once.
class CdfLadder {
 public:
  CdfLadder(int v, double x, int max_step);

  int v() const { return v_; }
  double x() const { return x_; }
  int max_step() const { return static_cast<int>(cdf_.size()) - 1; }

  /// F_{v+2 step}(x).
  double cdf(int step) const;
  /// F_{v+2 step}(x) / F_v(x).
  double ratio(int step) const { return cdf(step) / cdf_[0]; }

 private:
  int v_;
  double x_;
  std::vector<double> cdf_;
};

/// One term of a derivative: weight * F_{v + 2 step}.
struct CdfTerm {
  int step;
  std::int64_t weight;
};

/// The alternating binomial combination sum_j (-1)^{m-j} binom(m, j) F_{v+2(j+n)}
/// shared by every m-th derivative of an n-index integral.
std::vector<CdfTerm> derivative_cdf_terms(int m, int n);

/// alpha_{i_1..i_n} = Delta_{i_1..i_n} F_{v+2n}(rho / lambda_tilde).
double tallis_alpha(const TallisPoint& p, const IndexMultiset& integrand);

/// d^m alpha_I / (d lambda_{k_1} ... d lambda_{k_m}) at the degenerate point.
double tallis_derivative(const TallisPoint& p, const IndexMultiset& deriv, const IndexMultiset& integrand);

/// Same derivative for deriv = (k repeated j times), integrand = (k repeated
/// n times), computed by applying (2 lambda d)^i through the c_{ir}(n)
/// recursion and converting to plain derivatives with Stirling numbers of
/// the first kind. Exists as an independent cross-check.
double tallis_derivative_via_operator(const TallisPoint& p, int j, int n);

/// Truncated common variance lambda_tilde F_{v+2}/F_v.
double tallis_map(const TallisPoint& p);

/// d tallis_map / d lambda_tilde, which equals D/2 (row sum of the Jacobian).
double tallis_map_slope(const TallisPoint& p);

struct TallisInverse {
  double lambda_tilde;
  /// Set when mu_tilde sits within 1e-9 (relative) of rho/(v+2).
  bool ill_conditioned;
  int iterations;
};

/// Solves tallis_map(lambda_tilde) = mu_tilde, 0 < mu_tilde < rho/(v+2).
TallisInverse tallis_inverse(double mu_tilde, double rho, int v);

/// D = (v+2) F_{v+4}/F_v - v F_{v+2}^2/F_v^2.
double d_quantity(int v, double x);

/// Two-valued symmetric v x v matrix: `diagonal` on the diagonal and
/// `off_diagonal` everywhere else.
struct TwoValueMatrix {
  int v;
  double diagonal;
  double off_diagonal;

  double operator()(int k, int j) const { return k == j ? diagonal : off_diagonal; }
  /// O(v) matrix-vector product.
  std::vector<double> apply(std::span<const double> x) const;
  double row_sum() const { return diagonal + (v - 1) * off_diagonal; }
};

using JacobianMatrix = TwoValueMatrix;

/// Jacobian of the truncation map at the degenerate point:
/// J_kj = (1/2)[(1 + 2 delta_kj) F_{v+4}/F_v - F_{v+2}^2/F_v^2].
JacobianMatrix jacobian(int v, double x);
inline JacobianMatrix jacobian(const TallisPoint& p) { return jacobian(p.v, p.x()); }

/// Closed-form determinant (F_{v+4}/F_v)^{v-1} [(v/2+1) F_{v+4}/F_v - (v/2) F_{v+2}^2/F_v^2].
double jacobian_det(int v, double x);

/// Lower bound (2/(v+4)) (F_{v+4}/F_v)^{v-1} F_{v+2}^2/F_v^2 implied by
/// F_{v+4} F_v / F_{v+2}^2 > (v+2)/(v+4).
double jacobian_det_lower_bound(int v, double x);

/// Closed-form inverse. Throws NumericError when det J < 1e-14.
TwoValueMatrix jacobian_inverse(int v, double x);

/// The same closed form without the determinant guard. The eigenvalues of J
/// are F_{v+4}/F_v (v - 1 times) and D/2, so J stays well conditioned even
/// where det J underflows at small x.
TwoValueMatrix jacobian_inverse_unchecked(int v, double x);

/// d R_k / d lambda_j at the degenerate point, R_k = alpha_k / alpha.
double ratio_first_derivative(const TallisPoint& p, int j, int k);

}  // namespace sphertrunc
