#include "sphertrunc/tallis.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "sphertrunc/errors.hpp"
#include "sphertrunc/specfun.hpp"

namespace sphertrunc {

TallisPoint::TallisPoint(int v_, double lambda_tilde_, double rho_) : v(v_), lambda_tilde(lambda_tilde_), rho(rho_) {
  if (v < 1) throw DomainError("TallisPoint: dimension must be >= 1");
  if (!(lambda_tilde > 0.0) || !std::isfinite(lambda_tilde)) {
    throw DomainError("TallisPoint: lambda_tilde must be positive and finite");
  }
  if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("TallisPoint: rho must be positive and finite");
}

CdfLadder::CdfLadder(int v, double x, int max_step) : v_(v), x_(x) {
  if (v < 1) throw DomainError("CdfLadder: dimension must be >= 1");
  if (!(x > 0.0)) throw DomainError("CdfLadder: x must be positive");
  if (max_step < 0) throw DomainError("CdfLadder: negative max_step");
  cdf_.reserve(static_cast<std::size_t>(max_step) + 1);
  for (int s = 0; s <= max_step; ++s) cdf_.push_back(chi2_cdf(v + 2 * s, x));
}

double CdfLadder::cdf(int step) const {
  if (step < 0 || step > max_step()) throw ContractError("CdfLadder: step outside cached range");
  return cdf_[static_cast<std::size_t>(step)];
}

std::vector<CdfTerm> derivative_cdf_terms(int m, int n) {
  if (m < 0 || n < 0) throw DomainError("derivative_cdf_terms: negative order");
  std::vector<CdfTerm> terms;
  terms.reserve(static_cast<std::size_t>(m) + 1);
  for (int j = 0; j <= m; ++j) {
    const std::int64_t sign = (m - j) % 2 == 0 ? 1 : -1;
    terms.push_back({j + n, sign * binomial(m, j)});
  }
  return terms;
}

double tallis_alpha(const TallisPoint& p, const IndexMultiset& integrand) {
  const int n = static_cast<int>(integrand.size());
  return static_cast<double>(delta_from_indices(integrand)) * chi2_cdf(p.v + 2 * n, p.x());
}

double tallis_derivative(const TallisPoint& p, const IndexMultiset& deriv, const IndexMultiset& integrand) {
  const int m = static_cast<int>(deriv.size());
  const int n = static_cast<int>(integrand.size());
  const double delta = static_cast<double>(delta_from_indices(deriv.merged(integrand)));
  const CdfLadder ladder(p.v, p.x(), m + n);
  double sum = 0.0;
  for (const CdfTerm& t : derivative_cdf_terms(m, n)) sum += static_cast<double>(t.weight) * ladder.cdf(t.step);
  return delta * sum / std::pow(2.0 * p.lambda_tilde, m);
}

double tallis_derivative_via_operator(const TallisPoint& p, int j, int n) {
  if (j < 0 || n < 0) throw DomainError("tallis_derivative_via_operator: negative order");
  const CdfLadder ladder(p.v, p.x(), n + j);
  // alpha_{k:q} at the degenerate point
  auto alpha_kq = [&](int q) { return static_cast<double>(double_factorial(2 * q - 1)) * ladder.cdf(q); };
  if (j == 0) return alpha_kq(n);

  // (2 lambda d_k)^i alpha_{k:n} = sum_r (-1)^{i-r} c_{ir}(n) alpha_{k:(n+r)}
  auto scaled_power = [&](int i) {
    double s = 0.0;
    for (int r = 0; r <= i; ++r) {
      const double sign = (i - r) % 2 == 0 ? 1.0 : -1.0;
      s += sign * static_cast<double>(c_coeff_closed(i, r, n)) * alpha_kq(n + r);
    }
    return s;
  };
  double total = 0.0;
  for (int i = 1; i <= j; ++i) {
    const double sign = (j - i) % 2 == 0 ? 1.0 : -1.0;
    total += sign * static_cast<double>(stirling_first_unsigned(j, i)) / std::ldexp(1.0, i) * scaled_power(i);
  }
  return total / std::pow(p.lambda_tilde, j);
}

double tallis_map(const TallisPoint& p) {
  const CdfLadder ladder(p.v, p.x(), 1);
  return p.lambda_tilde * ladder.ratio(1);
}

double tallis_map_slope(const TallisPoint& p) { return 0.5 * d_quantity(p.v, p.x()); }

TallisInverse tallis_inverse(double mu_tilde, double rho, int v) {
  if (v < 1) throw DomainError("tallis_inverse: dimension must be >= 1");
  if (!(rho > 0.0)) throw DomainError("tallis_inverse: rho must be positive");
  const double upper = rho / (v + 2);
  if (!(mu_tilde > 0.0)) throw DomainError("tallis_inverse: mu_tilde must be > 0 (lower bound violated)");
  if (!(mu_tilde < upper)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "tallis_inverse: mu_tilde = " << mu_tilde << " must be < rho/(v+2) = " << upper
        << " (upper bound violated)";
    throw DomainError(msg.str());
  }
  const bool ill = (upper - mu_tilde) <= 1e-9 * upper;

  auto f = [&](double lt) { return tallis_map(TallisPoint(v, lt, rho)) - mu_tilde; };

  // T(l) <= l, so the root is >= mu_tilde; grow the upper end geometrically.
  double lo = mu_tilde;
  double hi = 2.0 * mu_tilde;
  int iterations = 0;
  if (f(lo) >= 0.0) return {lo, ill, 0};
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++iterations > 2000 || !std::isfinite(hi)) {
      throw NumericError("tallis_inverse: failed to bracket the root");
    }
  }

  const double tol = 1e-12 * mu_tilde;
  double lt = std::sqrt(lo * hi);
  for (int it = 0; it < 500; ++it, ++iterations) {
    const double val = f(lt);
    if (std::fabs(val) <= tol) return {lt, ill, iterations};
    if (val < 0.0) lo = lt; else hi = lt;
    const double slope = tallis_map_slope(TallisPoint(v, lt, rho));
    double next = lt - val / slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      return {lt, ill, iterations};  // bracket collapsed to machine precision
    }
    lt = next;
  }
  throw NumericError("tallis_inverse: root refinement did not converge");
}

double d_quantity(int v, double x) {
  const CdfLadder ladder(v, x, 2);
  const double r2 = ladder.ratio(1);
  return (v + 2) * ladder.ratio(2) - v * r2 * r2;
}

std::vector<double> TwoValueMatrix::apply(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != v) throw ContractError("TwoValueMatrix::apply: size mismatch");
  double sum = 0.0;
  for (double xi : x) sum += xi;
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = (diagonal - off_diagonal) * x[k] + off_diagonal * sum;
  return out;
}

JacobianMatrix jacobian(int v, double x) {
  const CdfLadder ladder(v, x, 2);
  const double r4 = ladder.ratio(2);
  const double r22 = ladder.ratio(1) * ladder.ratio(1);
  return {v, 0.5 * (3.0 * r4 - r22), 0.5 * (r4 - r22)};
}

double jacobian_det(int v, double x) {
  const CdfLadder ladder(v, x, 2);
  const double r4 = ladder.ratio(2);
  const double r22 = ladder.ratio(1) * ladder.ratio(1);
  return std::pow(r4, v - 1) * ((0.5 * v + 1.0) * r4 - 0.5 * v * r22);
}

double jacobian_det_lower_bound(int v, double x) {
  const CdfLadder ladder(v, x, 2);
  const double r4 = ladder.ratio(2);
  const double r22 = ladder.ratio(1) * ladder.ratio(1);
  return 2.0 / (v + 4) * std::pow(r4, v - 1) * r22;
}

TwoValueMatrix jacobian_inverse(int v, double x) {
  const double det = jacobian_det(v, x);
  if (!(det >= 1e-14)) {
    std::ostringstream msg;
    msg << "jacobian_inverse: det J = " << det << " below 1e-14 at x = " << x << ", v = " << v;
    throw NumericError(msg.str());
  }
  return jacobian_inverse_unchecked(v, x);
}

TwoValueMatrix jacobian_inverse_unchecked(int v, double x) {
  const CdfLadder ladder(v, x, 2);
  const double r4 = ladder.ratio(2);
  const double r22 = ladder.ratio(1) * ladder.ratio(1);
  const double d = (v + 2) * r4 - v * r22;
  const double scale = 1.0 / (r4 * d);
  return {v, scale * ((v + 1) * r4 - (v - 1) * r22), scale * (r22 - r4)};
}

double ratio_first_derivative(const TallisPoint& p, int j, int k) {
  if (j < 0 || j >= p.v || k < 0 || k >= p.v) throw DomainError("ratio_first_derivative: index out of range");
  const CdfLadder ladder(p.v, p.x(), 2);
  const double r2 = ladder.ratio(1);
  const double r4 = ladder.ratio(2);
  const double dkj = j == k ? 1.0 : 0.0;
  return ((1.0 + 2.0 * dkj) * r4 - r2 * r2 - 2.0 * dkj * r2) / (2.0 * p.lambda_tilde);
}

}  // namespace sphertrunc
