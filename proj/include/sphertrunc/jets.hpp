#pragma once

// Truncated power series in eps and an independent rebuild of the
// perturbative expansion from the degenerate-point derivatives.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sphertrunc/combinatorics.hpp"
#include "sphertrunc/errors.hpp"
#include "sphertrunc/gamma_tables.hpp"
#include "sphertrunc/perturb.hpp"
#include "sphertrunc/tallis.hpp"
#include "sphertrunc/specfun.hpp"

namespace sphertrunc {

/// Polynomial in the ratios r_s = F_{v+2s}/F_v, one term per monomial key.
/// The empty key is the constant term.
class RatioPoly {
 public:
  RatioPoly() = default;
  RatioPoly(double c);  // NOLINT: constants convert implicitly
  static RatioPoly monomial(const ChiSquareRatioKey& key, double c = 1.0);
  /// r_step, with r_0 = 1.
  static RatioPoly ratio(int step);

  const std::map<ChiSquareRatioKey, double>& terms() const { return terms_; }
  double coefficient(const ChiSquareRatioKey& key) const;
  bool is_constant() const;
  double constant() const;
  /// Substitutes r_s = ratios[s].
  double evaluate(const std::vector<double>& ratios) const;

  RatioPoly& operator+=(const RatioPoly& o);
  RatioPoly& operator-=(const RatioPoly& o);
  RatioPoly& operator*=(double c);
  friend RatioPoly operator+(RatioPoly a, const RatioPoly& b) { return a += b; }
  friend RatioPoly operator-(RatioPoly a, const RatioPoly& b) { return a -= b; }
  friend RatioPoly operator*(RatioPoly a, double c) { return a *= c; }
  friend RatioPoly operator*(double c, RatioPoly a) { return a *= c; }
  friend RatioPoly operator*(const RatioPoly& a, const RatioPoly& b);

 private:
  void add(const ChiSquareRatioKey& key, double c);
  std::map<ChiSquareRatioKey, double> terms_;
};

inline double jet_constant_inverse(double c) {
  if (c == 0.0) throw NumericError("Jet division: zero constant term");
  return 1.0 / c;
}

inline double jet_constant_inverse(const RatioPoly& c) {
  if (!c.is_constant()) throw ContractError("Jet division: constant term must be free of ratios");
  return jet_constant_inverse(c.constant());
}

/// c_0 + c_1 eps + ... + c_N eps^N, arithmetic truncated at order N.
template <class T>
class Jet {
 public:
  Jet() = default;
  explicit Jet(int order, T c0 = T(0.0)) : c_(static_cast<std::size_t>(order) + 1, T(0.0)) {
    if (order < 0) throw DomainError("Jet: negative order");
    c_[0] = std::move(c0);
  }
  static Jet from_coefficients(std::vector<T> c) {
    if (c.empty()) throw DomainError("Jet: no coefficients");
    Jet j;
    j.c_ = std::move(c);
    return j;
  }

  int order() const { return static_cast<int>(c_.size()) - 1; }
  T& operator[](int i) { return c_.at(static_cast<std::size_t>(i)); }
  const T& operator[](int i) const { return c_.at(static_cast<std::size_t>(i)); }

  Jet& operator+=(const Jet& o) {
    check(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    check(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator*=(double s) {
    for (auto& c : c_) c *= s;
    return *this;
  }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    a.check(b);
    Jet out(a.order());
    for (int i = 0; i <= a.order(); ++i)
      for (int j = 0; i + j <= a.order(); ++j) out[i + j] += a[i] * b[j];
    return out;
  }

  /// Requires b[0] != 0 (a ratio-free constant for RatioPoly).
  friend Jet operator/(const Jet& a, const Jet& b) {
    a.check(b);
    const double inv = jet_constant_inverse(b[0]);
    Jet q(a.order());
    for (int i = 0; i <= a.order(); ++i) {
      T s = a[i];
      for (int j = 1; j <= i; ++j) s -= b[j] * q[i - j];
      q[i] = s * inv;
    }
    return q;
  }

 private:
  void check(const Jet& o) const {
    if (o.c_.size() != c_.size()) throw ContractError("Jet: order mismatch");
  }
  std::vector<T> c_;
};

/// Taylor expansion of alpha_I(rho; lambda(eps)) / F_v about the degenerate
/// point, where path[k] = lambda_k(eps) and every path[k][0] = lambda_tilde.
/// `cdf_ratio(s)` supplies F_{v+2s}/F_v (a number or an indeterminate).
template <class T>
Jet<T> jet_alpha(const std::vector<Jet<double>>& path, const IndexMultiset& integrand,
                 const std::function<T(int)>& cdf_ratio) {
  if (path.empty()) throw DomainError("jet_alpha: empty path");
  const int v = static_cast<int>(path.size());
  const int order = path[0].order();
  const double lt = path[0][0];
  if (!(lt > 0.0)) throw DomainError("jet_alpha: lambda_tilde must be positive");
  std::vector<Jet<double>> delta;
  for (const auto& p : path) {
    if (p.order() != order || std::fabs(p[0] - lt) > 1e-14 * lt) {
      throw ContractError("jet_alpha: every direction must share order and constant term");
    }
    Jet<double> d = p;
    d[0] = 0.0;
    delta.push_back(std::move(d));
  }
  const int n = static_cast<int>(integrand.size());
  Jet<T> out(order);
  std::vector<int> tuple;
  for (int m = 0; m <= order; ++m) {
    // sum_j (-1)^{m-j} binom(m, j) F_{v+2(j+n)} / F_v
    T combo(0.0);
    for (const CdfTerm& t : derivative_cdf_terms(m, n)) combo += cdf_ratio(t.step) * static_cast<double>(t.weight);
    const double prefactor = 1.0 / std::pow(2.0 * lt, m);
    // Non-decreasing index tuples; each stands for m!/prod(mult!) orderings.
    tuple.assign(static_cast<std::size_t>(m), 0);
    for (;;) {
      Jet<double> product(order, 1.0);
      double inv_mult = 1.0;
      int run = 0;
      for (int s = 0; s < m; ++s) {
        product = product * delta[static_cast<std::size_t>(tuple[static_cast<std::size_t>(s)])];
        run = (s > 0 && tuple[static_cast<std::size_t>(s)] == tuple[static_cast<std::size_t>(s) - 1]) ? run + 1 : 1;
        inv_mult /= run;
      }
      const double delta_coeff =
          static_cast<double>(delta_from_indices(IndexMultiset(v, tuple).merged(integrand)));
      const double w = prefactor * inv_mult * delta_coeff;
      for (int i = m; i <= order; ++i) {
        if (product[i] != 0.0) out[i] += combo * (w * product[i]);
      }
      int pos = m - 1;
      while (pos >= 0 && tuple[static_cast<std::size_t>(pos)] == v - 1) --pos;
      if (pos < 0) break;
      const int next = tuple[static_cast<std::size_t>(pos)] + 1;
      for (int s = pos; s < m; ++s) tuple[static_cast<std::size_t>(s)] = next;
    }
  }
  return out;
}

/// lambda_k(eps) = sum_i coeffs[i][k] eps^i truncated at `order`; orders
/// above `upto` (or not yet solved) are taken as zero.
std::vector<Jet<double>> lambda_path(const ExpansionState& state, int order, int upto);

/// Coefficient of eps^n in lambda_k(eps) R_k(eps), R_k = alpha_k / alpha,
/// using lambda coefficients through order `upto`.
std::vector<double> jet_product_coefficient(const ExpansionState& state, int n, int upto);

/// E^{(n)}_k = [lambda_k R_k]_n - mu^{(n)}_k with all coefficients through order n.
std::vector<double> residual(int n, const ExpansionState& state);

/// G^{(n)} rebuilt from jets: mu^{(n)} minus the order-n product with lambda^{(n)} = 0.
std::vector<double> jet_g_vector(int n, const ExpansionState& state);

/// Structure basis of order n: partitions of n into parts <= n-1, split
/// between the local factor and zeta groups. zeta1_zero drops z(1).
std::vector<Structure> structure_basis(int n, bool zeta1_zero);

/// Continued-fraction approximation with denominator <= max_den, accepted
/// when within tol of x.
std::optional<Rational> rationalize(double x, std::int64_t max_den = 64, double tol = 1e-9);

struct ExtractionResult {
  int order = 0;
  bool zeta1_zero = true;
  std::vector<Structure> rows;
  std::vector<ChiSquareRatioKey> columns;
  /// raw[row][column] least-squares solution.
  std::vector<std::vector<double>> raw;
  /// Rationalized entries; valid only when ok.
  std::vector<std::vector<Rational>> entries;
  bool ok = false;
  double max_rationalization_error = 0.0;
  /// Largest least-squares residual over all columns.
  double max_fit_residual = 0.0;
  /// Largest |coefficient| of the ratio-free term, expected to vanish.
  double constant_term = 0.0;
  /// Largest aggregate degree among the surfaced keys.
  int max_key_degree = 0;
  int attempts = 0;

  GammaTable table() const;
};

/// Re-derives the order-n table from random draws (v = 6 directions, uniform
/// coefficients on (0,1)), treating the ratios as indeterminates. The
/// general bases of orders 3 and 4 need denominators above 64.
ExtractionResult extract_table(int n, bool zeta1_zero, std::uint64_t seed, int draws = 0, std::int64_t max_den = 64);

struct GammaColumn {
  std::vector<Rational> values;
  std::vector<double> raw;
  bool ok = false;
};

/// One column of the table for the given basis.
GammaColumn extract_gamma(int n, const ChiSquareRatioKey& key, const std::vector<Structure>& basis, int trials,
                          std::uint64_t seed);

struct TableDiff {
  bool identical;
  std::vector<std::string> lines;
};

/// Entry-by-entry comparison, missing rows and columns count as zero.
TableDiff diff_tables(const GammaTable& expected, const GammaTable& actual);

}  // namespace sphertrunc
