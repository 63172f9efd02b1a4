#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "sphertrunc/errors.hpp"
#include "sphertrunc/forward.hpp"
#include "sphertrunc/specfun.hpp"
#include "sphertrunc/tallis.hpp"

using namespace sphertrunc;

namespace {

Eigen::MatrixXd dense(const TwoValueMatrix& m) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(m.v, m.v, m.off_diagonal);
  a.diagonal().setConstant(m.diagonal);
  return a;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return out;
}

// alpha_I at a perturbed spectrum, I empty or a single index.
double alpha_at(const std::vector<double>& lambda, double rho, int integrand) {
  const Spectrum s(lambda);
  return integrand < 0 ? alpha(rho, s).value : alpha_k(rho, s, integrand).value;
}

}  // namespace

TEST_CASE("degenerate alpha reduces to one chi-square CDF") {
  const TallisPoint p(4, 1.5, 6.0);
  CHECK(tallis_alpha(p, IndexMultiset(4, {})) == doctest::Approx(chi2_cdf(4, 4.0)).epsilon(1e-15));
  CHECK(tallis_alpha(p, IndexMultiset(4, {2})) == doctest::Approx(chi2_cdf(6, 4.0)).epsilon(1e-15));
  CHECK(tallis_alpha(p, IndexMultiset(4, {2, 2})) == doctest::Approx(3 * chi2_cdf(8, 4.0)).epsilon(1e-15));
  CHECK(tallis_alpha(p, IndexMultiset(4, {1, 2})) == doctest::Approx(chi2_cdf(8, 4.0)).epsilon(1e-15));
  CHECK_THROWS_AS(TallisPoint(4, -1.0, 6.0), DomainError);
}

// Central differences of the series alpha around the degenerate point,
// second orders with Richardson extrapolation. Returns the largest error
// measured against |analytic|, or against |alpha_I| where the analytic value
// vanishes (the second CDF difference is zero at x = v + 2).
double derivative_fd_error(int v, double lt, double rho) {
  const TallisPoint p(v, lt, rho);
  double worst = 0.0;
  for (int integrand : {-1, 0}) {
    const IndexMultiset in = integrand < 0 ? IndexMultiset(v, {}) : IndexMultiset(v, {integrand});
    const double base = std::abs(tallis_alpha(p, in));
    auto at = [&](int a, double da, int b, double db) {
      std::vector<double> l(static_cast<std::size_t>(v), lt);
      l[static_cast<std::size_t>(a)] += da;
      l[static_cast<std::size_t>(b)] += db;
      return alpha_at(l, rho, integrand);
    };
    auto record = [&](double fd, double an) {
      const double scale = std::abs(an) > 1e-8 * base ? std::abs(an) : base;
      worst = std::max(worst, std::abs(fd - an) / scale);
    };
    for (int j : {0, 1}) {
      const double h = 1e-3;
      const double fd = (at(j, h, j, 0) - at(j, -h, j, 0)) / (2 * h);
      record(fd, tallis_derivative(p, IndexMultiset(v, {j}), in));
    }
    for (auto [a, b] : {std::pair{0, 0}, std::pair{1, 1}, std::pair{1, 2}, std::pair{0, v - 1}}) {
      auto d2 = [&](double h) {
        if (a == b) return (at(a, h, a, 0) - 2 * at(a, 0, a, 0) + at(a, -h, a, 0)) / (h * h);
        return (at(a, h, b, h) - at(a, h, b, -h) - at(a, -h, b, h) + at(a, -h, b, -h)) / (4 * h * h);
      };
      const double h = 1e-2;
      const double fd = (4 * d2(h / 2) - d2(h)) / 3;
      record(fd, tallis_derivative(p, IndexMultiset(v, {a, b}), in));
    }
  }
  return worst;
}

TEST_CASE("derivatives match finite differences of the series alpha") {
  CHECK(derivative_fd_error(4, 1.0, 6.0) < 1e-5);
  CHECK(derivative_fd_error(4, 1.0, 5.0) < 1e-5);
  CHECK(derivative_fd_error(3, 0.6, 2.0) < 1e-5);
  // at x = v + 2 the empty-integrand second derivatives vanish
  const TallisPoint p(4, 1.0, 6.0);
  CHECK(std::abs(tallis_derivative(p, IndexMultiset(4, {1, 2}), IndexMultiset(4, {}))) < 1e-15);
}

TEST_CASE("operator path agrees with the closed derivative") {
  const TallisPoint p(5, 0.7, 4.0);
  for (int j = 0; j <= 4; ++j) {
    for (int n = 0; n <= 3; ++n) {
      const double closed = tallis_derivative(p, IndexMultiset::repeated(5, 1, j), IndexMultiset::repeated(5, 1, n));
      CAPTURE(j);
      CAPTURE(n);
      CHECK(tallis_derivative_via_operator(p, j, n) == doctest::Approx(closed).epsilon(1e-11));
    }
  }
}

TEST_CASE("Jacobian determinant, bound and inverse") {
  for (int v = 3; v <= 7; ++v) {
    for (double x : log_grid(0.1, 50.0, 40)) {
      CAPTURE(v);
      CAPTURE(x);
      const JacobianMatrix j = jacobian(v, x);
      const Eigen::MatrixXd a = dense(j);
      const double det = jacobian_det(v, x);
      CHECK(std::abs(det - a.partialPivLu().determinant()) <= 1e-12 * std::abs(det));
      CHECK(det > jacobian_det_lower_bound(v, x));
      const Eigen::MatrixXd prod = dense(jacobian_inverse_unchecked(v, x)) * a;
      CHECK((prod - Eigen::MatrixXd::Identity(v, v)).cwiseAbs().maxCoeff() < 1e-12);
      if (det < 1e-14) CHECK_THROWS_AS(jacobian_inverse(v, x), NumericError);
    }
    CHECK(std::abs(jacobian_det(v, 1e3) - 1.0) < 1e-6);
    const JacobianMatrix far = jacobian(v, 1e3);
    CHECK(std::abs(far.diagonal - 1.0) < 1e-6);
    CHECK(std::abs(far.off_diagonal) < 1e-6);
  }
}

TEST_CASE("Tallis map slope and inverse") {
  const int v = 4;
  const double rho = 6.0;
  for (double lt : {0.05, 0.5, 1.3, 4.0}) {
    const TallisPoint p(v, lt, rho);
    const double h = 1e-5 * lt;
    const double fd = (tallis_map(TallisPoint(v, lt + h, rho)) - tallis_map(TallisPoint(v, lt - h, rho))) / (2 * h);
    CHECK(tallis_map_slope(p) == doctest::Approx(fd).epsilon(1e-7));
    const TallisInverse inv = tallis_inverse(tallis_map(p), rho, v);
    CHECK(inv.lambda_tilde == doctest::Approx(lt).epsilon(1e-11));
    CHECK_FALSE(inv.ill_conditioned);
  }
  CHECK_THROWS_AS(tallis_inverse(rho / (v + 2) * 1.01, rho, v), DomainError);
  CHECK_THROWS_AS(tallis_inverse(-0.1, rho, v), DomainError);
}
