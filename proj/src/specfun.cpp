#include "sphertrunc/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "sphertrunc/errors.hpp"

namespace sphertrunc {

namespace detail {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw std::overflow_error("integer overflow in exact combinatorial product");
  }
  return out;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw std::overflow_error("integer overflow in exact combinatorial sum");
  }
  return out;
}

}  // namespace detail

double chi2_cdf(int dof, double x) {
  if (dof < 1) throw DomainError("chi2_cdf: degrees of freedom must be >= 1");
  if (!(x >= 0.0)) throw DomainError("chi2_cdf: argument must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_pdf(int dof, double x) {
  if (dof < 1) throw DomainError("chi2_pdf: degrees of freedom must be >= 1");
  if (!(x >= 0.0)) throw DomainError("chi2_pdf: argument must be >= 0");
  if (x == 0.0) return dof == 2 ? 0.5 : 0.0;
  if (std::isinf(x)) return 0.0;
  return 0.5 * boost::math::gamma_p_derivative(0.5 * dof, 0.5 * x);
}

ChiSquareRatioKey ChiSquareRatioKey::from_offsets(std::vector<int> offsets) {
  for (int o : offsets) {
    if (o <= 0 || o % 2 != 0) {
      throw DomainError("chi-square ratio offsets must be positive even integers");
    }
  }
  std::sort(offsets.begin(), offsets.end(), std::greater<>());
  const int power = static_cast<int>(offsets.size());
  return ChiSquareRatioKey{std::move(offsets), power};
}

int ChiSquareRatioKey::aggregate_degree() const {
  int sum = 0;
  for (int o : offsets) sum += o;
  return sum;
}

std::string ChiSquareRatioKey::to_string() const {
  std::ostringstream out;
  out << "F(";
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (i) out << ',';
    out << offsets[i];
  }
  out << ')';
  if (denominator_power != static_cast<int>(offsets.size())) out << "/F^" << denominator_power;
  return out.str();
}

ChiSquareRatioKey ChiSquareRatioKey::parse(const std::string& text) {
  if (text.size() < 3 || text.rfind("F(", 0) != 0 || text.back() != ')') {
    throw DomainError("malformed chi-square ratio key: " + text);
  }
  std::vector<int> offsets;
  std::string body = text.substr(2, text.size() - 3);
  std::stringstream in(body);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      offsets.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw DomainError("malformed chi-square ratio key: " + text);
    }
  }
  return from_offsets(std::move(offsets));
}

double chi2_ratio(int v, const ChiSquareRatioKey& key, double x) {
  if (!(x > 0.0)) throw DomainError("chi2_ratio: F_v(0) = 0, ratio is singular at x = 0");
  const double base = chi2_cdf(v, x);
  double value = 1.0;
  for (int o : key.offsets) value *= chi2_cdf(v + o, x) / base;
  const int extra = key.denominator_power - static_cast<int>(key.offsets.size());
  if (extra != 0) value /= std::pow(base, extra);
  return value;
}

double kummer_m(double a, double b, double z) {
  if (b <= 0.0 && std::floor(b) == b) {
    throw DomainError("kummer_m: b must not be a non-positive integer");
  }
  if (!(z >= 0.0)) throw DomainError("kummer_m: z must be >= 0");
  if (z == 0.0) return 1.0;

  // Sum e^{-z} M(a,b,z) term by term; the leading factor keeps terms near
  // the peak n ~ z representable.
  constexpr int kMaxTerms = 100000;
  constexpr double kTol = 1e-13;
  double term = std::exp(-z);
  if (term == 0.0) throw NumericError("kummer_m: argument too large for scaled series");
  double sum = term;
  for (int n = 0; n < kMaxTerms; ++n) {
    term *= (a + n) / (b + n) * z / (n + 1);
    sum += term;
    // Past the peak (terms shrinking) the remaining tail is geometric-ish.
    if (n > z && std::fabs(term) <= kTol * std::fabs(sum)) {
      const double logm = std::log(std::fabs(sum)) + z;
      if (logm > std::log(std::numeric_limits<double>::max())) {
        throw NumericError("kummer_m: result overflows double");
      }
      return std::copysign(std::exp(logm), sum);
    }
    if (a + n == 0.0) return sum * std::exp(z);  // terminating polynomial
  }
  std::ostringstream msg;
  msg << "kummer_m: series did not converge (a=" << a << ", b=" << b << ", z=" << z
      << ", terms=" << kMaxTerms << ", last term=" << term << ")";
  throw NumericError(msg.str());
}

std::int64_t double_factorial(int n) {
  if (n < -1) throw DomainError("double_factorial: argument must be >= -1");
  if (n >= 2 && n % 2 == 0) throw DomainError("double_factorial: even arguments >= 2 are not supported");
  std::int64_t out = 1;
  for (int k = n; k > 1; k -= 2) out = detail::checked_mul(out, k);
  return out;
}

std::int64_t binomial(int n, int k) {
  if (n < 0) throw DomainError("binomial: n must be >= 0");
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t out = 1;
  for (int i = 1; i <= k; ++i) {
    // out * (n - k + i) is always divisible by i at this point
    out = detail::checked_mul(out, n - k + i) / i;
  }
  return out;
}

namespace {

// Row-by-row recurrence table; row[n][k] for 0 <= k <= n.
template <class Step>
std::int64_t stirling_table(int n, int k, Step step) {
  if (n < 0 || k < 0) throw DomainError("stirling: arguments must be >= 0");
  if (k > n) return 0;
  std::vector<std::int64_t> row{1};  // n = 0
  for (int m = 0; m < n; ++m) {
    std::vector<std::int64_t> next(m + 2, 0);
    for (int j = 0; j <= m + 1; ++j) {
      const std::int64_t same = j <= m ? row[j] : 0;
      const std::int64_t lower = j >= 1 ? row[j - 1] : 0;
      next[j] = detail::checked_add(step(m, j, same), lower);
    }
    row = std::move(next);
  }
  return row[k];
}

}  // namespace

std::int64_t stirling_first_unsigned(int n, int j) {
  // [m+1, j] = m [m, j] + [m, j-1]
  return stirling_table(n, j, [](int m, int, std::int64_t same) {
    return detail::checked_mul(m, same);
  });
}

std::int64_t stirling_second(int j, int t) {
  // {m+1, k} = k {m, k} + {m, k-1}
  return stirling_table(j, t, [](int, int k, std::int64_t same) {
    return detail::checked_mul(k, same);
  });
}

}  // namespace sphertrunc
