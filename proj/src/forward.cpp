#include "sphertrunc/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "sphertrunc/errors.hpp"
#include "sphertrunc/parallel.hpp"
#include "sphertrunc/rng.hpp"

namespace sphertrunc {

std::string to_string(Chi2Method m) { return m == Chi2Method::series ? "series" : "imhof"; }

namespace {

void check_weights(std::span<const double> weights, std::span<const int> dofs, double t) {
  if (weights.empty() || weights.size() != dofs.size()) {
    throw DomainError("weighted_chi2_cdf: weights and dofs must be non-empty and of equal length");
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("weighted_chi2_cdf: weights must be positive");
  }
  for (int d : dofs) {
    if (d < 1) throw DomainError("weighted_chi2_cdf: dofs must be >= 1");
  }
  if (!(t >= 0.0)) throw DomainError("weighted_chi2_cdf: t must be >= 0");
}

// P(a + i, z) for i = 0, 1, 2, ... produced in blocks: the top of each block
// comes from the library, the rest by the downward recursion
// P(a-1, z) = P(a, z) + z^{a-1} e^{-z} / Gamma(a), which only adds.
class GammaLadder {
 public:
  GammaLadder(double a0, double z) : a0_(a0), z_(z) {}

  double operator()(int i) {
    if (i >= begin_ + static_cast<int>(block_.size()) || i < begin_) fill(i - i % kBlock);
    return block_[static_cast<std::size_t>(i - begin_)];
  }

 private:
  static constexpr int kBlock = 64;

  void fill(int begin) {
    begin_ = begin;
    block_.assign(kBlock, 0.0);
    double a = a0_ + begin + kBlock - 1;
    double p = boost::math::gamma_p(a, z_);
    double term = boost::math::gamma_p_derivative(a, z_);  // z^{a-1} e^{-z} / Gamma(a)
    block_[kBlock - 1] = p;
    for (int i = kBlock - 2; i >= 0; --i) {
      p += term;
      block_[static_cast<std::size_t>(i)] = std::min(p, 1.0);
      a -= 1.0;
      term *= a / z_;
    }
  }

  double a0_;
  double z_;
  int begin_ = 0;
  std::vector<double> block_;
};

}  // namespace

WeightedChi2Result weighted_chi2_cdf_series(std::span<const double> weights, std::span<const int> dofs, double t,
                                            double target, int max_terms) {
  check_weights(weights, dofs, t);
  if (t == 0.0) return {0.0, 0.0, Chi2Method::series, 0, false};
  const double beta = *std::min_element(weights.begin(), weights.end());
  int total_dof = 0;
  double log_a0 = 0.0;
  std::vector<double> q(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    total_dof += dofs[k];
    log_a0 += 0.5 * dofs[k] * std::log(beta / weights[k]);
    q[k] = 1.0 - beta / weights[k];
  }
  const double a0 = std::exp(log_a0);
  if (!(a0 > 0.0)) throw NumericError("weighted_chi2_cdf_series: leading coefficient underflows");

  GammaLadder ladder(0.5 * total_dof, 0.5 * t / beta);
  std::vector<double> a{a0};
  std::vector<double> g{0.0};  // g[m] = sum_k n_k q_k^m, g[0] unused
  std::vector<double> qpow(q.size(), 1.0);
  double value = a0 * ladder(0);
  double mass = a0;
  for (int j = 1; j <= max_terms; ++j) {
    const double bound = std::max(0.0, 1.0 - mass) * ladder(j);
    if (bound <= target) return {value, bound, Chi2Method::series, j, false};
    double gm = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
      qpow[k] *= q[k];
      gm += dofs[k] * qpow[k];
    }
    g.push_back(gm);
    double s = 0.0;
    for (int r = 0; r < j; ++r) s += g[static_cast<std::size_t>(j - r)] * a[static_cast<std::size_t>(r)];
    const double aj = s / (2.0 * j);
    a.push_back(aj);
    mass += aj;
    value += aj * ladder(j);
  }
  std::ostringstream msg;
  msg << "weighted_chi2_cdf_series: remainder above " << target << " after " << max_terms << " terms";
  throw NumericError(msg.str());
}

WeightedChi2Result weighted_chi2_cdf_imhof(std::span<const double> weights, std::span<const int> dofs, double t) {
  check_weights(weights, dofs, t);
  if (t == 0.0) return {0.0, 0.0, Chi2Method::imhof, 0, false};
  const std::size_t n = weights.size();
  auto theta = [&](double u) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += dofs[k] * std::atan(weights[k] * u);
    return 0.5 * s - 0.5 * t * u;
  };
  // 1 / (u rho(u)) with rho(u) = prod (1 + w^2 u^2)^{n/4}
  auto envelope = [&](double u) {
    double log_rho = 0.0;
    for (std::size_t k = 0; k < n; ++k) log_rho += 0.25 * dofs[k] * std::log1p(weights[k] * weights[k] * u * u);
    return std::exp(-log_rho) / u;
  };
  double slope0 = -0.5 * t;
  for (std::size_t k = 0; k < n; ++k) slope0 += 0.5 * dofs[k] * weights[k];
  auto integrand = [&](double u) {
    if (u < 1e-300) return slope0;
    return std::sin(theta(u)) * envelope(u);
  };

  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double h = 2.0 * std::numbers::pi / t;
  constexpr int kMaxPieces = 4000000;
  // Half-period pieces alternate in sign once theta is close to linear, so
  // repeated averaging of the last partial sums (an Euler transform) removes
  // most of the slowly decaying tail.
  constexpr std::size_t kLevels = 12;
  std::vector<double> recent;
  double sum = 0.0;
  double previous = 0.0;
  double last_estimate = NAN;
  auto finish = [&](double integral, double bound, int pieces) {
    const double value = std::clamp(0.5 - integral / std::numbers::pi, 0.0, 1.0);
    return WeightedChi2Result{value, bound / std::numbers::pi, Chi2Method::imhof, pieces, false};
  };
  for (int piece = 0; piece < kMaxPieces; ++piece) {
    const double lo = piece * h;
    const double hi = lo + h;
    const double part = GK::integrate(integrand, lo, hi, 3, 1e-12);
    previous = sum;
    sum += part;
    recent.push_back(sum);
    if (recent.size() > kLevels) recent.erase(recent.begin());
    const double tail = envelope(hi) * 4.0 / t;
    if (piece > 4 && tail < 1e-13) return finish(0.5 * (sum + previous), tail + 0.5 * std::fabs(part), piece + 1);
    if (tail < 1e-4 && recent.size() == kLevels) {
      std::vector<double> level = recent;
      while (level.size() > 1) {
        for (std::size_t i = 0; i + 1 < level.size(); ++i) level[i] = 0.5 * (level[i] + level[i + 1]);
        level.pop_back();
      }
      const double estimate = level[0];
      if (std::fabs(estimate - last_estimate) < 1e-14) {
        return finish(estimate, 4.0 * std::fabs(estimate - last_estimate) + 1e-15, piece + 1);
      }
      last_estimate = estimate;
    }
  }
  throw NumericError("weighted_chi2_cdf_imhof: integral did not settle within the piece cap");
}

WeightedChi2Result weighted_chi2_cdf(std::span<const double> weights, std::span<const int> dofs, double t) {
  check_weights(weights, dofs, t);
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  if (*hi / *lo > 1e4) return weighted_chi2_cdf_imhof(weights, dofs, t);
  try {
    return weighted_chi2_cdf_series(weights, dofs, t);
  } catch (const NumericError&) {
    WeightedChi2Result r = weighted_chi2_cdf_imhof(weights, dofs, t);
    r.fell_back = true;
    return r;
  }
}

WeightedChi2Result alpha(double rho, const Spectrum& lambda) {
  if (!(rho > 0.0)) throw DomainError("alpha: rho must be positive");
  const std::vector<int> dofs(lambda.size(), 1);
  return weighted_chi2_cdf(lambda.values(), dofs, rho);
}

WeightedChi2Result alpha_k(double rho, const Spectrum& lambda, int k) {
  if (!(rho > 0.0)) throw DomainError("alpha_k: rho must be positive");
  if (k < 0 || k >= lambda.v()) throw DomainError("alpha_k: index out of range");
  std::vector<int> dofs(lambda.size(), 1);
  dofs[static_cast<std::size_t>(k)] = 3;
  return weighted_chi2_cdf(lambda.values(), dofs, rho);
}

ForwardResult forward_map(double rho, const Spectrum& lambda) {
  const WeightedChi2Result a = alpha(rho, lambda);
  if (!(a.value > 0.0)) throw NumericError("forward_map: truncation probability underflows");
  std::vector<double> ak(lambda.size());
  std::vector<double> mu(lambda.size());
  double bound = a.error_bound;
  bool imhof = a.method == Chi2Method::imhof;
  bool fell_back = a.fell_back;
  for (int k = 0; k < lambda.v(); ++k) {
    const WeightedChi2Result r = alpha_k(rho, lambda, k);
    ak[static_cast<std::size_t>(k)] = r.value;
    mu[static_cast<std::size_t>(k)] = lambda[static_cast<std::size_t>(k)] * r.value / a.value;
    bound = std::max(bound, r.error_bound);
    imhof = imhof || r.method == Chi2Method::imhof;
    fell_back = fell_back || r.fell_back;
  }
  // Truncation preserves the ordering, but rounding may not for ties.
  if (lambda.ascending()) {
    for (std::size_t k = 1; k < mu.size(); ++k) mu[k] = std::max(mu[k], mu[k - 1]);
  }
  return {Spectrum(std::move(mu), lambda.ascending()), a.value, std::move(ak), bound,
          imhof ? Chi2Method::imhof : Chi2Method::series, fell_back};
}

namespace {

constexpr std::uint64_t kBlockSize = 1 << 16;

std::uint64_t block_count(std::uint64_t n) { return (n + kBlockSize - 1) / kBlockSize; }

std::uint64_t block_length(std::uint64_t n, std::uint64_t b) { return std::min(kBlockSize, n - b * kBlockSize); }

}  // namespace

MonteCarloEstimate mc_oracle(double rho, const Spectrum& lambda, std::uint64_t n_samples, std::uint64_t seed,
                             unsigned threads) {
  if (n_samples == 0) throw DomainError("mc_oracle: n_samples must be positive");
  if (!(rho > 0.0)) throw DomainError("mc_oracle: rho must be positive");
  const std::size_t v = lambda.size();
  const std::uint64_t blocks = block_count(n_samples);
  struct Partial {
    double hits = 0.0;
    std::vector<double> s1, s2;
  };
  std::vector<Partial> parts(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    NormalGenerator gen(derive_seed(seed, b));
    Partial p;
    p.s1.assign(v, 0.0);
    p.s2.assign(v, 0.0);
    std::vector<double> z(v);
    const std::uint64_t len = block_length(n_samples, b);
    for (std::uint64_t i = 0; i < len; ++i) {
      double r2 = 0.0;
      for (std::size_t k = 0; k < v; ++k) {
        z[k] = gen.normal();
        r2 += lambda[k] * z[k] * z[k];
      }
      if (r2 < rho) {
        p.hits += 1.0;
        for (std::size_t k = 0; k < v; ++k) {
          const double zz = z[k] * z[k];
          p.s1[k] += zz;
          p.s2[k] += zz * zz;
        }
      }
    }
    parts[b] = std::move(p);
  });

  double hits = 0.0;
  std::vector<double> s1(v, 0.0), s2(v, 0.0);
  for (const Partial& p : parts) {
    hits += p.hits;
    for (std::size_t k = 0; k < v; ++k) {
      s1[k] += p.s1[k];
      s2[k] += p.s2[k];
    }
  }
  const double n = static_cast<double>(n_samples);
  MonteCarloEstimate out;
  out.samples = n_samples;
  out.alpha = hits / n;
  out.alpha_se = std::sqrt(out.alpha * (1.0 - out.alpha) / n);
  for (std::size_t k = 0; k < v; ++k) {
    const double m = s1[k] / n;
    out.alpha_k.push_back(m);
    out.alpha_k_se.push_back(std::sqrt(std::max(0.0, s2[k] / n - m * m) / n));
  }
  return out;
}

SquareCovariance mc_square_covariance(double rho, const Spectrum& lambda, std::uint64_t n_samples,
                                      std::uint64_t seed, unsigned threads) {
  if (n_samples == 0) throw DomainError("mc_square_covariance: n_samples must be positive");
  const std::size_t v = lambda.size();
  const std::uint64_t blocks = block_count(n_samples);
  struct Partial {
    double hits = 0.0;
    std::vector<double> s1, s2;  // sums of X_k^2 and of X_i^2 X_j^2
  };
  std::vector<Partial> parts(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    NormalGenerator gen(derive_seed(seed, b));
    Partial p;
    p.s1.assign(v, 0.0);
    p.s2.assign(v * v, 0.0);
    std::vector<double> x2(v);
    const std::uint64_t len = block_length(n_samples, b);
    for (std::uint64_t i = 0; i < len; ++i) {
      double r2 = 0.0;
      for (std::size_t k = 0; k < v; ++k) {
        const double z = gen.normal();
        x2[k] = lambda[k] * z * z;
        r2 += x2[k];
      }
      if (r2 >= rho) continue;
      p.hits += 1.0;
      for (std::size_t a = 0; a < v; ++a) {
        p.s1[a] += x2[a];
        for (std::size_t c = 0; c < v; ++c) p.s2[a * v + c] += x2[a] * x2[c];
      }
    }
    parts[b] = std::move(p);
  });

  auto cov_of = [&](double hits, const std::vector<double>& s1, const std::vector<double>& s2) {
    std::vector<double> c(v * v, 0.0);
    if (hits < 2.0) return c;
    for (std::size_t a = 0; a < v; ++a) {
      for (std::size_t b = 0; b < v; ++b) {
        c[a * v + b] = (s2[a * v + b] - s1[a] * s1[b] / hits) / (hits - 1.0);
      }
    }
    return c;
  };

  double hits = 0.0;
  std::vector<double> s1(v, 0.0), s2(v * v, 0.0);
  for (const Partial& p : parts) {
    hits += p.hits;
    for (std::size_t a = 0; a < v; ++a) s1[a] += p.s1[a];
    for (std::size_t a = 0; a < v * v; ++a) s2[a] += p.s2[a];
  }
  SquareCovariance out{static_cast<int>(v), static_cast<std::uint64_t>(hits), cov_of(hits, s1, s2),
                       std::vector<double>(v * v, 0.0)};
  // Batch means over blocks, weighted equally; only meaningful with several blocks.
  if (blocks >= 2) {
    std::vector<double> mean(v * v, 0.0), sq(v * v, 0.0);
    for (const Partial& p : parts) {
      const std::vector<double> c = cov_of(p.hits, p.s1, p.s2);
      for (std::size_t a = 0; a < v * v; ++a) {
        mean[a] += c[a];
        sq[a] += c[a] * c[a];
      }
    }
    const double nb = static_cast<double>(blocks);
    for (std::size_t a = 0; a < v * v; ++a) {
      const double m = mean[a] / nb;
      const double var = std::max(0.0, (sq[a] - nb * m * m) / (nb - 1.0));
      out.se[a] = std::sqrt(var / nb);
    }
  }
  return out;
}

DomainReport domain_check(const Spectrum& mu, double rho) {
  if (!(rho > 0.0)) throw DomainError("domain_check: rho must be positive");
  DomainReport r;
  r.sorted = mu.vector();
  std::sort(r.sorted.begin(), r.sorted.end());
  const int v = mu.v();
  r.verdict = true;
  for (int k = 1; k <= v; ++k) {
    const double b = std::min(rho / 3.0, rho / (v - k + 1));
    const bool ok = r.sorted[static_cast<std::size_t>(k - 1)] <= b;
    r.component_bound.push_back(b);
    r.component_ok.push_back(ok);
    r.verdict = r.verdict && ok;
  }
  r.sum = std::accumulate(r.sorted.begin(), r.sorted.end(), 0.0);
  r.sum_bound = v * rho / (v + 2);
  r.sum_ok = r.sum <= r.sum_bound;
  r.verdict = r.verdict && r.sum_ok;
  return r;
}

}  // namespace sphertrunc
