#include "sphertrunc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>

#include "sphertrunc/iterative.hpp"
#include "sphertrunc/parallel.hpp"
#include "sphertrunc/perturb.hpp"
#include "sphertrunc/rng.hpp"

namespace sphertrunc {

Estimator Estimator::perturbative(int order) {
  if (order < 1 || order > 4) throw DomainError("Estimator: perturbative order must be 1 to 4");
  return {Kind::perturbative, order};
}

std::string Estimator::name() const {
  switch (kind) {
    case Kind::iterative: return "iterative";
    case Kind::truncated: return "truncated";
    case Kind::perturbative: return "order" + std::to_string(order);
  }
  return "";
}

Estimator Estimator::parse(const std::string& text) {
  if (text == "iterative") return iterative();
  if (text == "truncated") return truncated();
  if (text.size() == 6 && text.rfind("order", 0) == 0 && text[5] >= '1' && text[5] <= '4') {
    return perturbative(text[5] - '0');
  }
  throw DomainError("unknown estimator '" + text + "' (expected iterative, truncated or order1..order4)");
}

Eigen::MatrixXd draw_population(const Spectrum& lambda, int n, std::uint64_t seed) {
  if (n < 2) throw DomainError("draw_population: N must be >= 2");
  const int v = lambda.v();
  NormalGenerator gen(seed);
  Eigen::MatrixXd x(n, v);
  std::vector<double> sd(lambda.size());
  for (std::size_t k = 0; k < sd.size(); ++k) sd[k] = std::sqrt(lambda[k]);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < v; ++k) x(i, k) = sd[static_cast<std::size_t>(k)] * gen.normal();
  return x;
}

TruncatedSample truncated_covariance(const Eigen::MatrixXd& population, double rho) {
  if (!(rho > 0.0)) throw DomainError("truncated_covariance: rho must be positive");
  const Eigen::Index v = population.cols();
  std::vector<Eigen::Index> inside;
  for (Eigen::Index i = 0; i < population.rows(); ++i) {
    if (population.row(i).squaredNorm() < rho) inside.push_back(i);
  }
  const int m = static_cast<int>(inside.size());
  if (m < 2) throw DegenerateSampleError("truncated_covariance: fewer than 2 points inside the ball");
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(v);
  for (Eigen::Index i : inside) mean += population.row(i);
  mean /= m;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(v, v);
  for (Eigen::Index i : inside) {
    const Eigen::RowVectorXd d = population.row(i) - mean;
    cov.noalias() += d.transpose() * d;
  }
  cov /= (m - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("truncated_covariance: eigen decomposition failed");
  std::vector<double> values(eig.eigenvalues().data(), eig.eigenvalues().data() + v);
  std::sort(values.begin(), values.end());
  if (!(values.front() > 0.0)) throw DegenerateSampleError("truncated_covariance: singular sample covariance");
  return {Spectrum(std::move(values), true), m};
}

TruncatedSample sample_truncated_covariance(const Spectrum& lambda, double rho, int n, std::uint64_t seed) {
  return truncated_covariance(draw_population(lambda, n, seed), rho);
}

double stderr_of_variance(std::span<const double> samples) {
  const std::size_t r = samples.size();
  if (r < 4) throw DomainError("stderr_of_variance: kurtosis needs at least 4 samples");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(r);
  double m2 = 0.0, m4 = 0.0;
  for (double x : samples) {
    const double d2 = (x - mean) * (x - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  if (m2 == 0.0) return 0.0;
  const double n = static_cast<double>(r);
  const double var = m2 / (n - 1.0);
  m2 /= n;
  m4 /= n;
  const double kurt = m4 / (m2 * m2) - 3.0;
  return var * std::sqrt(std::max(0.0, 2.0 / (n - 1.0) + kurt / n));
}

const SimulationRecord& SweepResult::find(double rho, int n, const std::string& estimator, int k) const {
  for (const auto& r : records) {
    if (r.rho == rho && r.n == n && r.estimator == estimator && r.k == k) return r;
  }
  throw ContractError("SweepResult::find: no record for " + estimator + " at rho=" + std::to_string(rho) +
                      ", N=" + std::to_string(n));
}

namespace {

// Estimates of one replica at one rho; nullopt marks a failure.
struct ReplicaOutcome {
  int m = 0;
  bool degenerate = false;
  std::vector<std::optional<std::vector<double>>> estimates;  // per estimator
};

ReplicaOutcome run_replica(const Eigen::MatrixXd& population, double rho, const std::vector<Estimator>& estimators) {
  ReplicaOutcome out;
  out.estimates.resize(estimators.size());
  std::optional<TruncatedSample> sample;
  try {
    sample = truncated_covariance(population, rho);
  } catch (const DegenerateSampleError&) {
    out.degenerate = true;
    return out;
  }
  out.m = sample->m;
  int max_order = 0;
  for (const Estimator& e : estimators) {
    if (e.kind == Estimator::Kind::perturbative) max_order = std::max(max_order, e.order);
  }
  std::optional<Reconstruction> pert;
  if (max_order > 0) {
    try {
      pert = reconstruct(sample->mu_hat, rho, max_order);
    } catch (const std::exception&) {
    }
  }
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    const Estimator& e = estimators[i];
    switch (e.kind) {
      case Estimator::Kind::truncated:
        out.estimates[i] = sample->mu_hat.vector();
        break;
      case Estimator::Kind::perturbative:
        if (pert) out.estimates[i] = pert->partial_sums[static_cast<std::size_t>(e.order)];
        break;
      case Estimator::Kind::iterative:
        try {
          FixedPointOptions opt;
          opt.keep_iterates = false;
          opt.max_iter = 2000;
          out.estimates[i] = fixed_point_solve(sample->mu_hat, rho, opt).lambda.vector();
        } catch (const std::exception&) {
        }
        break;
    }
  }
  return out;
}

}  // namespace

SweepResult bias_variance_sweep(const Spectrum& lambda, const SweepConfig& config) {
  if (config.replicas < 4) throw DomainError("bias_variance_sweep: at least 4 replicas needed");
  if (config.rhos.empty() || config.ns.empty() || config.estimators.empty()) {
    throw DomainError("bias_variance_sweep: empty rho, N or estimator list");
  }
  const std::size_t v = lambda.size();
  const std::size_t nr = config.rhos.size();
  const std::size_t ne = config.estimators.size();
  SweepResult result;
  for (std::size_t ni = 0; ni < config.ns.size(); ++ni) {
    const int n = config.ns[ni];
    // outcomes[replica][rho]
    std::vector<std::vector<ReplicaOutcome>> outcomes(static_cast<std::size_t>(config.replicas));
    parallel_for(outcomes.size(), config.threads, [&](std::size_t r) {
      const std::uint64_t s = derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(n)), r);
      const Eigen::MatrixXd population = draw_population(lambda, n, s);
      for (double rho : config.rhos) outcomes[r].push_back(run_replica(population, rho, config.estimators));
    });
    for (std::size_t ri = 0; ri < nr; ++ri) {
      int degenerate = 0;
      double m_sum = 0.0;
      int m_count = 0;
      for (const auto& o : outcomes) {
        if (o[ri].degenerate) {
          ++degenerate;
        } else {
          m_sum += o[ri].m;
          ++m_count;
        }
      }
      result.degenerate.push_back(degenerate);
      for (std::size_t ei = 0; ei < ne; ++ei) {
        for (std::size_t k = 0; k < v; ++k) {
          std::vector<double> xs;
          for (const auto& o : outcomes) {
            const auto& est = o[ri].estimates;
            if (!est.empty() && est[ei]) xs.push_back((*est[ei])[k]);
          }
          SimulationRecord rec{config.rhos[ri], n, static_cast<int>(xs.size()),
                               config.replicas - static_cast<int>(xs.size()), config.estimators[ei].name(),
                               static_cast<int>(k), NAN, NAN, NAN, NAN, NAN,
                               m_count ? m_sum / m_count : NAN};
          if (xs.size() >= 4) {
            double mean = 0.0;
            for (double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            double ss = 0.0;
            for (double x : xs) ss += (x - mean) * (x - mean);
            rec.mean = mean;
            rec.bias = mean - lambda[k];
            rec.variance = ss / static_cast<double>(xs.size() - 1);
            rec.bias_se = std::sqrt(rec.variance / static_cast<double>(xs.size()));
            rec.variance_se = stderr_of_variance(xs);
          }
          result.records.push_back(rec);
        }
      }
    }
  }
  return result;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("linear_fit: need two or more paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("linear_fit: x values are all equal");
  const double slope = sxy / sxx;
  const double r2 = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
  return {slope, my - slope * mx, r2};
}

double slope_through_origin(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw DomainError("slope_through_origin: need paired points");
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  if (sxx == 0.0) throw DomainError("slope_through_origin: x values are all zero");
  return sxy / sxx;
}

void write_records_csv(std::ostream& out, const std::vector<SimulationRecord>& records) {
  out << "rho,N,replicas,failures,estimator,k,mean,bias,bias_se,variance,variance_se,mean_M\n";
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  for (const auto& r : records) {
    out << num(r.rho) << ',' << r.n << ',' << r.replicas << ',' << r.failures << ',' << r.estimator << ','
        << r.k + 1 << ',' << num(r.mean) << ',' << num(r.bias) << ',' << num(r.bias_se) << ','
        << num(r.variance) << ',' << num(r.variance_se) << ',' << num(r.mean_m) << '\n';
  }
}

}  // namespace sphertrunc
