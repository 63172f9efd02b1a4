// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance            every criterion
//   acceptance --only ID  a single criterion (1..12, or 11a/11b/11c)
// Exit status is the number of failed gating criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sphertrunc/combinatorics.hpp"
#include "sphertrunc/forward.hpp"
#include "sphertrunc/gamma_tables.hpp"
#include "sphertrunc/iterative.hpp"
#include "sphertrunc/jets.hpp"
#include "sphertrunc/perturb.hpp"
#include "sphertrunc/rng.hpp"
#include "sphertrunc/simulate.hpp"
#include "sphertrunc/tallis.hpp"

using namespace sphertrunc;

namespace {

const Spectrum kLambdaEx({0.1, 0.3, 0.8, 2.2}, true);

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return out;
}

Outcome truncation_probability() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = alpha(6.0, kLambdaEx);
  const auto mc = mc_oracle(6.0, kLambdaEx, 10000000, 20240601);
  const double z = (mc.alpha - a.value) / mc.alpha_se;
  const double t = seconds_since(t0);
  const bool ok = std::abs(a.value - 0.844) <= 0.003 && std::abs(z) <= 3.0 && t < 10.0;
  return {ok, fmt("alpha=%.15f (|alpha-0.844|<=0.003), MC 1e7 %.6f+-%.6f z=%.2f (|z|<=3), %.2f s (<10 s)", a.value,
                  mc.alpha, mc.alpha_se, z, t)};
}

Outcome table_integrity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string rows;
  bool ok = true;
  for (const auto& t : embedded_gamma_tables()) {
    ok = ok && t.rows_sum_to_zero();
    rows += (rows.empty() ? "" : "+") + std::to_string(t.rows.size());
  }
  ok = ok && rows == "4+6+18";
  const double t = seconds_since(t0);
  return {ok && t < 1.0, fmt("rows %s all sum to exactly zero: %s, %.3f s (<1 s)", rows.c_str(), ok ? "yes" : "no", t)};
}

Outcome table_rederivation() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (const auto& t : embedded_gamma_tables()) {
    const auto x = extract_table(t.order, t.zeta1_zero, 20240601);
    const bool same = x.ok && diff_tables(t, x.table()).identical;
    ok = ok && same;
    detail += fmt("order %d %s; ", t.order, same ? "identical" : "DIFFERS");
    if (t.order == 2 && x.ok) {
      const auto g = x.table().at(Structure::parse("l(1^2)"), ChiSquareRatioKey::parse("F(6)"));
      ok = ok && g == Rational(-1);
      detail += "gamma(l(1^2),F(6))=" + to_string(g) + "; ";
    }
    if (t.order == 4 && x.ok) {
      const auto g = x.table().at(Structure::parse("l(1^4)"), ChiSquareRatioKey::parse("F(8)"));
      ok = ok && g == Rational(3);
      detail += "gamma(l(1^4),F(8))=" + to_string(g) + "; ";
    }
  }
  const double t = seconds_since(t0);
  return {ok && t < 60.0, detail + fmt("%.2f s (<60 s)", t)};
}

Outcome coefficient_paths() {
  int checked = 0, bad = 0;
  auto c = [](int j, int r, int n) -> std::int64_t { return (r < 0 || r > j) ? 0 : c_coeff_closed(j, r, n); };
  for (int n = 0; n <= 5; ++n) {
    for (int j = 0; j <= 6; ++j) {
      for (int r = 0; r <= j; ++r) {
        ++checked;
        if (c_coeff_nested(j, r, n) != c_coeff_closed(j, r, n)) ++bad;
      }
      if (j < 6) {
        for (int r = 0; r <= j + 1; ++r) {
          ++checked;
          if (c(j + 1, r, n) != c(j, r - 1, n) + (2 * (n + r) + 1) * c(j, r, n)) ++bad;
        }
      }
    }
  }
  return {bad == 0, fmt("%d exact identities checked (nested = closed, recurrence), %d mismatches", checked, bad)};
}

Outcome derivative_oracle() {
  const int v = 4;
  const double lt = 1.0, rho = 6.0;
  const TallisPoint p(v, lt, rho);
  double worst = 0.0;
  int vanishing = 0;
  double vanishing_fd = 0.0;
  for (int integrand : {-1, 0}) {
    const IndexMultiset in = integrand < 0 ? IndexMultiset(v, {}) : IndexMultiset(v, {integrand});
    const double base = tallis_alpha(p, in);
    auto at = [&](int a, double da, int b, double db) {
      std::vector<double> l(v, lt);
      l[static_cast<std::size_t>(a)] += da;
      l[static_cast<std::size_t>(b)] += db;
      const Spectrum s(l);
      return integrand < 0 ? alpha(rho, s).value : alpha_k(rho, s, integrand).value;
    };
    auto record = [&](double fd, double an) {
      if (std::abs(an) > 1e-8 * base) {
        worst = std::max(worst, std::abs(fd - an) / std::abs(an));
      } else {
        ++vanishing;
        vanishing_fd = std::max(vanishing_fd, std::abs(fd) / base);
      }
    };
    for (int j = 0; j < v; ++j) {
      const double h = 1e-3;
      record((at(j, h, j, 0) - at(j, -h, j, 0)) / (2 * h), tallis_derivative(p, IndexMultiset(v, {j}), in));
    }
    for (int a = 0; a < v; ++a) {
      for (int b = a; b < v; ++b) {
        auto d2 = [&](double h) {
          if (a == b) return (at(a, h, a, 0) - 2 * at(a, 0, a, 0) + at(a, -h, a, 0)) / (h * h);
          return (at(a, h, b, h) - at(a, h, b, -h) - at(a, -h, b, h) + at(a, -h, b, -h)) / (4 * h * h);
        };
        const double fd = (4 * d2(5e-3) - d2(1e-2)) / 3;
        record(fd, tallis_derivative(p, IndexMultiset(v, {a, b}), in));
      }
    }
  }
  const bool ok = worst < 1e-5 && vanishing_fd < 1e-5;
  return {ok, fmt("max relative error %.2e (<1e-5) over nonzero m<=2 derivatives; %d derivatives vanish exactly "
                  "at x=v+2, finite differences there %.2e of alpha_I (<1e-5)",
                  worst, vanishing, vanishing_fd)};
}

Outcome order_residuals() {
  double worst = 0.0;
  for (double rho : {6.0, 12.0, 40.0}) {
    const auto mu = forward_map(rho, kLambdaEx).mu;
    for (int n = 1; n <= 4; ++n) {
      const auto rec = reconstruct(mu, rho, n);
      worst = std::max(worst, max_abs(residual(n, rec.state)) / mu.max());
    }
  }
  return {worst <= 1e-9, fmt("max ||E(n)||/||mu|| over rho in {6,12,40}, n<=4: %.2e (<=1e-9)", worst)};
}

Outcome closed_forms() {
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  double worst = 0.0;
  int sign_bad = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int v = 3 + trial % 5;
    const double rho = 1.0 + 39.0 * u(gen);
    std::vector<double> m(static_cast<std::size_t>(v));
    for (double& x : m) x = 0.9 * u(gen) * rho / (v + 2);
    const Spectrum mu(m);
    ExpansionState st = make_expansion_state(mu, rho, MuTildePolicy::mean(), SplitScheme::concentrate, 2);
    const auto l1 = solve_order(1, st);
    const auto c1 = lambda1_closed_form(st);
    const auto l2 = solve_order(2, st);
    const auto c2 = lambda2_closed_form(st);
    for (std::size_t k = 0; k < m.size(); ++k) {
      worst = std::max(worst, std::abs(l1[k] - c1[k]) / std::max(1.0, std::abs(c1[k])));
      worst = std::max(worst, std::abs(l2[k] - c2[k]) / std::max(1.0, std::abs(c2[k])));
      if ((l1[k] > 0) != (mu[k] > mu.mean()) && std::abs(mu[k] - mu.mean()) > 1e-14) ++sign_bad;
    }
  }
  return {worst <= 1e-12 && sign_bad == 0,
          fmt("50 random states: max gap %.2e (<=1e-12), sign(lambda1_k) != sign(mu_k - mean) in %d entries", worst,
              sign_bad)};
}

Outcome iterative_round_trip() {
  double worst = 0.0, slowest = 0.0;
  int steps2 = 0, steps40 = 0;
  for (int i = 2; i <= 20; ++i) {
    const double rho = 2.0 * i;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = fixed_point_solve(forward_map(rho, kLambdaEx).mu, rho);
    slowest = std::max(slowest, seconds_since(t0));
    for (std::size_t k = 0; k < 4; ++k) worst = std::max(worst, std::abs(r.lambda[k] / kLambdaEx[k] - 1.0));
    if (rho == 40.0) steps40 = r.trace.steps;
  }
  steps2 = fixed_point_solve(forward_map(2.0, kLambdaEx).mu, 2.0).trace.steps;
  return {worst <= 1e-8 && slowest < 5.0,
          fmt("rho=4..40: max relative error %.2e (<=1e-8), slowest %.3f s (<5 s); steps rho=2: %d, rho=40: %d", worst,
              slowest, steps2, steps40)};
}

Outcome perturbative_convergence() {
  auto errors = [](double rho) {
    const auto rec = reconstruct(forward_map(rho, kLambdaEx).mu, rho, 4);
    std::vector<std::vector<double>> e;
    for (const auto& p : rec.partial_sums) {
      std::vector<double> d;
      for (std::size_t k = 0; k < 4; ++k) d.push_back(std::abs(p[k] - kLambdaEx[k]));
      e.push_back(d);
    }
    return e;
  };
  const auto e40 = errors(40.0);
  bool decreasing = true;
  std::string seq;
  for (std::size_t n = 0; n < e40.size(); ++n) {
    seq += fmt("%s%.3e", n ? " " : "", max_abs(e40[n]));
    if (n > 0 && !(max_abs(e40[n]) < max_abs(e40[n - 1]))) decreasing = false;
  }
  const auto e6 = errors(6.0);
  const bool top = e6[4][3] < e6[1][3];
  return {decreasing && top, fmt("rho=40 max error by order: %s (strictly decreasing); rho=6 top error order1 %.4f, "
                                 "order4 %.4f",
                                 seq.c_str(), e6[1][3], e6[4][3])};
}

Outcome jacobian_suite() {
  double det_gap = 0.0, inv_gap = 0.0, far = 0.0;
  bool above = true;
  for (int v = 3; v <= 7; ++v) {
    for (double x : log_grid(0.1, 50.0, 60)) {
      const auto j = jacobian(v, x);
      Eigen::MatrixXd a = Eigen::MatrixXd::Constant(v, v, j.off_diagonal);
      a.diagonal().setConstant(j.diagonal);
      const double det = jacobian_det(v, x);
      det_gap = std::max(det_gap, std::abs(det - a.partialPivLu().determinant()) / std::abs(det));
      above = above && det > jacobian_det_lower_bound(v, x);
      const auto ji = jacobian_inverse_unchecked(v, x);
      Eigen::MatrixXd b = Eigen::MatrixXd::Constant(v, v, ji.off_diagonal);
      b.diagonal().setConstant(ji.diagonal);
      inv_gap = std::max(inv_gap, (b * a - Eigen::MatrixXd::Identity(v, v)).cwiseAbs().maxCoeff());
    }
    const auto j = jacobian(v, 1e3);
    far = std::max({far, std::abs(jacobian_det(v, 1e3) - 1.0), std::abs(j.diagonal - 1.0), std::abs(j.off_diagonal)});
  }
  bool guarded = false;
  try {
    jacobian_inverse(7, 0.1);
  } catch (const NumericError&) {
    guarded = true;
  }
  const bool ok = det_gap <= 1e-12 && above && inv_gap <= 1e-12 && far <= 1e-6 && guarded;
  return {ok, fmt("v=3..7, x in [0.1,50]: det vs LU %.2e (<=1e-12), above lower bound: %s, |J^-1 J - I| %.2e "
                  "(<=1e-12), at x=1e3 %.2e (<=1e-6); guarded inverse refuses det<1e-14: %s",
                  det_gap, above ? "yes" : "no", inv_gap, far, guarded ? "yes" : "no")};
}

struct SimulationFixture {
  SweepResult sweep;
  std::vector<int> ns{200, 500, 1000, 2000};
  std::vector<Estimator> estimators{Estimator::iterative(),     Estimator::perturbative(1), Estimator::perturbative(2),
                                    Estimator::perturbative(3), Estimator::perturbative(4), Estimator::truncated()};
  // partial sums of the noiseless reconstruction
  std::vector<std::vector<double>> intrinsic;
  double seconds = 0.0;
};

const SimulationFixture& simulation() {
  static const SimulationFixture fixture = [] {
    SimulationFixture f;
    SweepConfig c;
    c.rhos = {6.0};
    c.ns = f.ns;
    c.replicas = 500;
    c.estimators = f.estimators;
    c.seed = 20240601;
    const auto t0 = std::chrono::steady_clock::now();
    f.sweep = bias_variance_sweep(kLambdaEx, c);
    f.seconds = seconds_since(t0);
    f.intrinsic = reconstruct(forward_map(6.0, kLambdaEx).mu, 6.0, 4).partial_sums;
    return f;
  }();
  return fixture;
}

Outcome simulation_fits() {
  const auto& f = simulation();
  double worst = 1.0;
  std::string where;
  for (const auto& e : f.estimators) {
    for (int k = 0; k < 4; ++k) {
      std::vector<double> x, y;
      for (int n : f.ns) {
        x.push_back(1.0 / n);
        y.push_back(f.sweep.find(6.0, n, e.name(), k).variance);
      }
      const double r2 = linear_fit(x, y).r2;
      if (r2 < worst) {
        worst = r2;
        where = e.name() + " k=" + std::to_string(k + 1);
      }
    }
  }
  int failures = 0;
  for (const auto& r : f.sweep.records) failures += r.failures;
  return {worst > 0.95 && f.seconds < 600.0,
          fmt("R=500, N=200..2000, rho=6: lowest variance-vs-1/N R^2 %.4f at %s (>0.95); %d failed estimates; sweep "
              "%.1f s (<600 s)",
              worst, where.c_str(), failures, f.seconds)};
}

Outcome simulation_ordering() {
  const auto& f = simulation();
  bool ok = true;
  std::string detail;
  for (int n : f.ns) {
    const auto& it4 = f.sweep.find(6.0, n, "iterative", 3);
    const auto& o4 = f.sweep.find(6.0, n, "order1", 3);
    const auto& it1 = f.sweep.find(6.0, n, "iterative", 0);
    const auto& o1 = f.sweep.find(6.0, n, "order1", 0);
    const bool top = it4.variance - o4.variance > std::max(it4.variance_se, o4.variance_se);
    const bool bottom = o1.variance - it1.variance > std::max(it1.variance_se, o1.variance_se);
    ok = ok && top && bottom;
    detail += fmt("N=%d var ratio iterative/order1 top %.2f bottom %.3f; ", n, it4.variance / o4.variance,
                  it1.variance / o1.variance);
  }
  // variance inflation of the reconstruction over the raw truncated estimate
  std::vector<double> raw, rec;
  for (int n : f.ns) {
    raw.push_back(f.sweep.find(6.0, n, "truncated", 3).variance);
    rec.push_back(f.sweep.find(6.0, n, "iterative", 3).variance);
  }
  const double inflation = slope_through_origin(raw, rec);
  // rank of the top-eigenvalue variance across orders at N=2000, overlaps within 1 stderr allowed
  bool ranked = true;
  for (int order = 2; order <= 4; ++order) {
    const auto& lo = f.sweep.find(6.0, 2000, "order" + std::to_string(order - 1), 3);
    const auto& hi = f.sweep.find(6.0, 2000, "order" + std::to_string(order), 3);
    ranked = ranked && hi.variance + std::max(lo.variance_se, hi.variance_se) > lo.variance;
  }
  ok = ok && inflation > 3.0 && ranked;
  return {ok, detail + fmt("separation > 1 stderr at every N; var(lambda4 hat)/var(mu4 hat) slope %.1f (>3); top "
                           "variance rising with order at N=2000: %s",
                           inflation, ranked ? "yes" : "no")};
}

Outcome simulation_bias() {
  const auto& f = simulation();
  double worst = 0.0;
  std::string where;
  int outside = 0, total = 0;
  for (int order = 1; order <= 4; ++order) {
    for (int k = 0; k < 4; ++k) {
      const auto& r = f.sweep.find(6.0, 2000, "order" + std::to_string(order), k);
      const double intrinsic = f.intrinsic[static_cast<std::size_t>(order)][static_cast<std::size_t>(k)] -
                               kLambdaEx[static_cast<std::size_t>(k)];
      const double z = std::abs(r.bias - intrinsic) / r.bias_se;
      ++total;
      if (z > 2.0) ++outside;
      if (z > worst) {
        worst = z;
        where = fmt("order%d k=%d", order, k + 1);
      }
    }
  }
  // finite-N part of the bias: intercept of bias = a + b/N against the intrinsic bias
  double worst_ext = 0.0;
  for (int order = 1; order <= 4; ++order) {
    for (int k = 0; k < 4; ++k) {
      double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (int n : f.ns) {
        const auto& r = f.sweep.find(6.0, n, "order" + std::to_string(order), k);
        const double w = 1.0 / (r.bias_se * r.bias_se), x = 1.0 / n;
        sw += w;
        sx += w * x;
        sy += w * r.bias;
        sxx += w * x * x;
        sxy += w * x * r.bias;
      }
      const double d = sw * sxx - sx * sx;
      const double a = (sxx * sy - sx * sxy) / d, sa = std::sqrt(sxx / d);
      const double intrinsic = f.intrinsic[static_cast<std::size_t>(order)][static_cast<std::size_t>(k)] -
                               kLambdaEx[static_cast<std::size_t>(k)];
      worst_ext = std::max(worst_ext, std::abs(a - intrinsic) / sa);
    }
  }
  return {outside == 0, fmt("N=2000: %d of %d (order, eigenvalue) biases beyond 2 stderr of the intrinsic bias, worst "
                            "%.2f stderr at %s; extrapolated to 1/N=0 the worst gap is %.2f stderr",
                            outside, total, worst, where.c_str(), worst_ext)};
}

Outcome conjecture_logs() {
  double xi_min = INFINITY;
  for (int v = 3; v <= 7; ++v)
    for (double x : log_grid(0.1, 50.0, 200)) xi_min = std::min(xi_min, xi(v, x));
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int dominant = 0;
  double worst_margin = INFINITY;
  for (int inst = 0; inst < 20; ++inst) {
    const int v = 2 + inst % 3;
    std::vector<double> l(static_cast<std::size_t>(v));
    for (double& x : l) x = 0.1 + 2.0 * u(gen);
    const Spectrum s(l);
    const double rho = 0.5 + 10.0 * u(gen);
    const auto c = mc_square_covariance(rho, s, 400000, derive_seed(20240601, static_cast<std::uint64_t>(inst)));
    bool all = true;
    for (int k = 0; k < v; ++k) {
      double off = 0.0, se2 = c.se_at(k, k) * c.se_at(k, k);
      for (int i = 0; i < v; ++i) {
        if (i == k) continue;
        off += std::abs(c.at(i, k));
        se2 += c.se_at(i, k) * c.se_at(i, k);
      }
      const double margin = (c.at(k, k) - off) / std::sqrt(se2);
      worst_margin = std::min(worst_margin, margin);
      all = all && margin > -3.0;
    }
    if (all) ++dominant;
  }
  const bool ok = xi_min >= -1e-12 && dominant == 20;
  return {ok, fmt("min Xi over v=3..7, x in [0.1,50]: %.3e (>=-1e-12); diagonal dominance of cov(X^2 | ball) in %d of "
                  "20 random instances (worst margin %.1f stderr)",
                  xi_min, dominant, worst_margin)};
}

struct Criterion {
  std::string id;
  std::string title;
  bool gating;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  const std::vector<Criterion> criteria{
      {"1", "truncation probability", true, truncation_probability},
      {"2", "coefficient table row sums", true, table_integrity},
      {"3", "coefficient table re-derivation", true, table_rederivation},
      {"4", "expansion coefficient identities", true, coefficient_paths},
      {"5", "derivatives vs finite differences", true, derivative_oracle},
      {"6", "order-n residuals", true, order_residuals},
      {"7", "first and second order closed forms", true, closed_forms},
      {"8", "fixed-point round trip", true, iterative_round_trip},
      {"9", "perturbative convergence", true, perturbative_convergence},
      {"10", "Jacobian suite", true, jacobian_suite},
      {"11a", "simulation: variance linear in 1/N", true, simulation_fits},
      {"11b", "simulation: variance ordering", true, simulation_ordering},
      {"11c", "simulation: asymptotic bias", true, simulation_bias},
      {"12", "conjecture evidence (non-gating)", false, conjecture_logs},
  };
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only ID]\n");
      return 64;
    }
  }
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.id != only && !(only == "11" && c.id.rfind("11", 0) == 0)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const char* tag = o.pass ? "PASS" : (c.gating ? "FAIL" : "FAIL (non-gating)");
    std::printf("%s [%s] %s: %s [%.2f s]\n", tag, c.id.c_str(), c.title.c_str(), o.detail.c_str(), seconds_since(t0));
    if (!o.pass && c.gating) ++failed;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion '%s'\n", only.c_str());
    return 64;
  }
  return failed;
}
