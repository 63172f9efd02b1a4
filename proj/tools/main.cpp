// sphertrunc command-line front end.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sphertrunc/forward.hpp"
#include "sphertrunc/gamma_tables.hpp"
#include "sphertrunc/iterative.hpp"
#include "sphertrunc/jets.hpp"
#include "sphertrunc/perturb.hpp"
#include "sphertrunc/rng.hpp"
#include "sphertrunc/simulate.hpp"
#include "sphertrunc/tallis.hpp"

using nlohmann::json;
using namespace sphertrunc;

namespace {

constexpr const char* kSchema = "sphertrunc/1";
constexpr std::uint64_t kDefaultSeed = 20240601;

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (item.empty() || used != item.size()) throw DomainError(what + ": cannot parse '" + item + "'");
    out.push_back(x);
  }
  if (out.empty()) throw DomainError(what + ": empty list");
  return out;
}

// One-column CSV with a header row.
std::vector<double> read_column_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(parse_list(line, path).at(0));
  }
  if (out.empty()) throw DomainError(path + ": no values");
  return out;
}

struct Range {
  double lo, hi;
};

Range parse_range(const std::string& text, const std::string& what) {
  const auto pos = text.find("..");
  if (pos == std::string::npos) {
    const double x = parse_list(text, what).at(0);
    return {x, x};
  }
  const double lo = parse_list(text.substr(0, pos), what).at(0);
  const double hi = parse_list(text.substr(pos + 2), what).at(0);
  if (hi < lo) throw DomainError(what + ": empty range " + text);
  return {lo, hi};
}

std::vector<double> log_grid(Range r, int points) {
  if (!(r.lo > 0.0)) throw DomainError("grid bounds must be positive");
  if (points < 1) throw DomainError("grid needs at least one point");
  std::vector<double> out;
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    out.push_back(r.lo * std::pow(r.hi / r.lo, t));
  }
  return out;
}

std::string g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw DomainError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void emit_json(const std::string& path, const json& j) {
  Output out(path);
  out.stream() << j.dump(2) << '\n';
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SPHERTRUNC_SEED")) {
    try {
      std::size_t used = 0;
      const auto s = std::stoull(env, &used);
      if (used == std::string(env).size()) return s;
    } catch (const std::exception&) {
    }
    throw DomainError(std::string("SPHERTRUNC_SEED is not an unsigned integer: ") + env);
  }
  return kDefaultSeed;
}

struct SpectrumArgs {
  std::string inline_values;
  std::string file;

  void add(CLI::App* app, const std::string& name, const std::string& help) {
    app->add_option("--" + name, inline_values, help + " (comma-separated)");
    app->add_option("--" + name + "-file", file, help + " (one-column CSV with header)");
  }
  bool given() const { return !inline_values.empty() || !file.empty(); }
  std::vector<double> values(const std::string& name) const {
    if (!inline_values.empty() && !file.empty()) throw DomainError("give --" + name + " or --" + name + "-file, not both");
    if (!file.empty()) return read_column_file(file);
    if (inline_values.empty()) throw DomainError("--" + name + " is required");
    return parse_list(inline_values, "--" + name);
  }
};

json domain_json(const DomainReport& d) {
  return {{"sorted", d.sorted},       {"component_bound", d.component_bound}, {"component_ok", d.component_ok},
          {"sum", d.sum},             {"sum_bound", d.sum_bound},             {"sum_ok", d.sum_ok},
          {"verdict", d.verdict}};
}

// forward

struct ForwardArgs {
  SpectrumArgs lambda;
  double rho = 0.0;
  std::string out;
};

int run_forward(const ForwardArgs& a) {
  const Spectrum lambda(a.lambda.values("lambda"));
  const ForwardResult f = forward_map(a.rho, lambda);
  json j = {{"schema", kSchema},
            {"command", "forward"},
            {"rho", a.rho},
            {"lambda", lambda.vector()},
            {"mu", f.mu.vector()},
            {"alpha", f.alpha},
            {"alpha_k", f.alpha_k},
            {"method", to_string(f.method)},
            {"fell_back", f.fell_back},
            {"error_bound", f.error_bound}};
  emit_json(a.out, j);
  std::cerr << "alpha = " << g17(f.alpha) << " (" << to_string(f.method) << ")\n";
  return 0;
}

// reconstruct

struct ReconstructArgs {
  SpectrumArgs mu;
  SpectrumArgs lambda;
  std::string mu_from;
  double rho = 0.0;
  int order = 4;
  std::string scheme = "concentrate";
  std::string mu_tilde = "mean";
  std::string method = "perturbative";
  double tol = 1e-10;
  int max_iter = 10000;
  double damping = 1.0;
  std::string out;
};

int run_reconstruct(const ReconstructArgs& a) {
  std::vector<double> mu_values;
  json source;
  if (!a.mu_from.empty()) {
    if (a.mu_from != "forward") throw DomainError("--mu-from accepts only 'forward'");
    if (a.mu.given()) throw DomainError("give --mu or --mu-from forward, not both");
    const Spectrum lambda(a.lambda.values("lambda"));
    const ForwardResult f = forward_map(a.rho, lambda);
    mu_values = f.mu.vector();
    source = {{"lambda", lambda.vector()}, {"alpha", f.alpha}};
  } else {
    mu_values = a.mu.values("mu");
  }
  const Spectrum mu(mu_values);
  json j = {{"schema", kSchema}, {"command", "reconstruct"}, {"rho", a.rho}, {"mu", mu.vector()}};
  if (!source.is_null()) j["forward"] = source;

  if (a.method == "iterative") {
    FixedPointOptions opt;
    opt.tol = a.tol;
    opt.max_iter = a.max_iter;
    opt.damping = a.damping;
    opt.keep_iterates = false;
    const FixedPointResult r = fixed_point_solve(mu, a.rho, opt);
    j["method"] = "iterative";
    j["lambda"] = r.lambda.vector();
    j["trace"] = {{"steps", r.trace.steps},
                  {"converged", r.trace.converged},
                  {"final_residual", r.trace.residuals.empty() ? 0.0 : r.trace.residuals.back()}};
    emit_json(a.out, j);
    std::cerr << "fixed point converged in " << r.trace.steps << " steps\n";
    return 0;
  }
  if (a.method != "perturbative") throw DomainError("--method must be perturbative or iterative");

  MuTildePolicy policy = MuTildePolicy::mean();
  if (a.mu_tilde != "mean") policy = MuTildePolicy::fixed(parse_list(a.mu_tilde, "--mu-tilde").at(0));
  const Reconstruction r = reconstruct(mu, a.rho, a.order, parse_split_scheme(a.scheme), policy);
  j["method"] = "perturbative";
  j["order"] = a.order;
  j["scheme"] = to_string(parse_split_scheme(a.scheme));
  j["mu_tilde"] = r.state.mu_tilde;
  j["lambda_tilde"] = r.state.lambda_tilde;
  j["partial_sums"] = r.partial_sums;
  j["coefficients"] = r.state.coeffs;
  j["zeta"] = r.zeta;
  j["det_jacobian"] = r.det_jacobian;
  j["domain"] = domain_json(r.domain);
  j["ill_conditioned"] = r.ill_conditioned;
  j["negative_eigenvalues"] = r.negative_eigenvalues;
  j["warnings"] = r.warnings;
  emit_json(a.out, j);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

// simulate

struct SimulateArgs {
  SpectrumArgs lambda;
  std::string rho_list = "6";
  std::string n_list = "200,500,1000,2000";
  int replicas = 500;
  std::string estimators = "iterative,order1,order2,order3,order4,truncated";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string summary;
};

int run_simulate(const SimulateArgs& a, unsigned threads) {
  const Spectrum lambda(a.lambda.values("lambda"));
  SweepConfig c;
  c.rhos = parse_list(a.rho_list, "--rho-list");
  for (double n : parse_list(a.n_list, "--n-list")) {
    if (n != std::floor(n) || n < 2) throw DomainError("--n-list entries must be integers >= 2");
    c.ns.push_back(static_cast<int>(n));
  }
  c.replicas = a.replicas;
  std::stringstream ss(a.estimators);
  std::string item;
  while (std::getline(ss, item, ',')) c.estimators.push_back(Estimator::parse(item));
  c.seed = resolve_seed(a.seed);
  c.threads = threads;
  const SweepResult r = bias_variance_sweep(lambda, c);
  {
    Output out(a.out);
    write_records_csv(out.stream(), r.records);
  }
  json fits = json::array();
  if (c.ns.size() >= 2) {
    for (double rho : c.rhos) {
      for (const Estimator& e : c.estimators) {
        for (std::size_t k = 0; k < lambda.size(); ++k) {
          std::vector<double> x, y;
          for (int n : c.ns) {
            const auto& rec = r.find(rho, n, e.name(), static_cast<int>(k));
            if (std::isfinite(rec.variance)) {
              x.push_back(1.0 / n);
              y.push_back(rec.variance);
            }
          }
          if (x.size() < 2) continue;
          const LinearFit f = linear_fit(x, y);
          fits.push_back({{"rho", rho},
                          {"estimator", e.name()},
                          {"k", k + 1},
                          {"slope", f.slope},
                          {"intercept", f.intercept},
                          {"r2", f.r2}});
        }
      }
    }
  }
  int failures = 0;
  for (const auto& rec : r.records) failures += rec.failures;
  if (!a.summary.empty()) {
    json j = {{"schema", kSchema},   {"command", "simulate"},   {"lambda", lambda.vector()},
              {"rhos", c.rhos},      {"ns", c.ns},              {"replicas", c.replicas},
              {"seed", c.seed},      {"degenerate", r.degenerate}, {"variance_fits", fits}};
    emit_json(a.summary, j);
  }
  std::cerr << r.records.size() << " records, " << failures << " failed estimates\n";
  return 0;
}

// tables

struct TablesArgs {
  bool verify = false;
  bool extract = false;
  int order = 0;
  bool general = false;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int run_tables(const TablesArgs& a) {
  if (a.verify == a.extract) throw DomainError("tables: give exactly one of --verify or --extract");
  const std::uint64_t seed = resolve_seed(a.seed);
  if (a.verify) {
    json report = json::array();
    bool all_ok = true;
    for (const GammaTable& t : embedded_gamma_tables()) {
      const ExtractionResult x = extract_table(t.order, t.zeta1_zero, seed);
      const TableDiff d = x.ok ? diff_tables(t, x.table()) : TableDiff{false, {"extraction did not rationalize"}};
      const bool ok = t.rows_sum_to_zero() && d.identical;
      all_ok = all_ok && ok;
      report.push_back({{"order", t.order},
                        {"zeta1_zero", t.zeta1_zero},
                        {"rows", t.rows.size()},
                        {"columns", t.columns.size()},
                        {"rows_sum_to_zero", t.rows_sum_to_zero()},
                        {"extraction_identical", d.identical},
                        {"diff", d.lines},
                        {"max_fit_residual", x.max_fit_residual}});
      std::cerr << "order " << t.order << ": row sums " << (t.rows_sum_to_zero() ? "zero" : "NONZERO")
                << ", extraction " << (d.identical ? "identical" : "DIFFERS") << '\n';
    }
    emit_json(a.out, {{"schema", kSchema}, {"command", "tables"}, {"ok", all_ok}, {"tables", report}});
    return all_ok ? 0 : 2;
  }
  const bool zeta1_zero = !a.general;
  const std::int64_t max_den = a.general ? 4096 : 64;
  const ExtractionResult x = extract_table(a.order, zeta1_zero, seed, 0, max_den);
  if (!x.ok) throw NumericError("extraction did not rationalize");
  const GammaTable t = x.table();
  Output out(a.out);
  out.stream() << format_gamma_table(t);
  std::optional<GammaTable> embedded;
  for (const GammaTable& e : embedded_gamma_tables()) {
    if (e.order == a.order && e.zeta1_zero == zeta1_zero) embedded = e;
  }
  if (embedded) {
    const TableDiff d = diff_tables(*embedded, t);
    out.stream() << "# diff against embedded: " << (d.identical ? "identical" : "differs") << '\n';
    for (const auto& line : d.lines) out.stream() << "# " << line << '\n';
    std::cerr << "diff against embedded table: " << (d.identical ? "identical" : "differs") << '\n';
    return d.identical ? 0 : 2;
  }
  out.stream() << "# no embedded table for this basis\n";
  std::cerr << t.rows.size() << " rows, row sums " << (t.rows_sum_to_zero() ? "zero" : "nonzero") << '\n';
  return 0;
}

// detj and xi-scan

struct GridArgs {
  std::string v = "3..7";
  std::string x = "0.1..50";
  int points = 200;
  std::string out;
};

std::vector<int> int_range(const std::string& text) {
  const Range r = parse_range(text, "--v");
  if (r.lo != std::floor(r.lo) || r.hi != std::floor(r.hi) || r.lo < 1) throw DomainError("--v needs integers >= 1");
  std::vector<int> out;
  for (int v = static_cast<int>(r.lo); v <= static_cast<int>(r.hi); ++v) out.push_back(v);
  return out;
}

int run_detj(const GridArgs& a) {
  const auto vs = int_range(a.v);
  const auto xs = log_grid(parse_range(a.x, "--x"), a.points);
  Output out(a.out);
  out.stream() << "x,v,det_j,lower_bound\n";
  for (int v : vs) {
    for (double x : xs) {
      out.stream() << g17(x) << ',' << v << ',' << g17(jacobian_det(v, x)) << ','
                   << g17(jacobian_det_lower_bound(v, x)) << '\n';
    }
  }
  return 0;
}

int run_xi_scan(const GridArgs& a) {
  const auto vs = int_range(a.v);
  const auto xs = log_grid(parse_range(a.x, "--x"), a.points);
  Output out(a.out);
  out.stream() << "x,v,xi\n";
  double lowest = INFINITY;
  for (int v : vs) {
    for (double x : xs) {
      const double value = xi(v, x);
      lowest = std::min(lowest, value);
      out.stream() << g17(x) << ',' << v << ',' << g17(value) << '\n';
    }
  }
  std::cerr << "min xi = " << g17(lowest) << '\n';
  return 0;
}

// oracle

struct OracleArgs {
  SpectrumArgs lambda;
  double rho = 0.0;
  std::uint64_t samples = 1000000;
  std::optional<std::uint64_t> seed;
  bool squares = false;
  std::string out;
};

int run_oracle(const OracleArgs& a, unsigned threads) {
  const Spectrum lambda(a.lambda.values("lambda"));
  const std::uint64_t seed = resolve_seed(a.seed);
  const MonteCarloEstimate mc = mc_oracle(a.rho, lambda, a.samples, seed, threads);
  const ForwardResult f = forward_map(a.rho, lambda);
  std::vector<double> z;
  for (std::size_t k = 0; k < lambda.size(); ++k) z.push_back((mc.alpha_k[k] - f.alpha_k[k]) / mc.alpha_k_se[k]);
  json j = {{"schema", kSchema},
            {"command", "oracle"},
            {"rho", a.rho},
            {"lambda", lambda.vector()},
            {"samples", mc.samples},
            {"seed", seed},
            {"mc", {{"alpha", mc.alpha}, {"alpha_se", mc.alpha_se}, {"alpha_k", mc.alpha_k}, {"alpha_k_se", mc.alpha_k_se}}},
            {"series", {{"alpha", f.alpha}, {"alpha_k", f.alpha_k}}},
            {"z_alpha", (mc.alpha - f.alpha) / mc.alpha_se},
            {"z_alpha_k", z}};
  if (a.squares) {
    const SquareCovariance c = mc_square_covariance(a.rho, lambda, a.samples, derive_seed(seed, 1), threads);
    json rows = json::array();
    for (int k = 0; k < c.v; ++k) {
      double off = 0.0, off_se2 = 0.0;
      for (int i = 0; i < c.v; ++i) {
        if (i == k) continue;
        off += std::fabs(c.at(i, k));
        off_se2 += c.se_at(i, k) * c.se_at(i, k);
      }
      const double margin = c.at(k, k) - off;
      const double se = std::sqrt(c.se_at(k, k) * c.se_at(k, k) + off_se2);
      rows.push_back({{"k", k + 1}, {"variance", c.at(k, k)}, {"off_diagonal_sum", off}, {"margin", margin},
                      {"margin_se", se}, {"dominant", margin > -3.0 * se}});
    }
    j["square_covariance"] = {{"accepted", c.accepted}, {"cov", c.cov}, {"se", c.se}, {"dominance", rows}};
  }
  emit_json(a.out, j);
  std::cerr << "alpha mc " << g17(mc.alpha) << " +- " << g17(mc.alpha_se) << ", series " << g17(f.alpha) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral reconstruction of spherically truncated multinormal covariances"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker cap (0 = hardware concurrency)");

  ForwardArgs fa;
  auto* forward = app.add_subcommand("forward", "Truncated spectrum mu of lambda");
  fa.lambda.add(forward, "lambda", "Population variances");
  forward->add_option("--rho", fa.rho, "Squared radius")->required();
  forward->add_option("--out", fa.out, "Output file (default stdout)");

  ReconstructArgs ra;
  auto* rec = app.add_subcommand("reconstruct", "Recover lambda from a truncated spectrum");
  ra.mu.add(rec, "mu", "Truncated variances");
  ra.lambda.add(rec, "lambda", "Population variances, with --mu-from forward");
  rec->add_option("--mu-from", ra.mu_from, "Compute mu from --lambda: 'forward'");
  rec->add_option("--rho", ra.rho, "Squared radius")->required();
  rec->add_option("--order", ra.order, "Perturbative order 0..4")->check(CLI::Range(0, 4));
  rec->add_option("--scheme", ra.scheme, "concentrate | logspread");
  rec->add_option("--mu-tilde", ra.mu_tilde, "mean | <value>");
  rec->add_option("--method", ra.method, "perturbative | iterative");
  rec->add_option("--tol", ra.tol, "Fixed-point tolerance");
  rec->add_option("--max-iter", ra.max_iter, "Fixed-point iteration cap");
  rec->add_option("--damping", ra.damping, "Fixed-point damping in (0,1]");
  rec->add_option("--out", ra.out, "Output file (default stdout)");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Bias and variance of the estimators over replicas");
  sa.lambda.add(sim, "lambda", "Population variances");
  sim->add_option("--rho-list", sa.rho_list, "Comma-separated squared radii");
  sim->add_option("--n-list", sa.n_list, "Comma-separated population sizes");
  sim->add_option("--replicas", sa.replicas, "Replicas per (rho, N)");
  sim->add_option("--estimators", sa.estimators, "iterative, order1..order4, truncated");
  sim->add_option("--seed", sa.seed, "Seed (default $SPHERTRUNC_SEED, then 20240601)");
  sim->add_option("--out", sa.out, "CSV report (default stdout)");
  sim->add_option("--summary", sa.summary, "JSON summary with variance fits");

  TablesArgs ta;
  auto* tab = app.add_subcommand("tables", "Check or re-derive the gamma tables");
  tab->add_flag("--verify", ta.verify, "Row sums and extraction diff for every embedded table");
  tab->add_flag("--extract", ta.extract, "Re-derive one table");
  tab->add_option("--order", ta.order, "Order 2..4 for --extract")->check(CLI::Range(2, 4));
  tab->add_flag("--general", ta.general, "Full basis without the zeta_1 = 0 reduction");
  tab->add_option("--seed", ta.seed, "Seed for the random draws");
  tab->add_option("--out", ta.out, "Output file (default stdout)");

  GridArgs da;
  auto* detj = app.add_subcommand("detj", "det J over a (v, x) grid as CSV");
  detj->add_option("--v", da.v, "Dimension range A..B");
  detj->add_option("--x", da.x, "x range lo..hi, log-spaced");
  detj->add_option("--points", da.points, "Points per dimension");
  detj->add_option("--out", da.out, "Output file (default stdout)");

  GridArgs xa;
  auto* xis = app.add_subcommand("xi-scan", "Xi(v, x) over a grid as CSV");
  xis->add_option("--v", xa.v, "Dimension range A..B");
  xis->add_option("--x", xa.x, "x range lo..hi, log-spaced");
  xis->add_option("--points", xa.points, "Points per dimension");
  xis->add_option("--out", xa.out, "Output file (default stdout)");

  OracleArgs oa;
  auto* ora = app.add_subcommand("oracle", "Monte Carlo check of alpha and alpha_k");
  oa.lambda.add(ora, "lambda", "Population variances");
  ora->add_option("--rho", oa.rho, "Squared radius")->required();
  ora->add_option("--samples", oa.samples, "Number of draws");
  ora->add_option("--seed", oa.seed, "Seed (default $SPHERTRUNC_SEED, then 20240601)");
  ora->add_flag("--squares", oa.squares, "Also estimate cov(X_i^2, X_k^2) in the ball");
  ora->add_option("--out", oa.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    if (*forward) return run_forward(fa);
    if (*rec) return run_reconstruct(ra);
    if (*sim) return run_simulate(sa, threads);
    if (*tab) {
      if (ta.extract && ta.order == 0) throw DomainError("tables --extract needs --order");
      return run_tables(ta);
    }
    if (*detj) return run_detj(da);
    if (*xis) return run_xi_scan(xa);
    if (*ora) return run_oracle(oa, threads);
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 64;
}
