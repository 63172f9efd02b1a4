#include "sphertrunc/perturb.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "sphertrunc/errors.hpp"
#include "sphertrunc/specfun.hpp"
#include "sphertrunc/tallis.hpp"

namespace sphertrunc {

std::string to_string(SplitScheme s) { return s == SplitScheme::concentrate ? "concentrate" : "logspread"; }

SplitScheme parse_split_scheme(const std::string& text) {
  if (text == "concentrate") return SplitScheme::concentrate;
  if (text == "logspread" || text == "log-spread") return SplitScheme::log_spread;
  throw DomainError("unknown split scheme '" + text + "' (expected concentrate or logspread)");
}

double choose_mu_tilde(const Spectrum& mu, double rho, const MuTildePolicy& policy) {
  if (policy.kind == MuTildePolicy::Kind::mean) return mu.mean();
  const double upper = rho / (mu.v() + 2);
  if (!(policy.value > 0.0) || !(policy.value < upper)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "choose_mu_tilde: mu_tilde = " << policy.value << " outside (0, rho/(v+2)) = (0, " << upper << ")";
    throw DomainError(msg.str());
  }
  return policy.value;
}

std::vector<std::vector<double>> split_mu(const Spectrum& mu, double mu_tilde, SplitScheme scheme, int max_order) {
  if (max_order < 0) throw DomainError("split_mu: negative order");
  const std::size_t v = mu.size();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(max_order) + 1, std::vector<double>(v, 0.0));
  out[0].assign(v, mu_tilde);
  if (max_order == 0) return out;
  for (std::size_t k = 0; k < v; ++k) {
    const double d = mu[k] - mu_tilde;
    if (scheme == SplitScheme::concentrate) {
      out[1][k] = d;
      continue;
    }
    if (!(d > -1.0)) throw DomainError("split_mu: log-spread needs mu_k - mu_tilde > -1");
    const double l = std::log1p(d);
    double term = 1.0;
    for (int n = 1; n <= max_order; ++n) {
      term *= l / n;
      out[static_cast<std::size_t>(n)][k] = term;
    }
  }
  return out;
}

ExpansionState::ExpansionState(int v_, double rho_, double lambda_tilde_) : v(v_), rho(rho_), lambda_tilde(lambda_tilde_) {
  const TallisPoint point(v, lambda_tilde, rho);
  const CdfLadder ladder(v, point.x(), kMaxRatioStep);
  for (int s = 0; s <= kMaxRatioStep; ++s) ratios.push_back(ladder.ratio(s));
  coeffs.push_back(std::vector<double>(static_cast<std::size_t>(v), lambda_tilde));
}

double ExpansionState::ratio(const ChiSquareRatioKey& key) const {
  double r = 1.0;
  for (int o : key.offsets) {
    if (o / 2 > kMaxRatioStep) throw ContractError("ExpansionState::ratio: offset beyond cached range");
    r *= ratios[static_cast<std::size_t>(o / 2)];
  }
  return r;
}

ExpansionState make_expansion_state(const Spectrum& mu, double rho, const MuTildePolicy& policy, SplitScheme scheme,
                                    int max_order) {
  const double mu_tilde = choose_mu_tilde(mu, rho, policy);
  const TallisInverse inv = tallis_inverse(mu_tilde, rho, mu.v());
  ExpansionState s(mu.v(), rho, inv.lambda_tilde);
  s.mu_tilde = mu_tilde;
  s.mu_coeffs = split_mu(mu, mu_tilde, scheme, max_order);
  return s;
}

std::map<std::string, double> zeta_structures(const std::vector<std::vector<double>>& coeffs, int max_order) {
  std::map<std::string, double> out;
  int available = 0;
  while (available + 1 < static_cast<int>(coeffs.size()) && !coeffs[static_cast<std::size_t>(available) + 1].empty()) {
    ++available;
  }
  std::vector<int> orders;
  // Non-decreasing order lists with total <= max_order.
  std::function<void(int, int)> grow = [&](int smallest, int budget) {
    for (int o = smallest; o <= std::min(available, budget); ++o) {
      orders.push_back(o);
      Structure s;
      s.zetas.push_back(orders);
      out[s.to_string()] = zeta_value(coeffs, orders);
      grow(o, budget - o);
      orders.pop_back();
    }
  };
  grow(1, max_order);
  return out;
}

namespace {

double zeta1_tolerance(const ExpansionState& s) {
  double l1 = 0.0;
  for (double x : s.coeffs[1]) l1 += std::fabs(x);
  return 1e-9 * l1 + 1e-14 * s.v * s.lambda_tilde;
}

}  // namespace

std::vector<double> g_vector(int n, const ExpansionState& state) {
  if (n < 1 || n > 4) throw UnsupportedError("g_vector: orders 1 to 4 only");
  if (static_cast<int>(state.mu_coeffs.size()) <= n) throw ContractError("g_vector: mu coefficient missing");
  if (state.solved_order() < n - 1) throw ContractError("g_vector: lower-order coefficients missing");
  std::vector<double> g = state.mu_coeffs[static_cast<std::size_t>(n)];
  if (n == 1) return g;

  const GammaTable& table = gamma_table(n);
  if (table.zeta1_zero) {
    const double z1 = zeta_value(state.coeffs, {1});
    if (std::fabs(z1) > zeta1_tolerance(state)) {
      std::ostringstream msg;
      msg << "g_vector: the order-" << n << " coefficient table assumes zeta_1 = 0, but zeta_1 = " << z1
          << "; use the mean mu_tilde policy with the concentrate scheme";
      throw UnsupportedError(msg.str());
    }
  }
  std::vector<double> column_values;
  for (const auto& key : table.columns) column_values.push_back(state.ratio(key));
  const double scale = std::pow(state.lambda_tilde, 1 - n);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    double weight = 0.0;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      weight += boost::rational_cast<double>(table.entries[r][c]) * column_values[c];
    }
    if (weight == 0.0) continue;
    for (int k = 0; k < state.v; ++k) {
      g[static_cast<std::size_t>(k)] += scale * weight * evaluate(table.rows[r], state.coeffs, k, state.lambda_tilde);
    }
  }
  return g;
}

const std::vector<double>& solve_order(int n, ExpansionState& state) {
  if (n != state.solved_order() + 1) throw ContractError("solve_order: orders must be solved in sequence");
  const std::vector<double> g = g_vector(n, state);
  const TwoValueMatrix inv = jacobian_inverse(state.v, state.x());
  state.coeffs.push_back(inv.apply(g));
  return state.coeffs.back();
}

std::vector<double> lambda1_closed_form(const ExpansionState& s) {
  const double r4 = s.ratios[2];
  const double d = d_quantity(s.v, s.x());
  const std::vector<double>& mu1 = s.mu_coeffs.at(1);
  // With the concentrate scheme mu_k = mu_tilde + mu1_k.
  std::vector<double> mu(mu1.size());
  for (std::size_t k = 0; k < mu.size(); ++k) mu[k] = s.mu_tilde + mu1[k];
  const double mean = std::accumulate(mu.begin(), mu.end(), 0.0) / static_cast<double>(mu.size());
  std::vector<double> out(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) out[k] = (mu[k] - mean) / r4 - 2.0 * (s.mu_tilde - mean) / d;
  return out;
}

std::vector<double> lambda2_closed_form(const ExpansionState& s) {
  if (s.solved_order() < 1) throw ContractError("lambda2_closed_form: lambda^(1) missing");
  const std::vector<double>& l1 = s.coeffs[1];
  const double r4 = s.ratios[2];
  const double r6 = s.ratios[3];
  const double d = d_quantity(s.v, s.x());
  const double z12 = zeta_value(s.coeffs, {1, 1});
  const double lt = s.lambda_tilde;
  const double tail = z12 / (2.0 * lt) * xi(s.v, s.x()) / d;
  std::vector<double> out(l1.size());
  for (std::size_t k = 0; k < l1.size(); ++k) out[k] = l1[k] * l1[k] / lt * (1.0 - r6 / r4) + tail;
  return out;
}

double xi(int v, double x) {
  const CdfLadder ladder(v, x, 3);
  const double r2 = ladder.ratio(1);
  const double r4 = ladder.ratio(2);
  const double r6 = ladder.ratio(3);
  return r6 + r4 * r2 - 2.0 * (r6 / r4) * r2 * r2;
}

KummerBounds tallis_kummer_bounds(int v, double rho, double lambda_min, double lambda_max) {
  const double lo_arg = rho / (2.0 * lambda_min);
  const double hi_arg = rho / (2.0 * lambda_max);
  const double lower = rho / (2.0 * v + 1.0) * kummer_m(v, v + 1.5, lo_arg) / kummer_m(v, v + 0.5, lo_arg);
  const double upper = rho / 3.0 * kummer_m(1.0, 2.5, hi_arg) / kummer_m(1.0, 1.5, hi_arg);
  return {lower, upper};
}

Reconstruction reconstruct(const Spectrum& mu, double rho, int order, SplitScheme scheme, const MuTildePolicy& policy) {
  if (order < 0) throw DomainError("reconstruct: negative order");
  if (order > 4) throw UnsupportedError("reconstruct: orders above 4 have no coefficient tables");
  std::vector<std::string> warnings;
  DomainReport domain = domain_check(mu, rho);
  if (!domain.verdict) warnings.push_back("mu fails the bounding-region screen; the reconstruction may be meaningless");

  const double mu_tilde = choose_mu_tilde(mu, rho, policy);
  const TallisInverse inv = tallis_inverse(mu_tilde, rho, mu.v());
  if (inv.ill_conditioned) warnings.push_back("mu_tilde is within 1e-9 of rho/(v+2); lambda_tilde is ill-conditioned");
  ExpansionState state(mu.v(), rho, inv.lambda_tilde);
  state.mu_tilde = mu_tilde;
  state.mu_coeffs = split_mu(mu, mu_tilde, scheme, std::max(order, 1));

  std::vector<std::vector<double>> partial{state.coeffs[0]};
  for (int n = 1; n <= order; ++n) {
    const std::vector<double>& c = solve_order(n, state);
    std::vector<double> next = partial.back();
    for (std::size_t k = 0; k < next.size(); ++k) next[k] += c[k];
    partial.push_back(std::move(next));
  }
  bool negative = false;
  for (double x : partial.back()) negative = negative || x <= 0.0;
  if (negative) warnings.push_back("reconstructed spectrum has non-positive entries");

  Reconstruction out{std::move(state), std::move(partial), {}, 0.0, std::move(domain), inv.ill_conditioned,
                     negative, std::move(warnings)};
  out.zeta = zeta_structures(out.state.coeffs, std::max(order, 1));
  out.det_jacobian = jacobian_det(out.state.v, out.state.x());
  return out;
}

}  // namespace sphertrunc
