#pragma once

// Perturbative inverse of the truncation map: expand lambda(eps) about a
// degenerate spectrum, solve order by order with the closed-form inverse
// Jacobian, and sum the orders.

#include <map>
#include <string>
#include <vector>

#include "sphertrunc/forward.hpp"
#include "sphertrunc/gamma_tables.hpp"
#include "sphertrunc/spectrum.hpp"

namespace sphertrunc {

enum class SplitScheme {
  /// mu(eps) = mu_tilde + eps (mu - mu_tilde).
  concentrate,
  /// mu^{(n)}_k = log(1 + mu_k - mu_tilde)^n / n!.
  log_spread,
};

std::string to_string(SplitScheme s);
SplitScheme parse_split_scheme(const std::string& text);

struct MuTildePolicy {
  enum class Kind { mean, fixed };
  Kind kind = Kind::mean;
  double value = 0.0;

  static MuTildePolicy mean() { return {}; }
  static MuTildePolicy fixed(double v) { return {Kind::fixed, v}; }
};

/// Mean of mu, or the fixed value after checking 0 < value < rho/(v+2).
double choose_mu_tilde(const Spectrum& mu, double rho, const MuTildePolicy& policy);

/// mu^{(0)} .. mu^{(max_order)}, each a vector of length v.
std::vector<std::vector<double>> split_mu(const Spectrum& mu, double mu_tilde, SplitScheme scheme, int max_order);

/// Largest step s with F_{v+2s}/F_v cached in an ExpansionState.
inline constexpr int kMaxRatioStep = 6;

struct ExpansionState {
  ExpansionState(int v, double rho, double lambda_tilde);

  int v;
  double rho;
  double lambda_tilde;
  double mu_tilde = 0.0;
  /// mu^{(n)} for n = 0 .. max order.
  std::vector<std::vector<double>> mu_coeffs;
  /// coeffs[0] is lambda_tilde in every slot; coeffs[n] = lambda^{(n)} once solved.
  std::vector<std::vector<double>> coeffs;
  /// ratios[s] = F_{v+2s}(x) / F_v(x).
  std::vector<double> ratios;

  double x() const { return rho / lambda_tilde; }
  int solved_order() const { return static_cast<int>(coeffs.size()) - 1; }
  double ratio(const ChiSquareRatioKey& key) const;
};

/// Chooses mu_tilde, inverts the degenerate map and splits mu; no order is solved.
ExpansionState make_expansion_state(const Spectrum& mu, double rho, const MuTildePolicy& policy, SplitScheme scheme,
                                    int max_order);

/// All zeta sums whose order multiset only uses available coefficients and
/// has total order <= max_order, keyed by their text form "z(1^2 2)".
std::map<std::string, double> zeta_structures(const std::vector<std::vector<double>>& coeffs, int max_order);

/// Right-hand side G^{(n)} of J lambda^{(n)} = G^{(n)}. Needs lambda^{(1)} ..
/// lambda^{(n-1)}. Orders 3 and 4 need zeta_1 = 0 and throw UnsupportedError otherwise.
std::vector<double> g_vector(int n, const ExpansionState& state);

/// Solves order n (which must be state.solved_order() + 1) and appends the result.
const std::vector<double>& solve_order(int n, ExpansionState& state);

/// Closed forms valid for the concentrate scheme; lambda2 also needs mu_tilde = mean(mu).
std::vector<double> lambda1_closed_form(const ExpansionState& state);
std::vector<double> lambda2_closed_form(const ExpansionState& state);

/// Xi = F_{v+6}/F_v + F_{v+4}F_{v+2}/F_v^2 - 2 (F_{v+6}/F_{v+4}) F_{v+2}^2/F_v^2.
double xi(int v, double x);

struct KummerBounds {
  double lower;
  double upper;
};

/// Two-sided bound on tallis_map at the solution lambda_tilde in terms of the
/// smallest and largest variances of the spectrum.
KummerBounds tallis_kummer_bounds(int v, double rho, double lambda_min, double lambda_max);

struct Reconstruction {
  ExpansionState state;
  /// partial_sums[n] = lambda^{(0)} + ... + lambda^{(n)}.
  std::vector<std::vector<double>> partial_sums;
  std::map<std::string, double> zeta;
  double det_jacobian;
  DomainReport domain;
  bool ill_conditioned;
  bool negative_eigenvalues;
  std::vector<std::string> warnings;
};

/// Full pipeline up to `order` (0..4). Negative entries are returned as they are, with a warning.
Reconstruction reconstruct(const Spectrum& mu, double rho, int order, SplitScheme scheme = SplitScheme::concentrate,
                           const MuTildePolicy& policy = MuTildePolicy::mean());

}  // namespace sphertrunc
