#include "sphertrunc/jets.hpp"

#include <algorithm>
#include <set>

#include <Eigen/Dense>

#include "sphertrunc/rng.hpp"

namespace sphertrunc {

RatioPoly::RatioPoly(double c) {
  if (c != 0.0) terms_[ChiSquareRatioKey{}] = c;
}

RatioPoly RatioPoly::monomial(const ChiSquareRatioKey& key, double c) {
  RatioPoly p;
  p.add(key, c);
  return p;
}

RatioPoly RatioPoly::ratio(int step) {
  if (step < 0) throw DomainError("RatioPoly::ratio: negative step");
  if (step == 0) return RatioPoly(1.0);
  return monomial(ChiSquareRatioKey::from_offsets({2 * step}));
}

double RatioPoly::coefficient(const ChiSquareRatioKey& key) const {
  const auto it = terms_.find(key);
  return it == terms_.end() ? 0.0 : it->second;
}

bool RatioPoly::is_constant() const {
  return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.offsets.empty());
}

double RatioPoly::constant() const { return coefficient(ChiSquareRatioKey{}); }

double RatioPoly::evaluate(const std::vector<double>& ratios) const {
  double sum = 0.0;
  for (const auto& [key, c] : terms_) {
    double m = c;
    for (int o : key.offsets) m *= ratios.at(static_cast<std::size_t>(o / 2));
    sum += m;
  }
  return sum;
}

void RatioPoly::add(const ChiSquareRatioKey& key, double c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(key, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

RatioPoly& RatioPoly::operator+=(const RatioPoly& o) {
  for (const auto& [key, c] : o.terms_) add(key, c);
  return *this;
}

RatioPoly& RatioPoly::operator-=(const RatioPoly& o) {
  for (const auto& [key, c] : o.terms_) add(key, -c);
  return *this;
}

RatioPoly& RatioPoly::operator*=(double c) {
  if (c == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [key, value] : terms_) value *= c;
  return *this;
}

RatioPoly operator*(const RatioPoly& a, const RatioPoly& b) {
  RatioPoly out;
  for (const auto& [ka, ca] : a.terms_) {
    for (const auto& [kb, cb] : b.terms_) {
      std::vector<int> offsets = ka.offsets;
      offsets.insert(offsets.end(), kb.offsets.begin(), kb.offsets.end());
      out.add(offsets.empty() ? ChiSquareRatioKey{} : ChiSquareRatioKey::from_offsets(offsets), ca * cb);
    }
  }
  return out;
}

std::vector<Jet<double>> lambda_path(const ExpansionState& state, int order, int upto) {
  std::vector<Jet<double>> path;
  for (int k = 0; k < state.v; ++k) {
    Jet<double> j(order, state.lambda_tilde);
    for (int i = 1; i <= std::min({order, upto, state.solved_order()}); ++i) {
      j[i] = state.coeffs[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    path.push_back(std::move(j));
  }
  return path;
}

namespace {

template <class T>
std::vector<T> product_coefficients(const std::vector<Jet<double>>& path, int n, const std::function<T(int)>& ratio) {
  const int v = static_cast<int>(path.size());
  const Jet<T> a = jet_alpha<T>(path, IndexMultiset(), ratio);
  std::vector<T> out;
  for (int k = 0; k < v; ++k) {
    const Jet<T> r = jet_alpha<T>(path, IndexMultiset(v, {k}), ratio) / a;
    T c(0.0);
    for (int i = 0; i <= n; ++i) c += r[n - i] * path[static_cast<std::size_t>(k)][i];
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

std::vector<double> jet_product_coefficient(const ExpansionState& state, int n, int upto) {
  if (n < 0 || n > 4) throw UnsupportedError("jet_product_coefficient: orders 0 to 4 only");
  const std::function<double(int)> ratio = [&](int s) { return state.ratios.at(static_cast<std::size_t>(s)); };
  return product_coefficients<double>(lambda_path(state, n, upto), n, ratio);
}

std::vector<double> residual(int n, const ExpansionState& state) {
  if (static_cast<int>(state.mu_coeffs.size()) <= n) throw ContractError("residual: mu coefficient missing");
  std::vector<double> e = jet_product_coefficient(state, n, n);
  for (std::size_t k = 0; k < e.size(); ++k) e[k] -= state.mu_coeffs[static_cast<std::size_t>(n)][k];
  return e;
}

std::vector<double> jet_g_vector(int n, const ExpansionState& state) {
  if (n < 1) throw DomainError("jet_g_vector: order must be >= 1");
  if (static_cast<int>(state.mu_coeffs.size()) <= n) throw ContractError("jet_g_vector: mu coefficient missing");
  if (state.solved_order() < n - 1) throw ContractError("jet_g_vector: lower-order coefficients missing");
  const std::vector<double> rest = jet_product_coefficient(state, n, n - 1);
  std::vector<double> g = state.mu_coeffs[static_cast<std::size_t>(n)];
  for (std::size_t k = 0; k < g.size(); ++k) g[k] -= rest[k];
  return g;
}

std::vector<Structure> structure_basis(int n, bool zeta1_zero) {
  if (n < 2) throw DomainError("structure_basis: order must be >= 2");
  std::set<Structure> found;
  std::vector<int> parts;
  std::function<void(int, int)> partitions = [&](int largest, int remaining) {
    if (remaining == 0) {
      // Label each part: 0 = local factor, g >= 1 = zeta group g.
      const int p = static_cast<int>(parts.size());
      std::vector<int> label(static_cast<std::size_t>(p), 0);
      for (;;) {
        Structure s;
        std::vector<std::vector<int>> groups(static_cast<std::size_t>(p) + 1);
        for (int i = 0; i < p; ++i) groups[static_cast<std::size_t>(label[static_cast<std::size_t>(i)])].push_back(parts[static_cast<std::size_t>(i)]);
        s.local = groups[0];
        for (int g = 1; g <= p; ++g) {
          if (!groups[static_cast<std::size_t>(g)].empty()) s.zetas.push_back(groups[static_cast<std::size_t>(g)]);
        }
        s.canonicalize();
        s.lt_power = n - s.factor_count();
        if (!(zeta1_zero && s.contains_zeta1())) found.insert(s);
        int pos = p - 1;
        while (pos >= 0 && label[static_cast<std::size_t>(pos)] == p) label[static_cast<std::size_t>(pos--)] = 0;
        if (pos < 0) break;
        ++label[static_cast<std::size_t>(pos)];
      }
      return;
    }
    for (int part = std::min(largest, remaining); part >= 1; --part) {
      parts.push_back(part);
      partitions(part, remaining - part);
      parts.pop_back();
    }
  };
  partitions(n - 1, n);
  std::vector<Structure> out(found.begin(), found.end());
  std::stable_sort(out.begin(), out.end(), [](const Structure& a, const Structure& b) { return a.lt_power < b.lt_power; });
  return out;
}

std::optional<Rational> rationalize(double x, std::int64_t max_den, double tol) {
  if (!std::isfinite(x)) return std::nullopt;
  if (std::fabs(x) < tol) return Rational(0);
  // Convergents h/k of the continued fraction of x.
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double r = x;
  std::optional<Rational> best;
  for (int it = 0; it < 64; ++it) {
    const double a_d = std::floor(r);
    if (std::fabs(a_d) > 1e15) break;
    const auto a = static_cast<std::int64_t>(a_d);
    const std::int64_t h2 = a * h1 + h0;
    const std::int64_t k2 = a * k1 + k0;
    if (k2 > max_den) break;
    if (std::fabs(x - static_cast<double>(h2) / static_cast<double>(k2)) < tol) {
      best = Rational(h2, k2);
      break;
    }
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    const double frac = r - a_d;
    if (frac < 1e-15) break;
    r = 1.0 / frac;
  }
  return best;
}

namespace {

bool key_order(const ChiSquareRatioKey& a, const ChiSquareRatioKey& b) {
  if (a.aggregate_degree() != b.aggregate_degree()) return a.aggregate_degree() > b.aggregate_degree();
  return a.offsets > b.offsets;
}

struct RawExtraction {
  std::vector<ChiSquareRatioKey> keys;
  Eigen::MatrixXd solution;  // basis x keys
  double fit_residual = 0.0;
  double constant_term = 0.0;
  int attempts = 0;
};

constexpr int kDirections = 6;

RawExtraction solve_extraction(int n, const std::vector<Structure>& basis, std::uint64_t seed, int draws) {
  if (n < 2 || n > 4) throw UnsupportedError("extraction: orders 2 to 4 only");
  bool project = true;
  for (const Structure& s : basis) {
    if (s.perturbative_order() != n) throw DomainError("extraction: basis structure " + s.to_string() + " has the wrong order");
    project = project && !s.contains_zeta1();
  }
  const int unknowns = static_cast<int>(basis.size());
  // Pure zeta structures are constant in k, so each draw adds one direction
  // to their span; one draw per unknown keeps the system full rank.
  if (draws <= 0) draws = unknowns + 2;
  const std::function<RatioPoly(int)> ratio = [](int s) { return RatioPoly::ratio(s); };

  for (int attempt = 1; attempt <= 10; ++attempt) {
    NormalGenerator rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    const int rows = draws * kDirections;
    Eigen::MatrixXd a(rows, unknowns);
    std::vector<RatioPoly> rhs;
    for (int d = 0; d < draws; ++d) {
      ExpansionState state(kDirections, 1.0, rng.uniform());
      for (int i = 1; i < n; ++i) {
        std::vector<double> c(kDirections);
        for (double& x : c) x = rng.uniform();
        if (i == 1 && project) {
          c.back() = 0.0;
          for (int k = 0; k + 1 < kDirections; ++k) c.back() -= c[static_cast<std::size_t>(k)];
        }
        state.coeffs.push_back(std::move(c));
      }
      const std::vector<RatioPoly> rest = product_coefficients<RatioPoly>(lambda_path(state, n, n - 1), n, ratio);
      const double scale = -std::pow(state.lambda_tilde, n - 1);
      for (int k = 0; k < kDirections; ++k) {
        for (int b = 0; b < unknowns; ++b) {
          a(d * kDirections + k, b) = evaluate(basis[static_cast<std::size_t>(b)], state.coeffs, k, state.lambda_tilde);
        }
        rhs.push_back(rest[static_cast<std::size_t>(k)] * scale);
      }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-12);
    if (qr.rank() < unknowns) continue;

    RawExtraction out;
    out.attempts = attempt;
    std::set<ChiSquareRatioKey> keyset;
    for (const RatioPoly& p : rhs) {
      for (const auto& [key, c] : p.terms()) {
        if (key.offsets.empty()) {
          out.constant_term = std::max(out.constant_term, std::fabs(c));
        } else {
          keyset.insert(key);
        }
      }
    }
    out.keys.assign(keyset.begin(), keyset.end());
    std::sort(out.keys.begin(), out.keys.end(), key_order);
    Eigen::MatrixXd y(rows, static_cast<Eigen::Index>(out.keys.size()));
    for (int r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < out.keys.size(); ++c) y(r, static_cast<Eigen::Index>(c)) = rhs[static_cast<std::size_t>(r)].coefficient(out.keys[c]);
    }
    out.solution = qr.solve(y);
    out.fit_residual = (a * out.solution - y).cwiseAbs().maxCoeff();
    return out;
  }
  throw NumericError("extraction: structure matrix singular in 10 draws");
}

}  // namespace

GammaTable ExtractionResult::table() const {
  GammaTable t;
  t.order = order;
  t.zeta1_zero = zeta1_zero;
  t.columns = columns;
  t.rows = rows;
  t.entries = entries;
  return t;
}

ExtractionResult extract_table(int n, bool zeta1_zero, std::uint64_t seed, int draws, std::int64_t max_den) {
  ExtractionResult out;
  out.order = n;
  out.zeta1_zero = zeta1_zero;
  out.rows = structure_basis(n, zeta1_zero);
  const RawExtraction raw = solve_extraction(n, out.rows, seed, draws);
  out.attempts = raw.attempts;
  out.max_fit_residual = raw.fit_residual;
  out.constant_term = raw.constant_term;
  out.ok = true;
  std::vector<std::vector<Rational>> cols;
  std::vector<std::vector<double>> raw_cols;
  for (std::size_t c = 0; c < raw.keys.size(); ++c) {
    std::vector<Rational> col;
    std::vector<double> raw_col;
    bool nonzero = false;
    for (std::size_t r = 0; r < out.rows.size(); ++r) {
      const double x = raw.solution(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      raw_col.push_back(x);
      const std::optional<Rational> q = rationalize(x, max_den);
      if (!q) {
        out.ok = false;
        col.push_back(Rational(0));
        nonzero = true;
        continue;
      }
      out.max_rationalization_error =
          std::max(out.max_rationalization_error, std::fabs(x - boost::rational_cast<double>(*q)));
      nonzero = nonzero || *q != Rational(0);
      col.push_back(*q);
    }
    if (!nonzero) continue;
    out.columns.push_back(raw.keys[c]);
    out.max_key_degree = std::max(out.max_key_degree, raw.keys[c].aggregate_degree());
    cols.push_back(std::move(col));
    raw_cols.push_back(std::move(raw_col));
  }
  out.entries.assign(out.rows.size(), {});
  out.raw.assign(out.rows.size(), {});
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out.entries[r].push_back(cols[c][r]);
      out.raw[r].push_back(raw_cols[c][r]);
    }
  }
  return out;
}

GammaColumn extract_gamma(int n, const ChiSquareRatioKey& key, const std::vector<Structure>& basis, int trials,
                          std::uint64_t seed) {
  const RawExtraction raw = solve_extraction(n, basis, seed, trials);
  GammaColumn out;
  out.ok = true;
  const auto it = std::find(raw.keys.begin(), raw.keys.end(), key);
  for (std::size_t r = 0; r < basis.size(); ++r) {
    const double x = it == raw.keys.end()
                         ? 0.0
                         : raw.solution(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(it - raw.keys.begin()));
    out.raw.push_back(x);
    const std::optional<Rational> q = rationalize(x);
    out.ok = out.ok && q.has_value();
    out.values.push_back(q.value_or(Rational(0)));
  }
  return out;
}

TableDiff diff_tables(const GammaTable& expected, const GammaTable& actual) {
  TableDiff d{true, {}};
  std::vector<Structure> rows = expected.rows;
  for (const Structure& s : actual.rows) {
    if (expected.row_index(s) < 0) rows.push_back(s);
  }
  std::vector<ChiSquareRatioKey> cols = expected.columns;
  for (const auto& c : actual.columns) {
    if (expected.column_index(c) < 0) cols.push_back(c);
  }
  for (const Structure& s : rows) {
    for (const auto& c : cols) {
      const Rational e = expected.at(s, c);
      const Rational a = actual.at(s, c);
      if (e != a) {
        d.identical = false;
        d.lines.push_back(s.to_string() + " " + c.to_string() + ": expected " + to_string(e) + ", got " + to_string(a));
      }
    }
  }
  return d;
}

}  // namespace sphertrunc
