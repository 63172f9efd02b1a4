#include "sphertrunc/gamma_tables.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "gamma_tables_data.hpp"
#include "sphertrunc/errors.hpp"

namespace sphertrunc {

Rational parse_rational(const std::string& text) {
  std::size_t used = 0;
  try {
    const std::size_t slash = text.find('/');
    const std::int64_t num = std::stoll(text.substr(0, slash), &used);
    if (used != (slash == std::string::npos ? text.size() : slash)) throw DomainError("");
    if (slash == std::string::npos) return Rational(num);
    const std::string den_text = text.substr(slash + 1);
    const std::int64_t den = std::stoll(den_text, &used);
    if (used != den_text.size() || den <= 0) throw DomainError("");
    return Rational(num, den);
  } catch (const std::exception&) {
    throw DomainError("parse_rational: malformed rational '" + text + "'");
  }
}

std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// "1^2 2" -> {1, 1, 2}
std::vector<int> parse_orders(const std::string& body, const std::string& whole) {
  std::vector<int> out;
  std::istringstream in(body);
  std::string tok;
  while (in >> tok) {
    const std::size_t caret = tok.find('^');
    int order = 0;
    int mult = 1;
    try {
      order = std::stoi(tok.substr(0, caret));
      if (caret != std::string::npos) mult = std::stoi(tok.substr(caret + 1));
    } catch (const std::exception&) {
      throw DomainError("Structure::parse: bad order list in '" + whole + "'");
    }
    if (order < 1 || mult < 1) throw DomainError("Structure::parse: orders must be positive in '" + whole + "'");
    out.insert(out.end(), static_cast<std::size_t>(mult), order);
  }
  if (out.empty()) throw DomainError("Structure::parse: empty order list in '" + whole + "'");
  std::sort(out.begin(), out.end());
  return out;
}

std::string format_orders(const std::vector<int>& orders) {
  std::string out;
  for (std::size_t i = 0; i < orders.size();) {
    std::size_t j = i;
    while (j < orders.size() && orders[j] == orders[i]) ++j;
    if (!out.empty()) out += ' ';
    out += std::to_string(orders[i]);
    if (j - i > 1) out += '^' + std::to_string(j - i);
    i = j;
  }
  return out;
}

}  // namespace

void Structure::canonicalize() {
  std::sort(local.begin(), local.end());
  for (auto& z : zetas) std::sort(z.begin(), z.end());
  std::sort(zetas.begin(), zetas.end());
}

Structure Structure::parse(const std::string& text) {
  Structure s;
  std::string rest = trim(text);
  if (rest.empty()) throw DomainError("Structure::parse: empty structure");
  std::size_t pos = 0;
  while (pos < rest.size()) {
    std::size_t end = rest.find('*', pos);
    if (end == std::string::npos) end = rest.size();
    const std::string factor = trim(rest.substr(pos, end - pos));
    pos = end + 1;
    if (factor.rfind("lt", 0) == 0 && factor.find('(') == std::string::npos) {
      int p = 1;
      if (factor.size() > 2) {
        if (factor[2] != '^') throw DomainError("Structure::parse: bad factor '" + factor + "'");
        try {
          p = std::stoi(factor.substr(3));
        } catch (const std::exception&) {
          throw DomainError("Structure::parse: bad power in '" + factor + "'");
        }
      }
      s.lt_power += p;
      continue;
    }
    if (factor.size() < 4 || factor[1] != '(' || factor.back() != ')') {
      throw DomainError("Structure::parse: bad factor '" + factor + "' in '" + text + "'");
    }
    const std::vector<int> orders = parse_orders(factor.substr(2, factor.size() - 3), text);
    if (factor[0] == 'l') {
      if (!s.local.empty()) throw DomainError("Structure::parse: more than one l(...) factor in '" + text + "'");
      s.local = orders;
    } else if (factor[0] == 'z') {
      s.zetas.push_back(orders);
    } else {
      throw DomainError("Structure::parse: unknown factor '" + factor + "'");
    }
  }
  s.canonicalize();
  return s;
}

std::string Structure::to_string() const {
  std::vector<std::string> parts;
  if (lt_power == 1) parts.push_back("lt");
  if (lt_power > 1) parts.push_back("lt^" + std::to_string(lt_power));
  if (!local.empty()) parts.push_back("l(" + format_orders(local) + ")");
  for (const auto& z : zetas) parts.push_back("z(" + format_orders(z) + ")");
  if (parts.empty()) return "1";
  std::string out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out += "*" + parts[i];
  return out;
}

int Structure::perturbative_order() const {
  int n = 0;
  for (int o : local) n += o;
  for (const auto& z : zetas)
    for (int o : z) n += o;
  return n;
}

int Structure::factor_count() const {
  std::size_t n = local.size();
  for (const auto& z : zetas) n += z.size();
  return static_cast<int>(n);
}

bool Structure::contains_zeta1() const {
  return std::any_of(zetas.begin(), zetas.end(), [](const auto& z) { return z.size() == 1 && z[0] == 1; });
}

double zeta_value(const std::vector<std::vector<double>>& coeffs, const std::vector<int>& orders) {
  for (int o : orders) {
    if (o < 1 || o >= static_cast<int>(coeffs.size()) || coeffs[static_cast<std::size_t>(o)].empty()) {
      throw ContractError("zeta_value: coefficient of order " + std::to_string(o) + " not available");
    }
  }
  const std::size_t v = coeffs[static_cast<std::size_t>(orders.front())].size();
  double sum = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    double p = 1.0;
    for (int o : orders) p *= coeffs[static_cast<std::size_t>(o)][i];
    sum += p;
  }
  return sum;
}

double evaluate(const Structure& s, const std::vector<std::vector<double>>& coeffs, int k, double lambda_tilde) {
  double value = std::pow(lambda_tilde, s.lt_power);
  for (int o : s.local) {
    if (o >= static_cast<int>(coeffs.size()) || coeffs[static_cast<std::size_t>(o)].empty()) {
      throw ContractError("evaluate: coefficient of order " + std::to_string(o) + " not available");
    }
    value *= coeffs[static_cast<std::size_t>(o)][static_cast<std::size_t>(k)];
  }
  for (const auto& z : s.zetas) value *= zeta_value(coeffs, z);
  return value;
}

int GammaTable::row_index(const Structure& s) const {
  const auto it = std::find(rows.begin(), rows.end(), s);
  return it == rows.end() ? -1 : static_cast<int>(it - rows.begin());
}

int GammaTable::column_index(const ChiSquareRatioKey& key) const {
  const auto it = std::find(columns.begin(), columns.end(), key);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

Rational GammaTable::at(const Structure& s, const ChiSquareRatioKey& key) const {
  const int r = row_index(s);
  const int c = column_index(key);
  if (r < 0 || c < 0) return Rational(0);
  return entries[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
}

Rational GammaTable::row_sum(std::size_t row) const {
  Rational sum(0);
  for (const Rational& q : entries.at(row)) sum += q;
  return sum;
}

bool GammaTable::rows_sum_to_zero() const {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (row_sum(r) != Rational(0)) return false;
  }
  return true;
}

std::vector<GammaTable> parse_gamma_tables(const std::string& text) {
  std::vector<GammaTable> tables;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool saw_format = false;
  GammaTable* current = nullptr;
  auto fail = [&](const std::string& what) {
    throw DomainError("gamma tables, line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "format") {
      int version = 0;
      ls >> version;
      if (version != 1) fail("unsupported format version");
      saw_format = true;
    } else if (head == "table") {
      if (current) fail("nested table");
      GammaTable t;
      std::string basis;
      ls >> t.order >> basis;
      if (basis != "general" && basis != "zeta1_zero") fail("unknown basis '" + basis + "'");
      t.zeta1_zero = basis == "zeta1_zero";
      tables.push_back(std::move(t));
      current = &tables.back();
    } else if (head == "columns") {
      if (!current) fail("columns outside a table");
      std::string key;
      while (ls >> key) current->columns.push_back(ChiSquareRatioKey::parse(key));
    } else if (head == "end") {
      if (!current) fail("end outside a table");
      current = nullptr;
    } else {
      if (!current || current->columns.empty()) fail("row before columns");
      // The structure is everything up to the first numeric token.
      std::vector<std::string> tokens{head};
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      const std::size_t ncol = current->columns.size();
      if (tokens.size() < ncol + 1) fail("too few entries");
      std::string structure;
      for (std::size_t i = 0; i + ncol < tokens.size(); ++i) structure += (i ? " " : "") + tokens[i];
      Structure s = Structure::parse(structure);
      if (s.perturbative_order() != current->order) fail("structure order differs from table order");
      std::vector<Rational> row;
      for (std::size_t i = tokens.size() - ncol; i < tokens.size(); ++i) row.push_back(parse_rational(tokens[i]));
      current->rows.push_back(std::move(s));
      current->entries.push_back(std::move(row));
    }
  }
  if (!saw_format) throw DomainError("gamma tables: missing format line");
  if (current) throw DomainError("gamma tables: unterminated table");
  return tables;
}

std::string format_gamma_table(const GammaTable& t) {
  std::ostringstream out;
  out << "table " << t.order << ' ' << (t.zeta1_zero ? "zeta1_zero" : "general") << "\ncolumns";
  for (const auto& c : t.columns) out << ' ' << c.to_string();
  out << '\n';
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out << t.rows[r].to_string();
    for (const Rational& q : t.entries[r]) out << ' ' << to_string(q);
    out << '\n';
  }
  out << "end\n";
  return out.str();
}

const std::vector<GammaTable>& embedded_gamma_tables() {
  static const std::vector<GammaTable> tables = parse_gamma_tables(detail::kGammaTablesText);
  return tables;
}

const GammaTable& gamma_table(int order) {
  for (const GammaTable& t : embedded_gamma_tables()) {
    if (t.order == order) return t;
  }
  throw UnsupportedError("gamma_table: no coefficient table for order " + std::to_string(order) +
                         " (tables exist for orders 2 to 4)");
}

}  // namespace sphertrunc
