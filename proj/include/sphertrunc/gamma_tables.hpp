#pragma once

// Perturbative structures and the rational coefficient tables that combine
// them with chi-square ratios into the order-n driving vector.

#include <cstdint>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "sphertrunc/specfun.hpp"

namespace sphertrunc {

using Rational = boost::rational<std::int64_t>;

/// Parses "p", "-p/q". Throws DomainError on malformed text.
Rational parse_rational(const std::string& text);
std::string to_string(const Rational& r);

/// A monomial lt^p * l(i_1 ... i_a) * z(J_1) * ... * z(J_b):
///   lt^p          power of lambda_tilde,
///   l(i_1 ... )   prod_s lambda_k^{(i_s)} at the row index k,
///   z(j_1 ... )   sum_i prod_s lambda_i^{(j_s)}.
/// Orders are kept as sorted multisets; text form writes repeats as "1^2".
struct Structure {
  int lt_power = 0;
  std::vector<int> local;
  std::vector<std::vector<int>> zetas;

  static Structure parse(const std::string& text);
  std::string to_string() const;
  /// Sum of all listed orders (lt does not count).
  int perturbative_order() const;
  /// Number of lambda-coefficient factors, i.e. local.size() plus the size of each zeta group.
  int factor_count() const;
  bool contains_zeta1() const;
  /// Sorts every multiset and the zeta list.
  void canonicalize();

  auto operator<=>(const Structure&) const = default;
};

/// coeffs[i][k] = lambda_k^{(i)}; coeffs[0] is unused by structures.
double zeta_value(const std::vector<std::vector<double>>& coeffs, const std::vector<int>& orders);
double evaluate(const Structure& s, const std::vector<std::vector<double>>& coeffs, int k, double lambda_tilde);

struct GammaTable {
  int order = 0;
  /// Basis without the structures that contain zeta_1.
  bool zeta1_zero = false;
  std::vector<ChiSquareRatioKey> columns;
  std::vector<Structure> rows;
  /// entries[row][column].
  std::vector<std::vector<Rational>> entries;

  /// Index of a row or column, or -1.
  int row_index(const Structure& s) const;
  int column_index(const ChiSquareRatioKey& key) const;
  Rational at(const Structure& s, const ChiSquareRatioKey& key) const;
  Rational row_sum(std::size_t row) const;
  bool rows_sum_to_zero() const;
};

/// Reads the text format of data/gamma_tables.v1.txt.
std::vector<GammaTable> parse_gamma_tables(const std::string& text);
std::string format_gamma_table(const GammaTable& t);

/// Tables compiled into the library, orders 2, 3, 4.
const std::vector<GammaTable>& embedded_gamma_tables();
/// Throws UnsupportedError for orders without a table.
const GammaTable& gamma_table(int order);

}  // namespace sphertrunc
