#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sphertrunc {

/// A list of (not necessarily distinct) direction indices in [0, v).
class IndexMultiset {
 public:
  IndexMultiset() = default;
  IndexMultiset(int v, std::vector<int> indices);

  /// `count` copies of `index`.
  static IndexMultiset repeated(int v, int index, int count);

  int v() const { return v_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  std::span<const int> indices() const { return indices_; }

  /// Multiplicity vector m with m[k] = number of occurrences of k.
  std::vector<int> multiplicities() const;

  /// Concatenation K ∪ I of two multisets over the same dimension.
  IndexMultiset merged(const IndexMultiset& other) const;

 private:
  int v_ = 0;
  std::vector<int> indices_;
};

/// Isserlis coefficient prod_k (2 m_k - 1)!!, with (-1)!! = 1.
std::int64_t delta_from_multiplicities(std::span<const int> multiplicities);

/// Isserlis coefficient of an index list: sort, count runs, multiply double
/// factorials. The empty list gives 1.
std::int64_t delta_from_indices(const IndexMultiset& indices);

/// c_{jr}(n) as the nested sum over the (j - r)-deep simplex
/// l_1 <= r, l_2 <= l_1, ... of prod_s [2(n + l_s) + 1].
std::int64_t c_coeff_nested(int j, int r, int n);

/// c_{jr}(n) through the Stirling-number resummation
/// sum_t (-2)^{j-t} [2(n+t)-1]!!/[2(n+r)-1]!! {j,t} binom(t, r).
std::int64_t c_coeff_closed(int j, int r, int n);

}  // namespace sphertrunc
