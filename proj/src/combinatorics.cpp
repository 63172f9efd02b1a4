#include "sphertrunc/combinatorics.hpp"

#include <algorithm>

#include "sphertrunc/errors.hpp"
#include "sphertrunc/specfun.hpp"

namespace sphertrunc {

using detail::checked_add;
using detail::checked_mul;

IndexMultiset::IndexMultiset(int v, std::vector<int> indices) : v_(v), indices_(std::move(indices)) {
  if (v < 1) throw DomainError("IndexMultiset: dimension must be >= 1");
  for (int i : indices_) {
    if (i < 0 || i >= v) throw DomainError("IndexMultiset: index out of range");
  }
}

IndexMultiset IndexMultiset::repeated(int v, int index, int count) {
  if (count < 0) throw DomainError("IndexMultiset: negative repeat count");
  return IndexMultiset(v, std::vector<int>(static_cast<std::size_t>(count), index));
}

std::vector<int> IndexMultiset::multiplicities() const {
  std::vector<int> m(static_cast<std::size_t>(v_), 0);
  for (int i : indices_) ++m[static_cast<std::size_t>(i)];
  return m;
}

IndexMultiset IndexMultiset::merged(const IndexMultiset& other) const {
  if (empty() && v_ == 0) return other;
  if (other.empty() && other.v_ == 0) return *this;
  if (other.v_ != v_) throw DomainError("IndexMultiset: dimension mismatch");
  std::vector<int> all = indices_;
  all.insert(all.end(), other.indices_.begin(), other.indices_.end());
  return IndexMultiset(v_, std::move(all));
}

std::int64_t delta_from_multiplicities(std::span<const int> multiplicities) {
  std::int64_t out = 1;
  for (int m : multiplicities) {
    if (m < 0) throw DomainError("delta: negative multiplicity");
    out = checked_mul(out, double_factorial(2 * m - 1));
  }
  return out;
}

std::int64_t delta_from_indices(const IndexMultiset& indices) {
  std::vector<int> sorted(indices.indices().begin(), indices.indices().end());
  std::sort(sorted.begin(), sorted.end());
  std::int64_t out = 1;
  std::size_t run_start = 0;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i == sorted.size() || sorted[i] != sorted[run_start]) {
      const int run = static_cast<int>(i - run_start);
      out = checked_mul(out, double_factorial(2 * run - 1));
      run_start = i;
    }
  }
  return out;
}

namespace {

std::int64_t nested_sum(int depth, int upper, int n) {
  if (depth == 0) return 1;
  std::int64_t total = 0;
  for (int l = 0; l <= upper; ++l) {
    total = checked_add(total, checked_mul(2 * (n + l) + 1, nested_sum(depth - 1, l, n)));
  }
  return total;
}

void check_c_args(int j, int r, int n) {
  if (j < 0 || r < 0 || r > j || n < 0) throw DomainError("c_coeff: require 0 <= r <= j and n >= 0");
}

}  // namespace

std::int64_t c_coeff_nested(int j, int r, int n) {
  check_c_args(j, r, n);
  return nested_sum(j - r, r, n);
}

std::int64_t c_coeff_closed(int j, int r, int n) {
  check_c_args(j, r, n);
  const std::int64_t denom = double_factorial(2 * (n + r) - 1);
  std::int64_t total = 0;
  std::int64_t sign_pow = 1;  // (-2)^{j-t}, built from t = j downwards
  for (int t = j; t >= r; --t) {
    const std::int64_t ratio = double_factorial(2 * (n + t) - 1) / denom;
    const std::int64_t term =
        checked_mul(checked_mul(sign_pow, ratio), checked_mul(stirling_second(j, t), binomial(t, r)));
    total = checked_add(total, term);
    sign_pow = checked_mul(sign_pow, -2);
  }
  return total;
}

}  // namespace sphertrunc
