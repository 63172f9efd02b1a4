#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sphertrunc {

/// Positive variances (or truncated variances) of a diagonal covariance.
class Spectrum {
 public:
  Spectrum() = default;
  /// Throws DomainError unless every entry is finite and > 0, and, when
  /// `ascending` is set, unless the entries are non-decreasing.
  explicit Spectrum(std::vector<double> values, bool ascending = false);

  int v() const { return static_cast<int>(values_.size()); }
  std::size_t size() const { return values_.size(); }
  bool ascending() const { return ascending_; }
  bool is_sorted() const;
  double operator[](std::size_t k) const { return values_[k]; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }
  double mean() const;
  double min() const;
  double max() const;

 private:
  std::vector<double> values_;
  bool ascending_ = false;
};

}  // namespace sphertrunc
