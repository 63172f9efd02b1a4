#include "sphertrunc/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sphertrunc/errors.hpp"

namespace sphertrunc {

Spectrum::Spectrum(std::vector<double> values, bool ascending) : values_(std::move(values)), ascending_(ascending) {
  if (values_.empty()) throw DomainError("Spectrum: empty");
  for (double x : values_) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("Spectrum: entries must be positive and finite");
  }
  if (ascending_ && !is_sorted()) throw DomainError("Spectrum: entries must be ascending");
}

bool Spectrum::is_sorted() const { return std::is_sorted(values_.begin(), values_.end()); }

double Spectrum::mean() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

double Spectrum::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Spectrum::max() const { return *std::max_element(values_.begin(), values_.end()); }

}  // namespace sphertrunc
