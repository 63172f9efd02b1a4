#pragma once

#include <vector>

#include "sphertrunc/spectrum.hpp"

namespace fixtures {

inline sphertrunc::Spectrum lambda_ex() { return sphertrunc::Spectrum({0.1, 0.3, 0.8, 2.2}, true); }

inline double max_rel_error(const std::vector<double>& got, const std::vector<double>& want) {
  double e = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double d = std::abs(got[i] - want[i]) / std::abs(want[i]);
    e = d > e ? d : e;
  }
  return e;
}

}  // namespace fixtures
