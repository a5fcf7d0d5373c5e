#pragma once

#include <cmath>
#include <numbers>

namespace med {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace med
