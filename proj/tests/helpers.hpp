#pragma once

#include <cmath>

#include "oscattn/cases.hpp"

namespace osc::testing {

inline bool close(double a, double b, double abs_tol, double rel_tol = 0.0) {
  return std::abs(a - b) <= abs_tol + rel_tol * std::max(std::abs(a), std::abs(b));
}

using osc::random_params;

}  // namespace osc::testing
