#pragma once

#include <cmath>
#include <vector>

#include "semdrive/eval.hpp"

// Pass/fail predicates shared by unit tests and the acceptance binary.
namespace criteria {

// Average speed strictly increasing over the sweep and within `tol` of the
// desired speed for the first `tracked` entries.
inline bool speed_tracking(const std::vector<semdrive::EvalReport>& sweep, std::size_t tracked, double tol) {
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    if (!(sweep[i].avg_speed > sweep[i - 1].avg_speed)) return false;
  }
  for (std::size_t i = 0; i < tracked && i < sweep.size(); ++i) {
    if (!sweep[i].theta_v || std::abs(sweep[i].avg_speed - *sweep[i].theta_v) > tol) return false;
  }
  return true;
}

// Strictly decreasing share from the rightmost lane outward.
inline bool right_lane_preference(const std::vector<double>& shares) {
  if (shares.size() < 2) return false;
  for (std::size_t i = 1; i < shares.size(); ++i) {
    if (!(shares[i - 1] > shares[i])) return false;
  }
  return true;
}

}  // namespace criteria
