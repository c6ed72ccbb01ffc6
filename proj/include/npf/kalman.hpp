#pragma once

#include <span>
#include <vector>

#include "npf/models.hpp"

namespace npf {

struct KalmanResult {
  std::vector<Vec> means;  // posterior mean of the joint state at each t
  std::vector<Mat> covs;
};

/// Exact posterior for a LinearGaussianModel: prior update with y_0 at t = 0,
/// then predict/update per step. Reference for the particle filters.
KalmanResult kalman_filter(const LinearGaussianModel& model,
                           std::span<const Vec> ys);

}  // namespace npf
