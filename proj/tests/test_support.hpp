// Shared fixtures for the filter test suites.
#pragma once

#include <memory>

#include "npf/filter.hpp"
#include "npf/kalman.hpp"
#include "npf/models.hpp"

namespace test_support {

using namespace npf;

// model1 dynamics with a flat observation law: every particle is equally
// likely, isolating proposal/resampling mechanics from the measurement
// update.
class FlatObsModel final : public StateSpaceModel {
 public:
  FlatObsModel() : base_(model1()) {}
  int dim_x() const override { return 1; }
  int dim_z() const override { return 1; }
  int dim_y() const override { return 1; }
  Vec sample_x0(RngStream& s) const override { return base_->sample_x0(s); }
  Vec sample_z0_given_x0(const VecRef& x0, RngStream& s) const override {
    return base_->sample_z0_given_x0(x0, s);
  }
  Vec sample_x_next(double t, const VecRef& x, const VecRef& z,
                    RngStream& s) const override {
    return base_->sample_x_next(t, x, z, s);
  }
  double x_transition_log_density(double t, const VecRef& xn, const VecRef& x,
                                  const VecRef& z) const override {
    return base_->x_transition_log_density(t, xn, x, z);
  }
  Vec sample_z_next(double t, const VecRef& x, const VecRef& xn,
                    const VecRef& z, RngStream& s) const override {
    return base_->sample_z_next(t, x, xn, z, s);
  }
  double z_transition_log_density(double t, const VecRef& zn, const VecRef& x,
                                  const VecRef& xn,
                                  const VecRef& z) const override {
    return base_->z_transition_log_density(t, zn, x, xn, z);
  }
  double observation_log_density(double, const VecRef&, const VecRef&,
                                 const VecRef&) const override {
    return 0.0;
  }
  Vec sample_observation(double, const VecRef&, const VecRef&,
                         RngStream&) const override {
    return Vec::Zero(1);
  }
  Vec predict_observation_mean(double, const VecRef&,
                               const VecRef&) const override {
    return Vec::Zero(1);
  }

 private:
  std::shared_ptr<const StateSpaceModel> base_;
};

// Stable 2-D linear-Gaussian benchmark: z is observed only through the mixed
// scalar measurement.
inline std::shared_ptr<const LinearGaussianModel> lg_model() {
  Mat a(2, 2);
  a << 0.85, 0.1, 0.1, 0.8;
  Mat c(1, 2);
  c << 1.0, 0.5;
  Mat r(1, 1);
  r << 0.5;
  return linear_gaussian_model(1, 1, a, Mat::Identity(2, 2), c,
                               0.25 * Mat::Identity(2, 2), r, Vec::Zero(2),
                               Mat::Identity(2, 2));
}

// Mean absolute deviation of a filter's posterior means from the Kalman
// means over one simulated run.
template <typename MakeFilter>
double kalman_gap(const std::shared_ptr<const LinearGaussianModel>& model,
                  std::uint64_t seed, int T, MakeFilter make_filter) {
  RngStream traj_stream(seed, 0);
  const Trajectory traj = simulate_trajectory(*model, T, traj_stream);
  const KalmanResult kalman = kalman_filter(*model, traj.ys);
  auto filter = make_filter(model, seed);
  double gap = 0.0;
  for (int t = 0; t < T; ++t) {
    filter->step(traj.ys[t]);
    gap += (filter->estimate() - kalman.means[t]).cwiseAbs().mean();
  }
  return gap / T;
}

}  // namespace test_support
