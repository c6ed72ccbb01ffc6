#pragma once

#include <memory>
#include <vector>

#include "npf/filter.hpp"
#include "npf/model.hpp"
#include "npf/random.hpp"

namespace npf {

/// Bootstrap particle filter on the joint (x, z) space: propose from the
/// joint prior transition, weight by the observation likelihood, resample
/// every step. The estimate is the weighted mean taken before resampling.
class BootstrapPf final : public NestedFilter {
 public:
  BootstrapPf(std::shared_ptr<const StateSpaceModel> model, int n_particles,
              std::uint64_t seed,
              ResampleScheme scheme = ResampleScheme::systematic);

  void step(const VecRef& y) override;
  Vec estimate() const override { return estimate_; }
  Vec predicted_observation() const override { return predicted_y_; }
  bool diverged() const override { return diverged_; }
  int divergence_step() const override { return divergence_step_; }
  std::uint64_t likelihood_evals() const override { return likelihood_evals_; }
  int current_step() const override { return t_; }

  int n_particles() const { return n_; }
  const std::vector<Vec>& particles_x() const { return xs_; }
  const std::vector<Vec>& particles_z() const { return zs_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::shared_ptr<const StateSpaceModel> model_;
  int n_;
  ResampleScheme scheme_;
  RngStream control_stream_;
  std::vector<RngStream> slot_streams_;

  std::vector<Vec> xs_, zs_;
  std::vector<double> weights_;  // normalized after each step
  std::vector<std::uint32_t> ancestors_;

  Vec estimate_;
  Vec predicted_y_;
  int t_ = -1;
  bool diverged_ = false;
  int divergence_step_ = -1;
  std::uint64_t likelihood_evals_ = 0;
};

}  // namespace npf
