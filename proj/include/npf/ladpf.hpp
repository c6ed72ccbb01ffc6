#pragma once

#include <memory>
#include <vector>

#include "npf/filter.hpp"
#include "npf/models.hpp"
#include "npf/random.hpp"

namespace npf {

struct LaDpfOptions {
  int n_x_prime = 5;  // look-ahead x samples per outer particle
  int n_z_prime = 5;  // look-ahead z samples per x sample
  ResampleScheme scheme = ResampleScheme::systematic;
  // Keep the surviving look-ahead tables through resampling and reuse them
  // for the proposal selection (one SIR pass). When false the tables are
  // regenerated after resampling.
  bool reuse_lookahead = true;
};

/// Look-ahead DPF: the outer importance weights marginalize out the time-t
/// states via a per-particle Monte Carlo table, so resampling happens before
/// proposing and can use the current observation. Proposing then draws from
/// the Monte Carlo approximation of the optimal proposal by selecting a
/// table entry with probability proportional to its likelihood.
class LaDpf final : public NestedFilter {
 public:
  LaDpf(std::shared_ptr<const StateSpaceModel> model, int n_x, int n_z,
        std::uint64_t seed, LaDpfOptions options = {});

  void step(const VecRef& y) override;
  Vec estimate() const override { return estimate_; }
  Vec predicted_observation() const override { return predicted_y_; }
  bool diverged() const override { return diverged_; }
  int divergence_step() const override { return divergence_step_; }
  std::uint64_t likelihood_evals() const override { return likelihood_evals_; }
  int current_step() const override { return t_; }

  // The three phases, exposed for direct testing. step() composes them and
  // handles divergence; when driving them manually call in this order.
  WeightVector lookahead_weights(const VecRef& y);
  void la_resample(const WeightVector& w_hat);
  void la_propose(const VecRef& y);

  int n_x() const { return n_x_; }
  int n_z() const { return n_z_; }
  const std::vector<Vec>& outer_particles() const { return x_curr_; }
  const std::vector<Vec>& inner_clouds() const { return z_cloud_; }
  /// Row-normalized inner measurement weights from the latest step.
  const std::vector<double>& q_bar() const { return q_bar_; }
  std::uint64_t degenerate_row_events() const { return degenerate_rows_; }

 private:
  void generate_lookahead(const VecRef& y);

  std::shared_ptr<const StateSpaceModel> model_;
  int n_x_, n_z_;
  LaDpfOptions options_;
  RngStream control_stream_;
  std::vector<RngStream> slot_streams_;

  // State between steps: x_{t-1}, its clouds and their q_bar rows.
  std::vector<Vec> x_curr_;
  std::vector<Vec> z_cloud_;
  std::vector<double> q_bar_;

  // Look-ahead buffers for the current step.
  std::vector<Vec> la_x_;         // n_x * n_x'
  std::vector<Vec> la_z_;         // n_x * n_x' * n_z'
  std::vector<double> la_loglik_; // n_x * n_x' * n_z'

  std::vector<double> row_buffer_;
  std::vector<double> select_buffer_;
  std::vector<double> what_;
  std::vector<std::uint32_t> outer_ancestors_;

  Vec estimate_;
  Vec predicted_y_;
  int t_ = -1;
  bool diverged_ = false;
  int divergence_step_ = -1;
  std::uint64_t likelihood_evals_ = 0;
  std::uint64_t degenerate_rows_ = 0;
};

}  // namespace npf
