#pragma once

#include <memory>
#include <span>
#include <vector>

#include "npf/filter.hpp"
#include "npf/models.hpp"
#include "npf/random.hpp"

namespace npf {

/// How the mixture transition marginal behind the outer proposal is treated:
/// exact Monte Carlo mixture sampling, or a moment-matched Gaussian in its
/// place.
enum class MarginalMode { monte_carlo, gaussian };

/// Mixture transition marginal: sum_j q_bar[j] * p(x_candidate | x_prev, z[j]).
/// q_bar_row must be normalized.
double transition_marginal_mc(const StateSpaceModel& model, double t,
                              const VecRef& x_candidate, const VecRef& x_prev,
                              std::span<const Vec> z_row,
                              std::span<const double> q_bar_row);

/// Moment-matched Gaussian evaluation of the same mixture: N(x; mu, Sigma)
/// with mu the q_bar-weighted mean of the component means and Sigma the
/// transition noise covariance plus the weighted spread of the means.
/// Throws NotAdditiveGaussianError when the model cannot expose a noise-free
/// transition mean.
double transition_marginal_gaussian(const StateSpaceModel& model, double t,
                                    const VecRef& x_candidate,
                                    const VecRef& x_prev,
                                    std::span<const Vec> z_row,
                                    std::span<const double> q_bar_row);

/// Self-normalized likelihood marginal:
/// sum_j r[j] p(y | x, z[j]) / sum_j r[j]. Throws ZeroRWeightsError when the
/// r row sums to zero.
double likelihood_marginal(const StateSpaceModel& model, double t,
                           const VecRef& y, const VecRef& x_candidate,
                           std::span<const Vec> z_tilde_row,
                           std::span<const double> r_tilde_row);

struct DpfOptions {
  MarginalMode marginal_mode = MarginalMode::monte_carlo;
  ResampleScheme scheme = ResampleScheme::systematic;
  bool store_paths = false;  // keep full outer particle paths (debugging)
};

/// Decentralized particle filter: an outer particle filter over x whose
/// per-particle conditional z distributions are themselves particle clouds.
///
/// Each step runs the seven-stage cycle: outer weights from the
/// self-normalized likelihood marginal (the transition marginal cancels
/// against the prior proposal), outer resampling of whole clouds, inner
/// measurement update q_bar, outer proposal from the q_bar transition
/// mixture, inner reweighting q with the proposed x, inner resampling, and
/// inner proposal from the uniform-ancestor transition mixture which leaves
/// r_tilde identically 1.
class Dpf final : public NestedFilter {
 public:
  Dpf(std::shared_ptr<const StateSpaceModel> model, int n_x, int n_z,
      std::uint64_t seed, DpfOptions options = {});

  void step(const VecRef& y) override;
  Vec estimate() const override { return estimate_; }
  Vec predicted_observation() const override { return predicted_y_; }
  bool diverged() const override { return diverged_; }
  int divergence_step() const override { return divergence_step_; }
  std::uint64_t likelihood_evals() const override { return likelihood_evals_; }
  int current_step() const override { return t_; }

  int n_x() const { return n_x_; }
  int n_z() const { return n_z_; }

  /// Proposed outer particles x~_t (before the next step's resampling).
  const std::vector<Vec>& outer_particles() const { return x_tilde_; }
  /// Inner clouds z~_t, row i at [i * n_z, (i+1) * n_z).
  const std::vector<Vec>& inner_clouds() const { return z_tilde_; }
  /// Inner proposal weights r~; identically 1 under prior proposals.
  const std::vector<double>& r_tilde() const { return r_tilde_; }
  const std::vector<double>& outer_weights() const { return outer_weights_; }
  /// Inner measurement weights from the latest step (post-resampling rows,
  /// each normalized to 1).
  const std::vector<double>& q_bar_rows() const { return q_bar_; }
  /// Count of inner weight rows that degenerated and were reset to uniform.
  std::uint64_t degenerate_row_events() const { return degenerate_rows_; }
  /// Resampled outer paths; only populated with store_paths.
  const std::vector<std::vector<Vec>>& stored_paths() const { return paths_; }

 private:
  std::shared_ptr<const StateSpaceModel> model_;
  const GaussianNestedModel* gaussian_model_ = nullptr;  // for gaussian mode
  int n_x_, n_z_;
  DpfOptions options_;
  RngStream control_stream_;
  std::vector<RngStream> slot_streams_;

  // State between steps: proposed x~_t, clouds z~_t and weights r~_t.
  std::vector<Vec> x_tilde_;
  std::vector<Vec> z_tilde_;
  std::vector<double> r_tilde_;

  // Scratch (kept allocated across steps).
  std::vector<double> log_lik_;     // n_x * n_z likelihood table
  std::vector<double> q_bar_;       // row-normalized inner weights
  std::vector<double> row_buffer_;  // n_z scratch
  std::vector<double> outer_weights_;
  std::vector<std::uint32_t> outer_ancestors_;
  std::vector<std::uint32_t> inner_ancestors_;
  std::vector<Vec> x_resampled_;
  std::vector<Vec> z_resampled_;
  std::vector<Vec> z_row_scratch_;
  std::vector<std::vector<Vec>> paths_;

  Vec estimate_;
  Vec predicted_y_;
  int t_ = -1;
  bool diverged_ = false;
  int divergence_step_ = -1;
  std::uint64_t likelihood_evals_ = 0;
  std::uint64_t degenerate_rows_ = 0;
};

}  // namespace npf
