#include "npf/pf.hpp"

#include <utility>

namespace npf {

namespace {
// Stream ids within one filter's seed: 1 is the resampling stream, slots
// start at 2. Trajectory simulation uses id 0 of the replicate seed.
constexpr std::uint64_t kControlStreamId = 1;
constexpr std::uint64_t kFirstSlotStreamId = 2;
}  // namespace

BootstrapPf::BootstrapPf(std::shared_ptr<const StateSpaceModel> model,
                         int n_particles, std::uint64_t seed,
                         ResampleScheme scheme)
    : model_(std::move(model)),
      n_(n_particles),
      scheme_(scheme),
      control_stream_(seed, kControlStreamId) {
  slot_streams_.reserve(n_);
  for (int i = 0; i < n_; ++i) {
    slot_streams_.emplace_back(seed, kFirstSlotStreamId + i);
  }
  xs_.resize(n_);
  zs_.resize(n_);
  weights_.assign(n_, 1.0 / n_);
  ancestors_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    xs_[i] = model_->sample_x0(slot_streams_[i]);
    zs_[i] = model_->sample_z0_given_x0(xs_[i], slot_streams_[i]);
  }
  estimate_ = Vec::Zero(model_->dim_x() + model_->dim_z());
  predicted_y_ = Vec::Zero(model_->dim_y());
}

void BootstrapPf::step(const VecRef& y) {
  if (diverged_) return;
  const int t = t_ + 1;

  if (t > 0) {
    for (int i = 0; i < n_; ++i) {
      Vec x_next = model_->sample_x_next(t - 1, xs_[i], zs_[i], slot_streams_[i]);
      zs_[i] = model_->sample_z_next(t - 1, xs_[i], x_next, zs_[i],
                                     slot_streams_[i]);
      xs_[i] = std::move(x_next);
    }
  }

  predicted_y_.setZero();
  for (int i = 0; i < n_; ++i) {
    predicted_y_ += model_->predict_observation_mean(t, xs_[i], zs_[i]);
  }
  predicted_y_ /= static_cast<double>(n_);

  for (int i = 0; i < n_; ++i) {
    weights_[i] = model_->observation_log_density(t, y, xs_[i], zs_[i]);
  }
  likelihood_evals_ += static_cast<std::uint64_t>(n_);
  t_ = t;
  try {
    normalize_log_inplace(weights_);
  } catch (const DegenerateWeightsError&) {
    diverged_ = true;
    divergence_step_ = t;
    return;
  }

  estimate_.setZero();
  for (int i = 0; i < n_; ++i) {
    estimate_.head(model_->dim_x()) += weights_[i] * xs_[i];
    estimate_.tail(model_->dim_z()) += weights_[i] * zs_[i];
  }

  resample_into(weights_, ancestors_, control_stream_, scheme_);
  std::vector<Vec> new_xs(n_), new_zs(n_);
  for (int i = 0; i < n_; ++i) {
    new_xs[i] = xs_[ancestors_[i]];
    new_zs[i] = zs_[ancestors_[i]];
  }
  xs_ = std::move(new_xs);
  zs_ = std::move(new_zs);
  std::fill(weights_.begin(), weights_.end(), 1.0 / n_);
}

}  // namespace npf
