#include "npf/dpf.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace npf {

namespace {
constexpr std::uint64_t kControlStreamId = 1;
constexpr std::uint64_t kFirstSlotStreamId = 2;

double logsumexp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) {
    if (std::isfinite(x) && x > m) m = x;
  }
  if (!std::isfinite(m)) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (double x : v) {
    if (std::isfinite(x)) s += std::exp(x - m);
  }
  return m + std::log(s);
}
}  // namespace

double transition_marginal_mc(const StateSpaceModel& model, double t,
                              const VecRef& x_candidate, const VecRef& x_prev,
                              std::span<const Vec> z_row,
                              std::span<const double> q_bar_row) {
  double density = 0.0;
  for (std::size_t j = 0; j < z_row.size(); ++j) {
    density += q_bar_row[j] *
               model.x_transition_density(t, x_candidate, x_prev, z_row[j]);
  }
  return density;
}

double transition_marginal_gaussian(const StateSpaceModel& model, double t,
                                    const VecRef& x_candidate,
                                    const VecRef& x_prev,
                                    std::span<const Vec> z_row,
                                    std::span<const double> q_bar_row) {
  const auto* nested = dynamic_cast<const GaussianNestedModel*>(&model);
  if (!nested) {
    throw NotAdditiveGaussianError(
        "moment matching needs an additive-Gaussian x-transition");
  }
  const int nx = nested->dim_x();
  std::vector<Vec> means(z_row.size());
  Vec mu = Vec::Zero(nx);
  for (std::size_t j = 0; j < z_row.size(); ++j) {
    means[j] = nested->x_transition_mean(t, x_prev, z_row[j]);
    mu += q_bar_row[j] * means[j];
  }
  Mat sigma = nested->x_noise_cov(t);
  for (std::size_t j = 0; j < z_row.size(); ++j) {
    const Vec d = means[j] - mu;
    sigma += q_bar_row[j] * (d * d.transpose());
  }
  return std::exp(CholPsd(sigma).log_density(x_candidate, mu));
}

double likelihood_marginal(const StateSpaceModel& model, double t,
                           const VecRef& y, const VecRef& x_candidate,
                           std::span<const Vec> z_tilde_row,
                           std::span<const double> r_tilde_row) {
  double r_sum = 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < z_tilde_row.size(); ++j) {
    r_sum += r_tilde_row[j];
    acc += r_tilde_row[j] *
           model.observation_density(t, y, x_candidate, z_tilde_row[j]);
  }
  if (r_sum <= 0.0) {
    throw ZeroRWeightsError("likelihood marginal with all-zero r weights");
  }
  return acc / r_sum;
}

Dpf::Dpf(std::shared_ptr<const StateSpaceModel> model, int n_x, int n_z,
         std::uint64_t seed, DpfOptions options)
    : model_(std::move(model)),
      n_x_(n_x),
      n_z_(n_z),
      options_(options),
      control_stream_(seed, kControlStreamId) {
  if (options_.marginal_mode == MarginalMode::gaussian) {
    gaussian_model_ = dynamic_cast<const GaussianNestedModel*>(model_.get());
    if (!gaussian_model_) {
      throw NotAdditiveGaussianError(
          "gaussian marginal mode needs an additive-Gaussian x-transition");
    }
  }
  slot_streams_.reserve(n_x_);
  for (int i = 0; i < n_x_; ++i) {
    slot_streams_.emplace_back(seed, kFirstSlotStreamId + i);
  }

  x_tilde_.resize(n_x_);
  z_tilde_.resize(static_cast<std::size_t>(n_x_) * n_z_);
  r_tilde_.assign(z_tilde_.size(), 1.0);
  for (int i = 0; i < n_x_; ++i) {
    x_tilde_[i] = model_->sample_x0(slot_streams_[i]);
    for (int j = 0; j < n_z_; ++j) {
      z_tilde_[i * n_z_ + j] =
          model_->sample_z0_given_x0(x_tilde_[i], slot_streams_[i]);
    }
  }

  log_lik_.resize(z_tilde_.size());
  q_bar_.resize(z_tilde_.size());
  row_buffer_.resize(n_z_);
  outer_weights_.assign(n_x_, 1.0 / n_x_);
  outer_ancestors_.resize(n_x_);
  inner_ancestors_.resize(n_z_);
  x_resampled_.resize(n_x_);
  z_resampled_.resize(z_tilde_.size());
  z_row_scratch_.resize(n_z_);
  if (options_.store_paths) paths_.resize(n_x_);

  estimate_ = Vec::Zero(model_->dim_x() + model_->dim_z());
  predicted_y_ = Vec::Zero(model_->dim_y());
}

void Dpf::step(const VecRef& y) {
  if (diverged_) return;
  const int t = t_ + 1;
  const std::size_t cloud = z_tilde_.size();

  // One-step-ahead predicted observation from the prior-propagated particles
  // (uniform outer, r~-weighted inner), before any use of y.
  predicted_y_.setZero();
  for (int i = 0; i < n_x_; ++i) {
    double r_sum = 0.0;
    Vec yi = Vec::Zero(model_->dim_y());
    for (int j = 0; j < n_z_; ++j) {
      const double r = r_tilde_[i * n_z_ + j];
      r_sum += r;
      yi += r * model_->predict_observation_mean(t, x_tilde_[i],
                                                 z_tilde_[i * n_z_ + j]);
    }
    predicted_y_ += yi / r_sum;
  }
  predicted_y_ /= static_cast<double>(n_x_);

  // Likelihood table p(y_t | x~_t^i, z~_t^{ij}), shared by steps 1 and 3.
  for (int i = 0; i < n_x_; ++i) {
    for (int j = 0; j < n_z_; ++j) {
      log_lik_[i * n_z_ + j] = model_->observation_log_density(
          t, y, x_tilde_[i], z_tilde_[i * n_z_ + j]);
    }
  }
  likelihood_evals_ += cloud;

  // Step 1: outer weights. With prior proposals the transition marginal
  // cancels against the proposal density, leaving the self-normalized
  // likelihood marginal.
  for (int i = 0; i < n_x_; ++i) {
    double r_sum = 0.0;
    for (int j = 0; j < n_z_; ++j) {
      row_buffer_[j] =
          std::log(r_tilde_[i * n_z_ + j]) + log_lik_[i * n_z_ + j];
      r_sum += r_tilde_[i * n_z_ + j];
    }
    outer_weights_[i] = logsumexp(row_buffer_) - std::log(r_sum);
  }
  t_ = t;
  try {
    normalize_log_inplace(outer_weights_);
  } catch (const DegenerateWeightsError&) {
    diverged_ = true;
    divergence_step_ = t;
    return;
  }

  // Inner measurement update (step 3 weights, computed on the pre-resampling
  // clouds; resampling below copies whole rows).
  for (int i = 0; i < n_x_; ++i) {
    auto row = std::span<double>(q_bar_.data() + i * n_z_, n_z_);
    for (int j = 0; j < n_z_; ++j) {
      row[j] = std::log(r_tilde_[i * n_z_ + j]) + log_lik_[i * n_z_ + j];
    }
    try {
      normalize_log_inplace(row);
    } catch (const DegenerateWeightsError&) {
      ++degenerate_rows_;
      std::fill(row.begin(), row.end(), 1.0 / n_z_);
    }
  }

  // Nested posterior mean: E[x] over w, E[z] over w and the q_bar rows.
  estimate_.setZero();
  for (int i = 0; i < n_x_; ++i) {
    estimate_.head(model_->dim_x()) += outer_weights_[i] * x_tilde_[i];
    for (int j = 0; j < n_z_; ++j) {
      estimate_.tail(model_->dim_z()) += outer_weights_[i] *
                                         q_bar_[i * n_z_ + j] *
                                         z_tilde_[i * n_z_ + j];
    }
  }

  // Step 2: resample whole outer tuples (x, cloud, r, q_bar, likelihood row).
  resample_into(outer_weights_, outer_ancestors_, control_stream_,
                options_.scheme);
  {
    std::vector<double> old_log_lik = log_lik_;
    std::vector<double> old_q_bar = q_bar_;
    std::vector<double> old_r = r_tilde_;
    for (int i = 0; i < n_x_; ++i) {
      const std::uint32_t a = outer_ancestors_[i];
      x_resampled_[i] = x_tilde_[a];
      for (int j = 0; j < n_z_; ++j) {
        z_resampled_[i * n_z_ + j] = z_tilde_[a * n_z_ + j];
        log_lik_[i * n_z_ + j] = old_log_lik[a * n_z_ + j];
        q_bar_[i * n_z_ + j] = old_q_bar[a * n_z_ + j];
        r_tilde_[i * n_z_ + j] = old_r[a * n_z_ + j];
      }
    }
  }
  if (options_.store_paths) {
    std::vector<std::vector<Vec>> new_paths(n_x_);
    for (int i = 0; i < n_x_; ++i) {
      new_paths[i] = paths_[outer_ancestors_[i]];
      new_paths[i].push_back(x_resampled_[i]);
    }
    paths_ = std::move(new_paths);
  }

  // Steps 4-7 are independent per outer particle.
  for (int i = 0; i < n_x_; ++i) {
    RngStream& stream = slot_streams_[i];
    const auto q_bar_row = std::span<const double>(q_bar_.data() + i * n_z_, n_z_);
    const Vec& x_curr = x_resampled_[i];

    // Step 4: propose x~_{t+1} from the q_bar transition mixture, either
    // exactly (ancestor pick + transition draw) or via its moment-matched
    // Gaussian.
    if (options_.marginal_mode == MarginalMode::monte_carlo) {
      const std::size_t anc = stream.categorical(q_bar_row);
      x_tilde_[i] = model_->sample_x_next(t, x_curr,
                                          z_resampled_[i * n_z_ + anc], stream);
    } else {
      const int nx = model_->dim_x();
      Vec mu = Vec::Zero(nx);
      std::vector<Vec> means(n_z_);
      for (int j = 0; j < n_z_; ++j) {
        means[j] = gaussian_model_->x_transition_mean(
            t, x_curr, z_resampled_[i * n_z_ + j]);
        mu += q_bar_row[j] * means[j];
      }
      Mat sigma = gaussian_model_->x_noise_cov(t);
      for (int j = 0; j < n_z_; ++j) {
        const Vec d = means[j] - mu;
        sigma += q_bar_row[j] * (d * d.transpose());
      }
      x_tilde_[i] = CholPsd(sigma).sample(stream, mu);
    }

    // Step 5: q weights add the transition density of the proposed x.
    for (int j = 0; j < n_z_; ++j) {
      row_buffer_[j] = log_lik_[i * n_z_ + j] +
                       std::log(r_tilde_[i * n_z_ + j]) +
                       model_->x_transition_log_density(
                           t, x_tilde_[i], x_curr, z_resampled_[i * n_z_ + j]);
    }
    try {
      normalize_log_inplace(row_buffer_);
    } catch (const DegenerateWeightsError&) {
      ++degenerate_rows_;
      std::fill(row_buffer_.begin(), row_buffer_.end(), 1.0 / n_z_);
    }

    // Step 6: resample the inner cloud by q.
    resample_into(row_buffer_, inner_ancestors_, stream, options_.scheme);
    for (int j = 0; j < n_z_; ++j) {
      z_row_scratch_[j] = z_resampled_[i * n_z_ + inner_ancestors_[j]];
    }

    // Step 7: propose z~_{t+1} from the uniform-ancestor transition mixture.
    // The proposal equals its target, so r~ stays 1.
    for (int j = 0; j < n_z_; ++j) {
      const std::size_t anc = stream.uniform_index(n_z_);
      z_tilde_[i * n_z_ + j] = model_->sample_z_next(
          t, x_curr, x_tilde_[i], z_row_scratch_[anc], stream);
      r_tilde_[i * n_z_ + j] = 1.0;
    }
  }
}

}  // namespace npf
