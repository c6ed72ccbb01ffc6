#include "npf/ladpf.hpp"

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

LaDpf::LaDpf(std::shared_ptr<const StateSpaceModel> model, int n_x, int n_z,
             std::uint64_t seed, LaDpfOptions options)
    : model_(std::move(model)),
      n_x_(n_x),
      n_z_(n_z),
      options_(options),
      control_stream_(seed, kControlStreamId) {
  slot_streams_.reserve(n_x_);
  for (int i = 0; i < n_x_; ++i) {
    slot_streams_.emplace_back(seed, kFirstSlotStreamId + i);
  }
  x_curr_.resize(n_x_);
  z_cloud_.resize(static_cast<std::size_t>(n_x_) * n_z_);
  q_bar_.assign(z_cloud_.size(), 1.0 / n_z_);

  const std::size_t tables = static_cast<std::size_t>(n_x_) * options_.n_x_prime;
  la_x_.resize(tables);
  la_z_.resize(tables * options_.n_z_prime);
  la_loglik_.resize(tables * options_.n_z_prime);
  row_buffer_.resize(n_z_);
  select_buffer_.resize(static_cast<std::size_t>(options_.n_x_prime) *
                        options_.n_z_prime);
  what_.resize(n_x_);
  outer_ancestors_.resize(n_x_);
  estimate_ = Vec::Zero(model_->dim_x() + model_->dim_z());
  predicted_y_ = Vec::Zero(model_->dim_y());
}

// Draws the per-particle look-ahead tables (x then z | x) for time t_ + 1
// and fills their log-likelihood entries. At t = 0 the tables come from the
// prior; afterwards x is drawn from the q_bar transition mixture and z from
// the mixture reweighted by the x-transition density of the drawn x.
void LaDpf::generate_lookahead(const VecRef& y) {
  const int t = t_ + 1;
  const int nxp = options_.n_x_prime;
  const int nzp = options_.n_z_prime;

  for (int i = 0; i < n_x_; ++i) {
    RngStream& stream = slot_streams_[i];
    const auto q_row = std::span<const double>(q_bar_.data() + i * n_z_, n_z_);
    for (int m = 0; m < nxp; ++m) {
      Vec& xa = la_x_[i * nxp + m];
      if (t == 0) {
        xa = model_->sample_x0(stream);
        for (int k = 0; k < nzp; ++k) {
          la_z_[(i * nxp + m) * nzp + k] =
              model_->sample_z0_given_x0(xa, stream);
        }
      } else {
        const std::size_t anc = stream.categorical(q_row);
        xa = model_->sample_x_next(t - 1, x_curr_[i],
                                   z_cloud_[i * n_z_ + anc], stream);
        // Inner ancestor weights conditional on the drawn x.
        for (int j = 0; j < n_z_; ++j) {
          row_buffer_[j] = std::log(q_row[j]) +
                           model_->x_transition_log_density(
                               t - 1, xa, x_curr_[i], z_cloud_[i * n_z_ + j]);
        }
        try {
          normalize_log_inplace(row_buffer_);
        } catch (const DegenerateWeightsError&) {
          ++degenerate_rows_;
          std::fill(row_buffer_.begin(), row_buffer_.end(), 1.0 / n_z_);
        }
        for (int k = 0; k < nzp; ++k) {
          const std::size_t ja = stream.categorical(row_buffer_);
          la_z_[(i * nxp + m) * nzp + k] = model_->sample_z_next(
              t - 1, x_curr_[i], xa, z_cloud_[i * n_z_ + ja], stream);
        }
      }
      for (int k = 0; k < nzp; ++k) {
        la_loglik_[(i * nxp + m) * nzp + k] = model_->observation_log_density(
            t, y, xa, la_z_[(i * nxp + m) * nzp + k]);
      }
    }
  }
  likelihood_evals_ +=
      static_cast<std::uint64_t>(n_x_) * nxp * nzp;
}

WeightVector LaDpf::lookahead_weights(const VecRef& y) {
  const int t = t_ + 1;
  const int nxp = options_.n_x_prime;
  const int nzp = options_.n_z_prime;

  generate_lookahead(y);

  // Predicted observation from the same predictive table (no y involved).
  predicted_y_.setZero();
  for (std::size_t e = 0; e < la_x_.size(); ++e) {
    for (int k = 0; k < nzp; ++k) {
      predicted_y_ +=
          model_->predict_observation_mean(t, la_x_[e], la_z_[e * nzp + k]);
    }
  }
  predicted_y_ /= static_cast<double>(la_x_.size() * nzp);

  // w^_i = mean table likelihood (the predictive density estimate).
  for (int i = 0; i < n_x_; ++i) {
    const auto table = std::span<const double>(
        la_loglik_.data() + static_cast<std::size_t>(i) * nxp * nzp,
        static_cast<std::size_t>(nxp) * nzp);
    what_[i] = logsumexp(table) - std::log(static_cast<double>(nxp * nzp));
  }
  return normalize(what_);
}

void LaDpf::la_resample(const WeightVector& w_hat) {
  const int nxp = options_.n_x_prime;
  const int nzp = options_.n_z_prime;
  resample_into(w_hat.linear(), outer_ancestors_, control_stream_,
                options_.scheme);

  std::vector<Vec> new_x(n_x_);
  std::vector<Vec> new_z(z_cloud_.size());
  std::vector<double> new_q(q_bar_.size());
  std::vector<Vec> new_la_x(la_x_.size());
  std::vector<Vec> new_la_z(la_z_.size());
  std::vector<double> new_la_l(la_loglik_.size());
  for (int i = 0; i < n_x_; ++i) {
    const std::uint32_t a = outer_ancestors_[i];
    if (t_ + 1 > 0) {
      new_x[i] = x_curr_[a];
      for (int j = 0; j < n_z_; ++j) {
        new_z[i * n_z_ + j] = z_cloud_[a * n_z_ + j];
        new_q[i * n_z_ + j] = q_bar_[a * n_z_ + j];
      }
    }
    for (int m = 0; m < nxp; ++m) {
      new_la_x[i * nxp + m] = la_x_[a * nxp + m];
      for (int k = 0; k < nzp; ++k) {
        new_la_z[(i * nxp + m) * nzp + k] = la_z_[(a * nxp + m) * nzp + k];
        new_la_l[(i * nxp + m) * nzp + k] = la_loglik_[(a * nxp + m) * nzp + k];
      }
    }
  }
  if (t_ + 1 > 0) {
    x_curr_ = std::move(new_x);
    z_cloud_ = std::move(new_z);
    q_bar_ = std::move(new_q);
  }
  la_x_ = std::move(new_la_x);
  la_z_ = std::move(new_la_z);
  la_loglik_ = std::move(new_la_l);
}

void LaDpf::la_propose(const VecRef& y) {
  const int t = t_ + 1;
  const int nxp = options_.n_x_prime;
  const int nzp = options_.n_z_prime;

  if (!options_.reuse_lookahead) generate_lookahead(y);

  std::vector<Vec> new_x(n_x_);
  std::vector<Vec> new_z(z_cloud_.size());
  for (int i = 0; i < n_x_; ++i) {
    RngStream& stream = slot_streams_[i];

    // Select one table pair with probability proportional to its likelihood
    // (the sampling-importance-resampling realization of the approximate
    // optimal proposal) and keep its x.
    const auto table = std::span<const double>(
        la_loglik_.data() + static_cast<std::size_t>(i) * nxp * nzp,
        static_cast<std::size_t>(nxp) * nzp);
    std::copy(table.begin(), table.end(), select_buffer_.begin());
    try {
      normalize_log_inplace(select_buffer_);
    } catch (const DegenerateWeightsError&) {
      ++degenerate_rows_;
      std::fill(select_buffer_.begin(), select_buffer_.end(),
                1.0 / select_buffer_.size());
    }
    const std::size_t pair = stream.categorical(select_buffer_);
    new_x[i] = la_x_[i * nxp + pair / nzp];

    // Inner cloud for the selected x: prior conditional at t = 0, otherwise
    // ancestor reweighting by the x-transition density plus a z-transition
    // draw.
    if (t == 0) {
      for (int j = 0; j < n_z_; ++j) {
        new_z[i * n_z_ + j] = model_->sample_z0_given_x0(new_x[i], stream);
      }
    } else {
      const auto q_row =
          std::span<const double>(q_bar_.data() + i * n_z_, n_z_);
      for (int j = 0; j < n_z_; ++j) {
        row_buffer_[j] =
            std::log(q_row[j]) +
            model_->x_transition_log_density(t - 1, new_x[i], x_curr_[i],
                                             z_cloud_[i * n_z_ + j]);
      }
      try {
        normalize_log_inplace(row_buffer_);
      } catch (const DegenerateWeightsError&) {
        ++degenerate_rows_;
        std::fill(row_buffer_.begin(), row_buffer_.end(), 1.0 / n_z_);
      }
      for (int j = 0; j < n_z_; ++j) {
        const std::size_t ja = stream.categorical(row_buffer_);
        new_z[i * n_z_ + j] = model_->sample_z_next(
            t - 1, x_curr_[i], new_x[i], z_cloud_[i * n_z_ + ja], stream);
      }
    }
  }
  x_curr_ = std::move(new_x);
  z_cloud_ = std::move(new_z);

  // Measurement update of the new clouds; these q_bar rows feed the next
  // step's mixtures and the z estimate.
  for (int i = 0; i < n_x_; ++i) {
    auto row = std::span<double>(q_bar_.data() + i * n_z_, n_z_);
    for (int j = 0; j < n_z_; ++j) {
      row[j] =
          model_->observation_log_density(t, y, x_curr_[i], z_cloud_[i * n_z_ + j]);
    }
    try {
      normalize_log_inplace(row);
    } catch (const DegenerateWeightsError&) {
      ++degenerate_rows_;
      std::fill(row.begin(), row.end(), 1.0 / n_z_);
    }
  }
  likelihood_evals_ += static_cast<std::uint64_t>(n_x_) * n_z_;

  // Outer weights are uniform here (just resampled and re-proposed).
  estimate_.setZero();
  for (int i = 0; i < n_x_; ++i) {
    estimate_.head(model_->dim_x()) += x_curr_[i] / n_x_;
    for (int j = 0; j < n_z_; ++j) {
      estimate_.tail(model_->dim_z()) +=
          q_bar_[i * n_z_ + j] * z_cloud_[i * n_z_ + j] / n_x_;
    }
  }
}

void LaDpf::step(const VecRef& y) {
  if (diverged_) return;
  const int t = t_ + 1;
  try {
    const WeightVector w_hat = lookahead_weights(y);
    la_resample(w_hat);
    la_propose(y);
  } catch (const DegenerateWeightsError&) {
    diverged_ = true;
    divergence_step_ = t;
    return;
  }
  t_ = t;
}

}  // namespace npf
