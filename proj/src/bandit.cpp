#include "npf/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace npf {

Hedge::Hedge(int n_actions, double eta) : eta_(eta), gains_(n_actions, 0.0) {
  if (n_actions < 2) throw ConfigError("hedge needs at least two actions");
  if (!(eta > 0.0)) throw ConfigError("hedge eta must be positive");
}

std::vector<double> Hedge::distribution() const {
  double max_gain = -std::numeric_limits<double>::infinity();
  for (double g : gains_) max_gain = std::max(max_gain, g);
  std::vector<double> p(gains_.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < gains_.size(); ++i) {
    p[i] = std::exp(eta_ * (gains_[i] - max_gain));
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

void Hedge::update(std::span<const double> rewards) {
  if (rewards.size() != gains_.size()) {
    throw LengthMismatchError("reward vector size mismatch");
  }
  for (std::size_t i = 0; i < gains_.size(); ++i) {
    if (!std::isfinite(rewards[i])) {
      throw RewardOutOfRangeError("hedge rewards must be finite");
    }
    gains_[i] += rewards[i];
  }
}

Exp3::Exp3(int n_actions, double eta, double gamma)
    : gamma_(gamma), hedge_(n_actions, eta) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("exp3 gamma must be in (0, 1]");
  }
}

std::vector<double> Exp3::mixed_distribution() const {
  std::vector<double> p = hedge_.distribution();
  const double k = static_cast<double>(p.size());
  for (double& v : p) v = (1.0 - gamma_) * v + gamma_ / k;
  return p;
}

Exp3::Selection Exp3::select(RngStream& stream) const {
  Selection sel;
  sel.p_hat = mixed_distribution();
  sel.action = static_cast<int>(stream.categorical(sel.p_hat));
  return sel;
}

void Exp3::update(int chosen, double reward, std::span<const double> p_hat) {
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw RewardOutOfRangeError("exp3 reward must lie in [0, 1]");
  }
  std::vector<double> simulated(hedge_.n_actions(), 0.0);
  simulated[chosen] = reward / p_hat[chosen];
  hedge_.update(simulated);
}

double prediction_reward(double epsilon, double alpha) {
  return alpha / (alpha + epsilon * epsilon);
}

DecompositionController::DecompositionController(
    std::vector<ControllerAction> actions, ControllerOptions options,
    RngStream select_stream, int dim_x, int dim_z)
    : actions_(std::move(actions)),
      options_(options),
      select_stream_(select_stream),
      hedge_(static_cast<int>(actions_.size()), options.eta),
      exp3_(static_cast<int>(actions_.size()), options.eta, options.gamma),
      dim_x_(dim_x),
      dim_z_(dim_z) {}

std::vector<double> DecompositionController::hedge_dist_() const {
  return options_.mode == BanditMode::hedge ? hedge_.distribution()
                                            : exp3_.distribution();
}

// Advances action a's filter on y and returns its prediction reward.
// A diverged filter scores 0.
double DecompositionController::action_reward_(int a, const VecRef& y,
                                               double* epsilon_out) {
  NestedFilter& filter = *actions_[a].filter;
  filter.step(y);
  if (filter.diverged()) {
    *epsilon_out = std::numeric_limits<double>::quiet_NaN();
    return 0.0;
  }
  const double eps = (y - filter.predicted_observation()).norm();
  *epsilon_out = eps;
  return prediction_reward(eps, options_.alpha);
}

DecompositionController::StepLog DecompositionController::step(const VecRef& y) {
  StepLog log;
  log.t = ++t_;
  log.p = hedge_dist_();
  log.epsilon.assign(actions_.size(),
                     std::numeric_limits<double>::quiet_NaN());

  if (options_.forced_action >= 0) {
    log.chosen = options_.forced_action;
    log.p_hat = log.p;
    log.reward = action_reward_(log.chosen, y, &log.epsilon[log.chosen]);
    last_chosen_ = log.chosen;
    return log;
  }

  if (options_.mode == BanditMode::hedge) {
    // Full information: every action's filter sees y_t and reports a reward.
    std::vector<double> rewards(actions_.size(), 0.0);
    for (int a = 0; a < n_actions(); ++a) {
      rewards[a] = action_reward_(a, y, &log.epsilon[a]);
    }
    hedge_.update(rewards);
    log.p_hat = log.p;
    log.chosen = static_cast<int>(
        std::max_element(log.p.begin(), log.p.end()) - log.p.begin());
    log.reward = rewards[log.chosen];
  } else {
    const Exp3::Selection sel = exp3_.select(select_stream_);
    log.chosen = sel.action;
    log.p_hat = sel.p_hat;
    log.reward = action_reward_(sel.action, y, &log.epsilon[sel.action]);
    exp3_.update(sel.action, log.reward, sel.p_hat);
    if (options_.exp3_keep_alive) {
      for (int a = 0; a < n_actions(); ++a) {
        if (a == sel.action) continue;
        double eps;
        action_reward_(a, y, &eps);  // keeps the filter current; reward unused
        log.epsilon[a] = eps;
      }
    }
  }
  last_chosen_ = log.chosen;
  return log;
}

Vec DecompositionController::estimate_physical() const {
  const ControllerAction& action = actions_[last_chosen_];
  const Vec est = action.filter->estimate();
  if (!action.axes_swapped) return est;
  // A swapped action's estimate is laid out (physical z, physical x).
  Vec out(dim_x_ + dim_z_);
  out.head(dim_x_) = est.tail(dim_x_);
  out.tail(dim_z_) = est.head(dim_z_);
  return out;
}

}  // namespace npf
