#pragma once

#include <memory>
#include <span>
#include <vector>

#include "npf/filter.hpp"
#include "npf/random.hpp"

namespace npf {

/// Full-information exponential-weights algorithm: action i is chosen with
/// probability proportional to exp(eta * G_i), where G accumulates rewards.
class Hedge {
 public:
  Hedge(int n_actions, double eta);

  /// Softmax of eta * G, computed with max-shift; shift-invariant in G.
  std::vector<double> distribution() const;

  /// G += rewards (one entry per action).
  void update(std::span<const double> rewards);

  int n_actions() const { return static_cast<int>(gains_.size()); }
  double eta() const { return eta_; }
  const std::vector<double>& gains() const { return gains_; }

 private:
  double eta_;
  std::vector<double> gains_;
};

/// Partial-information variant: plays a mixture of Hedge's distribution and
/// the uniform one, tries a single action, and feeds Hedge an
/// importance-weighted simulated reward vector.
class Exp3 {
 public:
  Exp3(int n_actions, double eta, double gamma);

  struct Selection {
    int action;
    std::vector<double> p_hat;  // (1-gamma) p + gamma/K
  };
  Selection select(RngStream& stream) const;

  /// Requires reward in [0, 1] (throws RewardOutOfRangeError) and the p_hat
  /// the action was drawn from; simulated reward is reward / p_hat[chosen]
  /// on the chosen action, 0 elsewhere.
  void update(int chosen, double reward, std::span<const double> p_hat);

  std::vector<double> distribution() const { return hedge_.distribution(); }
  std::vector<double> mixed_distribution() const;
  double gamma() const { return gamma_; }
  const Hedge& hedge() const { return hedge_; }

 private:
  double gamma_;
  Hedge hedge_;
};

/// Reward alpha / (alpha + epsilon^2) in (0, 1]; epsilon is the one-step
/// observation prediction error.
double prediction_reward(double epsilon, double alpha);

enum class BanditMode { hedge, exp3 };

struct ControllerOptions {
  BanditMode mode = BanditMode::exp3;
  double eta = 0.5;
  double gamma = 0.2;
  double alpha = 0.001;
  // Advance unchosen filters on y_t in exp3 mode so they are fresh when
  // selected later; their rewards never reach the bandit.
  bool exp3_keep_alive = true;
  // >= 0 pins the played action (fixed policy baselines); bandit state is
  // not updated.
  int forced_action = -1;
};

/// One action of the decomposition controller: a filter running under one
/// nesting order. When axes_swapped is set the filter's model has the groups
/// exchanged and estimates are reported back in the original coordinates.
struct ControllerAction {
  std::unique_ptr<NestedFilter> filter;
  bool axes_swapped = false;
};

/// Drives one filter per decomposition order and selects among them online
/// with Hedge (advance all, full reward vector) or Exp3 (advance the chosen
/// one, importance-weighted reward). Rewards follow the prediction-error
/// design; a diverged action scores 0.
class DecompositionController {
 public:
  /// dim_x/dim_z are the physical group sizes (the unswapped model's), used
  /// to map swapped actions' estimates back.
  DecompositionController(std::vector<ControllerAction> actions,
                          ControllerOptions options, RngStream select_stream,
                          int dim_x, int dim_z);

  struct StepLog {
    int t;
    int chosen;
    double reward;
    std::vector<double> p;       // Hedge distribution
    std::vector<double> p_hat;   // played distribution (= p in hedge mode)
    std::vector<double> epsilon; // per-action prediction error (NaN if unknown)
  };

  StepLog step(const VecRef& y);

  /// Estimate of the played action, with swapped actions mapped back to the
  /// physical (x, z) component order.
  Vec estimate_physical() const;

  int n_actions() const { return static_cast<int>(actions_.size()); }
  const NestedFilter& filter(int action) const {
    return *actions_[action].filter;
  }
  const ControllerOptions& options() const { return options_; }
  std::vector<double> hedge_distribution() const { return hedge_dist_(); }

 private:
  std::vector<double> hedge_dist_() const;
  double action_reward_(int a, const VecRef& y, double* epsilon_out);

  std::vector<ControllerAction> actions_;
  ControllerOptions options_;
  RngStream select_stream_;
  Hedge hedge_;
  Exp3 exp3_;
  int dim_x_, dim_z_;
  int last_chosen_ = 0;
  int t_ = -1;
};

}  // namespace npf
