#pragma once

#include <cstdint>

#include "npf/types.hpp"

namespace npf {

/// Common surface of the three filters, as driven by the experiment harness
/// and the decomposition controller.
///
/// A filter that hits an all-degenerate weight normalization freezes: the
/// divergence step is recorded, the last valid estimate is retained, and
/// further step() calls are no-ops.
class NestedFilter {
 public:
  virtual ~NestedFilter() = default;

  /// Processes the observation for the next time step (t = 0 first).
  virtual void step(const VecRef& y) = 0;

  /// Posterior mean estimate of (x_t, z_t) after the latest step, in the
  /// filter's own model coordinates.
  virtual Vec estimate() const = 0;

  /// One-step-ahead predicted observation used during the latest step
  /// (computed from prior-propagated particles, before the measurement
  /// update).
  virtual Vec predicted_observation() const = 0;

  virtual bool diverged() const = 0;
  virtual int divergence_step() const = 0;  // -1 when not diverged

  /// Observation-density evaluations so far (the compute proxy).
  virtual std::uint64_t likelihood_evals() const = 0;

  /// Index of the last processed observation; -1 before the first step.
  virtual int current_step() const = 0;
};

}  // namespace npf
