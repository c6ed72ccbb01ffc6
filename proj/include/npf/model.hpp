#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "npf/random.hpp"
#include "npf/types.hpp"

namespace npf {

/// Two-group nonlinear state-space model
///
///   x_{t+1} = f^x_t(x_t, z_t, v^x_t)
///   z_{t+1} = f^z_t(x_t, x_{t+1}, z_t, v^z_t)
///   y_t     = h_t(x_t, z_t, e_t)
///
/// expressed through its initial, transition and observation distributions.
/// The z-transition receives both endpoints of the x move so that models
/// whose second group depends on the freshly sampled first group (or whose
/// noise is correlated across groups) stay exact.
///
/// Densities are exposed in the log domain; linear wrappers are provided.
/// Models are immutable after construction and safe to share across threads.
class StateSpaceModel {
 public:
  virtual ~StateSpaceModel() = default;

  virtual int dim_x() const = 0;
  virtual int dim_z() const = 0;
  virtual int dim_y() const = 0;

  virtual Vec sample_x0(RngStream& stream) const = 0;
  virtual Vec sample_z0_given_x0(const VecRef& x0, RngStream& stream) const = 0;

  virtual Vec sample_x_next(double t, const VecRef& x, const VecRef& z,
                            RngStream& stream) const = 0;
  virtual double x_transition_log_density(double t, const VecRef& x_next,
                                          const VecRef& x,
                                          const VecRef& z) const = 0;
  virtual Vec sample_z_next(double t, const VecRef& x, const VecRef& x_next,
                            const VecRef& z, RngStream& stream) const = 0;
  virtual double z_transition_log_density(double t, const VecRef& z_next,
                                          const VecRef& x, const VecRef& x_next,
                                          const VecRef& z) const = 0;
  virtual double observation_log_density(double t, const VecRef& y,
                                         const VecRef& x,
                                         const VecRef& z) const = 0;
  virtual Vec sample_observation(double t, const VecRef& x, const VecRef& z,
                                 RngStream& stream) const = 0;

  /// Noise-free observation map h_t(x, z, 0); equals sample_observation with
  /// the measurement noise forced to zero.
  virtual Vec predict_observation_mean(double t, const VecRef& x,
                                       const VecRef& z) const = 0;

  double x_transition_density(double t, const VecRef& x_next, const VecRef& x,
                              const VecRef& z) const {
    return std::exp(x_transition_log_density(t, x_next, x, z));
  }
  double z_transition_density(double t, const VecRef& z_next, const VecRef& x,
                              const VecRef& x_next, const VecRef& z) const {
    return std::exp(z_transition_log_density(t, z_next, x, x_next, z));
  }
  double observation_density(double t, const VecRef& y, const VecRef& x,
                             const VecRef& z) const {
    return std::exp(observation_log_density(t, y, x, z));
  }
};

/// A simulated ground-truth path: states and observations for t = 0..T-1,
/// generated under a single stream.
struct Trajectory {
  std::vector<Vec> xs;
  std::vector<Vec> zs;
  std::vector<Vec> ys;

  int length() const { return static_cast<int>(ys.size()); }
};

/// Ancestral sampling of the model for T steps (t = 0..T-1).
Trajectory simulate_trajectory(const StateSpaceModel& model, int T,
                               RngStream& stream);

/// CSV round-trip (columns: t, x..., z..., y...) for harness replay.
void save_trajectory_csv(const Trajectory& trajectory, const std::string& path);
Trajectory load_trajectory_csv(const std::string& path, int dim_x, int dim_z,
                               int dim_y);

}  // namespace npf
