#pragma once

#include <memory>

#include "npf/gaussian.hpp"
#include "npf/model.hpp"

namespace npf {

/// Base class for two-group models whose transition and observation noise is
/// additive joint Gaussian:
///
///   (x_{t+1}, z_{t+1}) ~ N( m_t(x_t, z_t), S_t )
///   y_t               ~ N( h_t(x_t, z_t), R_t )
///
/// Subclasses supply the mean maps and the precomputed noise laws; this class
/// derives all nested conditionals (x-marginal, z-given-x) exactly from the
/// joint covariance, so correlated cross-group noise and within-group
/// dependencies keep their exact law under either sampling order.
class GaussianNestedModel
    : public StateSpaceModel,
      public std::enable_shared_from_this<GaussianNestedModel> {
 public:
  GaussianNestedModel(int dim_x, int dim_z, int dim_y)
      : dim_x_(dim_x), dim_z_(dim_z), dim_y_(dim_y) {}

  int dim_x() const override { return dim_x_; }
  int dim_z() const override { return dim_z_; }
  int dim_y() const override { return dim_y_; }

  /// Noise-free next state (x then z components, length dim_x + dim_z).
  virtual Vec transition_mean(double t, const VecRef& x,
                              const VecRef& z) const = 0;
  virtual Vec observation_mean(double t, const VecRef& x,
                               const VecRef& z) const = 0;
  /// Joint transition noise law at time t, split as (x | z).
  virtual const GroupedGaussian& transition_noise(double t) const = 0;
  virtual const CholPsd& observation_noise(double t) const = 0;
  /// Joint law of (x_0, z_0), split as (x | z).
  virtual const GroupedGaussian& prior() const = 0;

  /// True when the noise laws do not change over time. Group reordering of a
  /// non-stationary model must be handled by the subclass (see swapped()).
  virtual bool stationary_laws() const { return true; }

  /// The same physical model with the two groups exchanged: the old z becomes
  /// the outer (sampled-first) group. Exact, via conditional factorization of
  /// the joint noise in the new order.
  virtual std::shared_ptr<const GaussianNestedModel> swapped() const;

  // StateSpaceModel surface, derived from the pieces above.
  Vec sample_x0(RngStream& stream) const override;
  Vec sample_z0_given_x0(const VecRef& x0, RngStream& stream) const override;
  Vec sample_x_next(double t, const VecRef& x, const VecRef& z,
                    RngStream& stream) const override;
  double x_transition_log_density(double t, const VecRef& x_next,
                                  const VecRef& x,
                                  const VecRef& z) const override;
  Vec sample_z_next(double t, const VecRef& x, const VecRef& x_next,
                    const VecRef& z, RngStream& stream) const override;
  double z_transition_log_density(double t, const VecRef& z_next,
                                  const VecRef& x, const VecRef& x_next,
                                  const VecRef& z) const override;
  double observation_log_density(double t, const VecRef& y, const VecRef& x,
                                 const VecRef& z) const override;
  Vec sample_observation(double t, const VecRef& x, const VecRef& z,
                         RngStream& stream) const override;
  Vec predict_observation_mean(double t, const VecRef& x,
                               const VecRef& z) const override;

  /// Noise-free x-transition mean, used by the moment-matched Gaussian
  /// evaluation of the mixture transition marginal.
  Vec x_transition_mean(double t, const VecRef& x, const VecRef& z) const {
    return transition_mean(t, x, z).head(dim_x_);
  }
  const Mat& x_noise_cov(double t) const {
    return transition_noise(t).cov_aa();
  }

 private:
  int dim_x_, dim_z_, dim_y_;
};

/// Benchmark model, 2-dimensional:
///   x' = x + z/(1+z^2) + v^x
///   z' = x + 0.5 z + 25 z/(1+z^2) + 8 cos(1.2 t) + v^z
///   y  = arctan(x) + z^2/20 + e
/// with v ~ N(0, [[1, 0.1], [0.1, 1]]), e ~ N(0,1), (x0,z0) ~ N(0, I).
/// noise_scale multiplies all noise standard deviations (0 gives the
/// deterministic skeleton, handy for exactness tests).
std::shared_ptr<const GaussianNestedModel> model1(double noise_scale = 1.0);

/// Benchmark model, 4-dimensional:
///   x1' = 0.5 x1 + 8 sin(t) + v^{x1}
///   x2' = 0.4 x1 + 0.5 x2 + v^{x2}
///   z1' = z1 + z2/(1+z2^2) + v^{z1}
///   z2' = z1' + 0.5 z2 + 25 z2/(1+z2^2) + 8 cos(1.2 t) + v^{z2}
///   y   = (x1+x2)/(1+x1^2) + arctan(z1) + z2^2/20 + e
/// with v ~ N(0, diag(1,1) (+) [[1, 0.1], [0.1, 10]]), e ~ N(0,1),
/// (x0,z0) ~ N(0, I). Note z2' depends on the freshly sampled z1', which
/// makes the joint z-noise covariance [[1, 1.1], [1.1, 11.2]].
std::shared_ptr<const GaussianNestedModel> model2(double noise_scale = 1.0);

/// Linear-Gaussian model u' = A u + B v, y = C u + e, with v ~ N(0, Q),
/// e ~ N(0, R), u_0 ~ N(prior_mean, prior_cov), split into groups of size
/// (dim_x, dim_z). The exact posterior is computable by a Kalman filter on
/// the joint state, which makes this the validation oracle for the filters.
class LinearGaussianModel;
std::shared_ptr<const LinearGaussianModel> linear_gaussian_model(
    int dim_x, int dim_z, const Mat& a, const Mat& b, const Mat& c,
    const Mat& q, const Mat& r, const Vec& prior_mean, const Mat& prior_cov);

class LinearGaussianModel : public GaussianNestedModel {
 public:
  LinearGaussianModel(int dim_x, int dim_z, Mat a, Mat b, Mat c, Mat q, Mat r,
                      Vec prior_mean, Mat prior_cov);

  Vec transition_mean(double t, const VecRef& x, const VecRef& z) const override;
  Vec observation_mean(double t, const VecRef& x, const VecRef& z) const override;
  const GroupedGaussian& transition_noise(double) const override {
    return transition_noise_;
  }
  const CholPsd& observation_noise(double) const override { return obs_noise_; }
  const GroupedGaussian& prior() const override { return prior_; }

  // Joint-state system matrices for the Kalman oracle.
  const Mat& dynamics() const { return a_; }
  const Mat& process_noise_cov() const { return transition_noise_.joint_cov(); }
  const Mat& observation_matrix() const { return c_; }
  const Mat& observation_cov() const { return obs_noise_.cov(); }
  const Vec& prior_mean() const { return prior_mean_; }
  const Mat& prior_cov() const { return prior_.joint_cov(); }

 private:
  Mat a_, c_;
  GroupedGaussian transition_noise_;
  CholPsd obs_noise_;
  GroupedGaussian prior_;
  Vec prior_mean_;
};

/// Exchanges the roles of the two groups (inference-side reordering):
/// the returned model's x is the argument's z. Throws NotSwappableError when
/// the model does not expose a reorderable (Gaussian-nested) structure.
std::shared_ptr<const GaussianNestedModel> swap_decomposition(
    const std::shared_ptr<const StateSpaceModel>& model);

/// Exchanges the two groups' transition laws while keeping the observation
/// law and prior as they are (the process-side "swap the transition models"
/// change-point). Requires dim_x == dim_z.
std::shared_ptr<const GaussianNestedModel> swapped_dynamics(
    const std::shared_ptr<const GaussianNestedModel>& model);

/// Model following `before` for t < switch_time and `after` from then on.
/// Both must share all dimensions; the prior is taken from `before`.
std::shared_ptr<const GaussianNestedModel> time_switch_model(
    std::shared_ptr<const GaussianNestedModel> before,
    std::shared_ptr<const GaussianNestedModel> after, double switch_time);

}  // namespace npf
