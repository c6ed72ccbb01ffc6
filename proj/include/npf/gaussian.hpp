#pragma once

#include "npf/errors.hpp"
#include "npf/types.hpp"

namespace npf {

class RngStream;

/// Lower-triangular factorization L with L L^T = cov, tolerant of positive
/// semi-definite inputs: a pivot within tolerance of zero produces a zero
/// column (degenerate direction), a negative pivot beyond tolerance throws
/// NotPsdError.
class CholPsd {
 public:
  CholPsd() = default;
  explicit CholPsd(const Mat& cov, double tol = 1e-10);

  const Mat& lower() const { return lower_; }
  const Mat& cov() const { return cov_; }
  int dim() const { return static_cast<int>(lower_.rows()); }
  bool positive_definite() const { return positive_definite_; }

  /// log N(x; mean, cov). Requires a positive-definite factor.
  double log_density(const VecRef& x, const VecRef& mean) const;

  /// mean + L * xi with xi ~ N(0, I) drawn from `stream`.
  Vec sample(RngStream& stream, const VecRef& mean) const;

 private:
  Mat cov_;
  Mat lower_;
  double half_log_det_ = 0.0;
  bool positive_definite_ = false;
};

/// Marginal/conditional split of a joint Gaussian over two groups (a, b):
/// covariance [[S_aa, S_ab], [S_ba, S_bb]]. Supports sampling and density
/// evaluation of a alone and of b | a, which together reproduce the joint.
class GroupedGaussian {
 public:
  GroupedGaussian() = default;
  GroupedGaussian(const Mat& joint_cov, int dim_a);

  int dim_a() const { return dim_a_; }
  int dim_b() const { return static_cast<int>(joint_cov_.rows()) - dim_a_; }
  const Mat& joint_cov() const { return joint_cov_; }
  const CholPsd& marginal_a() const { return marginal_a_; }
  const Mat& cov_aa() const { return cov_aa_; }

  /// E[b | a] offset: gain * (a - mean_a). Zero when the groups are
  /// independent or the a-block is degenerate.
  const Mat& gain_ba() const { return gain_ba_; }
  const CholPsd& conditional_b() const { return conditional_b_; }

  Vec sample_a(RngStream& stream, const VecRef& mean_a) const;
  double log_density_a(const VecRef& a, const VecRef& mean_a) const;
  Vec sample_b_given_a(RngStream& stream, const VecRef& mean_a,
                       const VecRef& mean_b, const VecRef& a) const;
  double log_density_b_given_a(const VecRef& b, const VecRef& mean_a,
                               const VecRef& mean_b, const VecRef& a) const;

 private:
  Mat joint_cov_;
  Mat cov_aa_;
  int dim_a_ = 0;
  CholPsd marginal_a_;
  Mat gain_ba_;
  CholPsd conditional_b_;
};

}  // namespace npf
