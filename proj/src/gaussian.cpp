#include "npf/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "npf/random.hpp"

namespace npf {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
}

CholPsd::CholPsd(const Mat& cov, double tol) : cov_(cov) {
  const int n = static_cast<int>(cov.rows());
  if (cov.cols() != n) throw NotPsdError("covariance must be square");
  lower_ = Mat::Zero(n, n);
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(cov(i, i)));
  const double eps = tol * scale;

  positive_definite_ = true;
  half_log_det_ = 0.0;
  for (int j = 0; j < n; ++j) {
    double d = cov(j, j);
    for (int k = 0; k < j; ++k) d -= lower_(j, k) * lower_(j, k);
    if (d > eps) {
      const double ljj = std::sqrt(d);
      lower_(j, j) = ljj;
      half_log_det_ += std::log(ljj);
      for (int i = j + 1; i < n; ++i) {
        double s = cov(i, j);
        for (int k = 0; k < j; ++k) s -= lower_(i, k) * lower_(j, k);
        lower_(i, j) = s / ljj;
      }
    } else if (d > -eps) {
      // Degenerate direction: zero column. Off-diagonal mass here would mean
      // the matrix is not PSD.
      positive_definite_ = false;
      for (int i = j + 1; i < n; ++i) {
        double s = cov(i, j);
        for (int k = 0; k < j; ++k) s -= lower_(i, k) * lower_(j, k);
        if (std::abs(s) > eps * (1.0 + std::abs(cov(i, j)))) {
          throw NotPsdError("covariance is not positive semi-definite");
        }
      }
    } else {
      throw NotPsdError("covariance has a negative pivot");
    }
  }
}

double CholPsd::log_density(const VecRef& x, const VecRef& mean) const {
  if (!positive_definite_) {
    throw NotPsdError("density of a singular Gaussian is not defined");
  }
  const int n = dim();
  // Forward-substitute L y = x - mean; quadratic form is |y|^2. Stack buffer
  // covers the small state dimensions this library targets.
  double quad = 0.0;
  if (n <= 16) {
    double y[16];
    for (int i = 0; i < n; ++i) {
      double s = x[i] - mean[i];
      for (int k = 0; k < i; ++k) s -= lower_(i, k) * y[k];
      y[i] = s / lower_(i, i);
      quad += y[i] * y[i];
    }
  } else {
    const Vec y = lower_.triangularView<Eigen::Lower>().solve(x - mean);
    quad = y.squaredNorm();
  }
  return -0.5 * quad - half_log_det_ - 0.5 * n * kLogTwoPi;
}

Vec CholPsd::sample(RngStream& stream, const VecRef& mean) const {
  const int n = dim();
  Vec xi(n);
  for (int i = 0; i < n; ++i) xi[i] = stream.normal();
  Vec out(n);
  for (int i = 0; i < n; ++i) {
    double s = mean[i];
    for (int k = 0; k <= i; ++k) s += lower_(i, k) * xi[k];
    out[i] = s;
  }
  return out;
}

GroupedGaussian::GroupedGaussian(const Mat& joint_cov, int dim_a)
    : joint_cov_(joint_cov), dim_a_(dim_a) {
  const int n = static_cast<int>(joint_cov.rows());
  const int nb = n - dim_a;
  cov_aa_ = joint_cov.topLeftCorner(dim_a, dim_a);
  marginal_a_ = CholPsd(cov_aa_);

  const Mat cov_ba = joint_cov.bottomLeftCorner(nb, dim_a);
  // gain = S_ba S_aa^{-1}, with degenerate a-directions contributing nothing.
  if (marginal_a_.positive_definite()) {
    const Mat& l = marginal_a_.lower();
    gain_ba_ = l.transpose()
                   .triangularView<Eigen::Upper>()
                   .solve(l.triangularView<Eigen::Lower>().solve(cov_ba.transpose()))
                   .transpose();
  } else {
    gain_ba_ = Mat::Zero(nb, dim_a);
  }
  const Mat cov_b_given_a =
      joint_cov.bottomRightCorner(nb, nb) - gain_ba_ * cov_ba.transpose();
  conditional_b_ = CholPsd(cov_b_given_a, 1e-9);
}

Vec GroupedGaussian::sample_a(RngStream& stream, const VecRef& mean_a) const {
  return marginal_a_.sample(stream, mean_a);
}

double GroupedGaussian::log_density_a(const VecRef& a,
                                      const VecRef& mean_a) const {
  return marginal_a_.log_density(a, mean_a);
}

Vec GroupedGaussian::sample_b_given_a(RngStream& stream, const VecRef& mean_a,
                                      const VecRef& mean_b,
                                      const VecRef& a) const {
  const Vec shifted = mean_b + gain_ba_ * (a - mean_a);
  return conditional_b_.sample(stream, shifted);
}

double GroupedGaussian::log_density_b_given_a(const VecRef& b,
                                              const VecRef& mean_a,
                                              const VecRef& mean_b,
                                              const VecRef& a) const {
  const Vec shifted = mean_b + gain_ba_ * (a - mean_a);
  return conditional_b_.log_density(b, shifted);
}

}  // namespace npf
