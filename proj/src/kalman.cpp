#include "npf/kalman.hpp"

namespace npf {

KalmanResult kalman_filter(const LinearGaussianModel& model,
                           std::span<const Vec> ys) {
  const Mat& a = model.dynamics();
  const Mat& q = model.process_noise_cov();
  const Mat& c = model.observation_matrix();
  const Mat& r = model.observation_cov();

  Vec mean = model.prior_mean();
  Mat cov = model.prior_cov();

  KalmanResult result;
  result.means.reserve(ys.size());
  result.covs.reserve(ys.size());
  for (std::size_t t = 0; t < ys.size(); ++t) {
    if (t > 0) {
      mean = a * mean;
      cov = a * cov * a.transpose() + q;
    }
    const Mat s = c * cov * c.transpose() + r;
    const Mat gain = cov * c.transpose() * s.inverse();
    mean += gain * (ys[t] - c * mean);
    const Mat identity = Mat::Identity(cov.rows(), cov.cols());
    // Joseph form keeps the covariance symmetric PSD.
    const Mat ikc = identity - gain * c;
    cov = ikc * cov * ikc.transpose() + gain * r * gain.transpose();
    result.means.push_back(mean);
    result.covs.push_back(cov);
  }
  return result;
}

}  // namespace npf
