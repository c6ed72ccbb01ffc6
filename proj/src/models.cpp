#include "npf/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace npf {

// ---------------------------------------------------------------------------
// GaussianNestedModel: nested conditionals from the joint noise law.
// ---------------------------------------------------------------------------

Vec GaussianNestedModel::sample_x0(RngStream& stream) const {
  const Vec zero = Vec::Zero(dim_x());
  return prior().sample_a(stream, zero);
}

Vec GaussianNestedModel::sample_z0_given_x0(const VecRef& x0,
                                            RngStream& stream) const {
  const Vec zero_x = Vec::Zero(dim_x());
  const Vec zero_z = Vec::Zero(dim_z());
  return prior().sample_b_given_a(stream, zero_x, zero_z, x0);
}

Vec GaussianNestedModel::sample_x_next(double t, const VecRef& x,
                                       const VecRef& z,
                                       RngStream& stream) const {
  const Vec mean = transition_mean(t, x, z);
  return transition_noise(t).sample_a(stream, mean.head(dim_x()));
}

double GaussianNestedModel::x_transition_log_density(double t,
                                                     const VecRef& x_next,
                                                     const VecRef& x,
                                                     const VecRef& z) const {
  const Vec mean = transition_mean(t, x, z);
  return transition_noise(t).log_density_a(x_next, mean.head(dim_x()));
}

Vec GaussianNestedModel::sample_z_next(double t, const VecRef& x,
                                       const VecRef& x_next, const VecRef& z,
                                       RngStream& stream) const {
  const Vec mean = transition_mean(t, x, z);
  return transition_noise(t).sample_b_given_a(stream, mean.head(dim_x()),
                                              mean.tail(dim_z()), x_next);
}

double GaussianNestedModel::z_transition_log_density(double t,
                                                     const VecRef& z_next,
                                                     const VecRef& x,
                                                     const VecRef& x_next,
                                                     const VecRef& z) const {
  const Vec mean = transition_mean(t, x, z);
  return transition_noise(t).log_density_b_given_a(
      z_next, mean.head(dim_x()), mean.tail(dim_z()), x_next);
}

double GaussianNestedModel::observation_log_density(double t, const VecRef& y,
                                                    const VecRef& x,
                                                    const VecRef& z) const {
  return observation_noise(t).log_density(y, observation_mean(t, x, z));
}

Vec GaussianNestedModel::sample_observation(double t, const VecRef& x,
                                            const VecRef& z,
                                            RngStream& stream) const {
  return observation_noise(t).sample(stream, observation_mean(t, x, z));
}

Vec GaussianNestedModel::predict_observation_mean(double t, const VecRef& x,
                                                  const VecRef& z) const {
  return observation_mean(t, x, z);
}

// ---------------------------------------------------------------------------
// Benchmark model 1 (2-dimensional).
// ---------------------------------------------------------------------------

namespace {

class BenchmarkModel1 final : public GaussianNestedModel {
 public:
  explicit BenchmarkModel1(double noise_scale)
      : GaussianNestedModel(1, 1, 1) {
    const double s2 = noise_scale * noise_scale;
    Mat v(2, 2);
    v << 1.0, 0.1, 0.1, 1.0;
    transition_noise_ = GroupedGaussian(s2 * v, 1);
    observation_noise_ = CholPsd(s2 * Mat::Identity(1, 1));
    prior_ = GroupedGaussian(s2 * Mat::Identity(2, 2), 1);
  }

  Vec transition_mean(double t, const VecRef& x, const VecRef& z) const override {
    const double zz = z[0];
    Vec m(2);
    m[0] = x[0] + zz / (1.0 + zz * zz);
    m[1] = x[0] + 0.5 * zz + 25.0 * zz / (1.0 + zz * zz) +
           8.0 * std::cos(1.2 * t);
    return m;
  }

  Vec observation_mean(double, const VecRef& x, const VecRef& z) const override {
    Vec m(1);
    m[0] = std::atan(x[0]) + z[0] * z[0] / 20.0;
    return m;
  }

  const GroupedGaussian& transition_noise(double) const override {
    return transition_noise_;
  }
  const CholPsd& observation_noise(double) const override {
    return observation_noise_;
  }
  const GroupedGaussian& prior() const override { return prior_; }

 private:
  GroupedGaussian transition_noise_;
  CholPsd observation_noise_;
  GroupedGaussian prior_;
};

// ---------------------------------------------------------------------------
// Benchmark model 2 (4-dimensional). z2' depends on the sampled z1', so the
// z-group noise is (v_z1, v_z1 + v_z2); with cov(v_z1, v_z2) = 0.1 and
// var(v_z2) = 10 that yields the joint z-noise covariance below.
// ---------------------------------------------------------------------------

class BenchmarkModel2 final : public GaussianNestedModel {
 public:
  explicit BenchmarkModel2(double noise_scale)
      : GaussianNestedModel(2, 2, 1) {
    const double s2 = noise_scale * noise_scale;
    Mat v = Mat::Zero(4, 4);
    v(0, 0) = 1.0;
    v(1, 1) = 1.0;
    // A vz A^T with A = [[1,0],[1,1]], vz = [[1, 0.1], [0.1, 10]].
    v(2, 2) = 1.0;
    v(2, 3) = 1.1;
    v(3, 2) = 1.1;
    v(3, 3) = 11.2;
    transition_noise_ = GroupedGaussian(s2 * v, 2);
    observation_noise_ = CholPsd(s2 * Mat::Identity(1, 1));
    prior_ = GroupedGaussian(s2 * Mat::Identity(4, 4), 2);
  }

  Vec transition_mean(double t, const VecRef& x, const VecRef& z) const override {
    Vec m(4);
    m[0] = 0.5 * x[0] + 8.0 * std::sin(t);
    m[1] = 0.4 * x[0] + 0.5 * x[1];
    const double z2 = z[1];
    m[2] = z[0] + z2 / (1.0 + z2 * z2);
    m[3] = m[2] + 0.5 * z2 + 25.0 * z2 / (1.0 + z2 * z2) +
           8.0 * std::cos(1.2 * t);
    return m;
  }

  Vec observation_mean(double, const VecRef& x, const VecRef& z) const override {
    Vec m(1);
    m[0] = (x[0] + x[1]) / (1.0 + x[0] * x[0]) + std::atan(z[0]) +
           z[1] * z[1] / 20.0;
    return m;
  }

  const GroupedGaussian& transition_noise(double) const override {
    return transition_noise_;
  }
  const CholPsd& observation_noise(double) const override {
    return observation_noise_;
  }
  const GroupedGaussian& prior() const override { return prior_; }

 private:
  GroupedGaussian transition_noise_;
  CholPsd observation_noise_;
  GroupedGaussian prior_;
};

Mat group_swap_permutation(int dim_x, int dim_z) {
  const int n = dim_x + dim_z;
  Mat p = Mat::Zero(n, n);
  for (int i = 0; i < dim_z; ++i) p(i, dim_x + i) = 1.0;
  for (int i = 0; i < dim_x; ++i) p(dim_z + i, i) = 1.0;
  return p;
}

// Full group exchange: new x = old z. Mean maps delegate with swapped
// arguments; noise laws are the permuted covariances re-split in the new
// order.
class SwappedModel final : public GaussianNestedModel {
 public:
  explicit SwappedModel(std::shared_ptr<const GaussianNestedModel> base)
      : GaussianNestedModel(base->dim_z(), base->dim_x(), base->dim_y()),
        base_(std::move(base)) {
    if (!base_->stationary_laws()) {
      throw NotSwappableError(
          "group reordering of a non-stationary model must be provided by "
          "the model itself");
    }
    const Mat p = group_swap_permutation(base_->dim_x(), base_->dim_z());
    transition_noise_ = GroupedGaussian(
        p * base_->transition_noise(0.0).joint_cov() * p.transpose(),
        dim_x());
    prior_ = GroupedGaussian(p * base_->prior().joint_cov() * p.transpose(),
                             dim_x());
  }

  Vec transition_mean(double t, const VecRef& x, const VecRef& z) const override {
    const Vec base_mean = base_->transition_mean(t, z, x);
    Vec m(dim_x() + dim_z());
    m.head(dim_x()) = base_mean.tail(dim_x());
    m.tail(dim_z()) = base_mean.head(dim_z());
    return m;
  }

  Vec observation_mean(double t, const VecRef& x, const VecRef& z) const override {
    return base_->observation_mean(t, z, x);
  }

  const GroupedGaussian& transition_noise(double) const override {
    return transition_noise_;
  }
  const CholPsd& observation_noise(double t) const override {
    return base_->observation_noise(t);
  }
  const GroupedGaussian& prior() const override { return prior_; }

  std::shared_ptr<const GaussianNestedModel> swapped() const override {
    return base_;
  }

 private:
  std::shared_ptr<const GaussianNestedModel> base_;
  GroupedGaussian transition_noise_;
  GroupedGaussian prior_;
};

// Transition-law exchange only (the change-point perturbation): the state
// groups keep their identities and observation law, but x now follows the
// old z dynamics and vice versa.
class SwappedDynamicsModel final : public GaussianNestedModel {
 public:
  explicit SwappedDynamicsModel(std::shared_ptr<const GaussianNestedModel> base)
      : GaussianNestedModel(base->dim_x(), base->dim_z(), base->dim_y()),
        base_(std::move(base)) {
    if (base_->dim_x() != base_->dim_z()) {
      throw NotSwappableError(
          "swapped dynamics requires equally sized groups");
    }
    if (!base_->stationary_laws()) {
      throw NotSwappableError(
          "swapped dynamics of a non-stationary model is not supported");
    }
    const Mat p = group_swap_permutation(base_->dim_x(), base_->dim_z());
    transition_noise_ = GroupedGaussian(
        p * base_->transition_noise(0.0).joint_cov() * p.transpose(),
        dim_x());
  }

  Vec transition_mean(double t, const VecRef& x, const VecRef& z) const override {
    const Vec base_mean = base_->transition_mean(t, z, x);
    Vec m(dim_x() + dim_z());
    m.head(dim_x()) = base_mean.tail(dim_x());
    m.tail(dim_z()) = base_mean.head(dim_z());
    return m;
  }

  Vec observation_mean(double t, const VecRef& x, const VecRef& z) const override {
    return base_->observation_mean(t, x, z);
  }

  const GroupedGaussian& transition_noise(double) const override {
    return transition_noise_;
  }
  const CholPsd& observation_noise(double t) const override {
    return base_->observation_noise(t);
  }
  const GroupedGaussian& prior() const override { return base_->prior(); }

 private:
  std::shared_ptr<const GaussianNestedModel> base_;
  GroupedGaussian transition_noise_;
};

class TimeSwitchModel final : public GaussianNestedModel {
 public:
  TimeSwitchModel(std::shared_ptr<const GaussianNestedModel> before,
                  std::shared_ptr<const GaussianNestedModel> after,
                  double switch_time)
      : GaussianNestedModel(before->dim_x(), before->dim_z(), before->dim_y()),
        before_(std::move(before)),
        after_(std::move(after)),
        switch_time_(switch_time) {
    if (after_->dim_x() != dim_x() || after_->dim_z() != dim_z() ||
        after_->dim_y() != dim_y()) {
      throw NotSwappableError("time-switched models must share dimensions");
    }
  }

  Vec transition_mean(double t, const VecRef& x, const VecRef& z) const override {
    return active(t).transition_mean(t, x, z);
  }
  Vec observation_mean(double t, const VecRef& x, const VecRef& z) const override {
    return active(t).observation_mean(t, x, z);
  }
  const GroupedGaussian& transition_noise(double t) const override {
    return active(t).transition_noise(t);
  }
  const CholPsd& observation_noise(double t) const override {
    return active(t).observation_noise(t);
  }
  const GroupedGaussian& prior() const override { return before_->prior(); }

  bool stationary_laws() const override { return false; }

  std::shared_ptr<const GaussianNestedModel> swapped() const override {
    return std::make_shared<TimeSwitchModel>(before_->swapped(),
                                             after_->swapped(), switch_time_);
  }

 private:
  const GaussianNestedModel& active(double t) const {
    return t < switch_time_ ? *before_ : *after_;
  }

  std::shared_ptr<const GaussianNestedModel> before_;
  std::shared_ptr<const GaussianNestedModel> after_;
  double switch_time_;
};

}  // namespace

std::shared_ptr<const GaussianNestedModel> GaussianNestedModel::swapped()
    const {
  return std::make_shared<SwappedModel>(shared_from_this());
}

std::shared_ptr<const GaussianNestedModel> model1(double noise_scale) {
  return std::make_shared<BenchmarkModel1>(noise_scale);
}

std::shared_ptr<const GaussianNestedModel> model2(double noise_scale) {
  return std::make_shared<BenchmarkModel2>(noise_scale);
}

LinearGaussianModel::LinearGaussianModel(int dim_x, int dim_z, Mat a, Mat b,
                                         Mat c, Mat q, Mat r, Vec prior_mean,
                                         Mat prior_cov)
    : GaussianNestedModel(dim_x, dim_z, static_cast<int>(c.rows())),
      a_(std::move(a)),
      c_(std::move(c)) {
  const int n = dim_x + dim_z;
  if (a_.rows() != n || a_.cols() != n) {
    throw ConfigError("linear_gaussian_model: A must be (n_x+n_z) square");
  }
  if (b.rows() != n || b.cols() != q.rows()) {
    throw ConfigError("linear_gaussian_model: B and Q dimensions mismatch");
  }
  if (c_.cols() != n || r.rows() != c_.rows()) {
    throw ConfigError("linear_gaussian_model: C and R dimensions mismatch");
  }
  transition_noise_ = GroupedGaussian(b * q * b.transpose(), dim_x);
  obs_noise_ = CholPsd(r);
  prior_ = GroupedGaussian(prior_cov, dim_x);
  prior_mean_ = std::move(prior_mean);
}

Vec LinearGaussianModel::transition_mean(double, const VecRef& x,
                                         const VecRef& z) const {
  Vec u(dim_x() + dim_z());
  u.head(dim_x()) = x;
  u.tail(dim_z()) = z;
  return a_ * u;
}

Vec LinearGaussianModel::observation_mean(double, const VecRef& x,
                                          const VecRef& z) const {
  Vec u(dim_x() + dim_z());
  u.head(dim_x()) = x;
  u.tail(dim_z()) = z;
  return c_ * u;
}

std::shared_ptr<const LinearGaussianModel> linear_gaussian_model(
    int dim_x, int dim_z, const Mat& a, const Mat& b, const Mat& c,
    const Mat& q, const Mat& r, const Vec& prior_mean, const Mat& prior_cov) {
  return std::make_shared<LinearGaussianModel>(dim_x, dim_z, a, b, c, q, r,
                                               prior_mean, prior_cov);
}

std::shared_ptr<const GaussianNestedModel> swap_decomposition(
    const std::shared_ptr<const StateSpaceModel>& model) {
  auto nested = std::dynamic_pointer_cast<const GaussianNestedModel>(model);
  if (!nested) {
    throw NotSwappableError(
        "model does not expose a reorderable two-group structure");
  }
  return nested->swapped();
}

std::shared_ptr<const GaussianNestedModel> swapped_dynamics(
    const std::shared_ptr<const GaussianNestedModel>& model) {
  return std::make_shared<SwappedDynamicsModel>(model);
}

std::shared_ptr<const GaussianNestedModel> time_switch_model(
    std::shared_ptr<const GaussianNestedModel> before,
    std::shared_ptr<const GaussianNestedModel> after, double switch_time) {
  return std::make_shared<TimeSwitchModel>(std::move(before), std::move(after),
                                           switch_time);
}

// ---------------------------------------------------------------------------
// Trajectory simulation and CSV round-trip.
// ---------------------------------------------------------------------------

Trajectory simulate_trajectory(const StateSpaceModel& model, int T,
                               RngStream& stream) {
  Trajectory traj;
  traj.xs.reserve(T);
  traj.zs.reserve(T);
  traj.ys.reserve(T);
  Vec x = model.sample_x0(stream);
  Vec z = model.sample_z0_given_x0(x, stream);
  for (int t = 0; t < T; ++t) {
    if (t > 0) {
      Vec x_next = model.sample_x_next(t - 1, x, z, stream);
      z = model.sample_z_next(t - 1, x, x_next, z, stream);
      x = std::move(x_next);
    }
    traj.xs.push_back(x);
    traj.zs.push_back(z);
    traj.ys.push_back(model.sample_observation(t, x, z, stream));
  }
  return traj;
}

namespace {

void append_fields(std::ostream& os, const Vec& v) {
  char buf[40];
  for (int i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v[i]);
    os << buf;
  }
}

}  // namespace

void save_trajectory_csv(const Trajectory& trajectory,
                         const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open trajectory file: " + path);
  os << "t";
  const int nx = trajectory.xs.empty() ? 0 : static_cast<int>(trajectory.xs[0].size());
  const int nz = trajectory.zs.empty() ? 0 : static_cast<int>(trajectory.zs[0].size());
  const int ny = trajectory.ys.empty() ? 0 : static_cast<int>(trajectory.ys[0].size());
  for (int i = 0; i < nx; ++i) os << ",x" << i;
  for (int i = 0; i < nz; ++i) os << ",z" << i;
  for (int i = 0; i < ny; ++i) os << ",y" << i;
  os << "\n";
  for (int t = 0; t < trajectory.length(); ++t) {
    os << t;
    append_fields(os, trajectory.xs[t]);
    append_fields(os, trajectory.zs[t]);
    append_fields(os, trajectory.ys[t]);
    os << "\n";
  }
}

Trajectory load_trajectory_csv(const std::string& path, int dim_x, int dim_z,
                               int dim_y) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open trajectory file: " + path);
  std::string line;
  std::getline(is, line);  // header
  Trajectory traj;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');  // t
    auto read_vec = [&](int n) {
      Vec v(n);
      for (int i = 0; i < n; ++i) {
        std::getline(ss, field, ',');
        v[i] = std::stod(field);
      }
      return v;
    };
    traj.xs.push_back(read_vec(dim_x));
    traj.zs.push_back(read_vec(dim_z));
    traj.ys.push_back(read_vec(dim_y));
  }
  return traj;
}

}  // namespace npf
