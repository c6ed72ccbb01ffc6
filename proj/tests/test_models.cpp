#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

#include "npf/models.hpp"
#include "oracles.hpp"

using namespace npf;

namespace {

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("model1 zero-noise transition and observation maps") {
  const auto m = model1(0.0);
  RngStream stream(1);

  const Vec x0 = vec1(0.0), z0 = vec1(0.0);
  const Vec x1 = m->sample_x_next(0, x0, z0, stream);
  const Vec z1 = m->sample_z_next(0, x0, x1, z0, stream);
  CHECK(x1[0] == doctest::Approx(0.0));
  CHECK(z1[0] == doctest::Approx(8.0));
  CHECK(m->predict_observation_mean(0, x0, z0)[0] == doctest::Approx(0.0));

  const Vec xa = vec1(1.0), za = vec1(1.0);
  const Vec xb = m->sample_x_next(0, xa, za, stream);
  const Vec zb = m->sample_z_next(0, xa, xb, za, stream);
  CHECK(xb[0] == doctest::Approx(1.5));
  // 1 + 0.5 + 12.5 + 8 cos(1.2 t): 8 at t = 0, 8 cos(1.2) at t = 1.
  CHECK(zb[0] == doctest::Approx(22.0));
  const Vec zc = m->sample_z_next(1, xa, xb, za, stream);
  CHECK(zc[0] == doctest::Approx(14.0 + 8.0 * std::cos(1.2)));
  CHECK(m->predict_observation_mean(0, xa, za)[0] ==
        doctest::Approx(std::numbers::pi / 4 + 0.05));
}

TEST_CASE("model1 observation density at the origin") {
  const auto m = model1();
  CHECK(m->observation_density(0, vec1(0.0), vec1(0.0), vec1(0.0)) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("model2 zero-noise maps") {
  const auto m = model2(0.0);
  RngStream stream(1);

  const Vec x0 = vec2(0.0, 0.0), z0 = vec2(0.0, 0.0);
  const Vec x1 = m->sample_x_next(0, x0, z0, stream);
  const Vec z1 = m->sample_z_next(0, x0, x1, z0, stream);
  CHECK(x1[0] == doctest::Approx(0.0));  // 8 sin(0) = 0
  CHECK(x1[1] == doctest::Approx(0.0));
  CHECK(z1[0] == doctest::Approx(0.0));
  CHECK(z1[1] == doctest::Approx(8.0));  // 8 cos(1.2 * 0) = 8
  CHECK(m->predict_observation_mean(0, x0, z0)[0] == doctest::Approx(0.0));

  // Continuous time argument reaches the trigonometric forcing directly.
  const Vec xh = m->sample_x_next(std::numbers::pi / 2, x0, z0, stream);
  CHECK(xh[0] == doctest::Approx(8.0));
}

TEST_CASE("model2 noise covariance blocks match the printed matrix") {
  const auto m = model2();
  RngStream stream(99);
  const Vec x = vec2(0.4, -1.0), z = vec2(0.7, 2.0);
  const double t = 3.0;

  // Reconstruct the raw noises from sampled transitions: v_z1 = z1' - m_z1,
  // v_z2 = z2' - z1' - g(z2, t).
  const double m_z1 = z[0] + z[1] / (1.0 + z[1] * z[1]);
  const double g =
      0.5 * z[1] + 25.0 * z[1] / (1.0 + z[1] * z[1]) + 8.0 * std::cos(1.2 * t);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s11 = 0.0, s22 = 0.0, s12 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec x_next = m->sample_x_next(t, x, z, stream);
    const Vec z_next = m->sample_z_next(t, x, x_next, z, stream);
    const double v1 = z_next[0] - m_z1;
    const double v2 = z_next[1] - z_next[0] - g;
    s1 += v1;
    s2 += v2;
    s11 += v1 * v1;
    s22 += v2 * v2;
    s12 += v1 * v2;
  }
  const double mean1 = s1 / n, mean2 = s2 / n;
  CHECK(std::abs(mean1) < 0.02);
  CHECK(std::abs(mean2) < 0.05);
  CHECK(s11 / n - mean1 * mean1 == doctest::Approx(1.0).epsilon(0.03));
  CHECK(s22 / n - mean2 * mean2 == doctest::Approx(10.0).epsilon(0.03));
  CHECK(std::abs(s12 / n - mean1 * mean2 - 0.1) < 0.05);
}

TEST_CASE("swap(swap(model)) evaluates identically") {
  const auto m = model1();
  const auto round_trip = swap_decomposition(swap_decomposition(m));
  RngStream stream(5);
  for (int rep = 0; rep < 100; ++rep) {
    const double t = static_cast<double>(stream.uniform_index(50));
    const Vec x = vec1(4.0 * (stream.uniform() - 0.5));
    const Vec z = vec1(8.0 * (stream.uniform() - 0.5));
    const Vec xn = vec1(x[0] + 2.0 * (stream.uniform() - 0.5));
    const Vec zn = vec1(z[0] + 2.0 * (stream.uniform() - 0.5));
    const Vec y = vec1(stream.normal());
    CHECK(m->x_transition_log_density(t, xn, x, z) ==
          round_trip->x_transition_log_density(t, xn, x, z));
    CHECK(m->z_transition_log_density(t, zn, x, xn, z) ==
          round_trip->z_transition_log_density(t, zn, x, xn, z));
    CHECK(m->observation_log_density(t, y, x, z) ==
          round_trip->observation_log_density(t, y, x, z));
  }
}

TEST_CASE("swapped model1 mirrors the roles") {
  const auto swapped = swap_decomposition(model1(0.0));
  RngStream stream(1);
  const Vec outer0 = vec1(0.0), inner0 = vec1(0.0);
  const Vec outer1 = swapped->sample_x_next(0, outer0, inner0, stream);
  const Vec inner1 = swapped->sample_z_next(0, outer0, outer1, inner0, stream);
  CHECK(outer1[0] == doctest::Approx(8.0));   // the old z update
  CHECK(inner1[0] == doctest::Approx(0.0));   // the old x update
}

TEST_CASE("swapped model1 outer transition density is the old z marginal") {
  const auto swapped = swap_decomposition(model1());
  const double t = 2.0;
  const Vec a = vec1(0.3);   // old z value (now outer)
  const Vec b = vec1(-0.6);  // old x value (now inner)
  const double m_z = b[0] + 0.5 * a[0] + 25.0 * a[0] / (1.0 + a[0] * a[0]) +
                     8.0 * std::cos(1.2 * t);
  for (double candidate : {m_z, m_z + 1.0, m_z - 2.5}) {
    const double expected = -0.5 * (candidate - m_z) * (candidate - m_z) -
                            0.5 * std::log(2.0 * std::numbers::pi);
    CHECK(swapped->x_transition_log_density(t, vec1(candidate), a, b) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("swap preserves the joint one-step law") {
  const auto base = model1();
  const auto swapped = swap_decomposition(base);
  RngStream s1(31), s2(32);
  const double t = 3.0;
  const Vec x = vec1(0.3), z = vec1(-0.5);

  const int n = 100000;
  // Test functions of the joint next state, compared across the two routes
  // at their empirical standard errors.
  const auto test_functions = std::vector<std::function<double(double, double)>>{
      [](double a, double) { return a; },
      [](double, double b) { return b; },
      [](double a, double b) { return a * b; },
      [](double a, double) { return a * a; },
      [](double, double b) { return b * b; },
      [](double a, double b) { return std::sin(a + b); },
      [](double a, double) { return std::abs(a); },
  };
  const std::size_t nf = test_functions.size();
  std::vector<double> base_sum(nf, 0.0), base_sq(nf, 0.0);
  std::vector<double> swap_sum(nf, 0.0), swap_sq(nf, 0.0);
  for (int i = 0; i < n; ++i) {
    const Vec xn = base->sample_x_next(t, x, z, s1);
    const Vec zn = base->sample_z_next(t, x, xn, z, s1);
    // swapped model: outer = old z, inner = old x
    const Vec on = swapped->sample_x_next(t, z, x, s2);
    const Vec in = swapped->sample_z_next(t, z, on, x, s2);
    for (std::size_t f = 0; f < nf; ++f) {
      const double vb = test_functions[f](xn[0], zn[0]);
      const double vs = test_functions[f](in[0], on[0]);
      base_sum[f] += vb;
      base_sq[f] += vb * vb;
      swap_sum[f] += vs;
      swap_sq[f] += vs * vs;
    }
  }
  for (std::size_t f = 0; f < nf; ++f) {
    const double mb = base_sum[f] / n, ms = swap_sum[f] / n;
    const double vb = base_sq[f] / n - mb * mb;
    const double vs = swap_sq[f] / n - ms * ms;
    const double se = std::sqrt((vb + vs) / n) + 1e-12;
    CHECK(std::abs(mb - ms) < 3.0 * se);
  }
}

TEST_CASE("density/sampler chi-square consistency on 1-D slices") {
  RngStream stream(77);
  const int n = 100000;
  std::vector<double> samples(n);

  SUBCASE("model1 x-transition") {
    const auto m = model1();
    const Vec x = vec1(0.5), z = vec1(-1.2);
    const double mean = x[0] + z[0] / (1.0 + z[0] * z[0]);
    for (int i = 0; i < n; ++i) {
      samples[i] = m->sample_x_next(4, x, z, stream)[0];
    }
    const auto gof = oracles::chi2_gaussian_gof(samples, mean, 1.0);
    CHECK(gof.statistic < oracles::chi2_crit_999(gof.df));
  }

  SUBCASE("model1 z-transition conditional on x'") {
    const auto m = model1();
    const Vec x = vec1(0.5), z = vec1(-1.2);
    const Vec x_next = vec1(1.1);
    const double m_x = x[0] + z[0] / (1.0 + z[0] * z[0]);
    const double m_z = x[0] + 0.5 * z[0] + 25.0 * z[0] / (1.0 + z[0] * z[0]) +
                       8.0 * std::cos(1.2 * 4.0);
    // v_z | v_x ~ N(0.1 v_x, 0.99)
    const double mean = m_z + 0.1 * (x_next[0] - m_x);
    for (int i = 0; i < n; ++i) {
      samples[i] = m->sample_z_next(4, x, x_next, z, stream)[0];
    }
    const auto gof = oracles::chi2_gaussian_gof(samples, mean, std::sqrt(0.99));
    CHECK(gof.statistic < oracles::chi2_crit_999(gof.df));
  }

  SUBCASE("model1 observation") {
    const auto m = model1();
    const Vec x = vec1(0.7), z = vec1(2.0);
    const double mean = std::atan(x[0]) + z[0] * z[0] / 20.0;
    for (int i = 0; i < n; ++i) {
      samples[i] = m->sample_observation(4, x, z, stream)[0];
    }
    const auto gof = oracles::chi2_gaussian_gof(samples, mean, 1.0);
    CHECK(gof.statistic < oracles::chi2_crit_999(gof.df));
  }

  SUBCASE("model2 z2-transition marginal") {
    const auto m = model2();
    const Vec x = vec2(0.1, 0.2), z = vec2(0.5, -0.9);
    const Vec x_next = vec2(0.0, 0.0);  // x noise independent of the z block
    const double m_z1 = z[0] + z[1] / (1.0 + z[1] * z[1]);
    const double m_z2 = m_z1 + 0.5 * z[1] + 25.0 * z[1] / (1.0 + z[1] * z[1]) +
                        8.0 * std::cos(1.2 * 4.0);
    for (int i = 0; i < n; ++i) {
      samples[i] = m->sample_z_next(4, x, x_next, z, stream)[1];
    }
    const auto gof = oracles::chi2_gaussian_gof(samples, m_z2, std::sqrt(11.2));
    CHECK(gof.statistic < oracles::chi2_crit_999(gof.df));
  }

  SUBCASE("model1 prior") {
    const auto m = model1();
    for (int i = 0; i < n; ++i) {
      samples[i] = m->sample_x0(stream)[0];
    }
    const auto gof = oracles::chi2_gaussian_gof(samples, 0.0, 1.0);
    CHECK(gof.statistic < oracles::chi2_crit_999(gof.df));
  }
}

TEST_CASE("prediction mean equals the zero-noise observation sample") {
  const auto noiseless = model1(0.0);
  RngStream stream(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec x = vec1(stream.normal());
    const Vec z = vec1(stream.normal());
    const Vec h = noiseless->predict_observation_mean(7, x, z);
    const Vec sampled = noiseless->sample_observation(7, x, z, stream);
    CHECK(h[0] == sampled[0]);
  }
}

TEST_CASE("simulate_trajectory basics") {
  const auto m = model1();

  SUBCASE("T=1 yields a single state and observation") {
    RngStream stream(8);
    const Trajectory traj = simulate_trajectory(*m, 1, stream);
    CHECK(traj.length() == 1);
    CHECK(traj.xs.size() == 1);
  }

  SUBCASE("zero-noise recursion matches hand evaluation") {
    const auto skeleton = model1(0.0);
    RngStream stream(8);
    const Trajectory traj = simulate_trajectory(*skeleton, 3, stream);
    CHECK(traj.xs[0][0] == doctest::Approx(0.0));
    CHECK(traj.zs[0][0] == doctest::Approx(0.0));
    CHECK(traj.xs[1][0] == doctest::Approx(0.0));
    CHECK(traj.zs[1][0] == doctest::Approx(8.0));
    // t=1 -> t=2: x2 = x1 + z1/(1+z1^2); z2 = x1 + 0.5 z1 + 25 z1/(1+z1^2)
    //             + 8 cos(1.2)
    CHECK(traj.xs[2][0] == doctest::Approx(8.0 / 65.0));
    CHECK(traj.zs[2][0] ==
          doctest::Approx(4.0 + 200.0 / 65.0 + 8.0 * std::cos(1.2)));
    const double z2 = 4.0 + 200.0 / 65.0 + 8.0 * std::cos(1.2);
    CHECK(traj.ys[2][0] ==
          doctest::Approx(std::atan(8.0 / 65.0) + z2 * z2 / 20.0));
  }

  SUBCASE("fixed seed reproduces the trajectory") {
    RngStream s1(123), s2(123);
    const Trajectory a = simulate_trajectory(*m, 50, s1);
    const Trajectory b = simulate_trajectory(*m, 50, s2);
    for (int t = 0; t < 50; ++t) {
      CHECK(a.xs[t][0] == b.xs[t][0]);
      CHECK(a.zs[t][0] == b.zs[t][0]);
      CHECK(a.ys[t][0] == b.ys[t][0]);
    }
  }
}

TEST_CASE("trajectory csv round trip") {
  const auto m = model2();
  RngStream stream(55);
  const Trajectory traj = simulate_trajectory(*m, 20, stream);
  const std::string path = "trajectory_roundtrip_test.csv";
  save_trajectory_csv(traj, path);
  const Trajectory loaded = load_trajectory_csv(path, 2, 2, 1);
  REQUIRE(loaded.length() == traj.length());
  for (int t = 0; t < traj.length(); ++t) {
    CHECK((loaded.xs[t] - traj.xs[t]).norm() == 0.0);
    CHECK((loaded.zs[t] - traj.zs[t]).norm() == 0.0);
    CHECK((loaded.ys[t] - traj.ys[t]).norm() == 0.0);
  }
  std::remove(path.c_str());
}

TEST_CASE("linear gaussian identity dynamics with zero noise is constant") {
  const Mat a = Mat::Identity(2, 2);
  const auto m = linear_gaussian_model(1, 1, a, Mat::Identity(2, 2),
                                       Mat::Identity(2, 2), Mat::Zero(2, 2),
                                       0.25 * Mat::Identity(2, 2), Vec::Zero(2),
                                       Mat::Identity(2, 2));
  RngStream stream(4);
  const Trajectory traj = simulate_trajectory(*m, 10, stream);
  for (int t = 1; t < 10; ++t) {
    CHECK(traj.xs[t][0] == doctest::Approx(traj.xs[0][0]));
    CHECK(traj.zs[t][0] == doctest::Approx(traj.zs[0][0]));
  }
}

TEST_CASE("linear gaussian rejects indefinite noise") {
  Mat bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(
      linear_gaussian_model(1, 1, Mat::Identity(2, 2), Mat::Identity(2, 2),
                            Mat::Identity(2, 2), bad, Mat::Identity(2, 2),
                            Vec::Zero(2), Mat::Identity(2, 2)),
      NotPsdError);
}

namespace {

class OpaqueModel final : public StateSpaceModel {
 public:
  int dim_x() const override { return 1; }
  int dim_z() const override { return 1; }
  int dim_y() const override { return 1; }
  Vec sample_x0(RngStream&) const override { return Vec::Zero(1); }
  Vec sample_z0_given_x0(const VecRef&, RngStream&) const override {
    return Vec::Zero(1);
  }
  Vec sample_x_next(double, const VecRef&, const VecRef&,
                    RngStream&) const override {
    return Vec::Zero(1);
  }
  double x_transition_log_density(double, const VecRef&, const VecRef&,
                                  const VecRef&) const override {
    return 0.0;
  }
  Vec sample_z_next(double, const VecRef&, const VecRef&, const VecRef&,
                    RngStream&) const override {
    return Vec::Zero(1);
  }
  double z_transition_log_density(double, const VecRef&, const VecRef&,
                                  const VecRef&, const VecRef&) const override {
    return 0.0;
  }
  double observation_log_density(double, const VecRef&, const VecRef&,
                                 const VecRef&) const override {
    return 0.0;
  }
  Vec sample_observation(double, const VecRef&, const VecRef&,
                         RngStream&) const override {
    return Vec::Zero(1);
  }
  Vec predict_observation_mean(double, const VecRef&,
                               const VecRef&) const override {
    return Vec::Zero(1);
  }
};

}  // namespace

TEST_CASE("swap_decomposition rejects models without nested structure") {
  const auto opaque = std::make_shared<const OpaqueModel>();
  CHECK_THROWS_AS(swap_decomposition(opaque), NotSwappableError);
}

TEST_CASE("time switch swaps the dynamics at the change point") {
  const auto base = model1(0.0);
  const auto switched = time_switch_model(base, swapped_dynamics(base), 5.0);
  RngStream stream(1);
  const Vec x = vec1(1.0), z = vec1(2.0);
  // Before the switch: model1 dynamics.
  Vec xn = switched->sample_x_next(4.0, x, z, stream);
  CHECK(xn[0] == doctest::Approx(1.0 + 2.0 / 5.0));
  // From the switch on: x follows the old z law with the roles exchanged.
  xn = switched->sample_x_next(5.0, x, z, stream);
  CHECK(xn[0] == doctest::Approx(2.0 + 0.5 * 1.0 + 25.0 * 1.0 / 2.0 +
                                 8.0 * std::cos(1.2 * 5.0)));
  // Observation law is unchanged by the dynamics swap.
  CHECK(switched->predict_observation_mean(9.0, x, z)[0] ==
        doctest::Approx(std::atan(1.0) + 4.0 / 20.0));
}

TEST_CASE("swapping a time-switched model swaps both regimes") {
  const auto base = model1(0.0);
  const auto switched = time_switch_model(base, swapped_dynamics(base), 5.0);
  const auto swapped = swap_decomposition(switched);
  RngStream stream(1);
  // Swapped view before the switch: outer (= old z) follows the old z law.
  const Vec a = vec1(2.0), b = vec1(1.0);  // outer = old z = 2, inner = old x = 1
  Vec on = swapped->sample_x_next(4.0, a, b, stream);
  CHECK(on[0] == doctest::Approx(1.0 + 0.5 * 2.0 + 25.0 * 2.0 / 5.0 +
                                 8.0 * std::cos(1.2 * 4.0)));
  // After the switch the physical x follows the old z law; in the swapped
  // view the outer variable is the physical z, which now follows the old x
  // law: z' = z + x/(1+x^2) with roles exchanged...
  on = swapped->sample_x_next(5.0, a, b, stream);
  CHECK(on[0] == doctest::Approx(2.0 + 1.0 / 2.0));
}
