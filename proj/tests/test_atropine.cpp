#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "procbench/atropine.hpp"

using namespace procbench;

namespace {

const LinearPlantModel kModel = LinearPlantModel::identified();

// Spectral radius of a 2x2 matrix via the characteristic polynomial.
double spectral_radius(double a, double b, double c, double d) {
  const std::complex<double> tr = a + d, det = a * d - b * c;
  const std::complex<double> disc = std::sqrt(tr * tr - 4.0 * det);
  return std::max(std::abs((tr + disc) / 2.0), std::abs((tr - disc) / 2.0));
}

}  // namespace

TEST(Atropine, LinStepExamples) {
  EXPECT_EQ(lin_step(kModel, Eigen::Vector2d::Zero(), Eigen::Vector4d::Zero()), Eigen::Vector2d::Zero());
  const Eigen::Vector2d x1 = lin_step(kModel, Eigen::Vector2d(1, 0), Eigen::Vector4d::Zero());
  EXPECT_NEAR(x1(0), 0.8543, 1e-12);
  EXPECT_NEAR(x1(1), 0.0195, 1e-12);
  const Eigen::Vector2d x2 = lin_step(kModel, Eigen::Vector2d::Zero(), Eigen::Vector4d(1, 0, 0, 0));
  EXPECT_NEAR(x2(0), -0.0382, 1e-12);
  EXPECT_NEAR(x2(1), -0.0051, 1e-12);
}

TEST(Atropine, LinOutputExamples) {
  const AtropineOperatingPoint op;
  EXPECT_EQ(op.y_ss + lin_output(kModel, Eigen::Vector2d::Zero()), 13.057);
  EXPECT_NEAR(lin_output(kModel, Eigen::Vector2d(1, 0)), -148.6124, 1e-12);
  EXPECT_NEAR(lin_output(kModel, Eigen::Vector2d(0, -1)), 46.8132, 1e-12);
}

TEST(Atropine, KalmanExamples) {
  const Eigen::Vector2d zero = Eigen::Vector2d::Zero();
  EXPECT_EQ(kalman_update(kModel, zero, Eigen::Vector4d::Zero(), 0.0), zero);
  const Eigen::Vector2d k = kalman_update(kModel, zero, Eigen::Vector4d::Zero(), 1.0);
  EXPECT_NEAR(k(0), -0.0093, 1e-12);
  EXPECT_NEAR(k(1), 0.0115, 1e-12);
}

TEST(Atropine, KalmanErrorDecays) {
  Eigen::Vector2d x(0.3, -0.2), x_hat = Eigen::Vector2d::Zero();
  const double e0 = (x - x_hat).norm();
  Rng rng(1);
  for (int k = 0; k < 40; ++k) {
    const Eigen::Vector4d u(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                            rng.uniform(-0.1, 0.1));
    const double y = lin_output(kModel, x);
    x_hat = kalman_update(kModel, x_hat, u, y);
    x = lin_step(kModel, x, u);
  }
  EXPECT_LE((x - x_hat).norm(), e0 / 10.0);
}

TEST(Atropine, StabilityOfModelAndFilter) {
  const auto& A = kModel.A;
  EXPECT_LT(spectral_radius(A(0, 0), A(0, 1), A(1, 0), A(1, 1)), 1.0);
  const Eigen::Matrix2d F = A - kModel.K * kModel.C;
  EXPECT_LT(spectral_radius(F(0, 0), F(0, 1), F(1, 0), F(1, 1)), 1.0);
}

TEST(Atropine, Reward) {
  EXPECT_EQ(atropine_reward(13.057), -13.057);
  EXPECT_EQ(atropine_reward(0.0), 0.0);
  EXPECT_GT(atropine_reward(1.0), atropine_reward(1.5));
}

TEST(Atropine, Mixer) {
  EXPECT_EQ(mixer_balance({{1.0, 2.0}}), (Vector{1.0, 2.0}));
  EXPECT_EQ(mixer_balance({{1.0, 2.0}, {3.0, 4.0}}), (Vector{4.0, 6.0}));
  Rng rng(8);
  std::vector<Vector> inlets(7, Vector(3));
  Vector fold(3, 0.0);
  for (auto& s : inlets)
    for (std::size_t i = 0; i < 3; ++i) {
      s[i] = rng.uniform(0, 5);
      fold[i] = fold[i] + s[i];
    }
  const Vector out = mixer_balance(inlets);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(out[i], fold[i], 1e-12);
  EXPECT_THROW(mixer_balance({{1.0}, {1.0, 2.0}}), Error);
}

TEST(Atropine, TubularMol) {
  const Vector inlet{2.0, 3.0};
  Vector uniform{2, 2, 2, 2, 3, 3, 3, 3};
  for (double v : tubular_mol_rhs(uniform, 2, inlet, 0.5, 0.1)) EXPECT_EQ(v, 0.0);

  Vector pulse(8, 0.0);
  pulse[1] = 1.0;
  const Vector d = tubular_mol_rhs(pulse, 2, Vector{0, 0}, 0.5, 0.1);
  EXPECT_LT(d[1], 0.0);
  EXPECT_GT(d[2], 0.0);
  EXPECT_NEAR(d[1] + d[2], 0.0, 1e-12);
  for (int j : {0, 3, 4, 5, 6, 7}) EXPECT_EQ(d[j], 0.0);

  // Linear profile c_j = 1 + 0.4 j per segment: derivative -Q * 0.4 / dV.
  Vector ramp(5);
  for (int j = 0; j < 5; ++j) ramp[j] = 1.0 + 0.4 * j;
  const Vector r = tubular_mol_rhs(ramp, 1, Vector{0.6}, 0.5, 0.2);
  for (double v : r) EXPECT_NEAR(v, -0.5 * 0.4 / 0.2, 1e-12);

  const Vector with_rate = tubular_mol_rhs(uniform, 2, inlet, 0.5, 0.1,
                                           [](std::size_t, std::span<const double> c, std::span<double> out) {
                                             out[0] = -c[0];
                                             out[1] = c[0];
                                           });
  EXPECT_EQ(with_rate[0], -2.0);
  EXPECT_EQ(with_rate[4], 2.0);
}

TEST(AtropineEnv, EpisodeShapeAndBounds) {
  AtropineEnv env;
  EXPECT_EQ(env.config().action_space.dim(), 4u);
  EXPECT_EQ(env.config().max_steps, 60);
  EXPECT_EQ(env.config().error_reward, -100000.0);
  EXPECT_TRUE(validate_episode_config(env.config(), env.reward_floor()));
  EXPECT_EQ(env.metadata()["published_o_dim"], 39);
}

TEST(AtropineEnv, ZeroDeviationHoldsEquilibrium) {
  AtropineEnv env(Json{{"init_half_width", 0.0}});
  env.reset(5);
  StepResult r;
  for (int k = 0; k < 60; ++k) {
    r = env.step(env.nominal_action());
    ASSERT_FALSE(r.failure);
    EXPECT_EQ(env.state()[0], 0.0);
    EXPECT_EQ(env.state()[1], 0.0);
    EXPECT_EQ(r.reward, -13.057);
  }
  EXPECT_TRUE(r.timeout);
}

TEST(AtropineEnv, AbsoluteBoundsViolationFails) {
  AtropineEnv env;
  env.reset(1);
  Vector a = env.nominal_action();
  a[2] = 5.01;
  const StepResult r = env.step(a);
  EXPECT_TRUE(r.failure);
  EXPECT_EQ(r.reward, -100000.0);
}

TEST(AtropineEnv, FreeResponseDecays) {
  Eigen::Vector2d x(1.0, -1.0);
  double prev = x.norm();
  for (int k = 0; k < 200; ++k) x = lin_step(kModel, x, Eigen::Vector4d::Zero());
  EXPECT_LT(x.norm(), 1e-6 * prev);
}
