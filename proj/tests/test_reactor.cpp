#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "procbench/reactor.hpp"

using namespace procbench;

namespace {

// Straight transcription of the three balances, SI units throughout.
Vector reference_rhs(double c, double T, double h, double q_out, double T_c) {
  const double q_in = 0.1, r = 0.219, c_Af = 1.0, T_f = 350.0, E_R = 8750.0, k0 = 7.2e10;
  const double dH_J_per_kmol = 5.0e4 * 1000.0;
  const double U_J = 5.0e4;
  const double cp_J = 239.0, rho = 1000.0;
  const double V = M_PI * r * r * h;
  const double k = k0 * std::exp(-E_R / T);
  return {q_in / V * (c_Af - c) - k * c,
          q_in / V * (T_f - T) + dH_J_per_kmol / (rho * cp_J) * k * c + 2.0 * U_J / (r * rho * cp_J) * (T_c - T),
          (q_in - q_out) / (M_PI * r * r)};
}

Vector rhs(const CstrParams& p, const Vector& x, const Vector& u) {
  Vector d(3);
  cstr_rhs(x, u, p, d);
  return d;
}

Json pinned_start(const ReactorEnv& env) {
  const Vector& xs = env.steady_state();
  return Json{{"init_box", {{"low", xs}, {"high", xs}}}};
}

}  // namespace

TEST(CstrRhs, BalancedFlowsKeepLevel) {
  const CstrParams p;
  EXPECT_EQ(rhs(p, {0.7, 330.0, 0.5}, {p.q_in, 300.0})[2], 0.0);
}

TEST(CstrRhs, OnlyFeedTermSurvives) {
  const CstrParams p;
  const double h = 0.6;
  const Vector d = rhs(p, {0.0, p.T_f, h}, {p.q_in, p.T_f});
  EXPECT_DOUBLE_EQ(d[0], p.q_in / (M_PI * p.r * p.r * h) * p.c_Af);
  EXPECT_NEAR(d[1], 0.0, 1e-12);
}

TEST(CstrRhs, MatchesReferenceTranscription) {
  const CstrParams p;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double c = rng.uniform(0, 2), T = rng.uniform(280, 450), h = rng.uniform(0.05, 1);
    const double q = rng.uniform(0, 0.3), Tc = rng.uniform(290, 340);
    const Vector got = rhs(p, {c, T, h}, {q, Tc});
    const Vector want = reference_rhs(c, T, h, q, Tc);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(got[k], want[k], 1e-12 * std::max(1.0, std::abs(want[k])));
  }
}

TEST(CstrRhs, DegenerateLevel) {
  const CstrParams p;
  try {
    rhs(p, {0.5, 300.0, 1e-7}, {0.1, 300.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateLevel);
  }
}

TEST(CstrRhs, CoolantMonotoneAndLevelDecoupled) {
  const CstrParams p;
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Vector x{rng.uniform(0, 2), rng.uniform(280, 450), rng.uniform(0.05, 1)};
    const double q = rng.uniform(0, 0.3), tc = rng.uniform(290, 339);
    EXPECT_GE(rhs(p, x, {q, tc + 1.0})[1], rhs(p, x, {q, tc})[1]);
    const Vector other{rng.uniform(0, 2), rng.uniform(280, 450), x[2]};
    EXPECT_EQ(rhs(p, x, {q, tc})[2], rhs(p, other, {q, tc})[2]);
  }
}

TEST(ReactorReward, Examples) {
  EXPECT_EQ(reactor_reward(Vector{0.8, 330, 0.6}, 0.8, 0.6), 0.0);
  EXPECT_DOUBLE_EQ(reactor_reward(Vector{1.6, 330, 0.6}, 0.8, 0.6), -1.0);
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const double c = rng.uniform(0, 2), h = rng.uniform(0.05, 1);
    const double want = -(std::pow((c - 0.8) / 0.8, 2) + std::pow((h - 0.6) / 0.6, 2));
    EXPECT_DOUBLE_EQ(reactor_reward(Vector{c, 300, h}, 0.8, 0.6), want);
  }
}

TEST(ReactorEnv, SteadyStateResidualVerifiedIndependently) {
  ReactorEnv env;
  const Vector& xs = env.steady_state();
  const Vector f = reference_rhs(xs[0], xs[1], xs[2], 0.1, 300.0);
  EXPECT_LE(max_abs(f), 1e-10);
  EXPECT_LE(env.steady_state_residual(), 1e-10);
}

TEST(ReactorEnv, EquilibriumPersists) {
  ReactorEnv probe;
  ReactorEnv env(pinned_start(probe));
  env.reset(1);
  const Vector xs = env.steady_state();
  for (int k = 0; k < 50; ++k) {
    const StepResult r = env.step(env.nominal_action());
    ASSERT_FALSE(r.failure);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(env.state()[i], xs[i], 1e-6);
  }
}

TEST(ReactorEnv, EpisodeShape) {
  ReactorEnv env;
  EXPECT_EQ(env.config().action_space.dim(), 2u);
  EXPECT_EQ(env.config().observation_space.dim(), 3u);
  EXPECT_EQ(env.config().max_steps, 100);
  EXPECT_EQ(env.config().error_reward, -1000.0);
  EXPECT_TRUE(validate_episode_config(env.config(), env.reward_floor()));
}

TEST(ReactorEnv, RewardFloorIsBoxMinimum) {
  ReactorEnv env;
  Rng rng(2);
  const auto& box = env.state_box();
  for (int i = 0; i < 2000; ++i) {
    const Vector x = box.sample(rng);
    EXPECT_GE(reactor_reward(x, env.c_setpoint(), env.h_setpoint()), env.reward_floor() - 1e-12);
  }
}

TEST(ValidateEpisodeConfig, Examples) {
  EpisodeConfig cfg;
  cfg.max_steps = 100;
  cfg.error_reward = -1000;
  EXPECT_TRUE(validate_episode_config(cfg, -10.0));
  cfg.max_steps = 200;
  cfg.error_reward = -200;
  EXPECT_TRUE(validate_episode_config(cfg, -1.0));
  cfg.max_steps = 10;
  cfg.error_reward = 0;
  EXPECT_FALSE(validate_episode_config(cfg, -1.0));
}

TEST(ReactorEnv, ConfigRejectsWeakErrorReward) {
  EXPECT_THROW(ReactorEnv(Json{{"episode", {{"error_reward", -1.0}}}}), Error);
  EXPECT_THROW(ReactorEnv(Json{{"no_such_key", 1}}), Error);
}

TEST(ReactorEnv, ResetIsDeterministic) {
  ReactorEnv a, b;
  EXPECT_EQ(a.reset(42), b.reset(42));
  EXPECT_NE(a.reset(42), a.reset(43));
}

TEST(ReactorEnv, ResetsStayInInitBox) {
  ReactorEnv env;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    env.reset(s);
    ASSERT_TRUE(env.init_box().contains(env.state()));
  }
}

TEST(ReactorEnv, OutOfBoundsActionFails) {
  ReactorEnv env;
  const Vector obs0 = env.reset(4);
  const StepResult r = env.step(Vector{0.5, 300.0});
  EXPECT_TRUE(r.failure);
  EXPECT_TRUE(r.terminal);
  EXPECT_FALSE(r.timeout);
  EXPECT_EQ(r.reward, -1000.0);
  EXPECT_EQ(r.observation, obs0);
  try {
    env.step(env.nominal_action());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EpisodeFinished);
  }
}

TEST(ReactorEnv, StepBeforeResetIsRejected) {
  ReactorEnv env;
  try {
    env.step(env.nominal_action());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EpisodeNotStarted);
  }
}

TEST(ReactorEnv, TimeoutAfterMaxSteps) {
  ReactorEnv probe;
  ReactorEnv env(pinned_start(probe));
  env.reset(0);
  StepResult r;
  for (int k = 0; k < 100; ++k) {
    r = env.step(env.nominal_action());
    ASSERT_FALSE(r.failure);
    if (k < 99) ASSERT_FALSE(r.timeout);
  }
  EXPECT_TRUE(r.timeout);
  EXPECT_FALSE(r.terminal);
}

TEST(ReactorEnv, NonFiniteStateFails) {
  ReactorEnv env;
  env.reset(0);
  env.set_state({std::numeric_limits<double>::quiet_NaN(), 330.0, 0.6});
  const StepResult r = env.step(env.nominal_action());
  EXPECT_TRUE(r.failure);
  EXPECT_EQ(r.reward, -1000.0);
}

TEST(ReactorEnv, ReplayIsBitIdentical) {
  ReactorEnv env;
  Rng actions(77);
  std::vector<Vector> acts;
  for (int k = 0; k < 30; ++k) acts.push_back({actions.uniform(0.08, 0.12), actions.uniform(295, 305)});
  auto run = [&] {
    std::vector<Vector> out;
    out.push_back(env.reset(123));
    for (const auto& a : acts) {
      const StepResult r = env.step(a);
      out.push_back(r.observation);
      out.push_back({r.reward});
      EXPECT_GE(r.reward, env.config().error_reward);
      if (r.terminal || r.timeout) break;
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}
