#include "procbench/env.hpp"

#include <cmath>

namespace procbench {

bool ContinuousSpace::contains(std::span<const double> x) const {
  if (x.size() != low.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= low[i] && x[i] <= high[i])) return false;
  }
  return true;
}

Vector ContinuousSpace::sample(Rng& rng) const {
  Vector x(low.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = low[i] == high[i] ? low[i] : rng.uniform(low[i], high[i]);
  }
  return x;
}

ContinuousSpace make_space(Vector low, Vector high) {
  if (low.size() != high.size()) throw Error(Errc::InvalidArgument, "space bounds differ in length");
  for (std::size_t i = 0; i < low.size(); ++i) {
    if (!(low[i] <= high[i])) {
      throw Error(Errc::InvalidArgument, "space bound " + std::to_string(i) + " has low > high");
    }
  }
  return ContinuousSpace{std::move(low), std::move(high)};
}

ContinuousSpace read_space(ConfigReader& reader, const std::string& key, ContinuousSpace fallback) {
  ConfigReader sub = reader.child(key);
  sub.read_exact("low", fallback.low);
  sub.read_exact("high", fallback.high);
  sub.finish();
  return make_space(fallback.low, fallback.high);
}

bool validate_episode_config(const EpisodeConfig& cfg, double r_min) {
  return cfg.error_reward <= r_min * static_cast<double>(cfg.max_steps);
}

Json Environment::metadata() const {
  const auto& c = config();
  return Json{{"env_name", name()},
              {"a_dim", c.action_space.dim()},
              {"o_dim", c.observation_space.dim()},
              {"max_steps", c.max_steps},
              {"error_reward", c.error_reward},
              {"reward_floor", reward_floor()}};
}

void EpisodicEnv::read_episode_overrides(ConfigReader& reader) {
  ConfigReader ep = reader.child("episode");
  ep.read("max_steps", cfg_.max_steps);
  ep.read("error_reward", cfg_.error_reward);
  ep.finish();
  if (cfg_.max_steps < 1) throw Error(Errc::ConfigError, "episode.max_steps must be positive");
}

void EpisodicEnv::check_episode_config() const {
  const double r_min = reward_floor();
  if (!validate_episode_config(cfg_, r_min)) {
    throw Error(Errc::ConfigError,
                "error_reward " + std::to_string(cfg_.error_reward) + " exceeds r_min * max_steps = " +
                    std::to_string(r_min * cfg_.max_steps));
  }
}

Vector EpisodicEnv::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  sample_initial_state(rng_);
  steps_ = 0;
  started_ = true;
  finished_ = false;
  last_obs_ = observe();
  return last_obs_;
}

StepResult EpisodicEnv::step(std::span<const double> action) {
  if (!started_) throw Error(Errc::EpisodeNotStarted, "step() called before reset()");
  if (finished_) throw Error(Errc::EpisodeFinished, "step() called after the episode ended");
  if (action.size() != cfg_.action_space.dim()) {
    throw Error(Errc::DimMismatch, "action has " + std::to_string(action.size()) + " entries, expected " +
                                       std::to_string(cfg_.action_space.dim()));
  }

  StepResult out;
  auto fail = [&] {
    finished_ = true;
    out.observation = last_obs_;
    out.reward = cfg_.error_reward;
    out.terminal = true;
    out.failure = true;
    return out;
  };

  if (!cfg_.action_space.contains(action)) return fail();
  const Vector saved = x_;
  try {
    advance(action);
  } catch (const Error&) {
    x_ = saved;
    return fail();
  }
  ++steps_;
  Vector obs = observe();
  if (!state_valid() || !all_finite(obs) || !cfg_.observation_space.contains(obs)) return fail();

  out.reward = transition_reward(action);
  if (!std::isfinite(out.reward)) return fail();
  out.observation = std::move(obs);
  last_obs_ = out.observation;
  if (goal_reached()) {
    out.terminal = true;
  } else if (steps_ >= cfg_.max_steps) {
    out.timeout = true;
  }
  finished_ = out.terminal || out.timeout;
  return out;
}

}  // namespace procbench
