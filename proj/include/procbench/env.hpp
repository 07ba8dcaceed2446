#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "procbench/config.hpp"
#include "procbench/random.hpp"
#include "procbench/sim_core.hpp"

namespace procbench {

struct ContinuousSpace {
  Vector low;
  Vector high;

  std::size_t dim() const { return low.size(); }
  bool contains(std::span<const double> x) const;
  // Uniform sample; zero-width coordinates return low[i].
  Vector sample(Rng& rng) const;
};

// Throws InvalidArgument unless low.size() == high.size() and low <= high.
ContinuousSpace make_space(Vector low, Vector high);

struct EpisodeConfig {
  int max_steps = 0;
  double error_reward = 0.0;
  ContinuousSpace action_space;
  ContinuousSpace observation_space;
};

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool terminal = false;
  bool timeout = false;
  bool failure = false;
};

// Optional {low, high} override of a box; lengths must match the default.
ContinuousSpace read_space(ConfigReader& reader, const std::string& key, ContinuousSpace fallback);

// error_reward <= r_min * max_steps.
bool validate_episode_config(const EpisodeConfig& cfg, double r_min);

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual const EpisodeConfig& config() const = 0;
  virtual Vector reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::span<const double> action) = 0;

  // Least per-step reward reachable without failure.
  virtual double reward_floor() const = 0;
  // Action that holds the nominal operating point.
  virtual Vector nominal_action() const = 0;
  virtual const Vector& state() const = 0;
  virtual int steps_taken() const = 0;
  virtual Json metadata() const;
};

// Shared reset/step bookkeeping. Subclasses provide the physics through the
// protected hooks; step() applies them in this order: action bounds, advance,
// observation bounds.
class EpisodicEnv : public Environment {
 public:
  const EpisodeConfig& config() const override { return cfg_; }
  Vector reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  const Vector& state() const override { return x_; }
  int steps_taken() const override { return steps_; }

 protected:
  virtual void sample_initial_state(Rng& rng) = 0;
  // Advance one control interval. Any Error thrown counts as failure.
  virtual void advance(std::span<const double> action) = 0;
  virtual Vector observe() const = 0;
  virtual bool state_valid() const { return all_finite(x_); }
  // Reward for the transition just simulated; steps_taken() already counts it.
  virtual double transition_reward(std::span<const double> action) = 0;
  virtual bool goal_reached() const { return false; }

  // Reads episode.max_steps / episode.error_reward overrides.
  void read_episode_overrides(ConfigReader& reader);
  // Throws ConfigError when the error-reward inequality does not hold.
  void check_episode_config() const;

  EpisodeConfig cfg_;
  Vector x_;
  Rng rng_{0};

 private:
  bool started_ = false;
  bool finished_ = false;
  int steps_ = 0;
  Vector last_obs_;
};

}  // namespace procbench
