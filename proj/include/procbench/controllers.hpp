#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "procbench/config.hpp"
#include "procbench/dataset.hpp"
#include "procbench/env.hpp"

namespace procbench {

// A policy driven episode by episode. Controllers carry their own state and
// must not be shared between concurrently running episodes.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(std::uint64_t seed) { (void)seed; }
  virtual Vector act(std::span<const double> obs, int step) = 0;
  virtual void end_episode(double episode_return) { (void)episode_return; }
  // True when an episode depends on the outcome of earlier ones, so episodes
  // must run one after another.
  virtual bool sequential() const { return false; }
};

const std::vector<std::string>& environment_names();
// Throws ConfigError for an unknown name.
std::unique_ptr<Environment> make_environment(const std::string& name, const Json& config = Json::object());

std::vector<std::string> supported_controllers(const std::string& env_name);
// The baseline each environment's reference dataset is generated with.
std::string default_baseline(const std::string& env_name);
// env must outlive the controller. Throws ConfigError for unsupported pairs
// or unknown config keys.
std::unique_ptr<Controller> make_controller(const std::string& name, const Environment& env,
                                            const Json& config = Json::object());

struct EpisodeSummary {
  std::size_t episode_id = 0;
  std::uint64_t seed = 0;
  int steps = 0;
  double episode_return = 0.0;
  bool terminal = false;
  bool timeout = false;
  bool failure = false;
};

std::uint64_t episode_seed(std::uint64_t run_seed, std::size_t episode_id);

// Runs one episode from reset to terminal or timeout, recording transitions
// when rec is given.
EpisodeSummary run_episode(Environment& env, Controller& ctrl, std::size_t episode_id, std::uint64_t seed,
                           DatasetRecorder* rec = nullptr);

Json to_json(const EpisodeSummary& s);

}  // namespace procbench
