#include "procbench/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "procbench/atropine.hpp"
#include "procbench/bayesopt.hpp"
#include "procbench/beer.hpp"
#include "procbench/control.hpp"
#include "procbench/mab.hpp"
#include "procbench/pensim.hpp"
#include "procbench/reactor.hpp"

namespace procbench {

namespace {

Vector clip(Vector u, const ContinuousSpace& box) {
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::clamp(u[i], box.low[i], box.high[i]);
  return u;
}

void read_solver(ConfigReader& r, SolverOptions& o) {
  r.read("max_iterations", o.max_iterations);
  r.read("tolerance", o.tolerance);
  if (o.max_iterations < 1 || !(o.tolerance > 0.0)) throw Error(Errc::ConfigError, "bad solver options");
}

// ---------------------------------------------------------------- generic

class HoldNominal : public Controller {
 public:
  explicit HoldNominal(const Environment& env) : u_(env.nominal_action()) {}
  std::string name() const override { return "zero"; }
  Vector act(std::span<const double>, int) override { return u_; }

 private:
  Vector u_;
};

class UniformRandom : public Controller {
 public:
  explicit UniformRandom(const Environment& env) : box_(env.config().action_space) {}
  std::string name() const override { return "random"; }
  void begin_episode(std::uint64_t seed) override { rng_ = Rng(mix_seed(seed, 0x5eed)); }
  Vector act(std::span<const double>, int) override { return box_.sample(rng_); }

 private:
  ContinuousSpace box_;
  Rng rng_{0};
};

// ---------------------------------------------------------------- reactor

// Level by outlet flow (reverse acting, negative gains) and reactor
// temperature by coolant temperature.
class ReactorPid : public Controller {
 public:
  ReactorPid(const ReactorEnv& env, const Json& config) : env_(env) {
    const auto& box = env.config().action_space;
    level_ = {-0.075, -0.005, 0.0, box.low[0], box.high[0], env.nominal_action()[0], true};
    temp_ = {0.5, 0.05, 0.0, box.low[1], box.high[1], env.nominal_action()[1], true};
    ConfigReader r(config, "controller");
    r.read("level_kp", level_.k_p);
    r.read("level_ki", level_.k_i);
    r.read("temp_kp", temp_.k_p);
    r.read("temp_ki", temp_.k_i);
    r.finish();
  }
  std::string name() const override { return "pid"; }
  void begin_episode(std::uint64_t) override { s_level_ = s_temp_ = PidState{}; }
  Vector act(std::span<const double> obs, int) override {
    const double dt = env_.step_minutes();
    const PidOutput lv = pid_step(level_, env_.h_setpoint(), obs[2], s_level_, dt);
    const PidOutput tc = pid_step(temp_, env_.steady_state()[1], obs[1], s_temp_, dt);
    s_level_ = lv.state;
    s_temp_ = tc.state;
    return {lv.u, tc.u};
  }

 private:
  const ReactorEnv& env_;
  PidGains level_, temp_;
  PidState s_level_, s_temp_;
};

// Tracking MPC on the CSTR model with relative-error weights.
class ReactorMpc : public Controller {
 public:
  ReactorMpc(const ReactorEnv& env, const Json& config) : box_(env.config().action_space) {
    int substeps = 5;
    double input_weight = 0.01;
    spec_.horizon = 20;
    ConfigReader r(config, "controller");
    r.read("horizon", spec_.horizon);
    r.read("substeps", substeps);
    r.read("input_weight", input_weight);
    read_solver(r, opts_);
    r.finish();
    if (spec_.horizon < 1 || substeps < 1 || input_weight < 0.0) throw Error(Errc::ConfigError, "bad MPC settings");
    model_ = std::make_unique<OdePredictionModel>(env.system(), 2, env.step_minutes(), substeps);
    spec_.x_s = env.steady_state();
    spec_.x_s[0] = env.c_setpoint();
    spec_.x_s[2] = env.h_setpoint();
    spec_.u_s = env.nominal_action();
    for (double v : spec_.x_s) spec_.Q.push_back(1.0 / (v * v));
    for (std::size_t i = 0; i < 2; ++i) spec_.R.push_back(input_weight / std::pow(box_.high[i] - box_.low[i], 2));
    spec_.u_lo = box_.low;
    spec_.u_hi = box_.high;
    spec_.x_lo = env.state_box().low;
    spec_.x_hi = env.state_box().high;
  }
  std::string name() const override { return "mpc"; }
  void begin_episode(std::uint64_t) override { warm_.clear(); }
  Vector act(std::span<const double> obs, int) override {
    const ShootingResult r = solve_mpc(spec_, *model_, obs, warm_, opts_);
    warm_ = shift_warm_start(r.U);
    return clip(r.u0, box_);
  }

 private:
  ContinuousSpace box_;
  MpcSpec spec_;
  SolverOptions opts_;
  std::unique_ptr<OdePredictionModel> model_;
  std::vector<Vector> warm_;
};

// ---------------------------------------------------------------- atropine

// Identified deviation model driven by the absolute flows.
class AtropineModel : public PredictionModel {
 public:
  AtropineModel(const LinearPlantModel& m, const Eigen::Vector4d& q_ss) : m_(m), q_ss_(q_ss) {}
  std::size_t state_dim() const override { return 2; }
  std::size_t input_dim() const override { return 4; }
  void advance(std::span<double> x, std::span<const double> u) const override {
    const Eigen::Vector4d du = Eigen::Vector4d(u[0], u[1], u[2], u[3]) - q_ss_;
    const Eigen::Vector2d next = lin_step(m_, Eigen::Vector2d(x[0], x[1]), du);
    x[0] = next(0);
    x[1] = next(1);
  }

 private:
  LinearPlantModel m_;
  Eigen::Vector4d q_ss_;
};

// Output-tracking MPC of the E-factor on the Kalman estimate.
class AtropineMpc : public Controller {
 public:
  AtropineMpc(const AtropineEnv& env, const Json& config)
      : box_(env.config().action_space), model_(env.model(), env.operating_point().q_ss) {
    const auto& op = env.operating_point();
    double target = 0.9 * op.y_ss, input_weight = 0.01, state_fraction = 0.8;
    prob_.horizon = 10;
    ConfigReader r(config, "controller");
    r.read("horizon", prob_.horizon);
    r.read("e_factor_target", target);
    r.read("input_weight", input_weight);
    r.read("state_fraction", state_fraction);
    read_solver(r, opts_);
    r.finish();
    if (prob_.horizon < 1 || input_weight < 0.0 || !(state_fraction > 0.0 && state_fraction <= 1.0)) {
      throw Error(Errc::ConfigError, "bad MPC settings");
    }
    const LinearPlantModel m = env.model();
    const Eigen::Vector4d q_ss = op.q_ss;
    const double y_ss = op.y_ss, range = op.q_max - op.q_min;
    prob_.model = &model_;
    prob_.u_lo = box_.low;
    prob_.u_hi = box_.high;
    prob_.stage = [m, q_ss, y_ss, target, input_weight, range](int, std::span<const double> x,
                                                                std::span<const double> u) {
      const double e = (y_ss + lin_output(m, Eigen::Vector2d(x[0], x[1])) - target) / y_ss;
      double du = 0.0;
      for (int i = 0; i < 4; ++i) du += std::pow((u[i] - q_ss(i)) / range, 2);
      return e * e + input_weight * du;
    };
    const double limit = state_fraction * env.state_limit();
    prob_.x_lo = {-limit, -limit};
    prob_.x_hi = {limit, limit};
  }
  std::string name() const override { return "mpc"; }
  void begin_episode(std::uint64_t) override { warm_.clear(); }
  Vector act(std::span<const double> obs, int) override {
    const ShootingResult r = solve_shooting(prob_, obs.subspan(0, 2), warm_, opts_);
    warm_ = shift_warm_start(r.U);
    return clip(r.u0, box_);
  }

 private:
  ContinuousSpace box_;
  AtropineModel model_;
  ShootingProblem prob_;
  SolverOptions opts_;
  std::vector<Vector> warm_;
};

// ---------------------------------------------------------------- mAb

// Upstream-model controllers; the downstream velocities are held nominal.
class MabController : public Controller {
 public:
  MabController(const MabEnv& env, const Json& config, bool economic)
      : economic_(economic), box_(env.config().action_space), u_nominal_(env.nominal_action()) {
    int horizon = 100, substeps = 6;
    double input_weight = 0.01;
    opts_.max_iterations = 10;
    ConfigReader r(config, "controller");
    r.read("horizon", horizon);
    r.read("substeps", substeps);
    r.read("input_weight", input_weight);
    read_solver(r, opts_);
    r.finish();
    if (horizon < 1 || substeps < 1 || input_weight < 0.0) throw Error(Errc::ConfigError, "bad MPC settings");
    model_ = std::make_unique<OdePredictionModel>(env.upstream(), up::kInputDim, env.step_minutes(), substeps);
    const Vector u_lo(box_.low.begin(), box_.low.begin() + up::kInputDim);
    const Vector u_hi(box_.high.begin(), box_.high.begin() + up::kInputDim);
    const Vector u_s(u_nominal_.begin(), u_nominal_.begin() + up::kInputDim);
    if (economic_) {
      empc_.horizon = horizon;
      empc_.ell_e = [](std::span<const double> x, std::span<const double> u) { return economic_objective(x, u); };
      empc_.u_lo = u_lo;
      empc_.u_hi = u_hi;
      empc_.x_lo = env.state_box().low;
      empc_.x_hi = env.state_box().high;
      empc_.u_hold = u_s;
    } else {
      mpc_.horizon = horizon;
      mpc_.x_s = env.nominal_state();
      mpc_.u_s = u_s;
      for (double v : mpc_.x_s) mpc_.Q.push_back(1.0 / std::max(1.0, v * v));
      for (std::size_t i = 0; i < up::kInputDim; ++i) mpc_.R.push_back(input_weight / std::pow(u_hi[i] - u_lo[i], 2));
      mpc_.u_lo = u_lo;
      mpc_.u_hi = u_hi;
      mpc_.x_lo = env.state_box().low;
      mpc_.x_hi = env.state_box().high;
    }
  }
  std::string name() const override { return economic_ ? "empc" : "mpc"; }
  void begin_episode(std::uint64_t) override { warm_.clear(); }
  Vector act(std::span<const double> obs, int) override {
    const auto x0 = obs.subspan(0, up::kStateDim);
    const ShootingResult r =
        economic_ ? solve_empc(empc_, *model_, x0, warm_, opts_) : solve_mpc(mpc_, *model_, x0, warm_, opts_);
    warm_ = shift_warm_start(r.U);
    Vector a = u_nominal_;
    std::copy(r.u0.begin(), r.u0.end(), a.begin());
    return clip(a, box_);
  }

 private:
  bool economic_;
  ContinuousSpace box_;
  Vector u_nominal_;
  MpcSpec mpc_;
  EmpcSpec empc_;
  SolverOptions opts_;
  std::unique_ptr<OdePredictionModel> model_;
  std::vector<Vector> warm_;
};

// ---------------------------------------------------------------- PenSim

// Sequential GP-EI search over piecewise-constant feed profiles; each episode
// evaluates one profile and reports its return.
class PenSimBo : public Controller {
 public:
  PenSimBo(const PenSimEnv& env, const Json& config) {
    const auto& box = env.config().action_space;
    profile_.n_inputs = box.dim();
    profile_.horizon = env.config().max_steps;
    BoOptions o;
    ConfigReader r(config, "controller");
    r.read("segments", profile_.n_segments);
    r.read("initial_random", o.initial_random);
    r.read("candidates", o.candidates);
    r.read("max_training", o.max_training);
    r.read("starts", o.fit.starts);
    r.read("log", log_path_);
    r.finish();
    if (profile_.n_segments < 1 || o.initial_random < 0 || o.candidates < 1 || o.fit.starts < 1) {
      throw Error(Errc::ConfigError, "bad BO settings");
    }
    opts_ = o;
    lo_ = profile_.lower(box.low);
    hi_ = profile_.upper(box.high);
  }
  std::string name() const override { return "bo"; }
  bool sequential() const override { return true; }
  void begin_episode(std::uint64_t seed) override {
    if (!bo_) {
      opts_.seed = seed;
      bo_ = std::make_unique<BayesOpt>(lo_, hi_, opts_);
    }
    params_ = bo_->ask();
  }
  Vector act(std::span<const double>, int step) override { return profile_.action(params_, step); }
  void end_episode(double episode_return) override {
    bo_->tell(params_, episode_return);
    if (!log_path_.empty()) bo_->write_log_csv(log_path_);
  }

 private:
  PiecewiseProfile profile_;
  BoOptions opts_;
  Vector lo_, hi_, params_;
  std::string log_path_;
  std::unique_ptr<BayesOpt> bo_;
};

template <typename T>
const T& as(const Environment& env) {
  const T* p = dynamic_cast<const T*>(&env);
  if (!p) throw Error(Errc::ConfigError, "controller does not match environment " + env.name());
  return *p;
}

}  // namespace

const std::vector<std::string>& environment_names() {
  static const std::vector<std::string> names{"reactor", "atropine", "mab", "pensim", "beer"};
  return names;
}

std::unique_ptr<Environment> make_environment(const std::string& name, const Json& config) {
  if (name == "reactor") return std::make_unique<ReactorEnv>(config);
  if (name == "atropine") return std::make_unique<AtropineEnv>(config);
  if (name == "mab") return std::make_unique<MabEnv>(config);
  if (name == "pensim") return std::make_unique<PenSimEnv>(config);
  if (name == "beer") return std::make_unique<BeerEnv>(config);
  throw Error(Errc::ConfigError, "unknown environment '" + name + "'");
}

std::vector<std::string> supported_controllers(const std::string& env_name) {
  if (env_name == "reactor") return {"zero", "random", "pid", "mpc"};
  if (env_name == "atropine") return {"zero", "random", "mpc"};
  if (env_name == "mab") return {"zero", "random", "mpc", "empc"};
  if (env_name == "pensim") return {"zero", "random", "bo"};
  if (env_name == "beer") return {"zero", "random"};
  throw Error(Errc::ConfigError, "unknown environment '" + env_name + "'");
}

std::string default_baseline(const std::string& env_name) {
  if (env_name == "pensim") return "bo";
  if (env_name == "beer") return "random";
  supported_controllers(env_name);
  return "mpc";
}

std::unique_ptr<Controller> make_controller(const std::string& name, const Environment& env, const Json& config) {
  const auto ok = supported_controllers(env.name());
  if (std::find(ok.begin(), ok.end(), name) == ok.end()) {
    throw Error(Errc::ConfigError, "controller '" + name + "' is not supported for " + env.name());
  }
  const bool empty = config.is_null() || (config.is_object() && config.empty());
  if (name == "zero" || name == "random") {
    if (!empty) throw Error(Errc::ConfigError, "controller '" + name + "' takes no settings");
    if (name == "zero") return std::make_unique<HoldNominal>(env);
    return std::make_unique<UniformRandom>(env);
  }
  const Json cfg = empty ? Json::object() : config;
  if (env.name() == "reactor" && name == "pid") return std::make_unique<ReactorPid>(as<ReactorEnv>(env), cfg);
  if (env.name() == "reactor") return std::make_unique<ReactorMpc>(as<ReactorEnv>(env), cfg);
  if (env.name() == "atropine") return std::make_unique<AtropineMpc>(as<AtropineEnv>(env), cfg);
  if (env.name() == "mab") return std::make_unique<MabController>(as<MabEnv>(env), cfg, name == "empc");
  return std::make_unique<PenSimBo>(as<PenSimEnv>(env), cfg);
}

std::uint64_t episode_seed(std::uint64_t run_seed, std::size_t episode_id) {
  return mix_seed(run_seed, static_cast<std::uint64_t>(episode_id));
}

EpisodeSummary run_episode(Environment& env, Controller& ctrl, std::size_t episode_id, std::uint64_t seed,
                           DatasetRecorder* rec) {
  EpisodeSummary s;
  s.episode_id = episode_id;
  s.seed = seed;
  Vector obs = env.reset(seed);
  ctrl.begin_episode(seed);
  while (true) {
    const int step = env.steps_taken();
    const Vector a = ctrl.act(obs, step);
    const StepResult r = env.step(a);
    if (rec) rec->record(Transition{episode_id, step, obs, a, r.reward, r.terminal, r.timeout});
    s.episode_return += r.reward;
    ++s.steps;
    obs = r.observation;
    if (r.terminal || r.timeout) {
      s.terminal = r.terminal;
      s.timeout = r.timeout;
      s.failure = r.failure;
      break;
    }
  }
  ctrl.end_episode(s.episode_return);
  return s;
}

Json to_json(const EpisodeSummary& s) {
  return Json{{"episode_id", s.episode_id}, {"seed", s.seed},       {"steps", s.steps},
              {"return", s.episode_return}, {"terminal", s.terminal}, {"timeout", s.timeout},
              {"failure", s.failure}};
}

}  // namespace procbench
