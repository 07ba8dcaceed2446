#include "procbench/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "procbench/atropine.hpp"
#include "procbench/controllers.hpp"
#include "procbench/dataset.hpp"
#include "procbench/mab.hpp"
#include "procbench/reactor.hpp"

namespace procbench {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string env;
  std::string controller;
  std::size_t episodes = 1;
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out;
  unsigned jobs = 1;
};

struct RunConfig {
  Json env = Json::object();
  Json controller = Json::object();
};

RunConfig load_config(const Options& o) {
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* p = std::getenv("PROCBENCH_CONFIG")) path = p;
  }
  RunConfig rc;
  if (path.empty()) return rc;
  const Json j = load_json_file(path);
  if (!j.is_object()) throw Error(Errc::ConfigError, path + " must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "env") {
      rc.env = value;
    } else if (key == "controller") {
      rc.controller = value;
    } else {
      throw Error(Errc::ConfigError, path + ": unknown key '" + key + "' (expected env, controller)");
    }
  }
  return rc;
}

void require_env(const Options& o) {
  const auto& names = environment_names();
  if (std::find(names.begin(), names.end(), o.env) == names.end()) {
    throw UsageError("unknown --env '" + o.env + "'");
  }
}

std::string pick_controller(const Options& o) {
  const std::string c = o.controller.empty() ? default_baseline(o.env) : o.controller;
  const auto ok = supported_controllers(o.env);
  if (std::find(ok.begin(), ok.end(), c) == ok.end()) {
    throw UsageError("controller '" + c + "' is not supported for " + o.env);
  }
  return c;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------- rollout

int cmd_rollout(const Options& o, std::ostream& out) {
  require_env(o);
  const std::string cname = o.controller.empty() ? "zero" : pick_controller(o);
  if (o.episodes < 1) throw UsageError("--episodes must be positive");
  const RunConfig rc = load_config(o);
  auto env = make_environment(o.env, rc.env);
  auto ctrl = make_controller(cname, *env, rc.controller);
  Json episodes = Json::array();
  double sum = 0.0, sum2 = 0.0;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < o.episodes; ++i) {
    const EpisodeSummary s = run_episode(*env, *ctrl, i, episode_seed(o.seed, i));
    episodes.push_back(to_json(s));
    sum += s.episode_return;
    sum2 += s.episode_return * s.episode_return;
    failures += s.failure ? 1 : 0;
  }
  const double n = static_cast<double>(o.episodes);
  const double mean = sum / n;
  Json j{{"env", o.env},
         {"controller", cname},
         {"seed", o.seed},
         {"metadata", env->metadata()},
         {"episodes", episodes},
         {"summary",
          {{"episodes", o.episodes},
           {"mean_return", mean},
           {"std_return", std::sqrt(std::max(0.0, sum2 / n - mean * mean))},
           {"failures", failures}}}};
  out << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- dataset

Dataset generate_dataset(const Options& o, const std::string& cname, const RunConfig& rc) {
  auto env = make_environment(o.env, rc.env);
  auto ctrl = make_controller(cname, *env, rc.controller);
  DatasetMeta meta;
  meta.env_name = o.env;
  meta.baseline_name = cname;
  meta.a_dim = env->config().action_space.dim();
  meta.o_dim = env->config().observation_space.dim();
  meta.max_steps = env->config().max_steps;
  meta.error_reward = env->config().error_reward;
  meta.seed = o.seed;
  meta.error_reward_checked = validate_episode_config(env->config(), env->reward_floor());
  DatasetRecorder rec(meta);

  const unsigned jobs = ctrl->sequential() ? 1u : std::max(1u, std::min<unsigned>(o.jobs, static_cast<unsigned>(o.episodes)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < o.episodes; ++i) run_episode(*env, *ctrl, i, episode_seed(o.seed, i), &rec);
    return std::move(rec).finish();
  }

  // Each worker owns an environment and controller; rows are merged by id.
  std::vector<std::vector<Transition>> per_episode(o.episodes);
  std::vector<std::string> errors(jobs);
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      try {
        auto wenv = make_environment(o.env, rc.env);
        auto wctrl = make_controller(cname, *wenv, rc.controller);
        for (std::size_t i = w; i < o.episodes; i += jobs) {
          DatasetRecorder local(meta);
          run_episode(*wenv, *wctrl, i, episode_seed(o.seed, i), &local);
          per_episode[i] = local.dataset().rows;
        }
      } catch (const std::exception& e) {
        errors[w] = e.what();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error(e);
  }
  for (auto& rows : per_episode) {
    for (const Transition& t : rows) rec.record(t);
    rows.clear();
    rows.shrink_to_fit();
  }
  return std::move(rec).finish();
}

int cmd_dataset(const Options& o, std::ostream& out) {
  require_env(o);
  const std::string cname = pick_controller(o);
  if (o.out.empty()) throw UsageError("dataset needs --out");
  if (o.jobs < 1) throw UsageError("--jobs must be positive");
  const RunConfig rc = load_config(o);
  const Dataset d = generate_dataset(o, cname, rc);
  write_dataset(o.out, d);
  Json j = to_json(d.meta);
  j["rows"] = d.rows.size();
  j["path"] = o.out;
  out << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- stats

int cmd_stats(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("stats needs a dataset directory");
  const Dataset d = read_dataset(o.out);
  const DatasetStats s = compute_stats(d);
  out << "env baseline traj mu_r sigma_r a_dim o_dim max_s e_r success_rate\n";
  out << d.meta.env_name << ' ' << d.meta.baseline_name << ' ' << s.episodes << ' ' << fmt17(s.reward_mean) << ' '
      << fmt17(s.reward_std) << ' ' << d.meta.a_dim << ' ' << d.meta.o_dim << ' ' << d.meta.max_steps << ' '
      << fmt17(d.meta.error_reward) << ' ' << fmt17(s.success_rate) << '\n';
  return 0;
}

// ---------------------------------------------------------------- steady-state

double residual_inf(const OdeSystem& sys, const Vector& x, std::span<const double> u) {
  const Vector f = sys.eval(0.0, x, u);
  double r = 0.0;
  for (double v : f) r = std::max(r, std::abs(v));
  return r;
}

int cmd_steady_state(const Options& o, std::ostream& out) {
  require_env(o);
  const RunConfig rc = load_config(o);
  auto env = make_environment(o.env, rc.env);
  Json j{{"env", o.env}};
  if (const auto* r = dynamic_cast<const ReactorEnv*>(env.get())) {
    j["x_s"] = r->steady_state();
    j["u_s"] = r->nominal_action();
    j["residual"] = residual_inf(r->system(), r->steady_state(), r->nominal_action());
  } else if (const auto* a = dynamic_cast<const AtropineEnv*>(env.get())) {
    const auto& m = a->model();
    const Eigen::Vector2d x = Eigen::Vector2d::Zero();
    j["x_s"] = Vector{0.0, 0.0};
    j["u_s"] = a->nominal_action();
    j["residual"] = (lin_step(m, x, Eigen::Vector4d::Zero()) - x).cwiseAbs().maxCoeff();
    j["e_factor"] = a->operating_point().y_ss;
  } else if (const auto* m = dynamic_cast<const MabEnv*>(env.get())) {
    const Vector u = m->nominal_action();
    const std::span<const double> u_up(u.data(), up::kInputDim);
    const Vector& x = m->nominal_state();
    j["x_s"] = x;
    j["u_s"] = u;
    j["residual"] = residual_inf(m->upstream(), x, u_up);
    const Vector f = m->upstream().eval(0.0, x, u_up);
    double scaled = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) scaled = std::max(scaled, std::abs(f[i]) / std::max(1.0, std::abs(x[i])));
    j["scaled_residual"] = scaled;
  } else {
    throw Error(Errc::NoFeasibleSteadyState, o.env + " is a batch process without a steady state");
  }
  out << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- validate

struct ExpectedShape {
  std::size_t a_dim;
  int max_steps;
  double error_reward;
};

ExpectedShape expected_shape(const std::string& env) {
  if (env == "reactor") return {2, 100, -1000.0};
  if (env == "atropine") return {4, 60, -100000.0};
  if (env == "pensim") return {6, 1150, -100.0};
  if (env == "mab") return {9, 200, -100.0};
  return {1, 200, -200.0};
}

int cmd_validate(const Options& o, std::ostream& out) {
  require_env(o);
  const RunConfig rc = load_config(o);
  auto env = make_environment(o.env, rc.env);
  const auto& cfg = env->config();
  Json checks = Json::array();
  bool all_ok = true;
  auto check = [&](const std::string& name, bool ok, Json detail = nullptr) {
    Json c{{"check", name}, {"pass", ok}};
    if (!detail.is_null()) c["detail"] = std::move(detail);
    checks.push_back(std::move(c));
    all_ok = all_ok && ok;
  };

  const ExpectedShape row = expected_shape(o.env);
  check("expected_shape", cfg.action_space.dim() == row.a_dim && cfg.max_steps == row.max_steps &&
                         cfg.error_reward == row.error_reward,
        {{"a_dim", cfg.action_space.dim()}, {"max_steps", cfg.max_steps}, {"error_reward", cfg.error_reward}});
  check("error_reward_bound", validate_episode_config(cfg, env->reward_floor()),
        {{"error_reward", cfg.error_reward}, {"r_min_times_max_steps", env->reward_floor() * cfg.max_steps}});

  const Vector obs0 = env->reset(o.seed);
  check("reset_deterministic", env->reset(o.seed) == obs0);
  check("reset_observation_in_box", cfg.observation_space.contains(obs0) && obs0.size() == cfg.observation_space.dim());

  // Short nominal rollout, replayed for bitwise determinism.
  const int n_steps = std::min(cfg.max_steps, 20);
  auto rollout = [&] {
    std::vector<StepResult> rs;
    env->reset(o.seed);
    for (int k = 0; k < n_steps; ++k) {
      rs.push_back(env->step(env->nominal_action()));
      if (rs.back().terminal || rs.back().timeout) break;
    }
    return rs;
  };
  const auto first = rollout();
  const auto second = rollout();
  bool same = first.size() == second.size();
  bool rewards_ok = true;
  for (std::size_t k = 0; same && k < first.size(); ++k) {
    same = first[k].observation == second[k].observation && first[k].reward == second[k].reward;
  }
  for (const StepResult& r : first) {
    rewards_ok = rewards_ok && (r.failure ? r.reward == cfg.error_reward : r.reward >= env->reward_floor());
  }
  check("replay_deterministic", same, {{"steps", first.size()}});
  check("rewards_above_floor", rewards_ok);

  env->reset(o.seed);
  Vector bad = cfg.action_space.high;
  bad[0] += 1.0 + std::abs(bad[0]);
  const StepResult r = env->step(bad);
  check("out_of_box_action_fails", r.failure && r.terminal && r.reward == cfg.error_reward);

  out << Json{{"env", o.env}, {"pass", all_ok}, {"checks", checks}}.dump(2) << '\n';
  return all_ok ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Process-control benchmark environments, baselines and datasets", "procbench"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub, bool needs_env) {
    auto* e = sub->add_option("--env", o.env, "reactor, atropine, mab, pensim or beer");
    if (needs_env) e->required();
    sub->add_option("--config", o.config_path, "JSON file with optional env and controller objects");
  };
  auto* rollout = app.add_subcommand("rollout", "run episodes and print a JSON summary");
  add_common(rollout, true);
  rollout->add_option("--controller", o.controller, "policy (default zero)");
  rollout->add_option("--episodes", o.episodes, "number of episodes");
  rollout->add_option("--seed", o.seed, "run seed");

  auto* dataset = app.add_subcommand("dataset", "generate and store an offline dataset");
  add_common(dataset, true);
  dataset->add_option("--controller", o.controller, "policy (default: the environment's baseline)");
  dataset->add_option("--episodes", o.episodes, "number of episodes");
  dataset->add_option("--seed", o.seed, "run seed");
  dataset->add_option("--out", o.out, "output directory")->required();
  dataset->add_option("--jobs", o.jobs, "worker threads");

  auto* stats = app.add_subcommand("stats", "print summary statistics of a stored dataset");
  stats->add_option("--out,dataset", o.out, "dataset directory")->required();

  auto* steady = app.add_subcommand("steady-state", "print the nominal steady state");
  add_common(steady, true);

  auto* validate = app.add_subcommand("validate", "run the environment invariant checks");
  add_common(validate, true);
  validate->add_option("--seed", o.seed, "reset seed");

  std::vector<const char*> argv{"procbench"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << "run with --help for usage\n";
    return 2;
  }

  try {
    if (rollout->parsed()) return cmd_rollout(o, out);
    if (dataset->parsed()) return cmd_dataset(o, out);
    if (stats->parsed()) return cmd_stats(o, out);
    if (steady->parsed()) return cmd_steady_state(o, out);
    return cmd_validate(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace procbench
