#include "procbench/beer.hpp"

#include <algorithm>
#include <cmath>

namespace procbench {

void beer_rhs(std::span<const double> s, const BeerRates& r, std::span<double> ds) {
  using namespace beer;
  ds[XA] = r.mu_x * s[XA] - r.mu_DT * s[XA] + r.mu_L * s[XL];
  ds[XL] = -r.mu_L * s[XL];
  ds[XD] = r.mu_SD * s[XD] + r.mu_DT * s[XA];
  ds[S] = r.mu_s * s[XA];
  ds[EtOH] = r.f * r.mu_eth * s[XA];
  ds[DY] = r.mu_DY * s[S] * s[XA] - r.mu_AB * s[DY] * s[EtOH];
  ds[EA] = r.Y_EA * r.mu_x * s[XA];
}

BeerReward beer_reward(std::span<const double> s, double S_target, int steps_used, int max_steps) {
  if (s[beer::S] <= S_target) return {static_cast<double>(max_steps - steps_used), true};
  return {-1.0, false};
}

void BeerDemoKinetics::check() const {
  for (double v : {T_ref, x_ref, x_max, K_x, dt_ref, l_ref, sd_ref, s_ref, K_s, y_eth, eth_max, dy_ref, ab_ref, y_ea}) {
    if (!(v >= 0.0)) throw Error(Errc::ConfigError, "beer kinetic parameters must be nonnegative");
  }
  if (!(T_ref > 0.0 && x_max > 0.0 && K_x > 0.0 && K_s > 0.0 && eth_max > 0.0)) {
    throw Error(Errc::ConfigError, "beer reference temperature and saturation constants must be positive");
  }
}

BeerRates BeerDemoKinetics::rates(std::span<const double> s, double T_celsius) const {
  using namespace beer;
  constexpr double R = 8.314462618;
  const double T = T_celsius + 273.15;
  auto arr = [&](double k_ref, double E) { return k_ref * std::exp(-E / R * (1.0 / T - 1.0 / T_ref)); };
  const double sugar = std::max(0.0, s[S]);
  const double uptake = arr(s_ref, s_E) * sugar / (K_s + sugar);
  BeerRates r;
  r.mu_x = arr(x_ref, x_E) * sugar / (K_x + sugar) * std::max(0.0, 1.0 - s[XA] / x_max);
  r.mu_DT = arr(dt_ref, dt_E);
  r.mu_L = arr(l_ref, l_E);
  r.mu_SD = arr(sd_ref, sd_E);
  r.mu_s = -uptake;
  r.mu_eth = y_eth * uptake;
  r.f = std::max(0.0, 1.0 - s[EtOH] / eth_max);
  r.mu_DY = arr(dy_ref, dy_E);
  r.mu_AB = arr(ab_ref, ab_E);
  r.Y_EA = y_ea;
  return r;
}

BeerEnv::BeerEnv(const Json& config) {
  ConfigReader reader(config, "");
  {
    ConfigReader k = reader.child("kinetics");
    k.read("T_ref", kin_.T_ref);
    k.read("x_ref", kin_.x_ref);
    k.read("x_E", kin_.x_E);
    k.read("x_max", kin_.x_max);
    k.read("K_x", kin_.K_x);
    k.read("dt_ref", kin_.dt_ref);
    k.read("dt_E", kin_.dt_E);
    k.read("l_ref", kin_.l_ref);
    k.read("l_E", kin_.l_E);
    k.read("sd_ref", kin_.sd_ref);
    k.read("sd_E", kin_.sd_E);
    k.read("s_ref", kin_.s_ref);
    k.read("s_E", kin_.s_E);
    k.read("K_s", kin_.K_s);
    k.read("y_eth", kin_.y_eth);
    k.read("eth_max", kin_.eth_max);
    k.read("dy_ref", kin_.dy_ref);
    k.read("dy_E", kin_.dy_E);
    k.read("ab_ref", kin_.ab_ref);
    k.read("ab_E", kin_.ab_E);
    k.read("y_ea", kin_.y_ea);
    k.finish();
    kin_.check();
  }
  cfg_.max_steps = 200;
  cfg_.error_reward = -200.0;
  read_episode_overrides(reader);
  reader.read("step_hours", step_hours_);
  reader.read("substeps", substeps_);
  if (!(step_hours_ > 0.0) || substeps_ < 1) throw Error(Errc::ConfigError, "step_hours and substeps must be positive");
  reader.read("sugar_target", S_target_);
  if (!(S_target_ >= 0.0)) throw Error(Errc::ConfigError, "sugar_target must be nonnegative");

  cfg_.action_space = read_space(reader, "action_box", make_space({9.0}, {16.0}));
  reader.read("nominal_temperature", T_nominal_);
  if (!cfg_.action_space.contains(Vector{T_nominal_})) throw Error(Errc::ConfigError, "nominal temperature outside the box");

  x_initial_ = {0.5, 2.0, 0.0, 130.0, 0.0, 0.0, 0.0};
  reader.read_exact("initial_state", x_initial_);
  reader.read("init_jitter", init_jitter_);
  if (!(init_jitter_ >= 0.0 && init_jitter_ < 1.0)) throw Error(Errc::ConfigError, "init_jitter must be in [0, 1)");
  for (double v : x_initial_) {
    if (!(v >= 0.0)) throw Error(Errc::ConfigError, "initial concentrations must be nonnegative");
  }
  reader.finish();

  Vector lo(beer::kStateDim + 1, 0.0), hi(beer::kStateDim + 1, 1e4);
  hi.back() = 1.0;
  cfg_.observation_space = make_space(lo, hi);
  check_episode_config();
  x_ = x_initial_;
}

OdeSystem BeerEnv::system() const {
  return OdeSystem{beer::kStateDim, [k = kin_](double, std::span<const double> x, std::span<const double> u,
                                                std::span<double> dx) { beer_rhs(x, k.rates(x, u[0]), dx); }};
}

Json BeerEnv::metadata() const {
  Json m = Environment::metadata();
  m["kinetics"] = "demo";
  m["kinetics_canonical"] = false;
  m["sugar_target"] = S_target_;
  m["step_hours"] = step_hours_;
  return m;
}

void BeerEnv::sample_initial_state(Rng& rng) {
  x_ = x_initial_;
  for (double& v : x_) v *= 1.0 + init_jitter_ * (2.0 * rng.uniform() - 1.0);
  completed_ = false;
}

void BeerEnv::advance(std::span<const double> action) {
  const OdeSystem sys = system();
  Rk4Stepper stepper(sys);
  stepper.integrate(0.0, x_, action, step_hours_, step_hours_ / substeps_);
}

Vector BeerEnv::observe() const {
  Vector obs = x_;
  obs.push_back(static_cast<double>(steps_taken()) / cfg_.max_steps);
  return obs;
}

bool BeerEnv::state_valid() const {
  return all_finite(x_) && std::all_of(x_.begin(), x_.end(), [](double v) { return v >= 0.0; });
}

double BeerEnv::transition_reward(std::span<const double>) {
  const BeerReward r = beer_reward(x_, S_target_, steps_taken(), cfg_.max_steps);
  completed_ = r.completed;
  return r.reward;
}

}  // namespace procbench
