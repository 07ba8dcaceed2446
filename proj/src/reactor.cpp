#include "procbench/reactor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace procbench {

void CstrParams::check() const {
  for (double v : {q_in, r, c_Af, T_f, E_over_R, k_0, minus_dH, U, c_p, rho}) {
    if (!(v > 0.0)) throw Error(Errc::ConfigError, "CSTR parameters must be strictly positive");
  }
}

void cstr_rhs(std::span<const double> x, std::span<const double> u, const CstrParams& p,
              std::span<double> dxdt) {
  const double c = x[0], T = x[1], h = x[2];
  const double q_out = u[0], T_c = u[1];
  if (!(h > 1e-6)) throw Error(Errc::DegenerateLevel, "reactor level h <= 1e-6 m");
  const double area = std::numbers::pi * p.r * p.r;
  const double dilution = p.q_in / (area * h);
  const double rate = p.k_0 * std::exp(-p.E_over_R / T) * c;
  // rho [kg/m3] * c_p [kJ/(kg K)] * 1e3 = J/(m3 K); -dH [J/mol] * 1e3 = J/kmol.
  const double rho_cp = p.rho * p.c_p * 1e3;
  dxdt[0] = dilution * (p.c_Af - c) - rate;
  dxdt[1] = dilution * (p.T_f - T) + (p.minus_dH * 1e3 / rho_cp) * rate +
            (2.0 * p.U / (p.r * rho_cp)) * (T_c - T);
  dxdt[2] = (p.q_in - q_out) / area;
}

OdeSystem cstr_system(const CstrParams& p) {
  return OdeSystem{3, [p](double, std::span<const double> x, std::span<const double> u,
                          std::span<double> dxdt) { cstr_rhs(x, u, p, dxdt); }};
}

double reactor_reward(std::span<const double> x, double c_sp, double h_sp) {
  const double ec = (x[0] - c_sp) / c_sp;
  const double eh = (x[2] - h_sp) / h_sp;
  return -(ec * ec + eh * eh);
}


ReactorEnv::ReactorEnv(const Json& config) {
  ConfigReader reader(config, "");
  {
    ConfigReader pr = reader.child("params");
    pr.read("q_in", p_.q_in);
    pr.read("r", p_.r);
    pr.read("c_Af", p_.c_Af);
    pr.read("T_f", p_.T_f);
    pr.read("E_over_R", p_.E_over_R);
    pr.read("k_0", p_.k_0);
    pr.read("minus_dH", p_.minus_dH);
    pr.read("U", p_.U);
    pr.read("c_p", p_.c_p);
    pr.read("rho", p_.rho);
    pr.finish();
    p_.check();
  }
  sys_ = cstr_system(p_);

  cfg_.max_steps = 100;
  cfg_.error_reward = -1000.0;
  read_episode_overrides(reader);

  reader.read("step_minutes", dt_);
  reader.read("substeps", substeps_);
  if (!(dt_ > 0.0) || substeps_ < 1) throw Error(Errc::ConfigError, "step_minutes and substeps must be positive");

  cfg_.action_space = read_space(reader, "action_box", make_space({0.0, 290.0}, {0.3, 340.0}));
  state_box_ = read_space(reader, "state_box", make_space({0.0, 280.0, 0.05}, {2.0, 450.0, 1.0}));
  cfg_.observation_space = state_box_;

  reader.read_exact("nominal_action", u_nominal_);
  double level_guess = 0.659;
  reader.read("level_guess", level_guess);
  const auto ss = solve_steady_state(sys_, u_nominal_, Vector{0.5, 330.0, level_guess});
  if (!ss.converged) throw Error(Errc::NoFeasibleSteadyState, "nominal CSTR steady state did not converge");
  x_nominal_ = ss.x_star;
  ss_residual_ = ss.residual_norm;

  c_sp_ = x_nominal_[0];
  h_sp_ = x_nominal_[2];
  {
    ConfigReader sp = reader.child("setpoint");
    sp.read("c_A", c_sp_);
    sp.read("h", h_sp_);
    sp.finish();
    if (!(c_sp_ > 0.0 && h_sp_ > 0.0)) throw Error(Errc::ConfigError, "setpoint must be positive");
  }

  Vector half_width{0.1, 0.01, 0.1};
  reader.read_exact("init_fraction", half_width);
  Vector lo(3), hi(3);
  for (std::size_t i = 0; i < 3; ++i) {
    lo[i] = x_nominal_[i] * (1.0 - half_width[i]);
    hi[i] = x_nominal_[i] * (1.0 + half_width[i]);
  }
  init_box_ = read_space(reader, "init_box", make_space(lo, hi));
  reader.finish();
  check_episode_config();
  x_ = x_nominal_;
}

double ReactorEnv::reward_floor() const {
  double worst = 0.0;
  for (double c : {state_box_.low[0], state_box_.high[0]}) {
    for (double h : {state_box_.low[2], state_box_.high[2]}) {
      worst = std::min(worst, reactor_reward(Vector{c, 0.0, h}, c_sp_, h_sp_));
    }
  }
  return worst;
}

Json ReactorEnv::metadata() const {
  Json m = Environment::metadata();
  m["steady_state"] = x_nominal_;
  m["setpoint"] = {{"c_A", c_sp_}, {"h", h_sp_}};
  m["step_minutes"] = dt_;
  return m;
}

void ReactorEnv::sample_initial_state(Rng& rng) { x_ = init_box_.sample(rng); }

void ReactorEnv::advance(std::span<const double> action) {
  Rk4Stepper stepper(sys_);
  stepper.integrate(0.0, x_, action, dt_, dt_ / substeps_);
}

bool ReactorEnv::state_valid() const { return all_finite(x_) && state_box_.contains(x_); }

double ReactorEnv::transition_reward(std::span<const double>) {
  return reactor_reward(x_, c_sp_, h_sp_);
}

}  // namespace procbench
