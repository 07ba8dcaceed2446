#pragma once

#include <span>

#include "procbench/env.hpp"

namespace procbench {

// State (c_A [kmol/m3], T [K], h [m]); input (q_out [m3/min], T_c [K]).
struct CstrParams {
  double q_in = 0.1;
  double r = 0.219;
  double c_Af = 1.0;
  double T_f = 350.0;
  double E_over_R = 8750.0;
  double k_0 = 7.2e10;
  double minus_dH = 5.0e4;  // J/mol
  double U = 5.0e4;         // J/(min m2 K)
  double c_p = 0.239;       // kJ/(kg K)
  double rho = 1000.0;      // kg/m3

  void check() const;
};

// dx/dt for one state/input pair; throws DegenerateLevel for h <= 1e-6.
void cstr_rhs(std::span<const double> x, std::span<const double> u, const CstrParams& p,
              std::span<double> dxdt);
OdeSystem cstr_system(const CstrParams& p);

// -[((c_A - c_sp)/c_sp)^2 + ((h - h_sp)/h_sp)^2]
double reactor_reward(std::span<const double> x, double c_sp, double h_sp);

class ReactorEnv : public EpisodicEnv {
 public:
  explicit ReactorEnv(const Json& config = Json::object());

  std::string name() const override { return "reactor"; }
  double reward_floor() const override;
  Vector nominal_action() const override { return u_nominal_; }
  Json metadata() const override;

  const CstrParams& params() const { return p_; }
  const OdeSystem& system() const { return sys_; }
  const Vector& steady_state() const { return x_nominal_; }
  double steady_state_residual() const { return ss_residual_; }
  double c_setpoint() const { return c_sp_; }
  double h_setpoint() const { return h_sp_; }
  const ContinuousSpace& state_box() const { return state_box_; }
  const ContinuousSpace& init_box() const { return init_box_; }
  double step_minutes() const { return dt_; }
  int substeps() const { return substeps_; }
  void set_state(const Vector& x) { x_ = x; }

 protected:
  void sample_initial_state(Rng& rng) override;
  void advance(std::span<const double> action) override;
  Vector observe() const override { return x_; }
  bool state_valid() const override;
  double transition_reward(std::span<const double> action) override;

 private:
  CstrParams p_;
  OdeSystem sys_;
  double dt_ = 1.0;
  int substeps_ = 10;
  Vector u_nominal_{0.1, 300.0};
  Vector x_nominal_;
  double ss_residual_ = 0.0;
  double c_sp_ = 0.0;
  double h_sp_ = 0.0;
  ContinuousSpace state_box_;
  ContinuousSpace init_box_;
};

}  // namespace procbench
