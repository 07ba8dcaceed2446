#pragma once

#include <span>

#include "procbench/env.hpp"

namespace procbench {

namespace beer {
enum Index : std::size_t { XA, XL, XD, S, EtOH, DY, EA, kStateDim };
}

// Sign convention: mu_s <= 0 consumes sugar, mu_eth >= 0 produces ethanol.
struct BeerRates {
  double mu_x = 0.0;
  double mu_DT = 0.0;
  double mu_L = 0.0;
  double mu_SD = 0.0;
  double mu_s = 0.0;
  double mu_eth = 0.0;
  double f = 1.0;  // ethanol inhibition factor
  double mu_DY = 0.0;
  double mu_AB = 0.0;
  double Y_EA = 0.0;
};

void beer_rhs(std::span<const double> s, const BeerRates& r, std::span<double> ds);

struct BeerReward {
  double reward;
  bool completed;
};

// -1 per step while S > S_target; on completion the unused steps as a bonus.
BeerReward beer_reward(std::span<const double> s, double S_target, int steps_used, int max_steps);

// Placeholder Arrhenius closure around 12 degC, not the reference kinetics.
// Rates k(T) = k_ref * exp(-E/R (1/T - 1/T_ref)), T in kelvin.
struct BeerDemoKinetics {
  double T_ref = 285.15;
  double x_ref = 0.08, x_E = 60e3;       // growth, 1/h
  double x_max = 6.0;                    // g/L, crowding limit on growth
  double K_x = 5.0;                      // g/L sugar
  double dt_ref = 0.002, dt_E = 80e3;    // active-cell death, 1/h
  double l_ref = 0.05, l_E = 50e3;       // lag to active, 1/h
  double sd_ref = 1e-4, sd_E = 30e3;     // dead-cell term as printed, 1/h
  double s_ref = 0.18, s_E = 55e3;       // sugar uptake, g/(g h)
  double K_s = 10.0;                     // g/L
  double y_eth = 0.48;                   // g ethanol / g sugar
  double eth_max = 120.0;                // g/L, inhibition limit
  double dy_ref = 2e-6, dy_E = 70e3;     // diacetyl formation
  double ab_ref = 2e-3, ab_E = 40e3;     // diacetyl reduction
  double y_ea = 0.02;                    // ethyl acetate yield

  void check() const;
  BeerRates rates(std::span<const double> s, double T_celsius) const;
};

class BeerEnv : public EpisodicEnv {
 public:
  explicit BeerEnv(const Json& config = Json::object());

  std::string name() const override { return "beer"; }
  double reward_floor() const override { return -1.0; }
  Vector nominal_action() const override { return {T_nominal_}; }
  Json metadata() const override;

  const BeerDemoKinetics& kinetics() const { return kin_; }
  double sugar_target() const { return S_target_; }
  OdeSystem system() const;

 protected:
  void sample_initial_state(Rng& rng) override;
  void advance(std::span<const double> action) override;
  Vector observe() const override;
  bool state_valid() const override;
  double transition_reward(std::span<const double> action) override;
  bool goal_reached() const override { return completed_; }

 private:
  BeerDemoKinetics kin_;
  double step_hours_ = 1.0;
  int substeps_ = 10;
  double S_target_ = 0.5;
  double T_nominal_ = 13.0;
  Vector x_initial_;
  double init_jitter_ = 0.02;
  bool completed_ = false;
};

}  // namespace procbench
