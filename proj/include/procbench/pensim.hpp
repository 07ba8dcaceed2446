#pragma once

#include <functional>
#include <span>
#include <string>

#include "procbench/env.hpp"

namespace procbench {

namespace pen {
enum Index : std::size_t { A0, A1, A3, A4, P, S, V, kStateDim };
enum Input : std::size_t { F_s, F_oil, F_PAA, F_ab, F_w, F_dis, kInputDim };
}  // namespace pen

// Rates in g/(L h); r_m is the biomass the maintenance term applies to (g/L).
struct PenRates {
  double r_b = 0.0;
  double r_diff = 0.0;
  double r_e = 0.0;
  double r_deg = 0.0;
  double r_a = 0.0;
  double r_p = 0.0;
  double r_h = 0.0;
  double r_m = 0.0;
};

struct PenBalanceParams {
  double Y_sX = 1.85;   // g substrate / g biomass
  double Y_sP = 0.9;    // g substrate / g penicillin
  double m_s = 0.029;   // g substrate / (g biomass h)
  double c_s = 600.0;   // sugar feed, g/L
  double c_oil = 900.0; // oil feed, g/L
  // Printed dA1/dt carries r_deg * F_in A1 / V; the default reads it as
  // r_deg - F_in A1 / V.
  bool literal_degeneration = false;
};

// Time in hours. F_in is the sum of the five feeds (discharge excluded).
// Throws DegenerateVolume for V <= 1e-6 L.
void pensim_rhs(std::span<const double> s, const PenRates& r, std::span<const double> a,
                const PenBalanceParams& p, double F_evp, std::span<double> ds);

// Delta(P V) in kg minus lambda * |a - a_prev|^2.
double pensim_reward(std::span<const double> prev, std::span<const double> next, std::span<const double> a,
                     std::span<const double> a_prev, double lambda = 0.01);

// Placeholder Monod-type closure, not the reference kinetics.
struct PenDemoKinetics {
  double k_e = 0.12;       // tip extension, 1/h
  double k_b = 0.03;       // branching, 1/h
  double k_diff = 0.04;    // differentiation, 1/h
  double k_deg = 0.004;    // degeneration, 1/h
  double k_a = 0.01;       // autolysis, 1/h
  double K_s = 0.05;       // g/L
  double q_p = 0.004;      // g P / (g A1 h)
  double K_p = 0.002;      // g/L
  double K_I = 0.5;        // substrate inhibition of production, g/L
  double k_h = 0.0008;     // hydrolysis, 1/h
  double evaporation = 2.5e-5;  // F_evp = evaporation * V, 1/h

  void check() const;
  PenRates rates(std::span<const double> s) const;
};

using PenKinetics = std::function<PenRates(std::span<const double> s)>;

class PenSimEnv : public EpisodicEnv {
 public:
  explicit PenSimEnv(const Json& config = Json::object());

  std::string name() const override { return "pensim"; }
  double reward_floor() const override;
  Vector nominal_action() const override { return u_nominal_; }
  Json metadata() const override;

  const PenBalanceParams& balance() const { return bal_; }
  const PenDemoKinetics& kinetics() const { return demo_; }
  const ContinuousSpace& state_box() const { return state_box_; }
  double reward_scale() const { return reward_scale_; }
  double smoothness() const { return lambda_; }
  OdeSystem system() const;

 protected:
  void sample_initial_state(Rng& rng) override;
  void advance(std::span<const double> action) override;
  Vector observe() const override;
  bool state_valid() const override;
  double transition_reward(std::span<const double> action) override;

 private:
  Vector normalised(std::span<const double> a) const;

  PenBalanceParams bal_;
  PenDemoKinetics demo_;
  PenKinetics kin_;
  std::string kinetics_name_ = "demo";
  double step_hours_ = 1.0;
  int substeps_ = 30;
  double lambda_ = 0.01;
  double reward_scale_ = 0.01;
  Vector u_nominal_;
  Vector x_initial_;
  double init_jitter_ = 0.05;
  ContinuousSpace state_box_;
  Vector prev_state_;
  Vector prev_action_;
  bool has_prev_action_ = false;
};

}  // namespace procbench
