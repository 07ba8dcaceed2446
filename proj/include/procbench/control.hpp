#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "procbench/sim_core.hpp"

namespace procbench {

// ---------------------------------------------------------------- PID

struct PidGains {
  double k_p = 0.0;
  double k_i = 0.0;
  double k_d = 0.0;
  double u_min = -1e300;
  double u_max = 1e300;
  double bias = 0.0;
  bool anti_windup = true;
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool has_prev = false;
};

struct PidOutput {
  double u;
  PidState state;
};

// e = setpoint - measurement; rectangle-rule integral including the current
// sample; derivative on the error, zero on the first call. With anti_windup
// the integral is frozen whenever the clamped output saturates.
PidOutput pid_step(const PidGains& g, double setpoint, double measurement, const PidState& s, double dt);

// ---------------------------------------------------------------- shooting

// One-sample discrete prediction model with piecewise-constant input.
class PredictionModel {
 public:
  virtual ~PredictionModel() = default;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t input_dim() const = 0;
  // Advance x in place by one sample; may throw Error.
  virtual void advance(std::span<double> x, std::span<const double> u) const = 0;
};

// Keeps scratch buffers, so one instance must not be shared across threads.
class OdePredictionModel : public PredictionModel {
 public:
  OdePredictionModel(OdeSystem sys, std::size_t input_dim, double sample, int substeps);
  OdePredictionModel(const OdePredictionModel&) = delete;
  OdePredictionModel& operator=(const OdePredictionModel&) = delete;
  std::size_t state_dim() const override { return sys_.dim; }
  std::size_t input_dim() const override { return m_; }
  void advance(std::span<double> x, std::span<const double> u) const override;

 private:
  OdeSystem sys_;
  std::size_t m_;
  double sample_;
  int substeps_;
  mutable Rk4Stepper stepper_;
};

// Stage cost after applying u_k: (sample index k, x_{k+1}, u_k) -> cost.
using StageCostFn = std::function<double(int k, std::span<const double> x_next, std::span<const double> u)>;

struct ShootingProblem {
  const PredictionModel* model = nullptr;
  int horizon = 1;
  Vector u_lo, u_hi;
  StageCostFn stage;
  // Soft state box, empty to disable.
  Vector x_lo, x_hi;
  double box_penalty = 1e4;
};

struct SolverOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;  // projected-gradient inf-norm in box-normalised inputs
  double armijo_c = 1e-4;
  double shrink = 0.5;
  double initial_step = 1.0;
  int max_backtracks = 40;
  double fd_step = 1e-7;  // fraction of each input's range
  bool record_trace = false;
};

struct ShootingResult {
  Vector u0;
  std::vector<Vector> U;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
  std::vector<double> trace;  // cost per accepted iterate, first entry = initial
};

// Sum of stage costs plus box_penalty * total state-box violation over the
// horizon; +inf if the simulation fails.
double shooting_cost(const ShootingProblem& prob, std::span<const double> x0, const std::vector<Vector>& U);

// Forward-difference gradient with respect to the raw inputs.
std::vector<Vector> shooting_gradient(const ShootingProblem& prob, std::span<const double> x0,
                                      const std::vector<Vector>& U, double fd_step = 1e-7);

// Projected gradient with Armijo backtracking in box-normalised inputs.
// Warm start defaults to the box midpoint; entries are clipped to the box.
ShootingResult solve_shooting(const ShootingProblem& prob, std::span<const double> x0,
                              const std::vector<Vector>& warm = {}, const SolverOptions& opts = {});

// Previous solution shifted by one sample, last entry repeated.
std::vector<Vector> shift_warm_start(const std::vector<Vector>& U);

void write_trace_csv(const ShootingResult& r, const std::string& path);

// ---------------------------------------------------------------- MPC / EMPC

struct MpcSpec {
  int horizon = 20;
  Vector Q, R;  // diagonal weights
  Vector x_s, u_s;
  Vector u_lo, u_hi;
  Vector x_lo, x_hi;
};

ShootingProblem make_mpc_problem(const MpcSpec& spec, const PredictionModel& model);
double mpc_cost(const MpcSpec& spec, const PredictionModel& model, std::span<const double> x0,
                const std::vector<Vector>& U);
ShootingResult solve_mpc(const MpcSpec& spec, const PredictionModel& model, std::span<const double> x0,
                         const std::vector<Vector>& warm = {}, const SolverOptions& opts = {});

using EconomicFn = std::function<double(std::span<const double> x, std::span<const double> u)>;

struct EmpcSpec {
  int horizon = 20;
  EconomicFn ell_e;
  Vector u_lo, u_hi;
  Vector x_lo, x_hi;
  // Reference input held over the horizon; the solve never returns a plan
  // that is economically worse than holding it.
  Vector u_hold;
};

ShootingResult solve_empc(const EmpcSpec& spec, const PredictionModel& model, std::span<const double> x0,
                          const std::vector<Vector>& warm = {}, const SolverOptions& opts = {});

// ---------------------------------------------------------------- steady-state optimum

struct SteadyOptimumSpec {
  const OdeSystem* sys = nullptr;
  EconomicFn ell_e;
  // Decision box. input_map turns a decision vector into the model input
  // (identity when empty).
  Vector p_lo, p_hi;
  std::function<Vector(std::span<const double>)> input_map;
  Vector x_guess;
  Vector x_lo, x_hi;  // feasibility box, empty to disable
  int starts = 8;
  std::uint64_t seed = 0;
  int max_iterations = 60;
};

struct SteadyOptimum {
  Vector x_s;
  Vector u_s;
  Vector p_s;
  double value = 0.0;
  double residual = 0.0;
};

// Multi-start projected-gradient ascent of ell_e along the steady-state
// manifold. Ties go to the lexicographically lowest decision vector.
SteadyOptimum solve_steady_state_optimum(const SteadyOptimumSpec& spec);

}  // namespace procbench
