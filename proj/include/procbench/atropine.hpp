#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "procbench/env.hpp"

namespace procbench {

// Identified discrete-time deviation model x' = A x + B u, y = C x, with the
// steady-state Kalman gain K.
struct LinearPlantModel {
  Eigen::Matrix2d A;
  Eigen::Matrix<double, 2, 4> B;
  Eigen::RowVector2d C;
  Eigen::Vector2d K;

  static LinearPlantModel identified();
};

struct AtropineOperatingPoint {
  Eigen::Vector4d q_ss{0.4078, 0.1089, 0.3888, 0.2126};  // mL/min
  double y_ss = 13.057;                                  // kg/kg
  double q_min = 0.0;
  double q_max = 5.0;
};

Eigen::Vector2d lin_step(const LinearPlantModel& m, const Eigen::Vector2d& x, const Eigen::Vector4d& u);
double lin_output(const LinearPlantModel& m, const Eigen::Vector2d& x);
Eigen::Vector2d kalman_update(const LinearPlantModel& m, const Eigen::Vector2d& x_hat,
                              const Eigen::Vector4d& u, double y_meas);
double atropine_reward(double e_factor);

// Per-species sum over inlet streams; all streams must list the same species.
Vector mixer_balance(const std::vector<Vector>& inlets);

// Reaction rates for one MOL node: (node index, concentrations) -> rates.
using NodeRateFn = std::function<void(std::size_t node, std::span<const double> c, std::span<double> r)>;

// c is species-major: c[i * n_nodes + j]. Upwind transport in volume with the
// inlet concentration as node -1. Without a rate function the reactor is inert.
Vector tubular_mol_rhs(std::span<const double> c, std::size_t n_species, std::span<const double> inlet,
                       double q_tot, double dv, const NodeRateFn& rate = {});

class AtropineEnv : public EpisodicEnv {
 public:
  explicit AtropineEnv(const Json& config = Json::object());

  std::string name() const override { return "atropine"; }
  double reward_floor() const override;
  Vector nominal_action() const override;
  Json metadata() const override;

  const LinearPlantModel& model() const { return m_; }
  const AtropineOperatingPoint& operating_point() const { return op_; }
  Eigen::Vector2d estimate() const { return x_hat_; }
  double e_factor() const;
  double state_limit() const { return state_limit_; }

 protected:
  void sample_initial_state(Rng& rng) override;
  void advance(std::span<const double> action) override;
  Vector observe() const override;
  bool state_valid() const override;
  double transition_reward(std::span<const double> action) override;

 private:
  LinearPlantModel m_ = LinearPlantModel::identified();
  AtropineOperatingPoint op_;
  double state_limit_ = 5.0;
  double init_half_width_ = 0.05;
  double disturbance_std_ = 0.0;
  Eigen::Vector2d x_hat_ = Eigen::Vector2d::Zero();
  Eigen::Vector4d u_prev_ = Eigen::Vector4d::Zero();
};

}  // namespace procbench
