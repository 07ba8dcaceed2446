#include "procbench/atropine.hpp"

#include <cmath>
#include <limits>

namespace procbench {

LinearPlantModel LinearPlantModel::identified() {
  LinearPlantModel m;
  m.A << 0.8543, -0.1164,
         0.0195, 0.8576;
  m.B << -0.0382, -0.0547, 0.0103, 0.1290,
         -0.0051, 0.0072, 0.0020, 0.0078;
  m.C << -148.6124, -46.8132;
  m.K << -0.0093, 0.0115;
  return m;
}

Eigen::Vector2d lin_step(const LinearPlantModel& m, const Eigen::Vector2d& x, const Eigen::Vector4d& u) {
  return m.A * x + m.B * u;
}

double lin_output(const LinearPlantModel& m, const Eigen::Vector2d& x) { return m.C * x; }

Eigen::Vector2d kalman_update(const LinearPlantModel& m, const Eigen::Vector2d& x_hat,
                              const Eigen::Vector4d& u, double y_meas) {
  const double innovation = y_meas - m.C * x_hat;
  return m.A * x_hat + m.B * u + m.K * innovation;
}

double atropine_reward(double e_factor) { return -e_factor; }

Vector mixer_balance(const std::vector<Vector>& inlets) {
  if (inlets.empty()) throw Error(Errc::InvalidArgument, "mixer needs at least one inlet");
  Vector out(inlets.front().size(), 0.0);
  for (const auto& s : inlets) {
    if (s.size() != out.size()) throw Error(Errc::DimMismatch, "mixer inlets list different species");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s[i];
  }
  return out;
}

Vector tubular_mol_rhs(std::span<const double> c, std::size_t n_species, std::span<const double> inlet,
                       double q_tot, double dv, const NodeRateFn& rate) {
  if (!(dv > 0.0)) throw Error(Errc::InvalidArgument, "segment volume must be positive");
  if (n_species == 0 || c.size() % n_species != 0 || inlet.size() != n_species) {
    throw Error(Errc::DimMismatch, "field size is not n_species * n_nodes");
  }
  const std::size_t n = c.size() / n_species;
  Vector out(c.size(), 0.0);
  for (std::size_t i = 0; i < n_species; ++i) {
    double upstream = inlet[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double cij = c[i * n + j];
      out[i * n + j] = -q_tot * (cij - upstream) / dv;
      upstream = cij;
    }
  }
  if (rate) {
    Vector node_c(n_species), node_r(n_species);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n_species; ++i) node_c[i] = c[i * n + j];
      std::fill(node_r.begin(), node_r.end(), 0.0);
      rate(j, node_c, node_r);
      for (std::size_t i = 0; i < n_species; ++i) out[i * n + j] += node_r[i];
    }
  }
  return out;
}

namespace {

template <int R, int C>
void read_matrix(ConfigReader& reader, const std::string& key, Eigen::Matrix<double, R, C>& mat) {
  Vector flat(static_cast<std::size_t>(R * C));
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j) flat[static_cast<std::size_t>(i * C + j)] = mat(i, j);
  reader.read_exact(key, flat);  // row-major
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j) mat(i, j) = flat[static_cast<std::size_t>(i * C + j)];
}

}  // namespace

AtropineEnv::AtropineEnv(const Json& config) {
  ConfigReader reader(config, "");
  {
    ConfigReader mr = reader.child("model");
    read_matrix(mr, "A", m_.A);
    read_matrix(mr, "B", m_.B);
    read_matrix(mr, "C", m_.C);
    read_matrix(mr, "K", m_.K);
    mr.finish();
  }
  {
    Vector q(op_.q_ss.data(), op_.q_ss.data() + 4);
    reader.read_exact("q_ss", q);
    op_.q_ss = Eigen::Vector4d(q[0], q[1], q[2], q[3]);
    reader.read("y_ss", op_.y_ss);
    reader.read("q_min", op_.q_min);
    reader.read("q_max", op_.q_max);
    if (!(op_.q_min < op_.q_max) || (op_.q_ss.array() < op_.q_min).any() || (op_.q_ss.array() > op_.q_max).any()) {
      throw Error(Errc::ConfigError, "q_ss must lie within [q_min, q_max]");
    }
  }
  reader.read("state_limit", state_limit_);
  reader.read("init_half_width", init_half_width_);
  reader.read("disturbance_std", disturbance_std_);
  if (!(state_limit_ > 0.0) || init_half_width_ < 0.0 || init_half_width_ > state_limit_ || disturbance_std_ < 0.0) {
    throw Error(Errc::ConfigError, "invalid atropine state box, init box or disturbance");
  }

  cfg_.max_steps = 60;
  cfg_.error_reward = -100000.0;
  read_episode_overrides(reader);
  reader.finish();

  cfg_.action_space = make_space(Vector(4, op_.q_min), Vector(4, op_.q_max));
  const double inf = std::numeric_limits<double>::infinity();
  const double e_span = std::abs(m_.C(0)) * state_limit_ + std::abs(m_.C(1)) * state_limit_;
  Vector lo{-inf, -inf, op_.y_ss - e_span}, hi{inf, inf, op_.y_ss + e_span};
  for (int i = 0; i < 4; ++i) {
    lo.push_back(op_.q_min - op_.q_ss(i));
    hi.push_back(op_.q_max - op_.q_ss(i));
  }
  cfg_.observation_space = make_space(lo, hi);
  check_episode_config();
  x_ = Vector(2, 0.0);
}

double AtropineEnv::reward_floor() const {
  const double e_max = op_.y_ss + (std::abs(m_.C(0)) + std::abs(m_.C(1))) * state_limit_;
  return atropine_reward(e_max);
}

Vector AtropineEnv::nominal_action() const { return Vector(op_.q_ss.data(), op_.q_ss.data() + 4); }

Json AtropineEnv::metadata() const {
  Json m = Environment::metadata();
  m["published_o_dim"] = 39;
  m["observation_layout"] = "x_hat(2), e_factor(1), previous deviation input(4)";
  return m;
}

double AtropineEnv::e_factor() const {
  return op_.y_ss + lin_output(m_, Eigen::Vector2d(x_[0], x_[1]));
}

void AtropineEnv::sample_initial_state(Rng& rng) {
  for (double& v : x_) v = init_half_width_ > 0.0 ? rng.uniform(-init_half_width_, init_half_width_) : 0.0;
  x_hat_.setZero();
  u_prev_.setZero();
}

void AtropineEnv::advance(std::span<const double> action) {
  const Eigen::Vector4d u = Eigen::Vector4d(action[0], action[1], action[2], action[3]) - op_.q_ss;
  const Eigen::Vector2d x(x_[0], x_[1]);
  const double y = lin_output(m_, x);
  x_hat_ = kalman_update(m_, x_hat_, u, y);
  Eigen::Vector2d next = lin_step(m_, x, u);
  if (disturbance_std_ > 0.0) {
    next(0) += disturbance_std_ * rng_.normal();
    next(1) += disturbance_std_ * rng_.normal();
  }
  x_ = {next(0), next(1)};
  u_prev_ = u;
}

Vector AtropineEnv::observe() const {
  return {x_hat_(0), x_hat_(1), e_factor(), u_prev_(0), u_prev_(1), u_prev_(2), u_prev_(3)};
}

bool AtropineEnv::state_valid() const {
  return all_finite(x_) && std::abs(x_[0]) <= state_limit_ && std::abs(x_[1]) <= state_limit_;
}

double AtropineEnv::transition_reward(std::span<const double>) { return atropine_reward(e_factor()); }

}  // namespace procbench
