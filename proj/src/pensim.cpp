#include "procbench/pensim.hpp"

#include <algorithm>
#include <cmath>

namespace procbench {

void pensim_rhs(std::span<const double> s, const PenRates& r, std::span<const double> a,
                const PenBalanceParams& p, double F_evp, std::span<double> ds) {
  using namespace pen;
  const double V_ = s[V];
  if (!(V_ > 1e-6)) throw Error(Errc::DegenerateVolume, "fermenter volume vanished");
  const double F_in = a[F_s] + a[F_oil] + a[F_PAA] + a[F_ab] + a[F_w];
  const double D = F_in / V_;

  ds[A0] = r.r_b - r.r_diff - D * s[A0];
  ds[A1] = p.literal_degeneration ? r.r_e - r.r_b + r.r_diff - r.r_deg * D * s[A1]
                                  : r.r_e - r.r_b + r.r_diff - r.r_deg - D * s[A1];
  ds[A3] = r.r_deg - r.r_a - D * s[A3];
  ds[A4] = r.r_a - D * s[A4];
  ds[P] = r.r_p - r.r_h - D * s[P];
  ds[S] = -p.Y_sX * r.r_e - p.Y_sX * r.r_b - p.m_s * r.r_m - p.Y_sP * r.r_p + a[F_s] * p.c_s / V_ +
          a[F_oil] * p.c_oil / V_;
  ds[V] = F_in - F_evp - a[F_dis];
}

double pensim_reward(std::span<const double> prev, std::span<const double> next, std::span<const double> a,
                     std::span<const double> a_prev, double lambda) {
  const double produced = (next[pen::P] * next[pen::V] - prev[pen::P] * prev[pen::V]) / 1000.0;
  double jump = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) jump += (a[i] - a_prev[i]) * (a[i] - a_prev[i]);
  return produced - lambda * jump;
}

void PenDemoKinetics::check() const {
  for (double v : {k_e, k_b, k_diff, k_deg, k_a, K_s, q_p, K_p, K_I, k_h, evaporation}) {
    if (!(v >= 0.0)) throw Error(Errc::ConfigError, "kinetic parameters must be nonnegative");
  }
  if (!(K_s > 0.0 && K_p > 0.0 && K_I > 0.0)) throw Error(Errc::ConfigError, "saturation constants must be positive");
}

PenRates PenDemoKinetics::rates(std::span<const double> s) const {
  using namespace pen;
  const double sub = std::max(0.0, s[S]);
  const double f_s = sub / (K_s + sub);
  PenRates r;
  r.r_e = k_e * s[A0] * f_s;
  r.r_b = k_b * s[A1] * f_s;
  r.r_diff = k_diff * s[A0];
  r.r_deg = k_deg * s[A1];
  r.r_a = k_a * s[A3];
  r.r_p = q_p * s[A1] * sub / (K_p + sub + sub * sub / K_I);
  r.r_h = k_h * s[P];
  r.r_m = s[A0] + s[A1];
  return r;
}

namespace {

constexpr double kPMax = 40.0;  // state-box cap on penicillin, g/L

}  // namespace

PenSimEnv::PenSimEnv(const Json& config) {
  ConfigReader reader(config, "");
  {
    ConfigReader b = reader.child("balance");
    b.read("Y_sX", bal_.Y_sX);
    b.read("Y_sP", bal_.Y_sP);
    b.read("m_s", bal_.m_s);
    b.read("c_s", bal_.c_s);
    b.read("c_oil", bal_.c_oil);
    b.read("literal_degeneration", bal_.literal_degeneration);
    b.finish();
    for (double v : {bal_.Y_sX, bal_.Y_sP, bal_.m_s, bal_.c_s, bal_.c_oil}) {
      if (!(v >= 0.0)) throw Error(Errc::ConfigError, "balance parameters must be nonnegative");
    }
  }
  {
    ConfigReader k = reader.child("kinetics");
    k.read("name", kinetics_name_);
    if (kinetics_name_ != "demo") throw Error(Errc::ConfigError, "unknown kinetics '" + kinetics_name_ + "'");
    k.read("k_e", demo_.k_e);
    k.read("k_b", demo_.k_b);
    k.read("k_diff", demo_.k_diff);
    k.read("k_deg", demo_.k_deg);
    k.read("k_a", demo_.k_a);
    k.read("K_s", demo_.K_s);
    k.read("q_p", demo_.q_p);
    k.read("K_p", demo_.K_p);
    k.read("K_I", demo_.K_I);
    k.read("k_h", demo_.k_h);
    k.read("evaporation", demo_.evaporation);
    k.finish();
    demo_.check();
    kin_ = [d = demo_](std::span<const double> s) { return d.rates(s); };
  }

  cfg_.max_steps = 1150;
  cfg_.error_reward = -100.0;
  read_episode_overrides(reader);
  reader.read("step_hours", step_hours_);
  reader.read("substeps", substeps_);
  if (!(step_hours_ > 0.0) || substeps_ < 1) throw Error(Errc::ConfigError, "step_hours and substeps must be positive");
  reader.read("smoothness", lambda_);
  reader.read("reward_scale", reward_scale_);
  if (!(lambda_ >= 0.0 && reward_scale_ > 0.0)) throw Error(Errc::ConfigError, "bad smoothness or reward_scale");

  //                   F_s  F_oil F_PAA F_ab F_w  F_dis   (L/h)
  cfg_.action_space = read_space(reader, "action_box",
                                 make_space({0.0, 0.0, 0.0, 0.0, 0.0, 0.0}, {40.0, 15.0, 5.0, 10.0, 30.0, 60.0}));
  u_nominal_ = {15.0, 4.0, 1.0, 2.0, 5.0, 20.0};
  reader.read_exact("nominal_action", u_nominal_);
  if (!cfg_.action_space.contains(u_nominal_)) throw Error(Errc::ConfigError, "nominal action outside the action box");

  state_box_ = read_space(reader, "state_box",
                          make_space({0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0e4},
                                     {100.0, 100.0, 100.0, 100.0, kPMax, 200.0, 1.2e5}));
  x_initial_ = {0.2, 0.3, 0.0, 0.0, 0.0, 1.0, 5.8e4};
  reader.read_exact("initial_state", x_initial_);
  reader.read("init_jitter", init_jitter_);
  if (!(init_jitter_ >= 0.0 && init_jitter_ < 1.0)) throw Error(Errc::ConfigError, "init_jitter must be in [0, 1)");
  if (!state_box_.contains(x_initial_)) throw Error(Errc::ConfigError, "initial state outside the state box");
  reader.finish();

  Vector lo(state_box_.low), hi(state_box_.high);
  lo.push_back(0.0);
  hi.push_back(1.0);
  lo.push_back(0.0);
  hi.push_back(4.0 * 100.0);
  cfg_.observation_space = make_space(lo, hi);
  check_episode_config();
  x_ = x_initial_;
}

OdeSystem PenSimEnv::system() const {
  return OdeSystem{pen::kStateDim, [bal = bal_, kin = kin_, evp = demo_.evaporation](
                                       double, std::span<const double> x, std::span<const double> u,
                                       std::span<double> dx) {
                     pensim_rhs(x, kin(x), u, bal, evp * x[pen::V], dx);
                   }};
}

double PenSimEnv::reward_floor() const {
  // d(PV)/dt = V (r_p - r_h) - P (F_evp + F_dis) >= -((k_h + evaporation) V + F_dis) P.
  const double v_max = state_box_.high[pen::V], p_max = state_box_.high[pen::P];
  const double f_dis_max = cfg_.action_space.high[pen::F_dis];
  const double loss_kg = ((demo_.k_h + demo_.evaporation) * v_max + f_dis_max) * p_max * step_hours_ / 1000.0;
  const double jump = lambda_ * static_cast<double>(pen::kInputDim);  // box-normalised actions
  return -reward_scale_ * (loss_kg + jump);
}

Json PenSimEnv::metadata() const {
  Json m = Environment::metadata();
  m["kinetics"] = kinetics_name_;
  m["kinetics_canonical"] = false;
  m["literal_degeneration"] = bal_.literal_degeneration;
  m["step_hours"] = step_hours_;
  m["reward_scale"] = reward_scale_;
  return m;
}

void PenSimEnv::sample_initial_state(Rng& rng) {
  x_ = x_initial_;
  for (double& v : x_) v *= 1.0 + init_jitter_ * (2.0 * rng.uniform() - 1.0);
  prev_state_ = x_;
  has_prev_action_ = false;
}

Vector PenSimEnv::normalised(std::span<const double> a) const {
  Vector z(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    z[i] = (a[i] - cfg_.action_space.low[i]) / (cfg_.action_space.high[i] - cfg_.action_space.low[i]);
  }
  return z;
}

void PenSimEnv::advance(std::span<const double> action) {
  prev_state_ = x_;
  const OdeSystem sys = system();
  Rk4Stepper stepper(sys);
  stepper.integrate(0.0, x_, action, step_hours_, step_hours_ / substeps_);
}

Vector PenSimEnv::observe() const {
  Vector obs = x_;
  obs.push_back(static_cast<double>(steps_taken()) / cfg_.max_steps);
  obs.push_back(x_[pen::A0] + x_[pen::A1] + x_[pen::A3] + x_[pen::A4]);
  return obs;
}

bool PenSimEnv::state_valid() const { return all_finite(x_) && state_box_.contains(x_); }

double PenSimEnv::transition_reward(std::span<const double> action) {
  const Vector z = normalised(action);
  const Vector z_prev = has_prev_action_ ? prev_action_ : z;
  prev_action_ = z;
  has_prev_action_ = true;
  return reward_scale_ * pensim_reward(prev_state_, x_, z, z_prev, lambda_);
}

}  // namespace procbench
