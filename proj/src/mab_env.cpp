#include <algorithm>
#include <cmath>
#include <fstream>

#include "procbench/error.hpp"
#include "procbench/mab.hpp"

namespace procbench {

namespace {

void read_upstream(ConfigReader r, UpstreamParams& p) {
  r.read("K_d_amm", p.K_d_amm);
  r.read("K_d_gln", p.K_d_gln);
  r.read("K_glc", p.K_glc);
  r.read("K_gln", p.K_gln);
  r.read("KI_amm", p.KI_amm);
  r.read("KI_lac", p.KI_lac);
  r.read("m_glc", p.m_glc);
  r.read("Q_mab_max", p.Q_mab_max);
  r.read("Y_amm_gln", p.Y_amm_gln);
  r.read("Y_lac_glc", p.Y_lac_glc);
  r.read("Y_X_glc", p.Y_X_glc);
  r.read("Y_X_gln", p.Y_X_gln);
  r.read("alpha1", p.alpha1);
  r.read("alpha2", p.alpha2);
  r.read("minus_dH", p.minus_dH);
  r.read("rho", p.rho);
  r.read("c_p", p.c_p);
  r.read("U", p.U);
  r.read("T_in", p.T_in);
  r.read("eta_rec", p.eta_rec);
  r.read("eta_ret", p.eta_ret);
  r.read("n_death", p.n_death);
  r.read("pH_opt", p.pH_opt);
  r.read("omega_mab", p.omega_mab);
  r.read("GLN_in", p.GLN_in);
  r.finish();
  p.check();
}

void read_capture(ConfigReader r, CaptureParams& p) {
  r.read("q_max1", p.q_max1);
  r.read("k1", p.k1);
  r.read("q_max2", p.q_max2);
  r.read("k2", p.k2);
  r.read("K", p.K);
  r.read("D_eff", p.D_eff);
  r.read("d_ax_per_v", p.d_ax_per_v);
  r.read("k_f_coef", p.k_f_coef);
  r.read("k_f_exp", p.k_f_exp);
  r.read("r_p", p.r_p);
  r.read("length", p.length);
  r.read("volume", p.volume);
  r.read("eps_c", p.eps_c);
  r.read("eps_p", p.eps_p);
  r.read("q_max_elu", p.q_max_elu);
  r.read("k_elu", p.k_elu);
  r.read("H0_elu", p.H0_elu);
  r.read("beta_elu", p.beta_elu);
  r.finish();
}

void read_elution(ConfigReader r, ElutionParams& p) {
  r.read("q_max", p.q_max);
  r.read("k", p.k);
  r.read("H0", p.H0);
  r.read("beta", p.beta);
  r.read("d_ax_per_v", p.d_ax_per_v);
  r.read("length", p.length);
  r.read("volume", p.volume);
  r.read("eps_c", p.eps_c);
  r.read("eps", p.eps);
  r.read("literal_exchange_sign", p.literal_exchange_sign);
  r.finish();
}

void read_loop(ConfigReader r, LoopParams& p) {
  r.read("d_ax_per_v", p.d_ax_per_v);
  r.read("length", p.length);
  r.read("volume", p.volume);
  r.finish();
}

constexpr std::size_t kActionDim = up::kInputDim + 2;

}  // namespace

MabEnv::MabEnv(const Json& config) {
  ConfigReader reader(config, "");
  read_upstream(reader.child("params"), up_);
  up_sys_ = upstream_system(up_);
  read_capture(reader.child("capture"), cap_);
  cex_ = cex_params();
  aex_ = aex_params();
  read_elution(reader.child("cex"), cex_);
  read_elution(reader.child("aex"), aex_);
  read_loop(reader.child("loop"), loop_);
  {
    ConfigReader g = reader.child("grids");
    g.read("capture_axial", grids_.capture_axial);
    g.read("capture_radial", grids_.capture_radial);
    g.read("loop_axial", grids_.loop_axial);
    g.read("polish_axial", grids_.polish_axial);
    g.finish();
  }
  {
    ConfigReader m = reader.child("modifier");
    m.read("elution", cs_elution_);
    m.read("cex", cs_cex_);
    m.read("aex", cs_aex_);
    m.finish();
    if (!(cs_elution_ > 1e-12 && cs_cex_ > 1e-12 && cs_aex_ >= 0.0))
      throw Error(Errc::ConfigError, "modifier concentrations must be positive");
  }
  reader.read("load_duration", load_duration_);
  if (!(load_duration_ > 0.0)) throw Error(Errc::ConfigError, "load_duration must be positive");
  reader.read("step_minutes", step_minutes_);
  reader.read("substeps", substeps_);
  if (!(step_minutes_ > 0.0) || substeps_ < 1) throw Error(Errc::ConfigError, "step_minutes and substeps must be positive");
  reader.read("reward_scale", reward_scale_);
  if (!(reward_scale_ >= 0.0)) throw Error(Errc::ConfigError, "reward_scale must be nonnegative");

  cfg_.max_steps = 200;
  cfg_.error_reward = -100.0;
  read_episode_overrides(reader);

  //                        F_in F_r  F_1  F_2  T_c   GLC_in AMM_in v_load v_purify
  cfg_.action_space = read_space(reader, "action_box",
                                 make_space({0.0, 0.0, 0.0, 0.0, 30.0, 0.0, 0.0, 0.0, 0.0},
                                            {2.0, 4.0, 6.0, 2.0, 36.5, 50.0, 10.0, 1.0, 1.0}));
  if (cfg_.action_space.dim() != kActionDim) throw Error(Errc::ConfigError, "mab action box needs 9 entries");
  u_nominal_ = {1.0, 2.0, 3.0, 1.0, 33.0, 25.0, 0.0, 0.2, 0.2};
  reader.read_exact("nominal_action", u_nominal_);
  if (!cfg_.action_space.contains(u_nominal_)) throw Error(Errc::ConfigError, "nominal action outside the action box");

  // Long open-loop run from the nominal action, so Newton only polishes.
  Vector guess{800.0,     7.6766858e9, 2.6580201e10, 0.19141422, 0.010225672, 20.450505,
               1.4956984, 27.679567,   36.986306,    100.0,      1.8424046e9, 6.3792482e9,
               0.45939412, 0.024541613, 49.081212,   3.5896762,  66.430961};
  reader.read_exact("state_guess", guess);
  const std::span<const double> u_up(u_nominal_.data(), up::kInputDim);
  // Newton in coordinates scaled by the guess magnitude, so cell counts and
  // millimolar rows converge to the same relative accuracy.
  Vector scale(up::kStateDim), z0(up::kStateDim);
  for (std::size_t i = 0; i < up::kStateDim; ++i) {
    scale[i] = std::max(1.0, std::abs(guess[i]));
    z0[i] = guess[i] / scale[i];
  }
  const OdeSystem scaled{up::kStateDim, [this, &scale](double t, std::span<const double> z,
                                                      std::span<const double> u, std::span<double> dz) {
                           Vector x(z.size());
                           for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i] * scale[i];
                           up_sys_.rhs(t, x, u, dz);
                           for (std::size_t i = 0; i < z.size(); ++i) dz[i] /= scale[i];
                         }};
  SteadyStateOptions ss_opts;
  ss_opts.tolerance = 1e-13;
  const auto ss = solve_steady_state(scaled, u_up, z0, ss_opts);
  if (!ss.converged) throw Error(Errc::NoFeasibleSteadyState, "nominal upstream steady state did not converge");
  x_nominal_.resize(up::kStateDim);
  for (std::size_t i = 0; i < up::kStateDim; ++i) x_nominal_[i] = ss.x_star[i] * scale[i];

  state_box_ = read_space(reader, "state_box",
                          make_space({100.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 33.0,
                                      5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
                                     {2000.0, 1e11, 1e11, 200.0, 100.0, 500.0, 100.0, 1e4, 37.0,
                                      500.0, 1e11, 1e11, 200.0, 100.0, 500.0, 100.0, 1e4}));
  if (state_box_.dim() != up::kStateDim) throw Error(Errc::ConfigError, "mab state box needs 17 entries");
  if (!state_box_.contains(x_nominal_)) throw Error(Errc::ConfigError, "nominal steady state outside the state box");

  double init_fraction = 0.1;
  reader.read("init_fraction", init_fraction);
  Vector lo(up::kStateDim), hi(up::kStateDim);
  for (std::size_t i = 0; i < up::kStateDim; ++i) {
    lo[i] = std::max(state_box_.low[i], x_nominal_[i] * (1.0 - init_fraction));
    hi[i] = std::min(state_box_.high[i], x_nominal_[i] * (1.0 + init_fraction));
  }
  init_box_ = read_space(reader, "init_box", make_space(lo, hi));
  reader.finish();

  const std::size_t n_obs = observation_dim();
  Vector obs_lo(n_obs, 0.0), obs_hi(n_obs, 1e6);
  std::copy(state_box_.low.begin(), state_box_.low.end(), obs_lo.begin());
  std::copy(state_box_.high.begin(), state_box_.high.end(), obs_hi.begin());
  cfg_.observation_space = make_space(obs_lo, obs_hi);
  check_episode_config();

  x_ = x_nominal_;
  reset_downstream();
}

void MabEnv::reset_downstream() {
  const SpatialGrid cap_grid = make_grid(grids_.capture_axial, cap_.length, grids_.capture_radial);
  const SpatialGrid cap_axial = make_grid(grids_.capture_axial, cap_.length);
  const ElutionParams elu = capture_elution_params(cap_);
  for (std::size_t k = 0; k < 2; ++k) {
    capture_[k] = ColumnUnit::loading(cap_, cap_grid);
    capture_elu_[k] = ColumnUnit::elution(elu, cap_axial);
    const ElutionLayout E{grids_.capture_axial};
    for (std::size_t i = 0; i < E.n; ++i) capture_elu_[k].fields()[E.cs(i)] = cs_elution_;
  }
  sched_ = TwinColumnSchedule{0, 0.0, load_duration_};
  eluting_ = {false, true};
  vi_loop_ = ColumnUnit::loop(loop_, make_grid(grids_.loop_axial, loop_.length));
  holdup_loop_ = ColumnUnit::loop(loop_, make_grid(grids_.loop_axial, loop_.length));
  cex_col_ = ColumnUnit::elution(cex_, make_grid(grids_.polish_axial, cex_.length));
  aex_col_ = ColumnUnit::elution(aex_, make_grid(grids_.polish_axial, aex_.length));
  const ElutionLayout P{grids_.polish_axial};
  for (std::size_t i = 0; i < P.n; ++i) {
    cex_col_.fields()[P.cs(i)] = cs_cex_;
    aex_col_.fields()[P.cs(i)] = cs_aex_;
  }
  product_mg_ = 0.0;
}

std::size_t MabEnv::capture_obs_size() const { return grids_.capture_axial * (4 + grids_.capture_radial); }

std::size_t MabEnv::observation_dim() const {
  return up::kStateDim + 2 * capture_obs_size() + 2 * grids_.loop_axial + 2 * 3 * grids_.polish_axial;
}

Json MabEnv::metadata() const {
  Json m = Environment::metadata();
  m["published_o_dim"] = 1970;
  m["upstream_state_dim"] = up::kStateDim;
  m["grids"] = {{"capture_axial", grids_.capture_axial},
                {"capture_radial", grids_.capture_radial},
                {"loop_axial", grids_.loop_axial},
                {"polish_axial", grids_.polish_axial}};
  m["placeholders"] = {{"n_death", up_.n_death}, {"pH_opt", up_.pH_opt}, {"omega_mab", up_.omega_mab},
                       {"GLN_in", up_.GLN_in}};
  m["nominal_state"] = x_nominal_;
  m["step_minutes"] = step_minutes_;
  m["reward_scale"] = reward_scale_;
  return m;
}

void MabEnv::sample_initial_state(Rng& rng) {
  x_ = init_box_.sample(rng);
  reset_downstream();
}

void MabEnv::switch_roles() {
  const int was_loading = 1 - sched_.loading;  // schedule already advanced
  const int was_purifying = sched_.loading;
  const SpatialGrid& g = capture_[was_loading].grid();
  capture_elu_[was_loading].fields() =
      ColumnUnit::loading_to_elution(capture_[was_loading].fields(), cap_, g, cs_elution_);
  std::fill(capture_[was_loading].fields().begin(), capture_[was_loading].fields().end(), 0.0);
  eluting_[was_loading] = true;
  // Regenerated resin goes back on line empty.
  std::fill(capture_[was_purifying].fields().begin(), capture_[was_purifying].fields().end(), 0.0);
  eluting_[was_purifying] = false;
}

void MabEnv::advance_downstream_minute(double c_feed, double v_load, double v_purify) {
  const double dt = step_minutes_ / substeps_;
  const int l = sched_.loading, p = 1 - l;
  capture_[l].advance(dt, v_load, c_feed);

  // Purification train in series at one volumetric flow; each unit receives
  // the mean outlet concentration of the previous one over the interval.
  const double flow = v_purify * cap_.area();
  auto pass = [&](ColumnUnit& unit, double c_in, double cs_in) {
    const double before = unit.outlet_mass();
    unit.advance(dt, flow / unit.area(), c_in, cs_in);
    return flow > 0.0 ? (unit.outlet_mass() - before) / (flow * dt) : 0.0;
  };
  double c = pass(capture_elu_[p], 0.0, cs_elution_);
  c = pass(vi_loop_, c, 0.0);
  c = pass(cex_col_, c, cs_cex_);
  c = pass(holdup_loop_, c, 0.0);
  const double before = aex_col_.outlet_mass();
  pass(aex_col_, c, cs_aex_);
  product_mg_ += aex_col_.outlet_mass() - before;

  const TickResult t = twin_column_tick(sched_, dt);
  sched_ = t.schedule;
  if (t.swaps % 2 == 1) switch_roles();
}

void MabEnv::advance(std::span<const double> action) {
  const std::span<const double> u_up = action.subspan(0, up::kInputDim);
  const double v_load = action[up::kInputDim], v_purify = action[up::kInputDim + 1];
  Rk4Stepper stepper(up_sys_);
  const double dt = step_minutes_ / substeps_;
  for (int k = 0; k < substeps_; ++k) {
    const double c_feed = std::max(0.0, x_[up::MAB2]) / 1000.0;  // mg/L -> mg/mL
    stepper.step(0.0, x_, u_up, dt);
    advance_downstream_minute(c_feed, v_load, v_purify);
  }
}

Vector MabEnv::observe() const {
  Vector obs(x_.begin(), x_.end());
  obs.reserve(observation_dim());
  const std::size_t n = grids_.capture_axial, nr = grids_.capture_radial;
  const LoadingLayout L{n, nr};
  const ElutionLayout E{n};
  for (std::size_t k = 0; k < 2; ++k) {
    Vector block(capture_obs_size(), 0.0);
    if (!eluting_[k]) {
      const Vector& f = capture_[k].fields();
      std::copy(f.begin(), f.end(), block.begin());
    } else {
      const Vector& f = capture_elu_[k].fields();
      for (std::size_t i = 0; i < n; ++i) {
        block[L.c(i)] = f[E.c(i)];
        block[L.q1(i)] = f[E.q(i)];
        block[L.size() + i] = f[E.cs(i)];
      }
    }
    obs.insert(obs.end(), block.begin(), block.end());
  }
  for (const ColumnUnit* u : {&vi_loop_, &cex_col_, &holdup_loop_, &aex_col_}) {
    obs.insert(obs.end(), u->fields().begin(), u->fields().end());
  }
  return obs;
}

bool MabEnv::state_valid() const { return all_finite(x_) && state_box_.contains(x_); }

double MabEnv::transition_reward(std::span<const double> action) {
  return reward_scale_ * economic_objective(x_, action.subspan(0, up::kInputDim));
}

void MabEnv::write_columns_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot open " + path);
  out << "unit,node,field,value\n";
  out.precision(17);
  auto dump = [&](const std::string& unit, const Vector& f, std::size_t n, std::size_t fields) {
    for (std::size_t k = 0; k < fields; ++k)
      for (std::size_t i = 0; i < n && k * n + i < f.size(); ++i)
        out << unit << ',' << i << ',' << k << ',' << f[k * n + i] << '\n';
  };
  const Vector obs = observe();
  const std::size_t cap = capture_obs_size();
  const std::size_t n = grids_.capture_axial;
  dump("capture_0", Vector(obs.begin() + up::kStateDim, obs.begin() + up::kStateDim + cap), n, cap / n);
  dump("capture_1", Vector(obs.begin() + up::kStateDim + cap, obs.begin() + up::kStateDim + 2 * cap), n, cap / n);
  dump("vi_loop", vi_loop_.fields(), grids_.loop_axial, 1);
  dump("cex", cex_col_.fields(), grids_.polish_axial, 3);
  dump("holdup_loop", holdup_loop_.fields(), grids_.loop_axial, 1);
  dump("aex", aex_col_.fields(), grids_.polish_axial, 3);
}

}  // namespace procbench
