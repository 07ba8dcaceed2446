#pragma once

#include <array>
#include <span>
#include <string>

#include "procbench/env.hpp"

namespace procbench {

// ---------------------------------------------------------------- upstream

// Perfusion bioreactor (1) and microfiltration separator (2). Time in min,
// volumes in L, cells in cells/L, metabolites in mM, mAb in mg/L, T in degC.
namespace up {
enum Index : std::size_t {
  V1, Xv1, Xt1, GLC1, GLN1, LAC1, AMM1, MAB1, T,
  V2, Xv2, Xt2, GLC2, GLN2, LAC2, AMM2, MAB2,
  kStateDim
};
// Inputs: flows in L/min, coolant in degC, fresh-media concentrations in mM.
enum Input : std::size_t { F_in, F_r, F_1, F_2, T_c, GLC_in, AMM_in, kInputDim };
}  // namespace up

struct UpstreamParams {
  double K_d_amm = 1.76;
  double K_d_gln = 0.00016;
  double K_glc = 0.75;
  double K_gln = 0.038;
  double KI_amm = 28.48;
  double KI_lac = 171.76;
  double m_glc = 8.2e-16;
  double Q_mab_max = 1.1e-11;
  double Y_amm_gln = 0.45;
  double Y_lac_glc = 2.0;
  double Y_X_glc = 2.6e8;
  double Y_X_gln = 8.0e8;
  double alpha1 = 5.7e-15;
  double alpha2 = 4.0;
  double minus_dH = 5.0e5;  // J/mol
  double rho = 1560.0;      // g/L
  double c_p = 1.244;       // J/(g degC)
  double U = 4.0e2;         // J/(h degC)
  double T_in = 37.0;
  double eta_rec = 0.92;
  double eta_ret = 0.20;
  double n_death = 2.0;
  double pH_opt = 7.1;
  double omega_mab = 0.2;
  double GLN_in = 8.0;          // fresh-media glutamine, mM
  double avogadro = 6.02214076e23;

  void check() const;
};

struct GrowthRates {
  double mu = 0.0;
  double mu_d = 0.0;
};

double mu_max_of(double T);
double mu_d_max_of(double T);
// Throws TemperatureOutOfRange outside [33, 37] degC.
GrowthRates growth_rates(std::span<const double> s, const UpstreamParams& p);
double ph_of_ammonia(double amm);

// Throws DegenerateVolume for V1 or V2 <= 1e-6 L and ZeroRecycleFlow when
// F_1 > 0 with F_r = 0 (the retention law divides by F_r).
void upstream_rhs(std::span<const double> s, std::span<const double> a, const UpstreamParams& p,
                  std::span<double> ds);
OdeSystem upstream_system(const UpstreamParams& p);

// mAb1 F_1 + mAb2 F_2, mg/min.
double economic_objective(std::span<const double> s, std::span<const double> a);

// ---------------------------------------------------------------- downstream

// Lengths in cm, volumes in mL, velocities are superficial in cm/min,
// concentrations in mg/mL, modifier in M.
struct CaptureParams {
  double q_max1 = 36.45;
  double k1 = 0.704;
  double q_max2 = 77.85;
  double k2 = 2.1e-2;
  double K = 15.3;
  double D_eff = 7.6e-5;
  double d_ax_per_v = 0.55;
  double k_f_coef = 6.7e-2;
  double k_f_exp = 0.58;
  double r_p = 4.25e-3;
  double length = 20.0;
  double volume = 1.0e5;
  double eps_c = 0.31;
  double eps_p = 0.94;
  double q_max_elu = 114.3;
  double k_elu = 0.64;
  double H0_elu = 2.2e-2;
  double beta_elu = 0.2;

  double area() const { return volume / length; }
  double d_ax(double v) const { return d_ax_per_v * v; }
  double k_f(double v) const;
};

// Kinetic adsorption column with a transported modifier (capture elution,
// CEX and AEX share it).
struct ElutionParams {
  double q_max = 114.3;
  double k = 0.64;
  double H0 = 2.2e-2;
  double beta = 0.2;
  double d_ax_per_v = 0.55;
  double length = 20.0;
  double volume = 1.0e5;
  double eps_c = 0.31;
  double eps = 0.31 + 0.69 * 0.94;  // total void
  // The mobile-phase exchange term as printed carries +dq/dt, which creates
  // mass on adsorption; the default uses the conservative -dq/dt.
  bool literal_exchange_sign = false;

  double area() const { return volume / length; }
};

ElutionParams capture_elution_params(const CaptureParams& p);
ElutionParams cex_params();
ElutionParams aex_params();

struct LoopParams {
  double d_ax_per_v = 2.9e2;
  double length = 600.0;
  double volume = 5.0e5;

  double area() const { return volume / length; }
};

// Flat field layouts. Loading: c[n], c_p[n * n_r] (node-major, shell 0 at
// the particle centre), q1[n], q2[n]. Elution: c[n], q[n], c_s[n]. Loop: c[n].
struct LoadingLayout {
  std::size_t n, n_r;
  std::size_t size() const { return n * (3 + n_r); }
  std::size_t c(std::size_t i) const { return i; }
  std::size_t cp(std::size_t i, std::size_t j) const { return n + i * n_r + j; }
  std::size_t q1(std::size_t i) const { return n * (1 + n_r) + i; }
  std::size_t q2(std::size_t i) const { return n * (2 + n_r) + i; }
};

struct ElutionLayout {
  std::size_t n;
  std::size_t size() const { return 3 * n; }
  std::size_t c(std::size_t i) const { return i; }
  std::size_t q(std::size_t i) const { return n + i; }
  std::size_t cs(std::size_t i) const { return 2 * n + i; }
};

// Capture column in loading mode: mobile phase with Danckwerts inlet at
// c_feed, spherical pore diffusion over grid.n_radial equal-thickness shells,
// two-site kinetic adsorption driven by the outer-shell pore concentration.
// include_pore_diffusion = false drops only the intra-particle diffusion
// term (used by the split stepper).
void grm_loading_rhs(std::span<const double> x, double v, double c_feed, const CaptureParams& p,
                     const SpatialGrid& grid, std::span<double> dx, bool include_pore_diffusion = true);

// Intra-particle diffusion operator for one axial node (n_r x n_r, acting on
// the shell concentrations).
Eigen::MatrixXd pore_diffusion_matrix(const CaptureParams& p, std::size_t n_r);

// Mass per unit column volume held in a loading-mode column (mg/mL), node i.
double loading_node_mass(std::span<const double> x, const CaptureParams& p, const SpatialGrid& grid,
                         std::size_t i);

// Throws ZeroModifier if the isotherm is evaluated where c_s <= 1e-12.
void elution_rhs(std::span<const double> x, double v, double c_feed, double cs_feed,
                 const ElutionParams& p, const SpatialGrid& grid, std::span<double> dx);
// Flow-through column: elution_rhs with k forced to zero.
void aex_rhs(std::span<const double> x, double v, double c_feed, double cs_feed, const ElutionParams& p,
             const SpatialGrid& grid, std::span<double> dx);
void loop_rhs(std::span<const double> c, double v, double c_feed, double d_ax, const SpatialGrid& grid,
              std::span<double> dc);

// Stiffness bound (largest Gershgorin radius of the rhs Jacobian) used to
// pick explicit sub-steps. pore_diffusion as in grm_loading_rhs.
double loading_stiffness(const CaptureParams& p, const SpatialGrid& grid, double v, double c_scale,
                         bool include_pore_diffusion);
double elution_stiffness(const ElutionParams& p, const SpatialGrid& grid, double v, double cs_min);
double loop_stiffness(const LoopParams& p, const SpatialGrid& grid, double v);

// ---------------------------------------------------------------- twin columns

struct TwinColumnSchedule {
  int loading = 0;  // index of the column connected to the harvest
  double clock = 0.0;
  double load_duration = 720.0;  // min; purification takes as long
};

struct TickResult {
  TwinColumnSchedule schedule;
  int swaps = 0;
};

// Advances the phase clock; each time it reaches load_duration the roles swap
// and the clock restarts with the remainder. A relative slack of 1e-9 absorbs
// round-off from summing a partition of one phase.
TickResult twin_column_tick(const TwinColumnSchedule& s, double dt);

// ---------------------------------------------------------------- column stepping

// One unit operation advanced by explicit RK4 with a stiffness-derived
// sub-step, sub-step halving when a field would turn negative (floored at zero
// after 10 halvings), and cumulative inlet/outlet mass in mg.
class ColumnUnit {
 public:
  enum class Kind { Loading, Elution, Loop };

  static ColumnUnit loading(const CaptureParams& p, const SpatialGrid& grid);
  static ColumnUnit elution(const ElutionParams& p, const SpatialGrid& grid);
  static ColumnUnit loop(const LoopParams& p, const SpatialGrid& grid);

  Kind kind() const { return kind_; }
  const SpatialGrid& grid() const { return grid_; }
  Vector& fields() { return x_; }
  const Vector& fields() const { return x_; }
  double area() const;
  double outlet_concentration() const;
  double inlet_mass() const { return in_mass_; }
  double outlet_mass() const { return out_mass_; }
  // mAb currently held in the unit, mg.
  double held_mass() const;
  void reset_counters() { in_mass_ = out_mass_ = 0.0; }
  int last_substeps() const { return last_substeps_; }

  // Advance by duration at superficial velocity v with constant inlet values.
  void advance(double duration, double v, double c_feed, double cs_feed = 0.0);

  // Elution-mode state with the same mass per column volume as a loading
  // state: pore liquid joins the mobile phase, both sites join q.
  static Vector loading_to_elution(std::span<const double> loading, const CaptureParams& p,
                                   const SpatialGrid& grid, double cs_fill);

  const CaptureParams& capture() const { return cap_; }
  const ElutionParams& elution_params() const { return elu_; }
  const LoopParams& loop_params() const { return loop_; }

 private:
  void rhs(std::span<const double> x, double v, double c_feed, double cs_feed, bool with_pores,
           std::span<double> dx) const;
  double stiffness(double v, double c_feed, double cs_feed) const;
  bool try_step(double h, double v, double c_feed, double cs_feed, bool force = false);
  void pore_propagate(double h);

  Kind kind_ = Kind::Loop;
  SpatialGrid grid_;
  CaptureParams cap_;
  ElutionParams elu_;
  LoopParams loop_;
  Vector x_;
  double in_mass_ = 0.0;
  double out_mass_ = 0.0;
  int last_substeps_ = 0;
  // Cached exact pore-diffusion propagator for the current sub-step.
  double prop_h_ = -1.0;
  Eigen::MatrixXd prop_;
  Vector k1_, k2_, k3_, k4_, stage_, trial_;
};

// ---------------------------------------------------------------- environment

struct MabGrids {
  std::size_t capture_axial = 30;
  std::size_t capture_radial = 8;
  std::size_t loop_axial = 40;
  std::size_t polish_axial = 20;
};

// Integrated upstream + downstream plant. Action: the 7 upstream inputs,
// then the loading and purification superficial velocities (cm/min).
// Observation: the 17 upstream states followed by every column field
// (capture columns in the loading layout plus a modifier field).
class MabEnv : public EpisodicEnv {
 public:
  explicit MabEnv(const Json& config = Json::object());

  std::string name() const override { return "mab"; }
  double reward_floor() const override { return 0.0; }
  Vector nominal_action() const override { return u_nominal_; }
  Json metadata() const override;

  const UpstreamParams& upstream_params() const { return up_; }
  const OdeSystem& upstream() const { return up_sys_; }
  const Vector& nominal_state() const { return x_nominal_; }
  const ContinuousSpace& state_box() const { return state_box_; }
  const ContinuousSpace& init_box() const { return init_box_; }
  const TwinColumnSchedule& schedule() const { return sched_; }
  double step_minutes() const { return step_minutes_; }
  int substeps() const { return substeps_; }
  // mAb delivered by the polishing train since reset, mg.
  double product_mass() const { return product_mg_; }
  std::size_t observation_dim() const;
  // Column fields of the current state, one CSV row per node.
  void write_columns_csv(const std::string& path) const;

 protected:
  void sample_initial_state(Rng& rng) override;
  void advance(std::span<const double> action) override;
  Vector observe() const override;
  bool state_valid() const override;
  double transition_reward(std::span<const double> action) override;

 private:
  void reset_downstream();
  void advance_downstream_minute(double c_feed, double v_load, double v_purify);
  void switch_roles();
  std::size_t capture_obs_size() const;

  UpstreamParams up_;
  OdeSystem up_sys_;
  CaptureParams cap_;
  ElutionParams cex_, aex_;
  LoopParams loop_;
  MabGrids grids_;
  double step_minutes_ = 60.0;
  int substeps_ = 60;
  double cs_elution_ = 0.5;
  double cs_cex_ = 0.5;
  double cs_aex_ = 0.5;
  double reward_scale_ = 1e-3;
  Vector u_nominal_;
  Vector x_nominal_;
  ContinuousSpace state_box_;
  ContinuousSpace init_box_;
  TwinColumnSchedule sched_;
  double load_duration_ = 720.0;

  std::array<ColumnUnit, 2> capture_;  // loading role in the loading layout
  std::array<bool, 2> eluting_{false, true};
  std::array<ColumnUnit, 2> capture_elu_;
  ColumnUnit vi_loop_, cex_col_, holdup_loop_, aex_col_;
  double product_mg_ = 0.0;
  double last_reward_ = 0.0;
};

}  // namespace procbench
