#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "procbench/error.hpp"
#include "procbench/mab.hpp"

namespace procbench {

double CaptureParams::k_f(double v) const { return v > 0.0 ? k_f_coef * std::pow(v, k_f_exp) : 0.0; }

ElutionParams capture_elution_params(const CaptureParams& p) {
  ElutionParams e;
  e.q_max = p.q_max_elu;
  e.k = p.k_elu;
  e.H0 = p.H0_elu;
  e.beta = p.beta_elu;
  e.d_ax_per_v = p.d_ax_per_v;
  e.length = p.length;
  e.volume = p.volume;
  e.eps_c = p.eps_c;
  e.eps = p.eps_c + (1.0 - p.eps_c) * p.eps_p;
  return e;
}

ElutionParams cex_params() {
  ElutionParams e;
  e.q_max = 150.2;
  e.k = 0.99;
  e.H0 = 6.9e-4;
  e.beta = 8.5;
  e.d_ax_per_v = 1.1e-1;
  e.length = 10.0;
  e.volume = 5.0e4;
  e.eps_c = 0.34;
  e.eps = 0.34;
  return e;
}

ElutionParams aex_params() {
  ElutionParams e = cex_params();
  e.k = 0.0;
  e.d_ax_per_v = 1.6e-1;
  return e;
}

namespace {

// Shell j spans [j dr, (j+1) dr]; volumes relative to dr^3 * 4 pi / 3.
double shell_volume(std::size_t j) {
  const double a = static_cast<double>(j), b = a + 1.0;
  return b * b * b - a * a * a;
}

void check_grid(const SpatialGrid& grid, std::size_t expected, std::size_t got) {
  if (grid.n_axial < 3) throw Error(Errc::InvalidArgument, "column grid needs at least 3 axial nodes");
  if (expected != got) throw Error(Errc::DimMismatch, "column field length does not match the grid");
}

}  // namespace

void grm_loading_rhs(std::span<const double> x, double v, double c_feed, const CaptureParams& p,
                     const SpatialGrid& grid, std::span<double> dx, bool include_pore_diffusion) {
  const std::size_t n = grid.n_axial, nr = grid.n_radial;
  if (nr < 2) throw Error(Errc::InvalidArgument, "loading model needs radial shells");
  const LoadingLayout L{n, nr};
  check_grid(grid, L.size(), x.size());
  if (dx.size() != x.size()) throw Error(Errc::DimMismatch, "derivative length");
  if (v < 0.0) throw Error(Errc::InvalidArgument, "velocity must be nonnegative");

  const double dz = grid.cell_size();
  const double v_eps = v / p.eps_c;
  const double d_ax = p.d_ax(v);
  const double kf = p.k_f(v);
  const double film_mobile = (1.0 - p.eps_c) / p.eps_c * 3.0 / p.r_p * kf;
  const double dr = p.r_p / static_cast<double>(nr);
  const double nrd = static_cast<double>(nr);
  const double v_out = shell_volume(nr - 1);
  const double film_pore = 3.0 * nrd * nrd * kf / (p.eps_p * dr * v_out);
  const double sink = nrd * nrd * nrd / v_out / p.eps_p;
  const double diff = 3.0 * p.D_eff / (dr * dr);

  std::span<const double> c = x.subspan(0, n);
  std::span<double> dc = dx.subspan(0, n);
  std::fill(dc.begin(), dc.end(), 0.0);
  const double ghost = danckwerts_inlet_ghost(c[0], c_feed, v_eps, d_ax, dz);
  add_central_dispersion(grid, c, d_ax, ghost, dc);
  add_upwind_convection(grid, c, v_eps, ghost, dc);

  for (std::size_t i = 0; i < n; ++i) {
    const double* cp = &x[L.cp(i, 0)];
    double* dcp = &dx[L.cp(i, 0)];
    const double surf = cp[nr - 1];
    const double q1 = x[L.q1(i)], q2 = x[L.q2(i)];
    const double dq1 = p.k1 * ((p.q_max1 - q1) * surf - q1 / p.K);
    const double dq2 = p.k2 * ((p.q_max2 - q2) * surf - q2 / p.K);
    dx[L.q1(i)] = dq1;
    dx[L.q2(i)] = dq2;

    const double film = c[i] - surf;
    dc[i] -= film_mobile * film;
    for (std::size_t j = 0; j < nr; ++j) {
      double d = 0.0;
      if (include_pore_diffusion) {
        const double jo = static_cast<double>(j + 1), ji = static_cast<double>(j);
        if (j + 1 < nr) d += jo * jo * (cp[j + 1] - cp[j]);
        if (j > 0) d -= ji * ji * (cp[j] - cp[j - 1]);
        d *= diff / shell_volume(j);
      }
      dcp[j] = d;
    }
    dcp[nr - 1] += film_pore * film - sink * (dq1 + dq2);
  }
}

Eigen::MatrixXd pore_diffusion_matrix(const CaptureParams& p, std::size_t n_r) {
  if (n_r < 2) throw Error(Errc::InvalidArgument, "need at least two shells");
  const double dr = p.r_p / static_cast<double>(n_r);
  const double diff = 3.0 * p.D_eff / (dr * dr);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n_r, n_r);
  for (std::size_t j = 0; j < n_r; ++j) {
    const double w = diff / shell_volume(j);
    if (j + 1 < n_r) {
      const double a = static_cast<double>((j + 1) * (j + 1)) * w;
      M(j, j + 1) += a;
      M(j, j) -= a;
    }
    if (j > 0) {
      const double a = static_cast<double>(j * j) * w;
      M(j, j - 1) += a;
      M(j, j) -= a;
    }
  }
  return M;
}

double loading_node_mass(std::span<const double> x, const CaptureParams& p, const SpatialGrid& grid,
                         std::size_t i) {
  const std::size_t n = grid.n_axial, nr = grid.n_radial;
  const LoadingLayout L{n, nr};
  const double total = static_cast<double>(nr * nr * nr);
  double pore = 0.0;
  for (std::size_t j = 0; j < nr; ++j) pore += shell_volume(j) / total * x[L.cp(i, j)];
  return p.eps_c * x[L.c(i)] + (1.0 - p.eps_c) * (p.eps_p * pore + x[L.q1(i)] + x[L.q2(i)]);
}

void elution_rhs(std::span<const double> x, double v, double c_feed, double cs_feed, const ElutionParams& p,
                 const SpatialGrid& grid, std::span<double> dx) {
  const std::size_t n = grid.n_axial;
  const ElutionLayout L{n};
  check_grid(grid, L.size(), x.size());
  if (dx.size() != x.size()) throw Error(Errc::DimMismatch, "derivative length");
  if (v < 0.0) throw Error(Errc::InvalidArgument, "velocity must be nonnegative");

  const double dz = grid.cell_size();
  const double v_eps = v / p.eps;
  const double d_ax = p.d_ax_per_v * v;
  const double exchange = (p.literal_exchange_sign ? 1.0 : -1.0) * (1.0 - p.eps_c) / p.eps;

  std::span<const double> c = x.subspan(0, n), cs = x.subspan(2 * n, n);
  std::span<double> dc = dx.subspan(0, n), dq = dx.subspan(n, n), dcs = dx.subspan(2 * n, n);
  std::fill(dx.begin(), dx.end(), 0.0);

  const double gc = danckwerts_inlet_ghost(c[0], c_feed, v_eps, d_ax, dz);
  add_central_dispersion(grid, c, d_ax, gc, dc);
  add_upwind_convection(grid, c, v_eps, gc, dc);
  const double gs = danckwerts_inlet_ghost(cs[0], cs_feed, v_eps, d_ax, dz);
  add_central_dispersion(grid, cs, d_ax, gs, dcs);
  add_upwind_convection(grid, cs, v_eps, gs, dcs);

  if (p.k == 0.0) return;
  for (std::size_t i = 0; i < n; ++i) {
    if (cs[i] <= 1e-12) throw Error(Errc::ZeroModifier, "isotherm needs a positive modifier concentration");
    const double q = x[L.q(i)];
    const double rate = p.k * (p.H0 * std::pow(cs[i], -p.beta) * (1.0 - q / p.q_max) * c[i] - q);
    dq[i] = rate;
    dc[i] += exchange * rate;
  }
}

void aex_rhs(std::span<const double> x, double v, double c_feed, double cs_feed, const ElutionParams& p,
             const SpatialGrid& grid, std::span<double> dx) {
  ElutionParams flow_through = p;
  flow_through.k = 0.0;
  elution_rhs(x, v, c_feed, cs_feed, flow_through, grid, dx);
}

void loop_rhs(std::span<const double> c, double v, double c_feed, double d_ax, const SpatialGrid& grid,
              std::span<double> dc) {
  check_grid(grid, grid.n_axial, c.size());
  if (dc.size() != c.size()) throw Error(Errc::DimMismatch, "derivative length");
  if (v < 0.0) throw Error(Errc::InvalidArgument, "velocity must be nonnegative");
  std::fill(dc.begin(), dc.end(), 0.0);
  const double g = danckwerts_inlet_ghost(c[0], c_feed, v, d_ax, grid.cell_size());
  add_central_dispersion(grid, c, d_ax, g, dc);
  add_upwind_convection(grid, c, v, g, dc);
}

namespace {

double transport_radius(double d_ax, double v_eps, double dz) { return 4.0 * d_ax / (dz * dz) + 2.0 * v_eps / dz; }

}  // namespace

double loading_stiffness(const CaptureParams& p, const SpatialGrid& grid, double v, double c_scale,
                         bool include_pore_diffusion) {
  const std::size_t nr = grid.n_radial;
  const double dz = grid.cell_size();
  const double kf = p.k_f(v);
  const double nrd = static_cast<double>(nr);
  const double dr = p.r_p / nrd;
  const double v_out = shell_volume(nr - 1);
  const double film_mobile = (1.0 - p.eps_c) / p.eps_c * 3.0 / p.r_p * kf;
  const double film_pore = 3.0 * nrd * nrd * kf / (p.eps_p * dr * v_out);
  const double sink = nrd * nrd * nrd / v_out / p.eps_p;
  const double bind = p.k1 * p.q_max1 + p.k2 * p.q_max2;
  const double release = (p.k1 + p.k2) * (c_scale + 1.0 / p.K);

  double lambda = transport_radius(p.d_ax(v), v / p.eps_c, dz) + 2.0 * film_mobile;
  lambda = std::max(lambda, bind + release);
  double outer = 2.0 * film_pore + 2.0 * sink * (bind + release);
  if (include_pore_diffusion) {
    const double diff = 3.0 * p.D_eff / (dr * dr);
    for (std::size_t j = 0; j < nr; ++j) {
      const double jo = static_cast<double>(j + 1), ji = static_cast<double>(j);
      const double diag = diff * ((j + 1 < nr ? jo * jo : 0.0) + ji * ji) / shell_volume(j);
      lambda = std::max(lambda, 2.0 * diag);
      if (j + 1 == nr) outer += 2.0 * diag;
    }
  }
  return std::max(lambda, outer);
}

double elution_stiffness(const ElutionParams& p, const SpatialGrid& grid, double v, double cs_min) {
  const double transport = transport_radius(p.d_ax_per_v * v, v / p.eps, grid.cell_size());
  if (p.k == 0.0) return transport;
  const double kq = p.k * (1.0 + p.H0 * std::pow(std::max(cs_min, 1e-12), -p.beta) * 2.0);
  return std::max(transport + 2.0 * (1.0 - p.eps_c) / p.eps * kq, 2.0 * kq);
}

double loop_stiffness(const LoopParams& p, const SpatialGrid& grid, double v) {
  return transport_radius(p.d_ax_per_v * v, v, grid.cell_size());
}

TickResult twin_column_tick(const TwinColumnSchedule& s, double dt) {
  if (!(dt > 0.0)) throw Error(Errc::InvalidArgument, "tick must be positive");
  if (!(s.load_duration > 0.0)) throw Error(Errc::InvalidArgument, "phase duration must be positive");
  TickResult r{s, 0};
  r.schedule.clock += dt;
  const double slack = 1e-9 * s.load_duration;
  while (r.schedule.clock >= s.load_duration - slack) {
    r.schedule.clock = std::max(0.0, r.schedule.clock - s.load_duration);
    r.schedule.loading = 1 - r.schedule.loading;
    ++r.swaps;
  }
  return r;
}

// ---------------------------------------------------------------- ColumnUnit

ColumnUnit ColumnUnit::loading(const CaptureParams& p, const SpatialGrid& grid) {
  if (grid.n_radial < 2) throw Error(Errc::InvalidArgument, "loading column needs radial shells");
  ColumnUnit u;
  u.kind_ = Kind::Loading;
  u.grid_ = grid;
  u.cap_ = p;
  u.x_.assign(LoadingLayout{grid.n_axial, grid.n_radial}.size(), 0.0);
  return u;
}

ColumnUnit ColumnUnit::elution(const ElutionParams& p, const SpatialGrid& grid) {
  ColumnUnit u;
  u.kind_ = Kind::Elution;
  u.grid_ = grid;
  u.elu_ = p;
  u.x_.assign(ElutionLayout{grid.n_axial}.size(), 0.0);
  return u;
}

ColumnUnit ColumnUnit::loop(const LoopParams& p, const SpatialGrid& grid) {
  ColumnUnit u;
  u.kind_ = Kind::Loop;
  u.grid_ = grid;
  u.loop_ = p;
  u.x_.assign(grid.n_axial, 0.0);
  return u;
}

double ColumnUnit::area() const {
  switch (kind_) {
    case Kind::Loading: return cap_.area();
    case Kind::Elution: return elu_.area();
    case Kind::Loop: return loop_.area();
  }
  return 0.0;
}

double ColumnUnit::outlet_concentration() const { return x_[grid_.n_axial - 1]; }

double ColumnUnit::held_mass() const {
  const double cell = area() * grid_.cell_size();
  double m = 0.0;
  for (std::size_t i = 0; i < grid_.n_axial; ++i) {
    switch (kind_) {
      case Kind::Loading: m += loading_node_mass(x_, cap_, grid_, i); break;
      case Kind::Elution: {
        const ElutionLayout L{grid_.n_axial};
        m += elu_.eps * x_[L.c(i)] + (1.0 - elu_.eps_c) * x_[L.q(i)];
        break;
      }
      case Kind::Loop: m += x_[i]; break;
    }
  }
  return m * cell;
}

Vector ColumnUnit::loading_to_elution(std::span<const double> loading, const CaptureParams& p,
                                      const SpatialGrid& grid, double cs_fill) {
  const std::size_t n = grid.n_axial;
  const LoadingLayout L{n, grid.n_radial};
  const ElutionLayout E{n};
  const double eps = p.eps_c + (1.0 - p.eps_c) * p.eps_p;
  Vector out(E.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double bound = loading[L.q1(i)] + loading[L.q2(i)];
    const double liquid = loading_node_mass(loading, p, grid, i) - (1.0 - p.eps_c) * bound;
    out[E.c(i)] = liquid / eps;
    out[E.q(i)] = bound;
    out[E.cs(i)] = cs_fill;
  }
  return out;
}

void ColumnUnit::rhs(std::span<const double> x, double v, double c_feed, double cs_feed, bool with_pores,
                     std::span<double> dx) const {
  switch (kind_) {
    case Kind::Loading: grm_loading_rhs(x, v, c_feed, cap_, grid_, dx, with_pores); break;
    case Kind::Elution: elution_rhs(x, v, c_feed, cs_feed, elu_, grid_, dx); break;
    case Kind::Loop: loop_rhs(x, v, c_feed, loop_.d_ax_per_v * v, grid_, dx); break;
  }
}

double ColumnUnit::stiffness(double v, double c_feed, double cs_feed) const {
  switch (kind_) {
    case Kind::Loading: {
      const std::size_t n = grid_.n_axial;
      double c_scale = c_feed;
      for (std::size_t i = 0; i < n * (1 + grid_.n_radial); ++i) c_scale = std::max(c_scale, x_[i]);
      return loading_stiffness(cap_, grid_, v, c_scale, false);
    }
    case Kind::Elution: {
      double cs_min = cs_feed;
      const std::size_t n = grid_.n_axial;
      for (std::size_t i = 0; i < n; ++i) cs_min = std::min(cs_min, x_[2 * n + i]);
      return elution_stiffness(elu_, grid_, v, cs_min);
    }
    case Kind::Loop: return loop_stiffness(loop_, grid_, v);
  }
  return 0.0;
}

void ColumnUnit::pore_propagate(double h) {
  const std::size_t nr = grid_.n_radial;
  if (h != prop_h_) {
    prop_ = (pore_diffusion_matrix(cap_, nr) * h).exp();
    prop_h_ = h;
  }
  const LoadingLayout L{grid_.n_axial, nr};
  Eigen::VectorXd tmp(nr);
  for (std::size_t i = 0; i < grid_.n_axial; ++i) {
    Eigen::Map<Eigen::VectorXd> cp(&x_[L.cp(i, 0)], static_cast<Eigen::Index>(nr));
    tmp.noalias() = prop_ * cp;
    cp = tmp.cwiseMax(0.0);
  }
}

// RK4 on everything except intra-particle diffusion; commits only if no
// field turns negative beyond round-off, or unconditionally (clamped) when
// force is set.
bool ColumnUnit::try_step(double h, double v, double c_feed, double cs_feed, bool force) {
  const std::size_t m = x_.size(), n = grid_.n_axial;
  k1_.resize(m), k2_.resize(m), k3_.resize(m), k4_.resize(m), stage_.resize(m), trial_.resize(m);
  const double half = 0.5 * h;
  rhs(x_, v, c_feed, cs_feed, false, k1_);
  for (std::size_t i = 0; i < m; ++i) stage_[i] = x_[i] + half * k1_[i];
  const double o2 = stage_[n - 1];
  rhs(stage_, v, c_feed, cs_feed, false, k2_);
  for (std::size_t i = 0; i < m; ++i) stage_[i] = x_[i] + half * k2_[i];
  const double o3 = stage_[n - 1];
  rhs(stage_, v, c_feed, cs_feed, false, k3_);
  for (std::size_t i = 0; i < m; ++i) stage_[i] = x_[i] + h * k3_[i];
  const double o4 = stage_[n - 1];
  rhs(stage_, v, c_feed, cs_feed, false, k4_);

  double scale = 0.0;
  for (double xi : x_) scale = std::max(scale, std::abs(xi));
  const double tiny = 1e-13 * std::max(1.0, scale);
  bool ok = true;
  for (std::size_t i = 0; i < m; ++i) {
    trial_[i] = x_[i] + h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    if (!std::isfinite(trial_[i])) throw Error(Errc::NonFiniteState, "column update produced a non-finite value");
    if (trial_[i] < -tiny) ok = false;
  }
  if (!ok && !force) return false;
  const double out = (x_[n - 1] + 2.0 * o2 + 2.0 * o3 + o4) / 6.0;
  out_mass_ += area() * v * out * h;
  in_mass_ += area() * v * c_feed * h;
  for (std::size_t i = 0; i < m; ++i) x_[i] = std::max(trial_[i], 0.0);
  return true;
}

void ColumnUnit::advance(double duration, double v, double c_feed, double cs_feed) {
  if (!(duration > 0.0)) throw Error(Errc::InvalidArgument, "duration must be positive");
  if (v < 0.0 || c_feed < 0.0 || cs_feed < 0.0) throw Error(Errc::InvalidArgument, "negative column input");
  const double lambda = stiffness(v, c_feed, cs_feed);
  double h_max = lambda > 0.0 ? 2.5 / lambda : duration;
  const auto steps = static_cast<std::size_t>(std::ceil(duration / std::min(h_max, duration) - 1e-9));
  const double h = duration / static_cast<double>(steps);
  last_substeps_ = static_cast<int>(steps);

  auto base_step = [&](double hs) {
    if (try_step(hs, v, c_feed, cs_feed)) return;
    // Halve up to 10 times; the last level floors negatives at zero.
    const int max_level = 10;
    struct Pending {
      double h;
      int level;
    };
    std::vector<Pending> stack{{hs / 2, 1}, {hs / 2, 1}};
    while (!stack.empty()) {
      const Pending s = stack.back();
      stack.pop_back();
      if (try_step(s.h, v, c_feed, cs_feed)) continue;
      if (s.level < max_level) {
        stack.push_back({s.h / 2, s.level + 1});
        stack.push_back({s.h / 2, s.level + 1});
        continue;
      }
      try_step(s.h, v, c_feed, cs_feed, true);
    }
  };

  for (std::size_t k = 0; k < steps; ++k) {
    if (kind_ == Kind::Loading) {
      pore_propagate(0.5 * h);
      base_step(h);
      pore_propagate(0.5 * h);
    } else {
      base_step(h);
    }
  }
}

}  // namespace procbench
