#include "procbench/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "procbench/error.hpp"

namespace procbench {

Vector OdeSystem::eval(double t, std::span<const double> x, std::span<const double> u) const {
  Vector dx(dim, 0.0);
  rhs(t, x, u, dx);
  return dx;
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

Rk4Stepper::Rk4Stepper(const OdeSystem& sys)
    : sys_(&sys),
      k1_(sys.dim),
      k2_(sys.dim),
      k3_(sys.dim),
      k4_(sys.dim),
      stage_(sys.dim) {}

void Rk4Stepper::step(double t, std::span<double> x, std::span<const double> u, double h) {
  const std::size_t n = sys_->dim;
  if (x.size() != n) throw Error(Errc::InvalidArgument, "state length does not match system dim");
  const double half = 0.5 * h;

  sys_->rhs(t, x, u, k1_);
  for (std::size_t i = 0; i < n; ++i) stage_[i] = x[i] + half * k1_[i];
  sys_->rhs(t + half, stage_, u, k2_);
  for (std::size_t i = 0; i < n; ++i) stage_[i] = x[i] + half * k2_[i];
  sys_->rhs(t + half, stage_, u, k3_);
  for (std::size_t i = 0; i < n; ++i) stage_[i] = x[i] + h * k3_[i];
  sys_->rhs(t + h, stage_, u, k4_);

  const double sixth = h / 6.0;
  bool finite = true;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] += sixth * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    finite = finite && std::isfinite(x[i]);
  }
  if (!finite) throw Error(Errc::NonFiniteState, "RK4 update produced a non-finite state");
}

std::size_t step_count(double duration, double h) {
  if (duration <= 0.0) return 0;
  // Tolerate representation error so 1.0 / 0.1 is 10 steps, not 11.
  const double ratio = duration / h;
  const double n = std::ceil(ratio - 1e-9 * std::max(1.0, ratio));
  return static_cast<std::size_t>(std::max(1.0, n));
}

void Rk4Stepper::integrate(double t0, std::span<double> x, std::span<const double> u,
                           double duration, double h) {
  if (!(h > 0.0)) throw Error(Errc::InvalidArgument, "integration step must be positive");
  if (duration < 0.0) throw Error(Errc::InvalidArgument, "duration must be nonnegative");
  const std::size_t n = step_count(duration, h);
  double t = t0;
  for (std::size_t k = 0; k < n; ++k) {
    const double hk = (k + 1 == n) ? (t0 + duration) - t : h;
    step(t, x, u, hk);
    t += hk;
  }
}

Vector rk4_step(const OdeSystem& sys, double t, std::span<const double> x,
                std::span<const double> u, double h) {
  if (!(h > 0.0)) throw Error(Errc::InvalidArgument, "integration step must be positive");
  Vector out(x.begin(), x.end());
  Rk4Stepper stepper(sys);
  stepper.step(t, out, u, h);
  return out;
}

Vector integrate(const OdeSystem& sys, double t0, std::span<const double> x0,
                 std::span<const double> u, double duration, double h) {
  Vector out(x0.begin(), x0.end());
  Rk4Stepper stepper(sys);
  stepper.integrate(t0, out, u, duration, h);
  return out;
}

Eigen::MatrixXd fd_jacobian(const OdeSystem& sys, std::span<const double> x,
                            std::span<const double> u) {
  const std::size_t n = sys.dim;
  Eigen::MatrixXd jac(n, n);
  Vector f0(n), f1(n);
  Vector xp(x.begin(), x.end());
  sys.rhs(0.0, xp, u, f0);
  for (std::size_t j = 0; j < n; ++j) {
    const double delta = std::max(1e-7 * std::abs(x[j]), 1e-9);
    xp[j] = x[j] + delta;
    sys.rhs(0.0, xp, u, f1);
    // Use the representable perturbation actually applied.
    const double applied = xp[j] - x[j];
    for (std::size_t i = 0; i < n; ++i) jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (f1[i] - f0[i]) / applied;
    xp[j] = x[j];
  }
  return jac;
}

SteadyStateResult solve_steady_state(const OdeSystem& sys, std::span<const double> u,
                                     std::span<const double> x_guess,
                                     const SteadyStateOptions& options) {
  const std::size_t n = sys.dim;
  if (x_guess.size() != n) throw Error(Errc::InvalidArgument, "guess length does not match system dim");
  if (!all_finite(x_guess)) throw Error(Errc::InvalidArgument, "steady-state guess is not finite");

  SteadyStateResult result;
  result.x_star.assign(x_guess.begin(), x_guess.end());
  Vector f = sys.eval(0.0, result.x_star, u);
  double norm = max_abs(f);

  for (int iter = 0;; ++iter) {
    result.iterations = iter;
    result.residual_norm = norm;
    if (norm <= options.tolerance) {
      result.converged = true;
      return result;
    }
    if (iter >= options.max_iterations) {
      throw Error(Errc::MaxIterations,
                  "Newton did not converge in " + std::to_string(options.max_iterations) +
                      " iterations (residual " + std::to_string(norm) + ")");
    }

    const Eigen::MatrixXd jac = fd_jacobian(sys, result.x_star, u);
    if (!jac.allFinite()) throw Error(Errc::SingularJacobian, "Jacobian has non-finite entries");
    Eigen::Map<const Eigen::VectorXd> fvec(f.data(), static_cast<Eigen::Index>(n));
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jac);
    cod.setThreshold(1e-12);
    const Eigen::VectorXd dx = cod.solve(-fvec);
    if (cod.rank() < static_cast<Eigen::Index>(n)) {
      const double mismatch = (jac * dx + fvec).lpNorm<Eigen::Infinity>();
      if (!(mismatch <= 1e-8 * std::max(1.0, fvec.lpNorm<Eigen::Infinity>()))) {
        throw Error(Errc::SingularJacobian, "Jacobian is singular and the Newton system is inconsistent");
      }
    }
    if (!dx.allFinite()) throw Error(Errc::SingularJacobian, "Newton step is not finite");

    double scale = 1.0;
    bool improved = false;
    Vector trial(n), f_trial(n);
    for (int halving = 0; halving <= options.max_halvings; ++halving) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = result.x_star[i] + scale * dx(static_cast<Eigen::Index>(i));
      sys.rhs(0.0, trial, u, f_trial);
      const double trial_norm = all_finite(f_trial) ? max_abs(f_trial) : HUGE_VAL;
      if (trial_norm < norm) {
        result.x_star = trial;
        f = f_trial;
        norm = trial_norm;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      result.iterations = iter + 1;
      result.residual_norm = norm;
      result.converged = false;
      return result;
    }
  }
}

SpatialGrid make_grid(std::size_t n_axial, double length, std::size_t n_radial) {
  if (n_axial < 3) throw Error(Errc::InvalidArgument, "n_axial must be at least 3");
  if (!(length > 0.0)) throw Error(Errc::InvalidArgument, "grid length must be positive");
  if (n_radial == 1) throw Error(Errc::InvalidArgument, "n_radial must be 0 or at least 2");
  return SpatialGrid{n_axial, length, n_radial};
}

void add_upwind_convection(const SpatialGrid& grid, std::span<const double> c,
                           double velocity_over_void, double inlet_value, std::span<double> out) {
  const std::size_t n = grid.n_axial;
  const double a = velocity_over_void / grid.cell_size();
  double upstream = inlet_value;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] -= a * (c[i] - upstream);
    upstream = c[i];
  }
}

void add_central_dispersion(const SpatialGrid& grid, std::span<const double> c, double d_ax,
                            double inlet_ghost, std::span<double> out) {
  const std::size_t n = grid.n_axial;
  const double dz = grid.cell_size();
  const double a = d_ax / (dz * dz);
  out[0] += a * (c[1] - 2.0 * c[0] + inlet_ghost);
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] += a * (c[i + 1] - 2.0 * c[i] + c[i - 1]);
  // Mirrored outlet node: c[n] = c[n-1].
  out[n - 1] += a * (c[n - 2] - c[n - 1]);
}

Vector upwind_convection(const SpatialGrid& grid, std::span<const double> c,
                         double velocity_over_void, double inlet_value) {
  if (c.size() != grid.n_axial) throw Error(Errc::InvalidArgument, "field length must equal n_axial");
  Vector out(c.size(), 0.0);
  add_upwind_convection(grid, c, velocity_over_void, inlet_value, out);
  return out;
}

Vector central_dispersion(const SpatialGrid& grid, std::span<const double> c, double d_ax,
                          double inlet_ghost) {
  if (c.size() != grid.n_axial) throw Error(Errc::InvalidArgument, "field length must equal n_axial");
  Vector out(c.size(), 0.0);
  add_central_dispersion(grid, c, d_ax, inlet_ghost, out);
  return out;
}

Vector central_dispersion(const SpatialGrid& grid, std::span<const double> c, double d_ax) {
  if (c.empty()) throw Error(Errc::InvalidArgument, "empty field");
  return central_dispersion(grid, c, d_ax, c[0]);
}

double danckwerts_inlet_ghost(double c0, double c_feed, double velocity_over_void, double d_ax,
                              double dz) {
  const double dispersive = d_ax / dz;
  const double denom = velocity_over_void + dispersive;
  if (denom <= 0.0) return c0;
  return (velocity_over_void * c_feed + dispersive * c0) / denom;
}

}  // namespace procbench
