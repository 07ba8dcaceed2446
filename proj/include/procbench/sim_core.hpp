#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace procbench {

using Vector = std::vector<double>;

// dx/dt = f(t, x, u); the callee writes dim entries into dxdt.
using RhsFn = std::function<void(double t, std::span<const double> x,
                                 std::span<const double> u, std::span<double> dxdt)>;

struct OdeSystem {
  std::size_t dim = 0;
  RhsFn rhs;

  Vector eval(double t, std::span<const double> x, std::span<const double> u) const;
};

bool all_finite(std::span<const double> x);
double max_abs(std::span<const double> x);

// Classical fourth-order Runge-Kutta. Throws Errc::NonFiniteState if the
// update produces NaN or inf.
Vector rk4_step(const OdeSystem& sys, double t, std::span<const double> x,
                std::span<const double> u, double h);

// ceil(duration / h) steps, the last one shortened to land on t0 + duration.
Vector integrate(const OdeSystem& sys, double t0, std::span<const double> x0,
                 std::span<const double> u, double duration, double h);

// Allocation-free RK4 for hot loops (closed-loop control, MOL columns).
// Holds a reference to sys; sys must outlive the stepper.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(const OdeSystem& sys);

  void step(double t, std::span<double> x, std::span<const double> u, double h);
  void integrate(double t0, std::span<double> x, std::span<const double> u,
                 double duration, double h);

 private:
  const OdeSystem* sys_;
  Vector k1_, k2_, k3_, k4_, stage_;
};

// Number of steps integrate() takes for (duration, h).
std::size_t step_count(double duration, double h);

// Forward-difference Jacobian of rhs(t=0, ., u) at x; perturbation
// max(1e-7 * |x_i|, 1e-9).
Eigen::MatrixXd fd_jacobian(const OdeSystem& sys, std::span<const double> x,
                            std::span<const double> u);

struct SteadyStateOptions {
  double tolerance = 1e-10;
  int max_iterations = 100;
  int max_halvings = 20;
};

struct SteadyStateResult {
  Vector x_star;
  double residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Damped Newton on rhs(., u) = 0. Rank-deficient Jacobians are handled with
// a minimum-norm step as long as the linearised system stays consistent
// (e.g. a pure-integrator level that is already balanced); otherwise
// Errc::SingularJacobian. Throws Errc::MaxIterations after max_iterations.
// Returns converged = false if no halved step reduces the residual.
SteadyStateResult solve_steady_state(const OdeSystem& sys, std::span<const double> u,
                                     std::span<const double> x_guess,
                                     const SteadyStateOptions& options = {});

// Uniform axial (and optional radial) discretisation for method-of-lines models.
struct SpatialGrid {
  std::size_t n_axial = 0;
  double length = 0.0;
  std::size_t n_radial = 0;

  double cell_size() const { return length / static_cast<double>(n_axial); }
  double cell_volume(double column_volume) const {
    return column_volume / static_cast<double>(n_axial);
  }
  // Node i sits at the centre of cell i.
  double node_position(std::size_t i) const {
    return (static_cast<double>(i) + 0.5) * cell_size();
  }
};

// Validates n_axial >= 3, length > 0, n_radial == 0 or >= 2.
SpatialGrid make_grid(std::size_t n_axial, double length, std::size_t n_radial = 0);

// -(v/eps) dc/dz, first-order upwind; inlet_value is the upstream ghost.
Vector upwind_convection(const SpatialGrid& grid, std::span<const double> c,
                         double velocity_over_void, double inlet_value);

// d_ax d2c/dz2, second-order central; zero-gradient (mirrored) outlet and,
// unless a ghost value is given, a mirrored inlet as well.
Vector central_dispersion(const SpatialGrid& grid, std::span<const double> c, double d_ax);
Vector central_dispersion(const SpatialGrid& grid, std::span<const double> c, double d_ax,
                          double inlet_ghost);

// Accumulating forms of the two stencils used inside column right-hand sides.
void add_upwind_convection(const SpatialGrid& grid, std::span<const double> c,
                           double velocity_over_void, double inlet_value, std::span<double> out);
void add_central_dispersion(const SpatialGrid& grid, std::span<const double> c, double d_ax,
                            double inlet_ghost, std::span<double> out);

// Ghost value at the inlet face that satisfies the Danckwerts condition
//   d_ax (c0 - g)/dz = v_eps (g - c_feed),
// so convective plus dispersive flux into the first cell equals v_eps * c_feed.
double danckwerts_inlet_ghost(double c0, double c_feed, double velocity_over_void,
                              double d_ax, double dz);

}  // namespace procbench
