#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "procbench/error.hpp"
#include "procbench/random.hpp"
#include "procbench/sim_core.hpp"

using namespace procbench;

namespace {

OdeSystem exponential() {
  return OdeSystem{1, [](double, std::span<const double> x, std::span<const double>,
                         std::span<double> dx) { dx[0] = x[0]; }};
}

OdeSystem constant_rate(std::size_t dim, double c) {
  return OdeSystem{dim, [c](double, std::span<const double>, std::span<const double>,
                            std::span<double> dx) {
                     for (double& v : dx) v = c;
                   }};
}

double exp_error(double h) {
  const Vector x = integrate(exponential(), 0.0, Vector{1.0}, {}, 1.0, h);
  return std::abs(x[0] - std::exp(1.0));
}

}  // namespace

TEST(Rk4Step, ZeroDerivativeIsIdentity) {
  const Vector x = rk4_step(constant_rate(3, 0.0), 0.0, Vector{1, 2, 3}, {}, 0.1);
  EXPECT_EQ(x, (Vector{1, 2, 3}));
}

TEST(Rk4Step, ExponentialSingleStep) {
  const Vector x = rk4_step(exponential(), 0.0, Vector{1.0}, {}, 0.1);
  EXPECT_NEAR(x[0], 1.105170918, 1e-7);
}

TEST(Rk4Step, ConstantDerivativeIsExact) {
  const double h0 = 0.37;
  const Vector x = rk4_step(constant_rate(1, 2.5), 0.0, Vector{0.0}, {}, h0);
  EXPECT_DOUBLE_EQ(x[0], 2.5 * h0);
}

TEST(Rk4Step, NonFiniteIsReported) {
  OdeSystem blowup{1, [](double, std::span<const double>, std::span<const double>,
                         std::span<double> dx) { dx[0] = std::nan(""); }};
  try {
    rk4_step(blowup, 0.0, Vector{1.0}, {}, 0.1);
    FAIL() << "expected NonFiniteState";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonFiniteState);
  }
}

TEST(Integrate, ZeroDurationReturnsInitialState) {
  const Vector x = integrate(exponential(), 0.0, Vector{4.2}, {}, 0.0, 0.1);
  EXPECT_EQ(x[0], 4.2);
}

TEST(Integrate, ExponentialToUnitTime) { EXPECT_LT(exp_error(0.01), 1e-8); }

TEST(Integrate, PartialFinalStepLandsOnEndTime) {
  // dx/dt = 1 integrates exactly, so the result is the elapsed time.
  const Vector x = integrate(constant_rate(1, 1.0), 0.0, Vector{0.0}, {}, 0.95, 0.2);
  EXPECT_NEAR(x[0], 0.95, 1e-15);
  EXPECT_EQ(step_count(0.95, 0.2), 5u);
  EXPECT_EQ(step_count(1.0, 0.1), 10u);
}

TEST(Integrate, HalvingStepReducesErrorEightfold) {
  EXPECT_GE(exp_error(0.1) / exp_error(0.05), 8.0);
}

TEST(Integrate, EmpiricalOrderAtLeast3_9) {
  const double e1 = exp_error(0.1), e2 = exp_error(0.05), e3 = exp_error(0.025);
  EXPECT_GE(std::log2(e1 / e2), 3.9);
  EXPECT_GE(std::log2(e2 / e3), 3.9);
}

TEST(SteadyState, LinearDecayFixedPoint) {
  OdeSystem decay{1, [](double, std::span<const double> x, std::span<const double>,
                        std::span<double> dx) { dx[0] = -x[0]; }};
  const auto r = solve_steady_state(decay, {}, Vector{5.0});
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.x_star[0], 0.0, 1e-10);
}

TEST(SteadyState, DiagonalLinearSystemMatchesDirectSolve) {
  Eigen::Matrix2d a;
  a << 2, 0, 0, 4;
  const Eigen::Vector2d b(2, 8);
  const Eigen::Vector2d expected = a.partialPivLu().solve(b);  // oracle

  OdeSystem sys{2, [&](double, std::span<const double> x, std::span<const double>,
                       std::span<double> dx) {
                  dx[0] = a(0, 0) * x[0] + a(0, 1) * x[1] - b(0);
                  dx[1] = a(1, 0) * x[0] + a(1, 1) * x[1] - b(1);
                }};
  const auto r = solve_steady_state(sys, {}, Vector{-3.0, 7.0});
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.x_star[0], expected(0), 1e-10);
  EXPECT_NEAR(r.x_star[1], expected(1), 1e-10);
  EXPECT_NEAR(r.x_star[0], 1.0, 1e-10);
  EXPECT_NEAR(r.x_star[1], 2.0, 1e-10);
}

TEST(SteadyState, NonlinearResidualVerifiedIndependently) {
  OdeSystem sys{2, [](double, std::span<const double> x, std::span<const double> u,
                      std::span<double> dx) {
                  dx[0] = u[0] - x[0] * x[0] * x[0] - x[1];
                  dx[1] = std::exp(-x[0]) - x[1];
                }};
  const Vector u{3.0};
  const auto r = solve_steady_state(sys, u, Vector{10.0, -4.0});
  ASSERT_TRUE(r.converged);
  const Vector f = sys.eval(0.0, r.x_star, u);
  EXPECT_LE(max_abs(f), 1e-10);
}

TEST(SteadyState, BalancedIntegratorIsNotSingular) {
  // Second state is a pure integrator with zero net inflow: any value is an
  // equilibrium, so the guess is kept.
  OdeSystem sys{2, [](double, std::span<const double> x, std::span<const double>,
                      std::span<double> dx) {
                  dx[0] = 1.0 - x[0];
                  dx[1] = 0.0;
                }};
  const auto r = solve_steady_state(sys, {}, Vector{0.0, 0.7});
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.x_star[0], 1.0, 1e-12);
  EXPECT_EQ(r.x_star[1], 0.7);
}

TEST(SteadyState, InconsistentIntegratorIsSingular) {
  OdeSystem sys{2, [](double, std::span<const double> x, std::span<const double>,
                      std::span<double> dx) {
                  dx[0] = 1.0 - x[0];
                  dx[1] = 0.3;
                }};
  try {
    solve_steady_state(sys, {}, Vector{0.0, 0.0});
    FAIL() << "expected SingularJacobian";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SingularJacobian);
  }
}

TEST(SteadyState, MaxIterationsIsReported) {
  OdeSystem sys{1, [](double, std::span<const double> x, std::span<const double>,
                      std::span<double> dx) { dx[0] = std::atan(x[0] - 3.0); }};
  SteadyStateOptions opts;
  opts.max_iterations = 1;
  try {
    solve_steady_state(sys, {}, Vector{0.0}, opts);
    FAIL() << "expected MaxIterations";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MaxIterations);
  }
}

TEST(Grid, Validation) {
  EXPECT_THROW(make_grid(2, 1.0), Error);
  EXPECT_THROW(make_grid(10, 0.0), Error);
  EXPECT_THROW(make_grid(10, 1.0, 1), Error);
  const auto g = make_grid(20, 10.0, 4);
  EXPECT_DOUBLE_EQ(g.cell_size() * 20, 10.0);
  EXPECT_DOUBLE_EQ(g.cell_volume(500.0), 25.0);
}

TEST(Stencils, UpwindFlatProfileIsZero) {
  const auto g = make_grid(10, 1.0);
  const Vector c(10, 3.0);
  const Vector out = upwind_convection(g, c, 2.0, 3.0);
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(Stencils, UpwindLinearProfileSlope) {
  const auto g = make_grid(20, 1.0);
  Vector c(20);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 2.0 * g.node_position(i);
  const Vector out = upwind_convection(g, c, 1.0, 0.0);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_NEAR(out[i], -2.0, 1e-12);
}

TEST(Stencils, UpwindZeroVelocityIsZero) {
  const auto g = make_grid(5, 1.0);
  const Vector out = upwind_convection(g, Vector{1, 5, 2, 8, 3}, 0.0, 9.0);
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(Stencils, DispersionLinearProfileInteriorZero) {
  const auto g = make_grid(12, 3.0);
  Vector c(12);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 4.0 - 1.5 * g.node_position(i);
  const Vector out = central_dispersion(g, c, 0.8);
  for (std::size_t i = 1; i + 1 < c.size(); ++i) EXPECT_NEAR(out[i], 0.0, 1e-12);
}

TEST(Stencils, DispersionQuadraticProfileInteriorIsTwo) {
  const auto g = make_grid(16, 2.0);
  Vector c(16);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::pow(g.node_position(i), 2);
  const Vector out = central_dispersion(g, c, 1.0);
  for (std::size_t i = 1; i + 1 < c.size(); ++i) EXPECT_NEAR(out[i], 2.0, 1e-10);
}

TEST(Stencils, DispersionZeroCoefficientIsZero) {
  const auto g = make_grid(4, 1.0);
  const Vector out = central_dispersion(g, Vector{1, 9, 2, 7}, 0.0);
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(Stencils, OperatorsAreLinear) {
  Rng rng(11);
  const auto g = make_grid(25, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vector c1(25), c2(25), mix(25);
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    const double in1 = rng.uniform(-1, 1), in2 = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < 25; ++i) {
      c1[i] = rng.uniform(-1, 1);
      c2[i] = rng.uniform(-1, 1);
      mix[i] = a * c1[i] + b * c2[i];
    }
    const Vector u1 = upwind_convection(g, c1, 1.3, in1), u2 = upwind_convection(g, c2, 1.3, in2);
    const Vector um = upwind_convection(g, mix, 1.3, a * in1 + b * in2);
    const Vector d1 = central_dispersion(g, c1, 0.4), d2 = central_dispersion(g, c2, 0.4);
    const Vector dm = central_dispersion(g, mix, 0.4);
    for (std::size_t i = 0; i < 25; ++i) {
      EXPECT_NEAR(um[i], a * u1[i] + b * u2[i], 1e-11);
      EXPECT_NEAR(dm[i], a * d1[i] + b * d2[i], 1e-11);
    }
  }
}

namespace {

// Max interior truncation error of the stencils on c(z) = sin(2 pi z / L) + z.
std::pair<double, double> stencil_errors(std::size_t n) {
  const double length = 2.0;
  const double k = 2.0 * M_PI / length;
  const auto g = make_grid(n, length);
  Vector c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = std::sin(k * g.node_position(i)) + g.node_position(i);
  const Vector up = upwind_convection(g, c, 1.0, 0.0);
  const Vector disp = central_dispersion(g, c, 1.0);
  double e_up = 0.0, e_disp = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double z = g.node_position(i);
    e_up = std::max(e_up, std::abs(up[i] + (k * std::cos(k * z) + 1.0)));
    e_disp = std::max(e_disp, std::abs(disp[i] + k * k * std::sin(k * z)));
  }
  return {e_up, e_disp};
}

}  // namespace

TEST(Stencils, GridRefinementOrders) {
  const auto [up1, disp1] = stencil_errors(40);
  const auto [up2, disp2] = stencil_errors(80);
  EXPECT_GE(up1 / up2, 1.9);
  EXPECT_GE(disp1 / disp2, 3.8);
}

TEST(Stencils, DanckwertsGhostConservesInletFlux) {
  const double c0 = 0.3, feed = 1.7, v = 2.0, d = 0.5, dz = 0.1;
  const double g = danckwerts_inlet_ghost(c0, feed, v, d, dz);
  // Convective + dispersive flux through the inlet face equals v * feed.
  EXPECT_NEAR(v * g + d * (g - c0) / dz, v * feed, 1e-12);
  EXPECT_DOUBLE_EQ(danckwerts_inlet_ghost(c0, feed, v, 0.0, dz), feed);
  EXPECT_DOUBLE_EQ(danckwerts_inlet_ghost(c0, feed, 0.0, d, dz), c0);
}
