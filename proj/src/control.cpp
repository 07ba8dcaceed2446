#include "procbench/control.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "procbench/error.hpp"
#include "procbench/random.hpp"

namespace procbench {

PidOutput pid_step(const PidGains& g, double setpoint, double measurement, const PidState& s, double dt) {
  if (!(dt > 0.0)) throw Error(Errc::InvalidArgument, "PID sample time must be positive");
  const double e = setpoint - measurement;
  const double de = s.has_prev ? (e - s.prev_error) / dt : 0.0;
  PidState next{s.integral + e * dt, e, true};
  double raw = g.bias + g.k_p * e + g.k_i * next.integral + g.k_d * de;
  double u = std::clamp(raw, g.u_min, g.u_max);
  if (g.anti_windup && u != raw) {
    next.integral = s.integral;
    raw = g.bias + g.k_p * e + g.k_i * next.integral + g.k_d * de;
    u = std::clamp(raw, g.u_min, g.u_max);
  }
  return {u, next};
}

OdePredictionModel::OdePredictionModel(OdeSystem sys, std::size_t input_dim, double sample, int substeps)
    : sys_(std::move(sys)), m_(input_dim), sample_(sample), substeps_(substeps), stepper_(sys_) {
  if (!(sample > 0.0) || substeps < 1) throw Error(Errc::InvalidArgument, "invalid sample time or substeps");
}

void OdePredictionModel::advance(std::span<double> x, std::span<const double> u) const {
  stepper_.integrate(0.0, x, u, sample_, sample_ / substeps_);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_problem(const ShootingProblem& prob) {
  if (!prob.model) throw Error(Errc::InvalidArgument, "shooting problem has no model");
  if (prob.horizon < 1) throw Error(Errc::InvalidArgument, "horizon must be at least 1");
  const std::size_t m = prob.model->input_dim();
  if (prob.u_lo.size() != m || prob.u_hi.size() != m) throw Error(Errc::DimMismatch, "input bounds length");
  for (std::size_t j = 0; j < m; ++j) {
    if (!(prob.u_lo[j] <= prob.u_hi[j])) throw Error(Errc::InvalidArgument, "input bounds are empty");
  }
  if (!prob.stage) throw Error(Errc::InvalidArgument, "shooting problem has no stage cost");
}

double box_violation(const ShootingProblem& prob, std::span<const double> x) {
  if (prob.x_lo.empty()) return 0.0;
  double v = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    v += std::max(0.0, prob.x_lo[i] - x[i]) + std::max(0.0, x[i] - prob.x_hi[i]);
  }
  return v;
}

// Simulates samples [k0, N) from x (state at sample k0) and returns the cost
// of those samples. If states is non-null, states[k] receives the state at
// the start of sample k and prefix[k] the cost of samples before k.
double simulate_from(const ShootingProblem& prob, int k0, Vector x, const std::vector<Vector>& U,
                     std::vector<Vector>* states, std::vector<double>* prefix) {
  double cost = 0.0;
  for (int k = k0; k < prob.horizon; ++k) {
    if (states) {
      (*states)[k] = x;
      (*prefix)[k] = cost;
    }
    try {
      prob.model->advance(x, U[k]);
    } catch (const Error&) {
      return kInf;
    }
    if (!all_finite(x)) return kInf;
    cost += prob.stage(k, x, U[k]) + prob.box_penalty * box_violation(prob, x);
    if (!std::isfinite(cost)) return kInf;
  }
  return cost;
}

struct Trajectory {
  std::vector<Vector> states;
  std::vector<double> prefix;
  double cost = 0.0;
};

Trajectory rollout(const ShootingProblem& prob, std::span<const double> x0, const std::vector<Vector>& U) {
  Trajectory t;
  t.states.resize(prob.horizon);
  t.prefix.resize(prob.horizon);
  t.cost = simulate_from(prob, 0, Vector(x0.begin(), x0.end()), U, &t.states, &t.prefix);
  return t;
}

std::vector<Vector> gradient_from(const ShootingProblem& prob, const Trajectory& base, std::vector<Vector> U,
                                  double fd_step) {
  const std::size_t m = prob.model->input_dim();
  std::vector<Vector> g(prob.horizon, Vector(m, 0.0));
  if (!std::isfinite(base.cost)) return g;
  for (int k = 0; k < prob.horizon; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      const double range = prob.u_hi[j] - prob.u_lo[j];
      if (range <= 0.0) continue;
      const double saved = U[k][j];
      U[k][j] = saved + fd_step * range;
      const double delta = U[k][j] - saved;
      const double tail = simulate_from(prob, k, base.states[k], U, nullptr, nullptr);
      g[k][j] = (base.prefix[k] + tail - base.cost) / delta;
      U[k][j] = saved;
    }
  }
  return g;
}

}  // namespace

double shooting_cost(const ShootingProblem& prob, std::span<const double> x0, const std::vector<Vector>& U) {
  check_problem(prob);
  if (U.size() != static_cast<std::size_t>(prob.horizon)) throw Error(Errc::DimMismatch, "U length != horizon");
  return simulate_from(prob, 0, Vector(x0.begin(), x0.end()), U, nullptr, nullptr);
}

std::vector<Vector> shooting_gradient(const ShootingProblem& prob, std::span<const double> x0,
                                      const std::vector<Vector>& U, double fd_step) {
  check_problem(prob);
  if (U.size() != static_cast<std::size_t>(prob.horizon)) throw Error(Errc::DimMismatch, "U length != horizon");
  return gradient_from(prob, rollout(prob, x0, U), U, fd_step);
}

std::vector<Vector> shift_warm_start(const std::vector<Vector>& U) {
  if (U.empty()) return U;
  std::vector<Vector> out(U.begin() + 1, U.end());
  out.push_back(U.back());
  return out;
}

ShootingResult solve_shooting(const ShootingProblem& prob, std::span<const double> x0,
                              const std::vector<Vector>& warm, const SolverOptions& opts) {
  check_problem(prob);
  const std::size_t m = prob.model->input_dim();
  const int N = prob.horizon;

  std::vector<Vector> U(N, Vector(m));
  for (int k = 0; k < N; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      const double mid = 0.5 * (prob.u_lo[j] + prob.u_hi[j]);
      const double w = k < static_cast<int>(warm.size()) && warm[k].size() == m ? warm[k][j] : mid;
      U[k][j] = std::clamp(w, prob.u_lo[j], prob.u_hi[j]);
    }
  }

  ShootingResult res;
  Trajectory cur = rollout(prob, x0, U);
  // A warm start whose prediction fails gives no gradient; fall back to the
  // box midpoint, then the lower and upper corners.
  for (double frac : {0.5, 0.0, 1.0}) {
    if (std::isfinite(cur.cost)) break;
    for (auto& u : U)
      for (std::size_t j = 0; j < m; ++j) u[j] = prob.u_lo[j] + frac * (prob.u_hi[j] - prob.u_lo[j]);
    cur = rollout(prob, x0, U);
  }
  if (opts.record_trace) res.trace.push_back(cur.cost);

  std::vector<Vector> trial = U;
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (!std::isfinite(cur.cost)) {
      res.stalled = true;
      break;
    }
    const std::vector<Vector> g = gradient_from(prob, cur, U, opts.fd_step);

    // Gradient in normalised coordinates z = (u - lo) / range.
    double pg_norm = 0.0;
    for (int k = 0; k < N; ++k) {
      for (std::size_t j = 0; j < m; ++j) {
        const double range = prob.u_hi[j] - prob.u_lo[j];
        if (range <= 0.0) continue;
        const double z = (U[k][j] - prob.u_lo[j]) / range;
        const double gz = g[k][j] * range;
        pg_norm = std::max(pg_norm, std::abs(std::clamp(z - gz, 0.0, 1.0) - z));
      }
    }
    if (pg_norm <= opts.tolerance) {
      res.converged = true;
      break;
    }

    double step = opts.initial_step;
    bool accepted = false;
    for (int b = 0; b < opts.max_backtracks; ++b, step *= opts.shrink) {
      double decrease = 0.0;
      bool moved = false;
      for (int k = 0; k < N; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
          const double range = prob.u_hi[j] - prob.u_lo[j];
          if (range <= 0.0) {
            trial[k][j] = U[k][j];
            continue;
          }
          const double z = (U[k][j] - prob.u_lo[j]) / range;
          const double gz = g[k][j] * range;
          const double zn = std::clamp(z - step * gz, 0.0, 1.0);
          trial[k][j] = prob.u_lo[j] + zn * range;
          decrease += gz * (zn - z);
          moved = moved || trial[k][j] != U[k][j];
        }
      }
      if (!moved) break;
      Trajectory t = rollout(prob, x0, trial);
      if (std::isfinite(t.cost) && t.cost <= cur.cost + opts.armijo_c * decrease) {
        U = trial;
        cur = std::move(t);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }
    ++res.iterations;
    if (opts.record_trace) res.trace.push_back(cur.cost);
  }

  res.U = U;
  res.u0 = U.front();
  res.cost = cur.cost;
  return res;
}

void write_trace_csv(const ShootingResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out << "iteration,cost\n";
  char buf[64];
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", r.trace[i]);
    out << i << ',' << buf << '\n';
  }
}

ShootingProblem make_mpc_problem(const MpcSpec& spec, const PredictionModel& model) {
  const std::size_t n = model.state_dim(), m = model.input_dim();
  if (spec.Q.size() != n || spec.x_s.size() != n || spec.R.size() != m || spec.u_s.size() != m) {
    throw Error(Errc::DimMismatch, "MPC weights or setpoint do not match the model");
  }
  for (double w : spec.Q)
    if (w < 0.0) throw Error(Errc::InvalidArgument, "negative Q weight");
  for (double w : spec.R)
    if (w < 0.0) throw Error(Errc::InvalidArgument, "negative R weight");
  ShootingProblem prob;
  prob.model = &model;
  prob.horizon = spec.horizon;
  prob.u_lo = spec.u_lo;
  prob.u_hi = spec.u_hi;
  prob.x_lo = spec.x_lo;
  prob.x_hi = spec.x_hi;
  prob.stage = [Q = spec.Q, R = spec.R, xs = spec.x_s, us = spec.u_s](int, std::span<const double> x,
                                                                      std::span<const double> u) {
    double c = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) c += Q[i] * (x[i] - xs[i]) * (x[i] - xs[i]);
    for (std::size_t j = 0; j < us.size(); ++j) c += R[j] * (u[j] - us[j]) * (u[j] - us[j]);
    return c;
  };
  return prob;
}

double mpc_cost(const MpcSpec& spec, const PredictionModel& model, std::span<const double> x0,
                const std::vector<Vector>& U) {
  return shooting_cost(make_mpc_problem(spec, model), x0, U);
}

namespace {

// Cheapest of the warm start, holding u_ref, and u_ref with one input moved to
// a bound.
std::vector<Vector> screen_initial_guess(const ShootingProblem& prob, std::span<const double> x0,
                                         const std::vector<Vector>& warm, const Vector& u_ref) {
  std::vector<std::vector<Vector>> candidates;
  if (warm.size() == static_cast<std::size_t>(prob.horizon)) candidates.push_back(warm);
  Vector base = u_ref;
  for (std::size_t j = 0; j < base.size(); ++j) base[j] = std::clamp(base[j], prob.u_lo[j], prob.u_hi[j]);
  candidates.emplace_back(prob.horizon, base);
  for (std::size_t j = 0; j < base.size(); ++j) {
    for (double bound : {prob.u_lo[j], prob.u_hi[j]}) {
      Vector u = base;
      u[j] = bound;
      candidates.emplace_back(prob.horizon, u);
    }
  }
  std::size_t best = 0;
  double best_cost = kInf;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double c = simulate_from(prob, 0, Vector(x0.begin(), x0.end()), candidates[i], nullptr, nullptr);
    if (c < best_cost) {
      best_cost = c;
      best = i;
    }
  }
  return candidates[best];
}

}  // namespace

ShootingResult solve_mpc(const MpcSpec& spec, const PredictionModel& model, std::span<const double> x0,
                         const std::vector<Vector>& warm, const SolverOptions& opts) {
  const ShootingProblem prob = make_mpc_problem(spec, model);
  return solve_shooting(prob, x0, screen_initial_guess(prob, x0, warm, spec.u_s), opts);
}

ShootingResult solve_empc(const EmpcSpec& spec, const PredictionModel& model, std::span<const double> x0,
                          const std::vector<Vector>& warm, const SolverOptions& opts) {
  if (!spec.ell_e) throw Error(Errc::InvalidArgument, "EMPC needs an economic objective");
  ShootingProblem prob;
  prob.model = &model;
  prob.horizon = spec.horizon;
  prob.u_lo = spec.u_lo;
  prob.u_hi = spec.u_hi;
  prob.x_lo = spec.x_lo;
  prob.x_hi = spec.x_hi;
  prob.stage = [ell = spec.ell_e](int, std::span<const double> x, std::span<const double> u) {
    return -ell(x, u);
  };
  std::vector<Vector> start = warm;
  if (start.empty() && !spec.u_hold.empty()) start.assign(spec.horizon, spec.u_hold);
  ShootingResult res = solve_shooting(prob, x0, start, opts);
  if (!spec.u_hold.empty()) {
    std::vector<Vector> hold(spec.horizon, spec.u_hold);
    for (auto& u : hold)
      for (std::size_t j = 0; j < u.size(); ++j) u[j] = std::clamp(u[j], spec.u_lo[j], spec.u_hi[j]);
    const double hold_cost = shooting_cost(prob, x0, hold);
    if (hold_cost < res.cost) {
      res.U = hold;
      res.u0 = hold.front();
      res.cost = hold_cost;
    }
  }
  return res;
}

namespace {

struct SteadyEval {
  bool ok = false;
  double value = -kInf;
  Vector x;
  double residual = 0.0;
};

SteadyEval evaluate_steady(const SteadyOptimumSpec& spec, std::span<const double> p, const Vector& guess) {
  SteadyEval ev;
  const Vector u = spec.input_map ? spec.input_map(p) : Vector(p.begin(), p.end());
  try {
    const SteadyStateResult r = solve_steady_state(*spec.sys, u, guess);
    if (!r.converged) return ev;
    if (!spec.x_lo.empty()) {
      for (std::size_t i = 0; i < r.x_star.size(); ++i) {
        if (r.x_star[i] < spec.x_lo[i] || r.x_star[i] > spec.x_hi[i]) return ev;
      }
    }
    ev.ok = true;
    ev.x = r.x_star;
    ev.residual = r.residual_norm;
    ev.value = spec.ell_e(ev.x, u);
    if (!std::isfinite(ev.value)) ev.ok = false;
  } catch (const Error&) {
    ev.ok = false;
  }
  return ev;
}

}  // namespace

SteadyOptimum solve_steady_state_optimum(const SteadyOptimumSpec& spec) {
  if (!spec.sys || !spec.ell_e) throw Error(Errc::InvalidArgument, "steady-state optimum needs a model and objective");
  const std::size_t d = spec.p_lo.size();
  if (d == 0 || spec.p_hi.size() != d) throw Error(Errc::InvalidArgument, "decision bounds");
  for (std::size_t j = 0; j < d; ++j) {
    if (!(spec.p_lo[j] <= spec.p_hi[j])) throw Error(Errc::InvalidArgument, "decision bounds are empty");
  }
  if (spec.x_guess.size() != spec.sys->dim) throw Error(Errc::DimMismatch, "state guess length");

  struct Candidate {
    Vector p;
    SteadyEval ev;
  };
  std::vector<Candidate> found;
  Rng rng(mix_seed(spec.seed, 0x55));
  const double fd = 1e-6;

  for (int s = 0; s < spec.starts; ++s) {
    Vector p(d);
    for (std::size_t j = 0; j < d; ++j) p[j] = spec.p_lo[j] == spec.p_hi[j] ? spec.p_lo[j] : rng.uniform(spec.p_lo[j], spec.p_hi[j]);
    SteadyEval cur = evaluate_steady(spec, p, spec.x_guess);
    if (!cur.ok) continue;

    for (int it = 0; it < spec.max_iterations; ++it) {
      // Ascent direction in normalised coordinates.
      Vector gz(d, 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        const double range = spec.p_hi[j] - spec.p_lo[j];
        if (range <= 0.0) continue;
        Vector q = p;
        const bool backward = p[j] + fd * range > spec.p_hi[j];
        q[j] = backward ? p[j] - fd * range : p[j] + fd * range;
        const SteadyEval e = evaluate_steady(spec, q, cur.x);
        if (!e.ok) continue;
        gz[j] = (e.value - cur.value) / (q[j] - p[j]) * range;
      }
      double pg = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double range = spec.p_hi[j] - spec.p_lo[j];
        if (range <= 0.0) continue;
        const double z = (p[j] - spec.p_lo[j]) / range;
        pg = std::max(pg, std::abs(std::clamp(z + gz[j], 0.0, 1.0) - z));
      }
      if (pg <= 1e-9) break;

      bool accepted = false;
      double step = 1.0;
      for (int b = 0; b < 40 && !accepted; ++b, step *= 0.5) {
        Vector q = p;
        double gain = 0.0;
        bool moved = false;
        for (std::size_t j = 0; j < d; ++j) {
          const double range = spec.p_hi[j] - spec.p_lo[j];
          if (range <= 0.0) continue;
          const double z = (p[j] - spec.p_lo[j]) / range;
          const double zn = std::clamp(z + step * gz[j], 0.0, 1.0);
          q[j] = spec.p_lo[j] + zn * range;
          gain += gz[j] * (zn - z);
          moved = moved || q[j] != p[j];
        }
        if (!moved) break;
        SteadyEval e = evaluate_steady(spec, q, cur.x);
        if (e.ok && e.value >= cur.value + 1e-4 * gain) {
          p = q;
          cur = std::move(e);
          accepted = true;
        }
      }
      if (!accepted) break;
    }
    found.push_back({p, cur});
  }

  if (found.empty()) throw Error(Errc::NoFeasibleSteadyState, "no start reached a feasible steady state");
  double best = -kInf;
  for (const auto& c : found) best = std::max(best, c.ev.value);
  const double tie = 1e-9 * std::max(1.0, std::abs(best));
  const Candidate* pick = nullptr;
  for (const auto& c : found) {
    if (c.ev.value < best - tie) continue;
    if (!pick || std::lexicographical_compare(c.p.begin(), c.p.end(), pick->p.begin(), pick->p.end())) pick = &c;
  }
  SteadyOptimum out;
  out.p_s = pick->p;
  out.u_s = spec.input_map ? spec.input_map(pick->p) : pick->p;
  out.x_s = pick->ev.x;
  out.value = pick->ev.value;
  out.residual = pick->ev.residual;
  return out;
}

}  // namespace procbench
