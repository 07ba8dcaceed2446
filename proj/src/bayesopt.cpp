#include "procbench/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "procbench/error.hpp"

namespace procbench {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double sq(double v) { return v * v; }

// Cholesky with escalating diagonal jitter; returns the jitter used.
double robust_cholesky(Eigen::MatrixXd K, Eigen::LLT<Eigen::MatrixXd>& chol) {
  const Eigen::Index n = K.rows();
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    Eigen::MatrixXd Kj = K;
    if (jitter > 0.0) Kj.diagonal().array() += jitter;
    chol.compute(Kj);
    if (chol.info() == Eigen::Success && chol.matrixLLT().diagonal().minCoeff() > 0.0 &&
        chol.matrixLLT().diagonal().allFinite()) {
      return jitter;
    }
    jitter = attempt == 0 ? 1e-10 : jitter * 10.0;
  }
  (void)n;
  throw Error(Errc::IllConditionedKernel, "kernel matrix not positive definite with jitter up to 1e-6");
}

struct Standardised {
  Eigen::VectorXd y;
  double mean = 0.0;
  double scale = 1.0;
};

Standardised standardise(const Vector& y) {
  Standardised s;
  const double n = static_cast<double>(y.size());
  s.mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double var = 0.0;
  for (double v : y) var += sq(v - s.mean);
  var /= n;
  s.scale = var > 1e-24 ? std::sqrt(var) : 1.0;
  s.y.resize(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) s.y(static_cast<Eigen::Index>(i)) = (y[i] - s.mean) / s.scale;
  return s;
}

}  // namespace

double GaussianProcess::kernel(std::span<const double> a, std::span<const double> b) const {
  const Vector& l = hyper_.lengthscales;
  double r2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r2 += sq((a[i] - b[i]) / (l.size() == 1 ? l[0] : l[i]));
  return hyper_.signal_var * std::exp(-0.5 * r2);
}

void GaussianProcess::fit(const std::vector<Vector>& X, const Vector& y, const GpHyper& hyper) {
  if (X.empty() || X.size() != y.size()) throw Error(Errc::InvalidArgument, "GP needs matching nonempty data");
  const std::size_t d = X[0].size();
  for (const Vector& x : X) {
    if (x.size() != d) throw Error(Errc::DimMismatch, "GP inputs differ in dimension");
  }
  if (!(hyper.lengthscales.size() == 1 || hyper.lengthscales.size() == d)) {
    throw Error(Errc::DimMismatch, "lengthscales must have 1 or d entries");
  }
  for (double l : hyper.lengthscales) {
    if (!(l > 0.0)) throw Error(Errc::InvalidArgument, "lengthscales must be positive");
  }
  if (!(hyper.signal_var > 0.0) || !(hyper.noise_var >= 0.0)) throw Error(Errc::InvalidArgument, "bad GP variances");

  X_ = X;
  hyper_ = hyper;
  const Standardised s = standardise(y);
  y_mean_ = s.mean;
  y_scale_ = s.scale;

  const auto n = static_cast<Eigen::Index>(X.size());
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) K(i, j) = K(j, i) = kernel(X_[i], X_[j]);
    K(i, i) += hyper_.noise_var;
  }
  jitter_ = robust_cholesky(std::move(K), chol_);
  alpha_ = chol_.solve(s.y);
  lml_ = -0.5 * s.y.dot(alpha_) - chol_.matrixLLT().diagonal().array().log().sum() - 0.5 * static_cast<double>(n) * kLog2Pi;
}

GpPrediction GaussianProcess::predict(std::span<const double> x) const {
  if (X_.empty()) throw Error(Errc::InvalidArgument, "GP is not fitted");
  const auto n = static_cast<Eigen::Index>(X_.size());
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) k(i) = kernel(x, X_[i]);
  const Eigen::VectorXd v = chol_.matrixL().solve(k);
  GpPrediction p;
  p.mean = y_mean_ + y_scale_ * k.dot(alpha_);
  p.variance = y_scale_ * y_scale_ * std::max(0.0, hyper_.signal_var - v.squaredNorm());
  return p;
}

GpHyper fit_hyperparameters(const std::vector<Vector>& X, const Vector& y, const HyperFitOptions& opts) {
  if (X.empty() || X.size() != y.size()) throw Error(Errc::InvalidArgument, "GP needs matching nonempty data");
  if (opts.starts < 1) throw Error(Errc::InvalidArgument, "need at least one start");
  const std::size_t d = X[0].size();
  const auto n = static_cast<Eigen::Index>(X.size());
  const std::size_t n_len = opts.ard ? d : 1;
  const Standardised s = standardise(y);

  // Packed lower-triangle squared differences per lengthscale group.
  const Eigen::Index n_pairs = n * (n - 1) / 2;
  Eigen::MatrixXd diff2 = Eigen::MatrixXd::Zero(n_pairs, static_cast<Eigen::Index>(n_len));
  for (Eigen::Index i = 0, p = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j, ++p) {
      for (std::size_t k = 0; k < d; ++k) diff2(p, opts.ard ? static_cast<Eigen::Index>(k) : 0) += sq(X[i][k] - X[j][k]);
    }
  }

  // theta = (log l_1..l_m, log noise-to-signal ratio); the signal variance is
  // profiled out in closed form, clamped to [1e-2, 1e2].
  const std::size_t m = n_len + 1;
  Vector lo(m), hi(m);
  for (std::size_t k = 0; k < n_len; ++k) {
    lo[k] = std::log(1e-2);
    hi[k] = std::log(10.0 * std::sqrt(static_cast<double>(opts.ard ? 1 : d)));
  }
  lo[n_len] = std::log(opts.min_noise);
  hi[n_len] = std::log(1.0);
  const double s2_lo = 1e-2, s2_hi = 1e2;

  Eigen::MatrixXd K(n, n);
  Eigen::LLT<Eigen::MatrixXd> chol;
  Eigen::VectorXd inv_l2(static_cast<Eigen::Index>(n_len));
  Eigen::ArrayXd corr(n_pairs);
  Vector cached_l;
  auto lml = [&](const Vector& th, double& s2) {
    // The correlation part depends on the lengthscales only; reuse it when they are unchanged.
    if (cached_l.empty() || !std::equal(cached_l.begin(), cached_l.end(), th.begin())) {
      for (std::size_t k = 0; k < n_len; ++k) inv_l2(static_cast<Eigen::Index>(k)) = -0.5 * std::exp(-2.0 * th[k]);
      corr = (diff2 * inv_l2).array().exp();
      cached_l.assign(th.begin(), th.begin() + static_cast<std::ptrdiff_t>(n_len));
    }
    for (Eigen::Index i = 0, p = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < i; ++j, ++p) K(i, j) = corr(p);
      K(i, i) = 1.0 + std::exp(th[n_len]);
    }
    chol.compute(K);  // reads the lower triangle only
    if (chol.info() != Eigen::Success) return -HUGE_VAL;
    const double q = s.y.dot(chol.solve(s.y));
    s2 = std::clamp(q / static_cast<double>(n), s2_lo, s2_hi);
    const double val = -0.5 * q / s2 - 0.5 * static_cast<double>(n) * std::log(s2) -
                       chol.matrixLLT().diagonal().array().log().sum();
    return std::isfinite(val) ? val : -HUGE_VAL;
  };

  Vector best_theta;
  double best_val = -HUGE_VAL, best_s2 = 1.0;
  for (int start = 0; start < opts.starts; ++start) {
    Rng rng(mix_seed(opts.seed, static_cast<std::uint64_t>(start)));
    Vector th(m);
    for (std::size_t k = 0; k < m; ++k) th[k] = rng.uniform(lo[k], hi[k]);
    double s2 = 1.0, trial_s2 = 1.0;
    double val = lml(th, s2);
    double step = 1.0;
    int evals = 0;
    while (step > 0.05 && evals < 200) {
      bool improved = false;
      for (std::size_t k = 0; k < m; ++k) {
        for (double dir : {1.0, -1.0}) {
          Vector trial = th;
          trial[k] = std::clamp(th[k] + dir * step, lo[k], hi[k]);
          if (trial[k] == th[k]) continue;
          const double v = lml(trial, trial_s2);
          ++evals;
          if (v > val) {
            th = std::move(trial);
            val = v;
            s2 = trial_s2;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    if (val > best_val) {
      best_val = val;
      best_theta = th;
      best_s2 = s2;
    }
  }
  if (best_theta.empty()) throw Error(Errc::IllConditionedKernel, "no start produced a positive definite kernel");

  GpHyper h;
  h.lengthscales.assign(n_len, 0.0);
  for (std::size_t k = 0; k < n_len; ++k) h.lengthscales[k] = std::exp(best_theta[k]);
  h.signal_var = best_s2;
  h.noise_var = best_s2 * std::exp(best_theta[n_len]);
  return h;
}

double expected_improvement(double mean, double variance, double best) {
  const double sd = std::sqrt(std::max(0.0, variance));
  const double gain = mean - best;
  if (sd == 0.0) return std::max(gain, 0.0);
  const double z = gain / sd;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
  return std::max(0.0, gain * cdf + sd * pdf);
}

std::vector<Vector> halton_candidates(std::size_t n, const Vector& lo, const Vector& hi, std::uint64_t seed) {
  const std::size_t d = lo.size();
  if (hi.size() != d) throw Error(Errc::DimMismatch, "box bounds differ in length");
  std::vector<unsigned> primes;
  for (unsigned c = 2; primes.size() < d; ++c) {
    if (std::all_of(primes.begin(), primes.end(), [c](unsigned p) { return c % p != 0; })) primes.push_back(c);
  }
  Rng rng(seed);
  Vector shift(d);
  for (double& v : shift) v = rng.uniform();
  std::vector<Vector> out(n, Vector(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      double f = 1.0, r = 0.0;
      for (std::size_t idx = i + 1; idx > 0; idx /= primes[k]) {
        f /= primes[k];
        r += f * static_cast<double>(idx % primes[k]);
      }
      r += shift[k];
      r -= std::floor(r);
      out[i][k] = lo[k] + r * (hi[k] - lo[k]);
    }
  }
  return out;
}

void BoState::add(const Vector& x, double score) {
  X.push_back(x);
  y.push_back(score);
  if (score > best_score) {
    best_score = score;
    best_x = x;
  }
  ++iteration;
}

Vector bo_propose(const BoState& state, const GaussianProcess& gp, std::size_t n_candidates) {
  if (state.X.size() < 2) throw Error(Errc::InvalidArgument, "BO needs at least two evaluated points");
  const std::size_t d = state.lo.size();
  const Vector unit_lo(d, 0.0), unit_hi(d, 1.0);
  const auto cand = halton_candidates(n_candidates, unit_lo, unit_hi,
                                      mix_seed(state.seed, static_cast<std::uint64_t>(state.iteration)));
  std::size_t best_i = 0;
  double best_ei = -1.0;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const GpPrediction p = gp.predict(cand[i]);
    const double ei = expected_improvement(p.mean, p.variance, state.best_score);
    if (ei > best_ei) {
      best_ei = ei;
      best_i = i;
    }
  }
  Vector x(d);
  for (std::size_t k = 0; k < d; ++k) x[k] = state.lo[k] + cand[best_i][k] * (state.hi[k] - state.lo[k]);
  return x;
}

BayesOpt::BayesOpt(Vector lo, Vector hi, BoOptions opts) : opts_(opts), rng_(opts.seed) {
  if (lo.size() != hi.size() || lo.empty()) throw Error(Errc::DimMismatch, "BO box bounds");
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (!(lo[k] < hi[k])) throw Error(Errc::InvalidArgument, "BO box must have positive width");
  }
  if (opts_.max_training < 2) throw Error(Errc::InvalidArgument, "max_training must be at least 2");
  state_.lo = std::move(lo);
  state_.hi = std::move(hi);
  state_.seed = opts.seed;
}

Vector BayesOpt::ask() {
  const std::size_t d = state_.lo.size();
  auto random_point = [&] {
    Vector x(d);
    for (std::size_t k = 0; k < d; ++k) x[k] = rng_.uniform(state_.lo[k], state_.hi[k]);
    return x;
  };
  if (state_.X.size() < static_cast<std::size_t>(std::max(opts_.initial_random, 2))) return random_point();

  // Training set: the best-scoring points, earlier ones first on ties.
  std::vector<std::size_t> idx(state_.X.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (idx.size() > opts_.max_training) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return state_.y[a] > state_.y[b]; });
    idx.resize(opts_.max_training);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<Vector> Xn;
  Vector y;
  for (std::size_t i : idx) {
    Vector z(d);
    for (std::size_t k = 0; k < d; ++k) z[k] = (state_.X[i][k] - state_.lo[k]) / (state_.hi[k] - state_.lo[k]);
    Xn.push_back(std::move(z));
    y.push_back(state_.y[i]);
  }
  HyperFitOptions fit = opts_.fit;
  fit.seed = mix_seed(opts_.seed ^ opts_.fit.seed, static_cast<std::uint64_t>(state_.iteration));
  GaussianProcess gp;
  try {
    last_hyper_ = fit_hyperparameters(Xn, y, fit);
    gp.fit(Xn, y, last_hyper_);
  } catch (const Error& e) {
    if (e.code() != Errc::IllConditionedKernel) throw;
    return random_point();
  }
  return bo_propose(state_, gp, opts_.candidates);
}

void BayesOpt::tell(const Vector& x, double score) {
  if (x.size() != state_.lo.size()) throw Error(Errc::DimMismatch, "BO point dimension");
  state_.add(x, score);
}

void BayesOpt::write_log_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot open " + path);
  out.precision(17);
  out << "iteration,score,best";
  for (std::size_t k = 0; k < state_.lo.size(); ++k) out << ",x_" << k;
  out << '\n';
  double best = -HUGE_VAL;
  for (std::size_t i = 0; i < state_.X.size(); ++i) {
    best = std::max(best, state_.y[i]);
    out << i + 1 << ',' << state_.y[i] << ',' << best;
    for (double v : state_.X[i]) out << ',' << v;
    out << '\n';
  }
}

Vector PiecewiseProfile::action(std::span<const double> params, int step) const {
  if (params.size() != dim()) throw Error(Errc::DimMismatch, "profile parameter count");
  const auto seg = std::min<std::size_t>(
      n_segments - 1, static_cast<std::size_t>(std::max(0, step)) * n_segments / static_cast<std::size_t>(horizon));
  Vector a(n_inputs);
  for (std::size_t i = 0; i < n_inputs; ++i) a[i] = params[i * n_segments + seg];
  return a;
}

Vector PiecewiseProfile::lower(const Vector& input_lo) const {
  Vector v;
  for (double x : input_lo) v.insert(v.end(), n_segments, x);
  return v;
}

Vector PiecewiseProfile::upper(const Vector& input_hi) const { return lower(input_hi); }

}  // namespace procbench
