#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "procbench/random.hpp"
#include "procbench/sim_core.hpp"

namespace procbench {

// Squared-exponential kernel s2 * exp(-0.5 * sum((x_i - x'_i) / l_i)^2).
// One lengthscale means isotropic. Variances refer to standardised targets.
struct GpHyper {
  Vector lengthscales{0.2};
  double signal_var = 1.0;
  double noise_var = 1e-6;
};

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

// Targets are standardised internally (prior mean = sample mean); predictions
// are returned in the original units.
class GaussianProcess {
 public:
  // Throws IllConditionedKernel when the Cholesky fails with jitter up to 1e-6.
  void fit(const std::vector<Vector>& X, const Vector& y, const GpHyper& hyper);
  GpPrediction predict(std::span<const double> x) const;
  double log_marginal_likelihood() const { return lml_; }
  const GpHyper& hyper() const { return hyper_; }
  double jitter() const { return jitter_; }
  std::size_t size() const { return X_.size(); }

 private:
  double kernel(std::span<const double> a, std::span<const double> b) const;

  std::vector<Vector> X_;
  GpHyper hyper_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  double jitter_ = 0.0;
  double lml_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
};

struct HyperFitOptions {
  int starts = 50;
  std::uint64_t seed = 0;
  bool ard = false;
  double min_noise = 1e-6;
};

// Multi-start coordinate search on the log marginal likelihood over log
// lengthscale(s), log signal and log noise variance.
GpHyper fit_hyperparameters(const std::vector<Vector>& X, const Vector& y, const HyperFitOptions& opts = {});

// Closed-form EI for maximisation.
double expected_improvement(double mean, double variance, double best);

// Halton points in [lo, hi] with a seeded random shift modulo 1.
std::vector<Vector> halton_candidates(std::size_t n, const Vector& lo, const Vector& hi, std::uint64_t seed);

struct BoState {
  Vector lo, hi;
  std::vector<Vector> X;
  Vector y;
  double best_score = -HUGE_VAL;
  Vector best_x;
  int iteration = 0;
  std::uint64_t seed = 0;

  void add(const Vector& x, double score);
};

// Argmax of EI over seeded Halton candidates; the lowest index wins ties.
// gp must be fitted on box-normalised inputs.
Vector bo_propose(const BoState& state, const GaussianProcess& gp, std::size_t n_candidates = 2048);

struct BoOptions {
  int initial_random = 10;
  std::size_t candidates = 2048;
  std::size_t max_training = 64;  // best-scoring points kept for the GP
  HyperFitOptions fit;
  std::uint64_t seed = 0;
};

// Ask/tell driver: random points first, then one GP refit per observation.
class BayesOpt {
 public:
  BayesOpt(Vector lo, Vector hi, BoOptions opts = {});
  Vector ask();
  void tell(const Vector& x, double score);
  const BoState& state() const { return state_; }
  // iteration,score,best,x_0..x_{d-1}
  void write_log_csv(const std::string& path) const;

 private:
  BoState state_;
  BoOptions opts_;
  Rng rng_;
  GpHyper last_hyper_;
};

// Piecewise-constant input profile: n_segments equal pieces over horizon
// steps per input; params are input-major (input i, segment k at i * n + k).
struct PiecewiseProfile {
  std::size_t n_inputs = 0;
  std::size_t n_segments = 6;
  int horizon = 1;

  std::size_t dim() const { return n_inputs * n_segments; }
  Vector action(std::span<const double> params, int step) const;
  Vector lower(const Vector& input_lo) const;
  Vector upper(const Vector& input_hi) const;
};

}  // namespace procbench
