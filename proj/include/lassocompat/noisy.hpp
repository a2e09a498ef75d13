#pragma once

#include "lassocompat/core.hpp"
#include "lassocompat/designs.hpp"
#include "lassocompat/gram.hpp"
#include "lassocompat/parallel.hpp"
#include "lassocompat/solver.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace lassocompat {

struct NoisyConfig {
  int n = 100;
  double alpha = 0.05;
  double alpha1 = 0.05;
  double eta = 0.5;
  double lambda = 0.0;
  int trials = 1000;
  std::uint64_t seed = 42;
  std::optional<GramMatrix> sigma0;
  /// When false, eta * lambda <= lambda0 is reported instead of thrown.
  bool enforce_precondition = true;
  /// Multiplies the noise; 0 gives noiseless data.
  double noise_scale = 1.0;
  double solver_tol = 1e-10;
};

/// lambda0 = sqrt(2 log(2p / alpha) / n).
inline double lambda0(int p, int n, double alpha) {
  return std::sqrt(2.0 * std::log(2.0 * p / alpha) / n);
}

inline bool noise_precondition_holds(const NoisyConfig& cfg, int p) {
  return cfg.eta * cfg.lambda > lambda0(p, cfg.n, cfg.alpha);
}

struct TrialResult {
  int trial = 0;
  double lhs = 0.0;        // |X(beta_hat - beta*)|_2
  double rhs = kInf;       // high-probability bound in use
  bool violation = false;
  double bias = 0.0;       // |X(beta* - beta0)|_2
  double total = 0.0;      // |X(beta_hat - beta0)|_2
  double xi = 0.0;         // Sigma0 variant only
  bool xi_condition_failure = false;
};

struct CoverageReport {
  int trials = 0;
  int evaluated = 0; // trials with a verdict
  int violations = 0;
  double empirical_coverage = 0.0;
  double nominal = 0.0;
  double mean_lhs = 0.0, mean_rhs = 0.0;
  int xi_condition_failures = 0;
  double lambda0 = 0.0;
  bool precondition_holds = true;
  std::vector<TrialResult> rows;
};

/// Everything a trial needs that does not depend on the noise.
class NoisyExperiment {
public:
  NoisyExperiment(ProblemInstance inst, DesignFactor factor, NoisyConfig cfg)
      : inst_(std::move(inst)), factor_(std::move(factor)), cfg_(std::move(cfg)) {
    const int p = inst_.p();
    if (factor_.p() != p) throw Error("design factor has the wrong number of columns");
    if ((factor_.gram() - inst_.gram.matrix()).cwiseAbs().maxCoeff() > 1e-9)
      throw Error("design factor does not reproduce the Gram matrix");
    if (factor_.n != cfg_.n)
      throw Error("design factor has " + std::to_string(factor_.n) + " rows but n = " +
                  std::to_string(cfg_.n));
    for (int j = 0; j < p; ++j)
      if (factor_.columns.col(j).norm() > 1.0 + 1e-12)
        throw PreconditionError("column " + std::to_string(j + 1) + " has norm above 1");
    if (!(cfg_.alpha > 0.0 && cfg_.alpha < 1.0 && cfg_.alpha1 > 0.0 && cfg_.alpha1 < 1.0))
      throw PreconditionError("alpha and alpha1 must lie in (0, 1)");
    if (!(cfg_.eta >= 0.0 && cfg_.eta < 1.0)) throw PreconditionError("eta must lie in [0, 1)");
    if (!(cfg_.lambda > 0.0)) throw PreconditionError("lambda must be positive");
    lambda0_ = lassocompat::lambda0(p, cfg_.n, cfg_.alpha);
    precondition_ = cfg_.eta * cfg_.lambda > lambda0_;
    if (cfg_.enforce_precondition && !precondition_)
      throw PreconditionError("eta * lambda = " + std::to_string(cfg_.eta * cfg_.lambda) +
                              " does not exceed lambda0 = " + std::to_string(lambda0_));

    ProblemInstance scaled = inst_;
    scaled.lambda = cfg_.lambda;
    SolverOptions so;
    so.tol = 1e-12;
    beta_star_ = solve_noiseless(scaled, so).beta_star;
    const Vector d = beta_star_ - inst_.beta0;
    bias_ = std::sqrt(std::max(inst_.gram.quad(d), 0.0));
    l1_error_ = d.lpNorm<1>();
    signal_ = factor_.columns * inst_.beta0;
    noise_term_ = std::sqrt(2.0 * std::log(1.0 / cfg_.alpha1) / cfg_.n);
  }

  const NoisyConfig& config() const { return cfg_; }
  const Vector& beta_star() const { return beta_star_; }
  double bias() const { return bias_; }
  double lambda0() const { return lambda0_; }
  bool precondition_holds() const { return precondition_; }

  /// sqrt(Lambda_max / (n lambda^2 (1 - eta)^2)) |X(beta* - beta0)| + sqrt(2 log(1/alpha1)/n).
  double rhs_gram() const {
    const double lam = cfg_.lambda, eta = cfg_.eta;
    return std::sqrt(inst_.gram.lambda_max() / (cfg_.n * lam * lam * (1.0 - eta) * (1.0 - eta))) *
               bias_ +
           noise_term_;
  }

  /// |Sigma_hat - Sigma0|_inf |beta* - beta0|_1.
  double xi() const {
    if (!cfg_.sigma0) throw MissingSigma0();
    return (inst_.gram.matrix() - cfg_.sigma0->matrix()).cwiseAbs().maxCoeff() * l1_error_;
  }

  bool xi_condition_holds() const { return xi() < cfg_.lambda * (1.0 - cfg_.eta); }

  /// Lambda_max^{1/2}(Sigma0) (bias^2 + xi |beta* - beta0|_1)^{1/2} / (lambda(1-eta) - xi)
  /// + sqrt(2 log(1/alpha1)/n), as displayed; kInf when the xi condition fails.
  double rhs_sigma0() const {
    const double x = xi();
    const double den = cfg_.lambda * (1.0 - cfg_.eta) - x;
    if (!(den > 0.0)) return kInf;
    return std::sqrt(cfg_.sigma0->lambda_max()) * std::sqrt(bias_ * bias_ + x * l1_error_) / den +
           noise_term_;
  }

  /// Noise vector of trial t: N(0, 1/n) entries from a stream keyed by (seed, t).
  Vector noise(int trial) const {
    const auto s = cfg_.seed;
    const auto t = static_cast<std::uint64_t>(trial);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(cfg_.n)));
    Vector eps(cfg_.n);
    for (int i = 0; i < cfg_.n; ++i) eps[i] = cfg_.noise_scale * nd(rng);
    return eps;
  }

  /// Draws the noise, solves the noisy Lasso and fills lhs, bias and total.
  TrialResult draw(int trial) const {
    TrialResult r;
    r.trial = trial;
    r.bias = bias_;
    const Vector y = signal_ + noise(trial);
    SolverOptions so;
    so.tol = cfg_.solver_tol;
    const Vector beta_hat = solve_noisy(factor_, y, cfg_.lambda, so).beta_star;
    r.lhs = std::sqrt(std::max(inst_.gram.quad(beta_hat - beta_star_), 0.0));
    r.total = std::sqrt(std::max(inst_.gram.quad(beta_hat - inst_.beta0), 0.0));
    return r;
  }

private:
  ProblemInstance inst_;
  DesignFactor factor_;
  NoisyConfig cfg_;
  Vector beta_star_, signal_;
  double bias_ = 0.0, l1_error_ = 0.0, lambda0_ = 0.0, noise_term_ = 0.0;
  bool precondition_ = true;
};

inline TrialResult run_trial(const NoisyExperiment& ex, int trial) {
  TrialResult r = ex.draw(trial);
  r.rhs = ex.rhs_gram();
  r.violation = r.lhs > r.rhs;
  return r;
}

/// Sigma0 variant. When the xi condition fails no verdict is given.
inline TrialResult run_trial_sigma0(const NoisyExperiment& ex, int trial) {
  if (!ex.config().sigma0) throw MissingSigma0();
  TrialResult r = ex.draw(trial);
  r.xi = ex.xi();
  r.xi_condition_failure = !ex.xi_condition_holds();
  if (r.xi_condition_failure) return r;
  r.rhs = ex.rhs_sigma0();
  r.violation = r.lhs > r.rhs;
  return r;
}

namespace detail {

template <class Trial>
CoverageReport aggregate(const NoisyExperiment& ex, Trial&& trial) {
  const NoisyConfig& cfg = ex.config();
  if (cfg.trials < 1) throw Error("trials must be at least 1");
  CoverageReport rep;
  rep.trials = cfg.trials;
  rep.nominal = 1.0 - cfg.alpha - cfg.alpha1;
  rep.lambda0 = ex.lambda0();
  rep.precondition_holds = ex.precondition_holds();
  rep.rows.resize(cfg.trials);
  parallel_for(cfg.trials, [&](std::size_t t) { rep.rows[t] = trial(ex, static_cast<int>(t)); });
  double sl = 0.0, sr = 0.0;
  for (const TrialResult& r : rep.rows) {
    if (r.xi_condition_failure) {
      ++rep.xi_condition_failures;
      continue;
    }
    ++rep.evaluated;
    rep.violations += r.violation ? 1 : 0;
    sl += r.lhs;
    sr += r.rhs;
  }
  if (rep.evaluated > 0) {
    rep.empirical_coverage = 1.0 - static_cast<double>(rep.violations) / rep.evaluated;
    rep.mean_lhs = sl / rep.evaluated;
    rep.mean_rhs = sr / rep.evaluated;
  } else {
    rep.empirical_coverage = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

} // namespace detail

inline CoverageReport coverage(const NoisyExperiment& ex) {
  return detail::aggregate(ex, run_trial);
}

inline CoverageReport coverage_sigma0(const NoisyExperiment& ex) {
  return detail::aggregate(ex, run_trial_sigma0);
}

struct SweepPoint {
  int p = 0;
  double lambda = 0.0;
  double bias = 0.0;
  double mean_lhs = 0.0;
  double ratio = 0.0; // mean_lhs / bias
};

/// Pair-block designs of growing size with lambda = c sqrt(log p / n) and
/// signal of the given size on the first pair.
inline std::vector<SweepPoint> asymptotic_sweep(const std::vector<int>& sizes, int n, double c,
                                                double rho, double signal, int trials,
                                                std::uint64_t seed) {
  std::vector<SweepPoint> out;
  for (int p : sizes) {
    if (p < 2 || p % 2) throw Error("sweep sizes must be even");
    const DesignSpec spec = DesignSpec::pair_blocks(std::vector<double>(p / 2, rho));
    const GramMatrix g = build_gram(spec);
    Vector b0 = Vector::Zero(p);
    b0[0] = signal;
    b0[1] = signal;
    NoisyConfig cfg;
    cfg.n = n;
    cfg.lambda = c * std::sqrt(std::log(static_cast<double>(p)) / n);
    cfg.trials = trials;
    cfg.seed = seed;
    const NoisyExperiment ex(ProblemInstance(g, b0, cfg.lambda), factorize(g, n), cfg);
    const CoverageReport rep = coverage(ex);
    out.push_back({p, cfg.lambda, ex.bias(), rep.mean_lhs, rep.mean_lhs / ex.bias()});
  }
  return out;
}

} // namespace lassocompat
