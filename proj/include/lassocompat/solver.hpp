#pragma once

#include "lassocompat/core.hpp"
#include "lassocompat/gram.hpp"

#include <Eigen/QR>

#include <optional>
#include <random>

namespace lassocompat {

/// Noiseless Lasso problem: minimize (b - beta0)^T Sigma (b - beta0) + 2 lambda |b|_1.
struct ProblemInstance {
  GramMatrix gram;
  Vector beta0;
  double lambda = 0.0;

  ProblemInstance() = default;
  ProblemInstance(GramMatrix g, Vector b0, double lam)
      : gram(std::move(g)), beta0(std::move(b0)), lambda(lam) {
    if (beta0.size() != gram.p())
      throw Error("beta0 has " + std::to_string(beta0.size()) + " entries, expected " +
                  std::to_string(gram.p()));
    if (!(lambda >= 0.0)) throw Error("lambda must be non-negative");
  }

  int p() const { return gram.p(); }
  IndexSet active_set() const { return support(beta0); }
};

struct LassoSolution {
  Vector beta_star;
  Vector subgradient;
  double kkt_residual = 0.0;
  long iterations = 0;
  double prediction_error = 0.0; // NaN for noisy solves (beta0 unknown to the solver)
  double penalized_value = 0.0;  // prediction_error + 2 lambda |beta*_{-S0}|_1
  double objective = 0.0;
  bool monotone = true;          // objective never increased across sweeps
  std::vector<double> objective_trace;
};

struct SolverOptions {
  double tol = 1e-10;
  long max_iter = 1'000'000;
  bool track_objective = false;
  std::optional<Vector> start;
};

/// Smooth part f(b) = b^T Sigma b - 2 c^T b + offset plus the weighted penalty
/// 2 lambda sum_j w_j |b_j|. Both Lasso variants are of this form.
struct QuadraticL1Problem {
  const Matrix* sigma = nullptr;
  Vector c;
  double offset = 0.0;
  double lambda = 0.0;
  Vector weights; // empty means all ones

  double weight(int j) const { return weights.size() ? weights[j] : 1.0; }

  double objective(const Vector& b) const {
    double pen = 0.0;
    for (int j = 0; j < b.size(); ++j) pen += weight(j) * std::abs(b[j]);
    return b.dot(*sigma * b) - 2.0 * c.dot(b) + offset + 2.0 * lambda * pen;
  }
};

namespace detail {

/// Subgradient and KKT residual from the half-gradient g = Sigma b - c.
inline double kkt_from_gradient(const Vector& g, const Vector& b, double lambda,
                                const QuadraticL1Problem& pr, Vector* z_out) {
  const int p = static_cast<int>(b.size());
  Vector z = Vector::Zero(p);
  double res = 0.0;
  for (int j = 0; j < p; ++j) {
    const double lw = lambda * pr.weight(j);
    if (b[j] != 0.0) {
      z[j] = sign(b[j]);
      res = std::max(res, std::abs(g[j] + lw * z[j]));
    } else if (lw > 0.0) {
      z[j] = std::clamp(-g[j] / lw, -1.0, 1.0);
      res = std::max(res, std::abs(g[j] + lw * z[j]));
    } else {
      res = std::max(res, std::abs(g[j]));
    }
  }
  if (z_out) *z_out = z;
  return res;
}

/// Active-set refinement: with the support and signs fixed, the stationarity
/// equations are linear. The candidate is kept only if it is sign-consistent,
/// certified, and does not increase the objective.
inline bool polish(const QuadraticL1Problem& pr, Vector& b, double tol) {
  const Matrix& s = *pr.sigma;
  const IndexSet a = support(b);
  if (a.empty()) return false;
  const int k = static_cast<int>(a.size());
  Matrix saa(k, k);
  Vector rhs(k), cur(k);
  for (int i = 0; i < k; ++i) {
    cur[i] = b[a[i]];
    rhs[i] = pr.c[a[i]] - pr.lambda * pr.weight(a[i]) * sign(b[a[i]]);
    for (int l = 0; l < k; ++l) saa(i, l) = s(a[i], a[l]);
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(saa);
  const Vector step = cod.solve(rhs - saa * cur);
  Vector cand = b;
  for (int i = 0; i < k; ++i) {
    const double v = cur[i] + step[i];
    if (sign(v) != sign(cur[i]) && pr.weight(a[i]) > 0.0) return false;
    cand[a[i]] = v;
  }
  const Vector g = s * cand - pr.c;
  if (kkt_from_gradient(g, cand, pr.lambda, pr, nullptr) > tol) return false;
  if (pr.objective(cand) > pr.objective(b) + 1e-14 * std::max(1.0, std::abs(pr.objective(b))))
    return false;
  b = cand;
  return true;
}

} // namespace detail

/// Cyclic coordinate descent with exact coordinate minimization, stopped on
/// the KKT sup-norm residual. Coordinates with |gradient| = lambda are set to 0.
inline LassoSolution coordinate_descent(const QuadraticL1Problem& pr, const SolverOptions& opt) {
  const Matrix& s = *pr.sigma;
  const int p = static_cast<int>(s.rows());
  for (int j = 0; j < p; ++j)
    if (s(j, j) <= 0.0) throw DegenerateDiagonal(j);
  if (!(opt.tol > 0.0)) throw Error("solver tolerance must be positive");

  LassoSolution out;
  Vector b = opt.start ? *opt.start : Vector::Zero(p);
  if (b.size() != p) throw Error("start vector has the wrong length");
  Vector g = s * b - pr.c;
  double prev = pr.objective(b);
  if (opt.track_objective) out.objective_trace.push_back(prev);

  long sweep = 0;
  double res = detail::kkt_from_gradient(g, b, pr.lambda, pr, nullptr);
  long last_polish = 0;
  IndexSet last_support = support(b);
  while (res > opt.tol) {
    if (sweep >= opt.max_iter) throw NonConvergence(sweep, res);
    ++sweep;
    for (int j = 0; j < p; ++j) {
      const double d = s(j, j);
      const double u = d * b[j] - g[j];
      const double t = pr.lambda * pr.weight(j);
      double nb = 0.0;
      if (u > t) nb = (u - t) / d;
      else if (u < -t) nb = (u + t) / d;
      const double delta = nb - b[j];
      if (delta != 0.0) {
        b[j] = nb;
        g.noalias() += delta * s.col(j);
      }
    }
    g = s * b - pr.c; // drop accumulated round-off
    const double obj = pr.objective(b);
    if (obj > prev + 1e-12 * std::max(1.0, std::abs(prev))) out.monotone = false;
    prev = obj;
    if (opt.track_objective) out.objective_trace.push_back(obj);
    res = detail::kkt_from_gradient(g, b, pr.lambda, pr, nullptr);

    // Once the support settles, try the exact solve on it.
    IndexSet sup = support(b);
    if (res > opt.tol && sup == last_support && sweep - last_polish >= 5) {
      last_polish = sweep;
      if (detail::polish(pr, b, opt.tol)) {
        g = s * b - pr.c;
        prev = pr.objective(b);
        if (opt.track_objective) out.objective_trace.push_back(prev);
        res = detail::kkt_from_gradient(g, b, pr.lambda, pr, nullptr);
      }
    }
    last_support = std::move(sup);
  }
  out.beta_star = b;
  out.kkt_residual = detail::kkt_from_gradient(g, b, pr.lambda, pr, &out.subgradient);
  out.iterations = sweep;
  out.objective = pr.objective(b);
  return out;
}

inline QuadraticL1Problem noiseless_problem(const ProblemInstance& inst) {
  QuadraticL1Problem pr;
  pr.sigma = &inst.gram.matrix();
  pr.c = inst.gram.matrix() * inst.beta0;
  pr.offset = inst.gram.quad(inst.beta0);
  pr.lambda = inst.lambda;
  return pr;
}

inline double prediction_error(const GramMatrix& gram, const Vector& beta0, const Vector& beta) {
  return gram.quad(beta - beta0);
}

inline double penalized_error(const GramMatrix& gram, const Vector& beta0, double lambda,
                              const Vector& beta) {
  return prediction_error(gram, beta0, beta) +
         2.0 * lambda * l1_norm_on(beta, complement(support(beta0), gram.p()));
}

inline double lasso_objective(const ProblemInstance& inst, const Vector& beta) {
  return prediction_error(inst.gram, inst.beta0, beta) + 2.0 * inst.lambda * beta.lpNorm<1>();
}

inline LassoSolution solve_noiseless(const ProblemInstance& inst, const SolverOptions& opt = {}) {
  const QuadraticL1Problem pr = noiseless_problem(inst);
  LassoSolution sol = coordinate_descent(pr, opt);
  sol.prediction_error = prediction_error(inst.gram, inst.beta0, sol.beta_star);
  sol.penalized_value = penalized_error(inst.gram, inst.beta0, inst.lambda, sol.beta_star);
  return sol;
}

/// Lasso with data: minimize |y - X b|^2 + 2 lambda |b|_1.
inline LassoSolution solve_noisy(const DesignFactor& factor, const Vector& y, double lambda,
                                 const SolverOptions& opt = {}) {
  if (y.size() != factor.n)
    throw Error("y has " + std::to_string(y.size()) + " entries, expected n = " +
                std::to_string(factor.n));
  const Matrix sigma = factor.gram();
  QuadraticL1Problem pr;
  pr.sigma = &sigma;
  pr.c = factor.columns.transpose() * y;
  pr.offset = y.squaredNorm();
  pr.lambda = lambda;
  LassoSolution sol = coordinate_descent(pr, opt);
  sol.prediction_error = std::numeric_limits<double>::quiet_NaN();
  sol.penalized_value = std::numeric_limits<double>::quiet_NaN();
  return sol;
}

/// min over admissible z of |Sigma (b - beta0) + lambda z|_inf.
inline double kkt_residual(const GramMatrix& gram, const Vector& beta0, double lambda,
                           const Vector& beta) {
  QuadraticL1Problem pr;
  pr.sigma = &gram.matrix();
  pr.c = gram.matrix() * beta0;
  pr.lambda = lambda;
  const Vector g = gram.matrix() * (beta - beta0);
  return detail::kkt_from_gradient(g, beta, lambda, pr, nullptr);
}

struct UniquenessVerdict {
  bool unique = true;
  std::vector<Vector> solutions; // one per start
  std::optional<std::pair<Vector, Vector>> witnesses;
  double objective_gap = 0.0;    // |L(w1) - L(w2)|
  double separation = 0.0;       // |w1 - w2|_inf
};

namespace detail {

/// Moves along null directions of Sigma restricted to the equicorrelation set
/// as far as sign consistency allows. Such moves keep X b and the l1 norm, so
/// any nonzero step is a second minimizer.
inline std::optional<Vector> null_space_walk(const ProblemInstance& inst, const Vector& b,
                                             const Vector& z) {
  const int p = inst.p();
  IndexSet e;
  for (int j = 0; j < p; ++j)
    if (std::abs(z[j]) >= 1.0 - 1e-8) e.push_back(j);
  if (e.empty()) return std::nullopt;
  const int k = static_cast<int>(e.size());
  Matrix see(k, k);
  for (int i = 0; i < k; ++i)
    for (int l = 0; l < k; ++l) see(i, l) = inst.gram(e[i], e[l]);
  const SpectralDecomposition sd = spectral_decomposition(see);
  const double cut = 1e-10 * std::max(1.0, sd.eigenvalues(0));
  for (int i = 0; i < k; ++i) {
    if (sd.eigenvalues(i) > cut) continue;
    const Vector d = sd.eigenvectors.col(i);
    // z^T d must vanish for the penalty to stay constant.
    double zd = 0.0;
    for (int l = 0; l < k; ++l) zd += z[e[l]] * d[l];
    if (std::abs(zd) > 1e-8) continue;
    for (double dir : {1.0, -1.0}) {
      double tmax = kInf;
      for (int l = 0; l < k; ++l) {
        const double dl = dir * d[l], bj = b[e[l]], zj = sign(z[e[l]]);
        if (std::abs(dl) < 1e-14) continue;
        // need zj * (bj + t dl) >= 0
        if (zj * dl < 0.0) tmax = std::min(tmax, zj * bj / (-zj * dl));
      }
      if (!std::isfinite(tmax) || tmax * d.lpNorm<Eigen::Infinity>() <= 1e-6) continue;
      Vector w = b;
      for (int l = 0; l < k; ++l) w[e[l]] += tmax * dir * d[l];
      for (int l = 0; l < k; ++l)
        if (sign(w[e[l]]) == -sign(z[e[l]])) w[e[l]] = 0.0;
      return w;
    }
  }
  return std::nullopt;
}

} // namespace detail

/// Solves from at least 8 deterministic starts (zero, beta0, +-e_j, seeded
/// random) and walks the null space at the first solution.
inline UniquenessVerdict uniqueness_probe(const ProblemInstance& inst, double tol = 1e-10) {
  const int p = inst.p();
  std::vector<Vector> starts{Vector::Zero(p), inst.beta0};
  for (int j = 0; j < p && starts.size() < 2 + 2 * 8; ++j) {
    starts.push_back(Vector::Unit(p, j));
    starts.push_back(-Vector::Unit(p, j));
  }
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double scale = std::max(1.0, inst.beta0.lpNorm<Eigen::Infinity>());
  const std::size_t wanted = std::max<std::size_t>(8, starts.size() + 2);
  while (starts.size() < wanted) {
    Vector v(p);
    for (int j = 0; j < p; ++j) v[j] = scale * nd(rng);
    starts.push_back(v);
  }

  UniquenessVerdict out;
  SolverOptions opt;
  opt.tol = tol;
  std::vector<double> objs;
  Vector z0;
  for (const Vector& s : starts) {
    opt.start = s;
    LassoSolution sol = solve_noiseless(inst, opt);
    if (out.solutions.empty()) z0 = sol.subgradient;
    out.solutions.push_back(sol.beta_star);
    objs.push_back(sol.objective);
  }

  auto consider = [&](const Vector& a, const Vector& b) {
    const double sep = (a - b).lpNorm<Eigen::Infinity>();
    if (sep <= 1e-6) return false;
    const double gap = std::abs(lasso_objective(inst, a) - lasso_objective(inst, b));
    if (gap > 1e-10) return false;
    out.unique = false;
    out.witnesses = std::make_pair(a, b);
    out.objective_gap = gap;
    out.separation = sep;
    return true;
  };

  for (std::size_t i = 1; i < out.solutions.size(); ++i)
    if (consider(out.solutions[0], out.solutions[i])) return out;
  if (auto w = detail::null_space_walk(inst, out.solutions[0], z0))
    if (consider(out.solutions[0], *w)) return out;

  for (std::size_t i = 1; i < out.solutions.size(); ++i)
    out.separation =
        std::max(out.separation, (out.solutions[0] - out.solutions[i]).lpNorm<Eigen::Infinity>());
  return out;
}

} // namespace lassocompat
