#pragma once

#include "lassocompat/compat.hpp"
#include "lassocompat/core.hpp"
#include "lassocompat/oracle.hpp"
#include "lassocompat/solver.hpp"

#include <map>
#include <optional>

namespace lassocompat {

struct BoundOptions {
  /// All 2^p subsets are candidates up to this p; beyond it the list is
  /// {empty, S0, singletons, subsets of S0}.
  int exhaustive_limit = 10;
  double tol = 1e-10;
  CompatOptions compat;
};

/// Compatibility constants per subset, computed on first use.
class SubsetCompatCache {
public:
  SubsetCompatCache(const GramMatrix& gram, CompatOptions opt) : gram_(gram), opt_(opt) {}

  const CompatReport& get(const IndexSet& s) {
    auto it = cache_.find(s);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(s, compatibility(gram_, s, 1.0, opt_)).first->second;
  }

  /// lambda^2 |S| / phi^2(S) with 0 for the empty set and kInf when phi^2 = 0.
  double compat_term(const IndexSet& s, double lambda) {
    if (s.empty()) return 0.0;
    const CompatReport& r = get(s);
    return r.sparsity_infinite ? kInf : lambda * lambda * r.effective_sparsity;
  }

private:
  const GramMatrix& gram_;
  CompatOptions opt_;
  std::map<IndexSet, CompatReport> cache_;
};

/// Candidate subsets ordered by size, then lexicographically.
inline std::vector<IndexSet> candidate_subsets(int p, const IndexSet& s0, int exhaustive_limit) {
  std::vector<IndexSet> out;
  if (p <= exhaustive_limit) {
    for (unsigned long mask = 0; mask < (1ul << p); ++mask) {
      IndexSet s;
      for (int j = 0; j < p; ++j)
        if (mask & (1ul << j)) s.push_back(j);
      out.push_back(s);
    }
  } else {
    out.push_back({});
    out.push_back(s0);
    for (int j = 0; j < p; ++j) out.push_back({j});
    if (s0.size() <= 12) {
      for (unsigned long mask = 1; mask < (1ul << s0.size()); ++mask) {
        IndexSet s;
        for (std::size_t i = 0; i < s0.size(); ++i)
          if (mask & (1ul << i)) s.push_back(s0[i]);
        out.push_back(s);
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const IndexSet& a, const IndexSet& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct SetBound {
  double value = kInf;
  IndexSet set;
};

inline double basic_bound_l1(const ProblemInstance& inst) {
  return inst.lambda * inst.beta0.lpNorm<1>();
}

/// lambda^2 s0 / phi^2(S0); 0 for beta0 = 0, kInf when phi^2(S0) = 0.
inline double basic_bound_compat(const ProblemInstance& inst, const CompatReport& compat_s0) {
  if (compat_s0.set.empty()) return 0.0;
  if (compat_s0.sparsity_infinite) return kInf;
  return inst.lambda * inst.lambda * compat_s0.effective_sparsity;
}

inline double bound_u1(const ProblemInstance& inst, const CompatReport& compat_s0) {
  if (compat_s0.set != inst.active_set())
    throw Error("compatibility report is for " + format_set(compat_s0.set) + ", not S0 = " +
                format_set(inst.active_set()));
  return std::min(basic_bound_compat(inst, compat_s0), basic_bound_l1(inst));
}

namespace detail {

inline double u2_term(double compat_term, double lambda, double l1_out) {
  if (!std::isfinite(compat_term)) return kInf;
  const double a = compat_term / 4.0;
  const double r = std::sqrt(a) + std::sqrt(a + lambda * l1_out);
  return std::max(r * r, 2.0 * lambda * l1_out);
}

inline void keep_min(SetBound& best, double v, const IndexSet& s) {
  const bool better = std::isinf(best.value)
                          ? v < best.value
                          : v < best.value - 1e-15 * std::max(1.0, std::abs(best.value));
  if (better) {
    best.value = v;
    best.set = s;
  }
}

} // namespace detail

inline SetBound bound_u2(const ProblemInstance& inst, SubsetCompatCache& cache,
                         const BoundOptions& opt = {}) {
  SetBound best;
  const int p = inst.p();
  for (const IndexSet& s : candidate_subsets(p, inst.active_set(), opt.exhaustive_limit)) {
    const double out = l1_norm_on(inst.beta0, complement(s, p));
    detail::keep_min(best, detail::u2_term(cache.compat_term(s, inst.lambda), inst.lambda, out), s);
  }
  return best;
}

inline SetBound bound_u2(const ProblemInstance& inst, const BoundOptions& opt = {}) {
  SubsetCompatCache cache(inst.gram, opt.compat);
  return bound_u2(inst, cache, opt);
}

/// The three per-set candidates for the inner minimum over beta.
struct U3Parts {
  double at_beta0 = kInf;   // beta = beta0
  double projection = kInf; // beta = b_S, the projection coefficients
  double weighted = kInf;   // beta from the Lasso penalizing only -S
  double best() const { return std::min({at_beta0, projection, weighted}); }
};

/// Upper approximation of the inner minimum for one set S.
inline U3Parts u3_parts(const ProblemInstance& inst, const IndexSet& s, double compat_term,
                        double tol = 1e-10) {
  U3Parts out;
  if (!std::isfinite(compat_term)) return out;
  const int p = inst.p();
  const double lam = inst.lambda;
  const IndexSet rest = complement(s, p);
  auto branch = [&](const Vector& beta) {
    const double l1 = l1_norm_on(beta, rest);
    return std::max(prediction_error(inst.gram, inst.beta0, beta) + compat_term + 2.0 * lam * l1,
                    4.0 * lam * l1);
  };
  out.at_beta0 = branch(inst.beta0);

  // b_S solves Sigma_SS b = (Sigma beta0)_S (minimum-norm when singular).
  Vector b = Vector::Zero(p);
  if (!s.empty()) {
    const int k = static_cast<int>(s.size());
    Matrix sss(k, k);
    Vector rhs(k);
    const Vector sb0 = inst.gram.matrix() * inst.beta0;
    for (int a = 0; a < k; ++a) {
      rhs[a] = sb0[s[a]];
      for (int c = 0; c < k; ++c) sss(a, c) = inst.gram(s[a], s[c]);
    }
    const Vector sol = Eigen::CompleteOrthogonalDecomposition<Matrix>(sss).solve(rhs);
    for (int a = 0; a < k; ++a) b[s[a]] = sol[a];
  }
  out.projection = prediction_error(inst.gram, inst.beta0, b) + compat_term;

  QuadraticL1Problem pr = noiseless_problem(inst);
  pr.weights = Vector::Ones(p);
  for (int j : s) pr.weights[j] = 0.0;
  try {
    SolverOptions so;
    so.tol = tol;
    so.max_iter = 100000;
    so.start = b;
    out.weighted = branch(coordinate_descent(pr, so).beta_star);
  } catch (const NonConvergence&) {
    // the other two candidates remain valid upper approximations
  }
  return out;
}

inline SetBound bound_u3(const ProblemInstance& inst, SubsetCompatCache& cache,
                         const BoundOptions& opt = {}) {
  SetBound best;
  for (const IndexSet& s : candidate_subsets(inst.p(), inst.active_set(), opt.exhaustive_limit))
    detail::keep_min(best, u3_parts(inst, s, cache.compat_term(s, inst.lambda), opt.tol).best(), s);
  return best;
}

inline SetBound bound_u3(const ProblemInstance& inst, const BoundOptions& opt = {}) {
  SubsetCompatCache cache(inst.gram, opt.compat);
  return bound_u3(inst, cache, opt);
}

struct BoundReport {
  double u1 = 0.0, u2 = 0.0, u3 = 0.0;
  IndexSet u2_argmin_set, u3_argmin_set;
  bool u3_relaxed = true;
  double exact_prediction_error = 0.0;
  double exact_penalized_error = 0.0;
  double basic_bound_l1 = 0.0;
  double basic_bound_compat = 0.0; // lambda^2 Gamma^2(S0)
  double phi2_s0 = 0.0;
  double gap_u1 = 0.0, gap_u2 = 0.0, gap_u3 = 0.0; // bound / exact prediction error
  double gap_compat_penalized = 0.0;               // lambda^2 Gamma^2(S0) / exact penalized
  bool exact_is_zero = false;
  LassoSolution solution;
  std::optional<OracleSolution> oracle;
  double oracle_discrepancy = 0.0; // |solver - oracle| on the prediction error
};

inline double safe_ratio(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 1.0 : kInf;
  return num / den;
}

/// Exact errors from the solver, all bounds, and bound/exact ratios. With a
/// family spec the oracle is evaluated too.
inline BoundReport gap_report(const ProblemInstance& inst, const std::optional<DesignSpec>& spec = {},
                              const BoundOptions& opt = {}) {
  BoundReport rep;
  SolverOptions so;
  so.tol = opt.tol;
  rep.solution = solve_noiseless(inst, so);
  rep.exact_prediction_error = rep.solution.prediction_error;
  rep.exact_penalized_error = rep.solution.penalized_value;

  SubsetCompatCache cache(inst.gram, opt.compat);
  const IndexSet s0 = inst.active_set();
  const CompatReport& c0 = cache.get(s0);
  rep.phi2_s0 = c0.value;
  rep.basic_bound_l1 = basic_bound_l1(inst);
  rep.basic_bound_compat = basic_bound_compat(inst, c0);
  rep.u1 = bound_u1(inst, c0);
  const SetBound b2 = bound_u2(inst, cache, opt);
  const SetBound b3 = bound_u3(inst, cache, opt);
  rep.u2 = b2.value;
  rep.u2_argmin_set = b2.set;
  rep.u3 = b3.value;
  rep.u3_argmin_set = b3.set;

  rep.exact_is_zero = rep.exact_prediction_error == 0.0;
  rep.gap_u1 = safe_ratio(rep.u1, rep.exact_prediction_error);
  rep.gap_u2 = safe_ratio(rep.u2, rep.exact_prediction_error);
  rep.gap_u3 = safe_ratio(rep.u3, rep.exact_prediction_error);
  rep.gap_compat_penalized = safe_ratio(rep.basic_bound_compat, rep.exact_penalized_error);

  if (spec && spec->family != Family::Custom) {
    OracleSolution o = closed_form(*spec, inst.beta0, inst.lambda);
    if (o.applicable)
      rep.oracle_discrepancy = std::abs(o.prediction_error - rep.exact_prediction_error);
    rep.oracle = std::move(o);
  }
  return rep;
}

} // namespace lassocompat
