#pragma once

#include "lassocompat/core.hpp"
#include "lassocompat/designs.hpp"
#include "lassocompat/projections.hpp"
#include "lassocompat/solver.hpp"

#include <map>
#include <optional>
#include <string>

namespace lassocompat {

struct FamilyConstants {
  IndexSet s0;
  double phi2_s0 = 0.0;    // compatibility constant of S0
  double gamma2_s0 = 0.0;  // effective sparsity |S0| / phi2_s0 (kInf when phi2_s0 = 0)
  std::vector<double> varphi2;
  std::vector<double> tau2;
  double tau_inv_l1 = 0.0; // sum_k 1/tau_k^2 over the inactive parts
  std::optional<double> psi2;
  std::map<std::string, double> named; // family-specific extras (phi2_1, phi2_evens, ...)
};

/// beta_star + t * direction is a minimizer for every t in [0, t_max].
struct SolutionSegment {
  Vector direction;
  double t_max = 0.0;
  double max_penalized_error = 0.0;
};

/// A vector displayed as the minimizer in the source derivation that does not
/// satisfy the KKT conditions; kept for comparison.
struct DisplayedClaim {
  Vector beta;
  double prediction_error = 0.0;
  double penalized_error = 0.0;
  double kkt_residual = 0.0;
};

struct OracleSolution {
  Vector beta_star;
  std::string case_id;
  double prediction_error = 0.0;
  double penalized_error = 0.0;
  bool applicable = false;
  std::string reason;
  FamilyConstants constants;
  std::optional<SolutionSegment> segment;
  std::optional<DisplayedClaim> displayed_claim;
};

namespace detail {

inline double inv_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += 1.0 / x;
  return s;
}

/// Squared distance from v to the unit l1 ball.
inline double dist2_l1_ball(const Vector& v) {
  return (v - project_l1_ball(v, 1.0)).squaredNorm();
}

} // namespace detail

inline FamilyConstants closed_form_family_constants(const DesignSpec& spec) {
  if (spec.family == Family::Custom)
    throw UnsupportedFamily("no closed forms for a custom Gram matrix");
  const DerivedParams d = derive(spec);
  FamilyConstants fc;
  fc.s0 = family_active_set(spec);
  fc.varphi2 = d.varphi2;
  const double s0 = static_cast<double>(fc.s0.size());
  auto from_gamma = [&](double gamma2) {
    fc.gamma2_s0 = gamma2;
    fc.phi2_s0 = s0 / gamma2;
  };
  auto from_phi = [&](double phi2) {
    fc.phi2_s0 = phi2;
    fc.gamma2_s0 = phi2 > 0.0 ? s0 / phi2 : kInf;
  };

  switch (spec.family) {
  case Family::TwoVar: {
    const double f = d.varphi2[0], r = d.rho[0];
    from_phi(f);
    fc.named["phi2_1"] = 1.0 - r * r;
    fc.named["lambda_min"] = f;
    break;
  }
  case Family::PairBlocks:
  case Family::PairBlocksPlusOrthogonal: {
    const double n = static_cast<double>(d.rho.size());
    from_phi(n / detail::inv_sum(d.varphi2));
    double evens = 0.0, lmin = kInf;
    for (std::size_t k = 0; k < d.rho.size(); ++k) {
      evens += 1.0 / (1.0 - d.rho[k] * d.rho[k]);
      lmin = std::min(lmin, d.varphi2[k]);
    }
    if (spec.family == Family::PairBlocksPlusOrthogonal && spec.params.m0 > 0)
      lmin = std::min(lmin, 1.0);
    fc.named["phi2_evens"] = n / evens;
    fc.named["lambda_min"] = lmin;
    break;
  }
  case Family::ParentChildSingle: {
    const double f = d.varphi2[0], t = d.tau2[0], c = d.c[0];
    fc.tau2 = d.tau2;
    fc.tau_inv_l1 = 1.0 / t;
    fc.phi2_s0 = f * t;
    fc.gamma2_s0 = 2.0 / f + c * c / t;
    break;
  }
  case Family::ParentChildMany: {
    const double f = d.varphi2[0];
    fc.tau2 = d.tau2;
    double g = 2.0 / f;
    for (std::size_t k = 0; k < d.c.size(); ++k) {
      g += d.c[k] * d.c[k] / d.tau2[k];
      fc.tau_inv_l1 += 1.0 / d.tau2[k];
    }
    from_gamma(g);
    break;
  }
  case Family::ParentChildBlock2N: {
    const double t = d.tau2[0], c = d.c[0];
    fc.tau2 = d.tau2;
    fc.tau_inv_l1 = 1.0 / t;
    from_gamma(2.0 * detail::inv_sum(d.varphi2) + c * c / t);
    break;
  }
  case Family::GoodComp: {
    const double f = d.varphi2[0], t = d.tau2[0], c = d.c[0];
    fc.tau2 = d.tau2;
    fc.tau_inv_l1 = 1.0 / t;
    fc.phi2_s0 = f * t / (c * c * f / 2.0 + t);
    fc.gamma2_s0 = 2.0 / f + c * c / t;
    break;
  }
  case Family::GoodLasso2:
  case Family::GoodLasso3:
    from_phi(0.0);
    break;
  case Family::BlockGoodComp2N: {
    fc.tau2 = d.tau2;
    double g = 0.0;
    for (std::size_t k = 0; k < d.rho.size(); ++k) {
      g += 2.0 / d.varphi2[k] + d.c[k] * d.c[k] / d.tau2[k];
      fc.tau_inv_l1 += 1.0 / d.tau2[k];
    }
    from_gamma(g);
    break;
  }
  case Family::ChildParentGamma: {
    const double g3 = d.gamma[0], g4 = d.gamma[1], th = d.theta;
    from_phi(0.0);
    fc.psi2 = d.psi2;
    fc.named["varrho3"] = g3 - g4 * th;
    fc.named["varrho4"] = g4 - g3 * th;
    fc.named["varphi2"] = 2.0 * (1.0 - 4.0 * g3 * g4) + 4.0 * g3 * g4 * d.psi2;
    break;
  }
  case Family::ChildParentSym: {
    const double c = d.c[0];
    fc.psi2 = d.psi2;
    from_phi((c - 1.0) * (c - 1.0) * d.psi2);
    fc.named["varphi2"] = c * c * d.psi2;
    break;
  }
  case Family::ChildParentOrthoInactive: {
    const double c = d.c[0];
    Vector g(d.gamma.size());
    for (std::size_t j = 0; j < d.gamma.size(); ++j) g[j] = d.gamma[j];
    from_phi(2.0 * detail::dist2_l1_ball(c * g));
    fc.named["varphi2"] = 2.0 * c * c * g.squaredNorm();
    break;
  }
  case Family::Custom: break;
  }
  return fc;
}

namespace detail {

struct PairSolution {
  double a = 0.0, b = 0.0; // beta* on the pair
  int case_no = 0;
  double prediction = 0.0;
};

/// Exact Lasso on a pair with inner product -rho and b0_a >= b0_b >= 0.
/// Boundaries resolve to the lower-numbered case.
inline PairSolution pair_exact(double b1, double b2, double rho, double lambda) {
  const double f = 1.0 - rho;
  const double t = lambda / f;
  PairSolution s;
  if (t <= b2) {
    s = {b1 - t, b2 - t, 1, 2.0 * lambda * lambda / f};
  } else if (t <= b2 + (b1 - b2) / f) {
    s = {b1 - rho * b2 - lambda, 0.0, 2, f * (2.0 - f) * b2 * b2 + lambda * lambda};
  } else {
    s = {0.0, 0.0, 3, b1 * b1 + b2 * b2 - 2.0 * rho * b1 * b2};
  }
  return s;
}

/// Orders a nonnegative pair so that the first entry is the larger one and
/// writes the pair solution back in the original order. Handles a pair with
/// both entries nonpositive by global sign symmetry.
inline std::optional<PairSolution> pair_any_order(double x1, double x2, double rho, double lambda,
                                                  bool& swapped, double& flip) {
  flip = 1.0;
  if (x1 <= 0.0 && x2 <= 0.0 && (x1 < 0.0 || x2 < 0.0)) {
    flip = -1.0;
    x1 = -x1;
    x2 = -x2;
  }
  if (x1 < 0.0 || x2 < 0.0) return std::nullopt;
  swapped = x2 > x1;
  PairSolution s = swapped ? pair_exact(x2, x1, rho, lambda) : pair_exact(x1, x2, rho, lambda);
  if (swapped) std::swap(s.a, s.b);
  s.a *= flip;
  s.b *= flip;
  return s;
}

inline bool zero_outside(const Vector& beta0, const IndexSet& s0) {
  const IndexSet rest = complement(s0, static_cast<int>(beta0.size()));
  for (int j : rest)
    if (beta0[j] != 0.0) return false;
  return true;
}

} // namespace detail

/// Closed-form minimizer of the noiseless Lasso for a design family.
inline OracleSolution closed_form(const DesignSpec& spec, const Vector& beta0, double lambda) {
  if (spec.family == Family::Custom)
    throw UnsupportedFamily("no closed forms for a custom Gram matrix");
  const DerivedParams d = derive(spec);
  const int p = design_dimension(spec);
  if (beta0.size() != p)
    throw Error("beta0 has " + std::to_string(beta0.size()) + " entries, expected " +
                std::to_string(p));
  if (!(lambda >= 0.0)) throw Error("lambda must be non-negative");

  OracleSolution out;
  out.constants = closed_form_family_constants(spec);
  out.beta_star = Vector::Zero(p);
  const IndexSet s0 = out.constants.s0;
  const double lam2 = lambda * lambda;

  auto not_applicable = [&](std::string why) {
    out.applicable = false;
    out.reason = std::move(why);
    return out;
  };
  auto finish = [&](double pred) {
    out.applicable = true;
    out.prediction_error = pred;
    const IndexSet outside = complement(support(beta0), p);
    out.penalized_error = pred + 2.0 * lambda * l1_norm_on(out.beta_star, outside);
    return out;
  };
  if (spec.family != Family::PairBlocksPlusOrthogonal && !detail::zero_outside(beta0, s0))
    return not_applicable("beta0 must vanish outside " + format_set(s0));

  // Families whose active pair must satisfy b1, b2 >= threshold; returns the
  // index order (hi, lo).
  auto ordered = [&](int i, int j, double threshold) -> std::optional<std::pair<int, int>> {
    const double lo = std::min(beta0[i], beta0[j]);
    if (!(lo >= threshold)) {
      out.reason = "min(beta0_" + std::to_string(i + 1) + ", beta0_" + std::to_string(j + 1) +
                   ") = " + detail::fmt(lo) + " < " + detail::fmt(threshold);
      return std::nullopt;
    }
    return beta0[i] >= beta0[j] ? std::make_pair(i, j) : std::make_pair(j, i);
  };

  switch (spec.family) {
  case Family::TwoVar:
  case Family::PairBlocks:
  case Family::PairBlocksPlusOrthogonal: {
    double pred = 0.0;
    for (std::size_t k = 0; k < d.rho.size(); ++k) {
      const int a = 2 * static_cast<int>(k), b = a + 1;
      bool swapped = false;
      double flip = 1.0;
      const auto s = detail::pair_any_order(beta0[a], beta0[b], d.rho[k], lambda, swapped, flip);
      if (!s)
        return not_applicable("pair " + format_set({a, b}) + " has entries of opposite sign");
      out.beta_star[a] = s->a;
      out.beta_star[b] = s->b;
      pred += s->prediction;
      if (!out.case_id.empty()) out.case_id += ",";
      out.case_id += "case" + std::to_string(s->case_no);
    }
    for (int j = 2 * static_cast<int>(d.rho.size()); j < p; ++j) {
      out.beta_star[j] = soft_threshold(beta0[j], lambda);
      const double r = beta0[j] - out.beta_star[j];
      pred += r * r;
    }
    return finish(pred);
  }

  case Family::ParentChildSingle:
  case Family::ParentChildMany: {
    const double f = d.varphi2[0];
    double delta = lambda / f, pred = 2.0 * lam2 / f;
    for (std::size_t k = 0; k < d.c.size(); ++k) {
      const double bk = lambda * (d.c[k] - 1.0) / d.tau2[k];
      out.beta_star[2 + k] = bk;
      delta += d.c[k] * bk / 2.0;
      pred += lam2 * (d.c[k] - 1.0) * (d.c[k] - 1.0) / d.tau2[k];
    }
    if (!ordered(0, 1, delta)) return not_applicable(out.reason);
    out.beta_star[0] = beta0[0] - delta;
    out.beta_star[1] = beta0[1] - delta;
    out.case_id = "all-active";
    return finish(pred);
  }

  case Family::ParentChildBlock2N: {
    const int n = static_cast<int>(d.rho.size());
    const double s0n = 2.0 * n, c = d.c[0], t = d.tau2[0];
    const double b = lambda * (c - 1.0) / t;
    for (int k = 0; k < n; ++k) {
      const double delta = lambda / d.varphi2[k] + c * b / s0n;
      if (!ordered(2 * k, 2 * k + 1, delta)) return not_applicable(out.reason);
      out.beta_star[2 * k] = beta0[2 * k] - delta;
      out.beta_star[2 * k + 1] = beta0[2 * k + 1] - delta;
    }
    out.beta_star[2 * n] = b;
    out.case_id = "all-active";
    return finish(2.0 * lam2 * detail::inv_sum(d.varphi2) + lam2 * (c - 1.0) * (c - 1.0) / t);
  }

  case Family::GoodComp:
  case Family::BlockGoodComp2N: {
    const int n = static_cast<int>(d.rho.size());
    double pred = 0.0;
    for (int k = 0; k < n; ++k) {
      const double c = d.c[k], t = d.tau2[k], f = d.varphi2[k];
      const double b = lambda * (c - 1.0) / (2.0 * t);
      const double delta = lambda / f + c * b;
      if (!ordered(2 * k, 2 * k + 1, delta)) return not_applicable(out.reason);
      const int u = n == 1 ? 2 : 2 * n + 2 * k;
      out.beta_star[2 * k] = beta0[2 * k] - delta;
      out.beta_star[2 * k + 1] = beta0[2 * k + 1] - delta;
      out.beta_star[u] = out.beta_star[u + 1] = b;
      pred += 2.0 * lam2 / f + lam2 * (c - 1.0) * (c - 1.0) / t;
    }
    out.case_id = "all-active";
    return finish(pred);
  }

  case Family::GoodLasso2: {
    const double c = d.c[0], f = d.varphi2[0], rho = d.rho[0];
    if (beta0[0] < 0.0 || beta0[1] < 0.0)
      return not_applicable("beta0 on {1,2} must be nonnegative");
    const int hi = beta0[0] >= beta0[1] ? 0 : 1, lo = 1 - hi;
    const double u = beta0[hi], v = beta0[lo];
    const double big_d = 2.0 * lambda * (1.0 - 1.0 / c) / (1.0 + rho);
    const double base = 2.0 * lam2 / (c * c * f);
    double b = 0.0, pred = 0.0;
    if (u - v > big_d) {
      b = (2.0 * v + big_d - 2.0 * lambda / (c * f)) / (2.0 * c);
      out.beta_star[hi] = u - v - big_d;
      pred = base + 2.0 * lam2 * (1.0 - 1.0 / c) * (1.0 - 1.0 / c) / (1.0 + rho);
      out.case_id = "regime-b";
    } else {
      b = (u + v - 2.0 * lambda / (c * f)) / (2.0 * c);
      pred = base + (1.0 + rho) * (u - v) * (u - v) / 2.0;
      out.case_id = "regime-a";
    }
    if (b >= 0.0) {
      out.beta_star[2] = out.beta_star[3] = b;
    } else {
      // Inactive pair stays at zero: the two-variable solution, provided the
      // inactive subgradient C (z1 + z2)/2 stays in [-1, 1].
      out.beta_star.setZero();
      const auto s = detail::pair_exact(u, v, rho, lambda);
      out.beta_star[hi] = s.a;
      out.beta_star[lo] = s.b;
      const double dsum = (s.a - u) + (s.b - v);
      const double z3 = -(c * f / 2.0) * dsum / lambda;
      if (lambda == 0.0 || std::abs(z3) > 1.0)
        return not_applicable("inactive subgradient C(z1+z2)/2 = " + detail::fmt(z3) +
                              " outside [-1,1]");
      pred = s.prediction;
      out.case_id = "inactive-zero,case" + std::to_string(s.case_no);
    }
    finish(pred);
    if (v >= lambda / f) {
      DisplayedClaim claim;
      claim.beta = Vector::Zero(4);
      claim.beta[hi] = u - v;
      claim.beta[2] = claim.beta[3] = (v - lambda / f) / c;
      claim.prediction_error = 2.0 * lam2 / f;
      claim.penalized_error = 4.0 * lambda * v / c - (2.0 * lam2 / f) * (2.0 / c - 1.0);
      claim.kkt_residual = kkt_residual(build_gram(spec), beta0, lambda, claim.beta);
      out.displayed_claim = claim;
    }
    return out;
  }

  case Family::GoodLasso3: {
    const double f = d.varphi2[0];
    const auto ord = ordered(0, 1, lambda / f);
    if (!ord) return not_applicable(out.reason);
    out.beta_star[0] = beta0[0] - lambda / f;
    out.beta_star[1] = beta0[1] - lambda / f;
    out.case_id = "segment-start";
    const double v = beta0[ord->second];
    SolutionSegment seg;
    seg.direction = Vector{{-1.0, -1.0, 1.0, 1.0}};
    seg.t_max = v - lambda / f;
    seg.max_penalized_error = 4.0 * lambda * v - 2.0 * lam2 / f;
    out.segment = seg;
    return finish(2.0 * lam2 / f);
  }

  case Family::ChildParentGamma: {
    const double g3 = d.gamma[0], g4 = d.gamma[1], psi2 = d.psi2;
    if (beta0[0] < 0.0 || beta0[1] < 0.0)
      return not_applicable("beta0 on {1,2} must be nonnegative");
    const int hi = beta0[0] >= beta0[1] ? 0 : 1, lo = 1 - hi;
    const double u = beta0[hi], v = beta0[lo];
    if (!(2.0 * g4 * v >= lambda / psi2))
      return not_applicable("2 gamma_4 beta0_lo = " + detail::fmt(2.0 * g4 * v) + " < " +
                            detail::fmt(lambda / psi2));
    out.beta_star[hi] = u - v;
    out.beta_star[2] = 2.0 * g3 * v - lambda / psi2;
    out.beta_star[3] = 2.0 * g4 * v - lambda / psi2;
    out.case_id = "segment-start";
    SolutionSegment seg;
    seg.direction = Vector{{1.0, 1.0, -2.0 * g3, -2.0 * g4}};
    seg.t_max = std::min(out.beta_star[2] / (2.0 * g3), out.beta_star[3] / (2.0 * g4));
    seg.max_penalized_error = 4.0 * lambda * v - 2.0 * lam2 / psi2;
    out.segment = seg;
    return finish(2.0 * lam2 / psi2);
  }

  case Family::ChildParentSym:
  case Family::ChildParentOrthoInactive: {
    const double f = d.varphi2[0];
    if (!ordered(0, 1, lambda / f)) return not_applicable(out.reason);
    out.beta_star[0] = beta0[0] - lambda / f;
    out.beta_star[1] = beta0[1] - lambda / f;
    out.case_id = "no-false-positives";
    return finish(2.0 * lam2 / f);
  }

  case Family::Custom: break;
  }
  return out;
}

} // namespace lassocompat
