#pragma once

#include "lassocompat/core.hpp"
#include "lassocompat/gram.hpp"
#include "lassocompat/projections.hpp"

#include <Eigen/QR>

#include <numbers>
#include <optional>
#include <random>

namespace lassocompat {

inline constexpr std::size_t kMaxCompatSet = 16;
inline constexpr std::size_t kMaxRestrictedEigenSet = 12;
inline constexpr double kZeroCompat = 1e-10;

/// Exact: closed form (full set or |S| = 1). GridChecked: multi-start value
/// confirmed by a dense grid. UpperBound: multi-start only.
enum class EigenStatus { Exact, GridChecked, UpperBound };

inline const char* to_string(EigenStatus s) {
  switch (s) {
  case EigenStatus::Exact: return "exact";
  case EigenStatus::GridChecked: return "grid-checked";
  case EigenStatus::UpperBound: return "upper-bound";
  }
  return "?";
}

struct CompatOptions {
  double stationarity = 1e-11;
  long max_iter = 20000;
  int restarts = 3; // extra randomized runs, only used when a run fails to certify
  bool restricted_eigenvalue = false;
};

struct CompatReport {
  IndexSet set;
  double stretch = 1.0;
  double value = 0.0;              // phi^2(L, S); 0 when below 1e-10
  double raw_value = 0.0;          // before zero snapping
  Vector minimizer;
  double effective_sparsity = 0.0; // |S| / phi^2; kInf when phi^2 = 0, 0 for empty S
  bool sparsity_infinite = false;
  bool certified = true;           // every orthant reached the stationarity target
  int orthants = 0;
  std::optional<double> restricted_eigenvalue;
  std::optional<EigenStatus> restricted_eigenvalue_status;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

inline std::pair<double, double> extreme_eigenvalues(const GramMatrix& gram) {
  return {gram.lambda_min(), gram.lambda_max()};
}

namespace detail {

inline Vector gather(const Vector& v, const IndexSet& idx) {
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

inline void scatter(Vector& v, const IndexSet& idx, const Vector& part) {
  for (std::size_t i = 0; i < idx.size(); ++i) v[idx[i]] = part[i];
}

/// One sign orthant of the compatibility problem: minimize x^T Sigma x over
/// {s_j x_j >= 0 (j in S), s^T x_S = 1, |x_{-S}|_1 <= L}, a convex set that is
/// a product of a signed simplex and an l1 ball.
class OrthantProblem {
public:
  OrthantProblem(const Matrix& sigma, IndexSet s, IndexSet n, Vector signs, double stretch)
      : sigma_(sigma), s_(std::move(s)), n_(std::move(n)), signs_(std::move(signs)),
        stretch_(stretch) {}

  Vector project(const Vector& x) const {
    Vector out = x;
    scatter(out, s_, project_signed_simplex(gather(x, s_), signs_));
    if (!n_.empty()) scatter(out, n_, project_l1_ball(gather(x, n_), stretch_));
    return out;
  }

  double quad(const Vector& x) const { return x.dot(sigma_ * x); }
  Vector gradient(const Vector& x) const { return 2.0 * (sigma_ * x); }

  double stationarity(const Vector& x, double lip) const {
    const Vector g = 2.0 * (sigma_ * x);
    return lip * (x - project(x - g / lip)).lpNorm<Eigen::Infinity>();
  }

  Vector start() const {
    Vector x = Vector::Zero(sigma_.rows());
    for (std::size_t i = 0; i < s_.size(); ++i) x[s_[i]] = signs_[i] / s_.size();
    return x;
  }

  /// Solves the equality-constrained QP on the faces suggested by x at
  /// several activity thresholds; returns the best feasible candidate.
  std::optional<Vector> polish(const Vector& x) const {
    std::optional<Vector> best;
    double best_val = kInf;
    IndexSet prev_fs{-1}, prev_fn{-1};
    for (double tau : {1e-5, 1e-7, 1e-9, 1e-11}) {
      IndexSet fs;
      for (std::size_t i = 0; i < s_.size(); ++i)
        if (signs_[i] * x[s_[i]] > tau) fs.push_back(static_cast<int>(i));
      IndexSet fn;
      for (int j : n_)
        if (std::abs(x[j]) > tau) fn.push_back(j);
      if (fs.empty() || (fs == prev_fs && fn == prev_fn)) continue;
      prev_fs = fs;
      prev_fn = fn;
      for (int variant = 0; variant < 2; ++variant) {
        const bool boundary = variant == 1;
        if (boundary && fn.empty()) continue;
        if (auto cand = solve_face(x, fs, fn, boundary)) {
          const double v = quad(*cand);
          if (v < best_val) {
            best_val = v;
            best = std::move(cand);
          }
        }
      }
    }
    return best;
  }

private:
  std::optional<Vector> solve_face(const Vector& x, const IndexSet& fs, const IndexSet& fn,
                                   bool boundary) const {
    IndexSet free;
    for (int i : fs) free.push_back(s_[i]);
    const IndexSet& nfree = boundary ? fn : n_;
    free.insert(free.end(), nfree.begin(), nfree.end());
    const int k = static_cast<int>(free.size());
    const int m = boundary ? 2 : 1;
    Matrix kkt = Matrix::Zero(k + m, k + m);
    Vector rhs = Vector::Zero(k + m);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) kkt(a, b) = 2.0 * sigma_(free[a], free[b]);
    for (std::size_t a = 0; a < fs.size(); ++a) kkt(k, a) = kkt(a, k) = signs_[fs[a]];
    rhs[k] = 1.0;
    if (boundary) {
      for (std::size_t a = 0; a < fn.size(); ++a) {
        const int col = static_cast<int>(fs.size() + a);
        kkt(k + 1, col) = kkt(col, k + 1) = sign(x[fn[a]]);
      }
      rhs[k + 1] = stretch_;
    }
    const Vector sol = Eigen::CompleteOrthogonalDecomposition<Matrix>(kkt).solve(rhs);
    if (!sol.allFinite()) return std::nullopt;
    Vector cand = Vector::Zero(sigma_.rows());
    for (int a = 0; a < k; ++a) cand[free[a]] = sol[a];
    if (!repair(cand)) return std::nullopt;
    return cand;
  }

  /// Accepts a candidate only up to round-off infeasibility, then snaps it
  /// onto the feasible set.
  bool repair(Vector& x) const {
    double ssum = 0.0;
    for (std::size_t i = 0; i < s_.size(); ++i) {
      const double v = signs_[i] * x[s_[i]];
      if (v < -1e-12) return false;
      if (v < 0.0) x[s_[i]] = 0.0;
      ssum += std::max(v, 0.0);
    }
    if (std::abs(ssum - 1.0) > 1e-9 || ssum <= 0.0) return false;
    for (int j : s_) x[j] /= ssum;
    if (!n_.empty()) {
      const double n1 = gather(x, n_).lpNorm<1>();
      if (n1 > stretch_ * (1.0 + 1e-9)) return false;
      if (n1 > stretch_)
        for (int j : n_) x[j] *= stretch_ / n1;
    }
    return true;
  }

  const Matrix& sigma_;
  IndexSet s_, n_;
  Vector signs_;
  double stretch_;
};


struct OrthantResult {
  Vector x;
  double quad = 0.0;
  bool certified = false;
};

/// Accelerated projected gradient with adaptive restart, interleaved with
/// face polishing; stops once the gradient mapping is below the target.
inline OrthantResult solve_orthant(const OrthantProblem& pr, double lip, const Vector& x0,
                                   const CompatOptions& opt) {
  OrthantResult out;
  out.x = pr.project(x0);
  out.quad = pr.quad(out.x);
  if (lip <= 0.0) {
    out.certified = true;
    return out;
  }
  auto certify = [&](const Vector& cand) {
    return pr.stationarity(cand, lip) <= opt.stationarity;
  };
  auto polish_and_check = [&]() {
    if (auto cand = pr.polish(out.x)) {
      const double v = pr.quad(*cand);
      if (certify(*cand)) {
        out.x = *cand;
        out.quad = v;
        return true;
      }
      if (v < out.quad) {
        out.x = *cand;
        out.quad = v;
      }
    }
    return certify(out.x);
  };
  if (certify(out.x)) {
    out.certified = true;
    return out;
  }

  Vector x = out.x, y = x;
  double fx = out.quad, t = 1.0;
  long next_polish = 20;
  for (long k = 1; k <= opt.max_iter; ++k) {
    const Vector xn = pr.project(y - pr.gradient(y) / lip);
    const double fn = pr.quad(xn);
    if (fn > fx) {
      y = x;
      t = 1.0;
    } else {
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = xn + ((t - 1.0) / tn) * (xn - x);
      x = xn;
      fx = fn;
      t = tn;
      if (fx < out.quad) {
        out.x = x;
        out.quad = fx;
      }
    }
    if (k >= next_polish || k == opt.max_iter) {
      next_polish *= 2;
      if (polish_and_check() || certify(x)) {
        out.certified = true;
        return out;
      }
    }
  }
  return out;
}

/// Sign vectors on S with the first entry fixed to +1, in the order of the
/// bitmask (bit i set means entry i+1 is negative).
inline Vector orthant_signs(std::size_t size, unsigned long mask) {
  Vector s = Vector::Ones(size);
  for (std::size_t i = 1; i < size; ++i)
    if (mask & (1ul << (i - 1))) s[i] = -1.0;
  return s;
}

} // namespace detail

/// phi^2(L, S) = min |S| b^T Sigma b over |b_S|_1 = 1, |b_{-S}|_1 <= L, by
/// enumerating the 2^{|S|-1} sign patterns of b_S. For S the full set the
/// stretch constraint is vacuous. Ties keep the first sign pattern.
inline CompatReport compatibility(const GramMatrix& gram, IndexSet set, double stretch = 1.0,
                                  const CompatOptions& opt = {}) {
  set = normalize_set(std::move(set));
  const int p = gram.p();
  if (!set.empty() && (set.front() < 0 || set.back() >= p))
    throw Error("index set " + format_set(set) + " out of range for p = " + std::to_string(p));
  if (!(stretch >= 1.0)) throw Error("stretching factor must be at least 1");
  if (set.size() > kMaxCompatSet) throw SetTooLarge(set.size(), kMaxCompatSet);

  CompatReport rep;
  rep.set = set;
  rep.stretch = stretch;
  rep.lambda_min = gram.lambda_min();
  rep.lambda_max = gram.lambda_max();
  rep.minimizer = Vector::Zero(p);
  if (set.empty()) return rep;

  const IndexSet rest = complement(set, p);
  const double lip = 2.0 * gram.lambda_max();
  const std::size_t k = set.size();
  const unsigned long count = 1ul << (k - 1);
  double best = kInf;
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (unsigned long mask = 0; mask < count; ++mask) {
    const Vector signs = detail::orthant_signs(k, mask);
    const detail::OrthantProblem pr(gram.matrix(), set, rest, signs, stretch);
    detail::OrthantResult r = detail::solve_orthant(pr, lip, pr.start(), opt);
    for (int extra = 0; !r.certified && extra < opt.restarts; ++extra) {
      Vector x0(p);
      for (int j = 0; j < p; ++j) x0[j] = nd(rng);
      detail::OrthantResult r2 = detail::solve_orthant(pr, lip, x0, opt);
      if (r2.quad < r.quad || r2.certified) {
        const bool keep_cert = r2.certified || r.certified;
        if (r2.quad < r.quad) r = std::move(r2);
        r.certified = keep_cert;
      }
    }
    rep.certified = rep.certified && r.certified;
    ++rep.orthants;
    if (r.quad < best - 1e-15) {
      best = r.quad;
      rep.minimizer = r.x;
    }
  }
  rep.raw_value = static_cast<double>(k) * std::max(best, 0.0);
  rep.value = rep.raw_value < kZeroCompat ? 0.0 : rep.raw_value;
  if (rep.value == 0.0) {
    rep.effective_sparsity = kInf;
    rep.sparsity_infinite = true;
  } else {
    rep.effective_sparsity = static_cast<double>(k) / rep.value;
  }
  return rep;
}

namespace detail {

struct InnerBall {
  Vector w;
  double value = 0.0;      // full quadratic form at (u, w)
  double multiplier = 0.0; // of the l1 constraint
};

/// min over |w|_1 <= r of (u, w)^T Sigma (u, w), w living on the complement.
inline InnerBall inner_ball_min(const Matrix& sigma, const IndexSet& s, const IndexSet& n,
                                const Vector& u, double r) {
  InnerBall out;
  const int m = static_cast<int>(n.size());
  Matrix snn(m, m), sns(m, s.size());
  Matrix sss(s.size(), s.size());
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) snn(a, b) = sigma(n[a], n[b]);
    for (std::size_t b = 0; b < s.size(); ++b) sns(a, b) = sigma(n[a], s[b]);
  }
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b) sss(a, b) = sigma(s[a], s[b]);
  const Vector lin = sns * u;
  const double base = u.dot(sss * u);
  auto value = [&](const Vector& w) { return base + 2.0 * w.dot(lin) + w.dot(snn * w); };

  if (m == 0) {
    out.w = Vector(0);
    out.value = base;
    return out;
  }
  if (m == 1) {
    const double a = snn(0, 0);
    double w = a > 0.0 ? -lin[0] / a : (lin[0] > 0 ? -r : r);
    w = std::clamp(w, -r, r);
    out.w = Vector::Constant(1, w);
  } else {
    const double lip = 2.0 * std::max(snn.eigenvalues().real().maxCoeff(), 1e-300);
    Vector w = Vector::Zero(m), y = w;
    double t = 1.0, fw = value(w);
    for (int it = 0; it < 5000; ++it) {
      const Vector g = 2.0 * (snn * y + lin);
      const Vector wn = project_l1_ball(y - g / lip, r);
      const double fn = value(wn);
      if (fn > fw) {
        y = w;
        t = 1.0;
        continue;
      }
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = wn + ((t - 1.0) / tn) * (wn - w);
      const double step = (wn - w).lpNorm<Eigen::Infinity>();
      w = wn;
      fw = fn;
      t = tn;
      if (step < 1e-13) break;
    }
    out.w = w;
  }
  out.value = value(out.w);
  const Vector gw = 2.0 * (snn * out.w + lin);
  if (out.w.lpNorm<1>() >= r * (1.0 - 1e-9)) out.multiplier = gw.lpNorm<Eigen::Infinity>();
  return out;
}

} // namespace detail

struct RestrictedEigenvalueResult {
  double value = 0.0;
  EigenStatus status = EigenStatus::UpperBound;
  Vector minimizer;
};

/// kappa^2(S) = min |X b_S - X b_{-S}|^2 / |b_S|_2^2 over |b_{-S}|_1 <= |b_S|_1.
/// Riemannian gradient descent over b_S on the unit sphere (the inner problem
/// over b_{-S} is convex), from 50 seeded starts plus the eigenvectors of
/// Sigma_SS; sets with p <= 4 are cross-checked on a grid.
inline RestrictedEigenvalueResult restricted_eigenvalue(const GramMatrix& gram, IndexSet set) {
  set = normalize_set(std::move(set));
  const int p = gram.p();
  if (set.empty()) throw Error("restricted eigenvalue needs a non-empty set");
  if (set.size() > kMaxRestrictedEigenSet) throw SetTooLarge(set.size(), kMaxRestrictedEigenSet);
  const IndexSet rest = complement(set, p);
  const Matrix& sigma = gram.matrix();
  const int k = static_cast<int>(set.size());

  RestrictedEigenvalueResult out;
  auto assemble = [&](const Vector& u, const Vector& w) {
    Vector b = Vector::Zero(p);
    detail::scatter(b, set, u);
    for (std::size_t i = 0; i < rest.size(); ++i) b[rest[i]] = -w[i];
    return b;
  };
  // The sign flip on b_{-S} is absorbed by the symmetric constraint, so the
  // objective is the plain quadratic form.
  auto eval = [&](const Vector& u) { return detail::inner_ball_min(sigma, set, rest, u, u.lpNorm<1>()); };

  if (rest.empty()) {
    const SpectralDecomposition sd = spectral_decomposition(sigma);
    out.value = sd.eigenvalues(p - 1);
    out.minimizer = sd.eigenvectors.col(p - 1);
    out.status = EigenStatus::Exact;
    return out;
  }
  if (k == 1) {
    const Vector u = Vector::Ones(1);
    const detail::InnerBall ib = eval(u);
    out.value = ib.value;
    out.minimizer = assemble(u, ib.w);
    out.status = EigenStatus::Exact;
    return out;
  }

  std::vector<Vector> starts;
  {
    Matrix sss(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) sss(a, b) = sigma(set[a], set[b]);
    const SpectralDecomposition sd = spectral_decomposition(sss);
    for (int i = k - 1; i >= 0; --i) starts.push_back(sd.eigenvectors.col(i));
    for (int j = 0; j < k; ++j) starts.push_back(Vector::Unit(k, j));
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int r = 0; r < 50; ++r) {
      Vector v(k);
      for (int j = 0; j < k; ++j) v[j] = nd(rng);
      starts.push_back(v.normalized());
    }
  }

  double best = kInf;
  Vector best_u, best_w;
  for (const Vector& s0 : starts) {
    Vector u = s0.normalized();
    detail::InnerBall ib = eval(u);
    double f = ib.value;
    for (int it = 0; it < 300; ++it) {
      Vector b = Vector::Zero(p);
      detail::scatter(b, set, u);
      for (std::size_t i = 0; i < rest.size(); ++i) b[rest[i]] = ib.w[i];
      Vector grad = 2.0 * detail::gather(sigma * b, set);
      for (int j = 0; j < k; ++j) grad[j] += ib.multiplier * (u[j] >= 0 ? -1.0 : 1.0);
      grad -= grad.dot(u) * u;
      if (grad.norm() < 1e-10) break;
      double step = 1.0;
      bool moved = false;
      while (step > 1e-12) {
        const Vector un = (u - step * grad).normalized();
        const detail::InnerBall ibn = eval(un);
        if (ibn.value < f - 1e-4 * step * grad.squaredNorm()) {
          u = un;
          ib = ibn;
          f = ibn.value;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    if (f < best) {
      best = f;
      best_u = u;
      best_w = ib.w;
    }
  }

  if (p <= 4 && k <= 3) {
    // Dense grid over the unit sphere in the S coordinates.
    double grid_best = kInf;
    Vector grid_u;
    const double h = k == 2 ? 1e-3 : 1e-2;
    auto visit = [&](const Vector& u) {
      const detail::InnerBall ib = eval(u);
      if (ib.value < grid_best) {
        grid_best = ib.value;
        grid_u = u;
      }
    };
    if (k == 2) {
      for (double a = 0.0; a < std::numbers::pi; a += h) visit(Vector{{std::cos(a), std::sin(a)}});
    } else {
      for (double a = 0.0; a <= std::numbers::pi; a += h)
        for (double b = 0.0; b < 2.0 * std::numbers::pi; b += h / std::max(std::sin(a), h))
          visit(Vector{{std::cos(a), std::sin(a) * std::cos(b), std::sin(a) * std::sin(b)}});
    }
    if (grid_best >= best - 1e-6) {
      out.status = EigenStatus::GridChecked;
    } else {
      out.status = EigenStatus::UpperBound;
    }
    if (grid_best < best) {
      best = grid_best;
      best_u = grid_u;
      best_w = eval(grid_u).w;
    }
  }
  out.value = std::max(best, 0.0);
  out.minimizer = assemble(best_u, best_w);
  return out;
}

/// Compatibility report with the restricted eigenvalue filled in.
inline CompatReport compatibility_with_eigen(const GramMatrix& gram, const IndexSet& set,
                                             double stretch = 1.0, const CompatOptions& opt = {}) {
  CompatReport rep = compatibility(gram, set, stretch, opt);
  if (!rep.set.empty() && rep.set.size() <= kMaxRestrictedEigenSet) {
    const RestrictedEigenvalueResult re = restricted_eigenvalue(gram, rep.set);
    rep.restricted_eigenvalue = re.value;
    rep.restricted_eigenvalue_status = re.status;
  }
  return rep;
}

} // namespace lassocompat
