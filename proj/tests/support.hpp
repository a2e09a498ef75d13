#pragma once

#include "lassocompat/designs.hpp"
#include "lassocompat/gram.hpp"
#include "lassocompat/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace testsupport {

using namespace lassocompat;

class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(gen_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
  bool coin() { return integer(0, 1) == 1; }
  std::mt19937_64& engine() { return gen_; }

private:
  std::mt19937_64 gen_;
};

inline std::vector<double> rhos(Rng& r, int n) {
  std::vector<double> v(n);
  for (double& x : v) x = r.uniform(0.05, 0.95);
  return v;
}

/// C in (1, cap) with C^2 varphi2 / 2 < 1 kept away from the boundary.
inline double parent_c(Rng& r, double varphi2, double cap = 3.0) {
  const double hi = std::min(cap, 0.95 * std::sqrt(2.0 / varphi2));
  return r.uniform(1.05, std::max(1.06, hi));
}

/// One admissible spec from the given family with random parameters.
inline DesignSpec random_spec(Rng& r, Family f) {
  switch (f) {
  case Family::TwoVar: return DesignSpec::two_var(r.uniform(0.05, 0.95));
  case Family::PairBlocks: return DesignSpec::pair_blocks(rhos(r, r.integer(1, 3)));
  case Family::PairBlocksPlusOrthogonal:
    return DesignSpec::pair_blocks_plus_orthogonal(rhos(r, r.integer(1, 2)), r.integer(0, 2));
  case Family::ParentChildSingle: {
    const double rho = r.uniform(0.05, 0.95);
    return DesignSpec::parent_child(rho, parent_c(r, 1.0 - rho));
  }
  case Family::ParentChildMany: {
    const double rho = r.uniform(0.05, 0.95);
    std::vector<double> c(r.integer(1, 3));
    for (double& x : c) x = parent_c(r, 1.0 - rho);
    return DesignSpec::parent_child_many(rho, c);
  }
  case Family::ParentChildBlock2N: {
    const std::vector<double> rho = rhos(r, r.integer(1, 2));
    double sum = 0.0;
    for (double x : rho) sum += 2.0 * (1.0 - x);
    const double s0 = 2.0 * rho.size();
    const double hi = std::min(3.0, 0.95 * s0 / std::sqrt(sum));
    return DesignSpec::parent_child_block(rho, r.uniform(1.05, std::max(1.06, hi)));
  }
  case Family::GoodComp: {
    const double rho = r.uniform(0.05, 0.95);
    const double c = parent_c(r, 1.0 - rho);
    const double room = 1.0 - c * c * (1.0 - rho) / 2.0;
    return DesignSpec::good_comp(rho, c, r.uniform(0.05, 0.95) * room);
  }
  case Family::GoodLasso2: {
    const double rho = r.uniform(0.05, 0.95);
    return DesignSpec::good_lasso2(rho, parent_c(r, 1.0 - rho));
  }
  case Family::GoodLasso3: return DesignSpec::good_lasso3(r.uniform(0.05, 0.95));
  case Family::BlockGoodComp2N: {
    const int n = r.integer(1, 2);
    std::vector<double> rho = rhos(r, n), c(n), t(n);
    for (int k = 0; k < n; ++k) {
      c[k] = parent_c(r, 1.0 - rho[k]);
      t[k] = r.uniform(0.05, 0.95) * (1.0 - c[k] * c[k] * (1.0 - rho[k]) / 2.0);
    }
    return DesignSpec::block_good_comp(rho, c, t);
  }
  case Family::ChildParentGamma:
    for (;;) {
      const double theta = r.uniform(0.05, 0.95), g3 = r.uniform(0.52, 0.95), g4 = 1.0 - g3;
      if (1.0 - 2.0 * (g3 * g3 + g4 * g4 - 2.0 * g3 * g4 * theta) > 0.02)
        return DesignSpec::child_parent_gamma(theta, g3);
    }
  case Family::ChildParentSym: {
    const double c = r.uniform(1.05, 3.0);
    const double psi2 = r.uniform(0.05, 0.95) / (c * c);
    return DesignSpec::child_parent_sym(1.0 - psi2, c);
  }
  case Family::ChildParentOrthoInactive: {
    const double c = r.uniform(1.05, 1.6);
    const int m = static_cast<int>(std::ceil(2.0 * c * c + 1e-9)) + r.integer(0, 2);
    std::vector<double> g(m, 1.0 / m);
    for (double& x : g)
      if (r.coin()) x = -x;
    return DesignSpec::child_parent_ortho(c, g);
  }
  case Family::Custom: break;
  }
  throw Error("no random generator for this family");
}

inline const std::vector<Family>& closed_form_families() {
  static const std::vector<Family> all{
      Family::TwoVar,          Family::PairBlocks,        Family::PairBlocksPlusOrthogonal,
      Family::ParentChildSingle, Family::ParentChildMany, Family::ParentChildBlock2N,
      Family::GoodComp,        Family::GoodLasso2,        Family::GoodLasso3,
      Family::BlockGoodComp2N, Family::ChildParentGamma,  Family::ChildParentSym,
      Family::ChildParentOrthoInactive};
  return all;
}

/// n x p Gaussian design with unit columns.
inline Matrix random_unit_columns(Rng& r, int n, int p) {
  Matrix x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = r.normal();
  for (int j = 0; j < p; ++j) x.col(j).normalize();
  return x;
}

inline GramMatrix random_gram(Rng& r, int p, int n) {
  const Matrix x = random_unit_columns(r, n, p);
  Matrix g = x.transpose() * x;
  g = 0.5 * (g + g.transpose());
  g.diagonal().setOnes();
  return GramMatrix(g);
}

/// Random beta0: a random support with signed magnitudes in [0.2, 2].
inline Vector random_beta0(Rng& r, int p) {
  Vector b = Vector::Zero(p);
  const int k = r.integer(1, p);
  std::vector<int> idx(p);
  for (int j = 0; j < p; ++j) idx[j] = j;
  std::shuffle(idx.begin(), idx.end(), r.engine());
  for (int i = 0; i < k; ++i) b[idx[i]] = (r.coin() ? 1.0 : -1.0) * r.uniform(0.2, 2.0);
  return b;
}

/// Brute-force compatibility constant for p <= 3 on a grid of the given step.
/// The active part runs over grid points of the unit l1 sphere and the
/// inactive part over grid points of the L-ball.
inline double grid_compatibility(const Matrix& sigma, const IndexSet& s, double stretch, double step) {
  const int p = static_cast<int>(sigma.rows());
  if (p > 3) throw Error("grid search is limited to p <= 3");
  const int k = static_cast<int>(s.size());
  IndexSet rest;
  for (int j = 0; j < p; ++j)
    if (std::find(s.begin(), s.end(), j) == s.end()) rest.push_back(j);
  const int m = static_cast<int>(std::lround(1.0 / step));
  const int ml = static_cast<int>(std::lround(stretch / step));
  double g[3][3] = {};
  for (int a = 0; a < p; ++a)
    for (int c = 0; c < p; ++c) g[a][c] = sigma(a, c);
  double b[3] = {0.0, 0.0, 0.0};
  double best = std::numeric_limits<double>::infinity();

  auto evaluate = [&] {
    double q = 0.0;
    for (int a = 0; a < p; ++a)
      for (int c = 0; c < p; ++c) q += b[a] * g[a][c] * b[c];
    best = std::min(best, q);
  };
  auto tails = [&] {
    if (rest.empty()) {
      evaluate();
    } else if (rest.size() == 1) {
      for (int i = -ml; i <= ml; ++i) {
        b[rest[0]] = i * step;
        evaluate();
      }
    } else {
      for (int i = -ml; i <= ml; ++i)
        for (int j = -(ml - std::abs(i)); j <= ml - std::abs(i); ++j) {
          b[rest[0]] = i * step;
          b[rest[1]] = j * step;
          evaluate();
        }
    }
  };
  for (double sg : {-1.0, 1.0}) {
    if (k == 1) {
      b[s[0]] = sg;
      tails();
    } else if (k == 2) {
      for (int i = -m; i <= m; ++i) {
        b[s[0]] = i * step;
        b[s[1]] = sg * (m - std::abs(i)) * step;
        tails();
      }
    } else {
      for (int i = -m; i <= m; ++i)
        for (int j = -(m - std::abs(i)); j <= m - std::abs(i); ++j) {
          b[s[0]] = i * step;
          b[s[1]] = j * step;
          b[s[2]] = sg * (m - std::abs(i) - std::abs(j)) * step;
          tails();
        }
    }
  }
  return k * best;
}

} // namespace testsupport
