#pragma once

#include "lassocompat/core.hpp"
#include "lassocompat/gram.hpp"

#include <array>
#include <optional>
#include <string_view>

namespace lassocompat {

/// The parametric design families. Active variables come first; in every
/// family each active pair (X_{2k-1}, X_{2k}) has inner product -rho_k.
enum class Family {
  TwoVar,                   // p = 2
  PairBlocks,               // N mutually orthogonal pairs
  PairBlocksPlusOrthogonal, // pairs plus m0 inactive columns orthogonal to everything
  ParentChildSingle,        // X3 = C (X1 + X2)/2 + U
  ParentChildMany,          // X_{2+k} = C_k (X1 + X2)/2 + U_k
  ParentChildBlock2N,       // N pairs, X_{2N+1} = C sum_j X_j / s0 + U
  GoodComp,                 // X3,4 = C (X1 + X2)/2 + U +- V, |U|^2 = tau2
  GoodLasso2,               // X3,4 = C (X1 + X2)/2 +- V
  GoodLasso3,               // X3,4 = (X1 + X2)/2 +- V
  BlockGoodComp2N,          // N orthogonal GoodComp blocks
  ChildParentGamma,         // X1,2 = X_{-S0} gamma +- V, two inactive with inner product -theta
  ChildParentSym,           // X1,2 = C (X3 + X4)/2 +- V
  ChildParentOrthoInactive, // X1,2 = C X_{-S0} gamma +- V, orthonormal inactive
  Custom,
};

inline constexpr std::array<std::pair<Family, std::string_view>, 14> kFamilyNames{{
    {Family::TwoVar, "twovar"},
    {Family::PairBlocks, "pairblocks"},
    {Family::PairBlocksPlusOrthogonal, "pairblocks-orth"},
    {Family::ParentChildSingle, "parentchild"},
    {Family::ParentChildMany, "parentchild-many"},
    {Family::ParentChildBlock2N, "parentchild-block"},
    {Family::GoodComp, "goodcomp"},
    {Family::GoodLasso2, "goodlasso2"},
    {Family::GoodLasso3, "goodlasso3"},
    {Family::BlockGoodComp2N, "blockgoodcomp"},
    {Family::ChildParentGamma, "childparent-gamma"},
    {Family::ChildParentSym, "childparent-sym"},
    {Family::ChildParentOrthoInactive, "childparent-ortho"},
    {Family::Custom, "custom"},
}};

inline std::string_view family_name(Family f) {
  for (const auto& [fam, name] : kFamilyNames)
    if (fam == f) return name;
  return "unknown";
}

inline std::optional<Family> family_from_name(std::string_view name) {
  for (const auto& [fam, n] : kFamilyNames)
    if (n == name) return fam;
  return std::nullopt;
}

/// Family parameters. Which fields are read depends on the family; scalar
/// parameters are stored as one-element vectors.
struct DesignParams {
  std::vector<double> rho;   // rho_k in (0,1), one per active pair
  std::vector<double> c;     // C or C_k > 1
  std::vector<double> tau2;  // tau_k^2 > 0 (GoodComp, BlockGoodComp2N)
  double theta = 0.0;        // -X3^T X4 (ChildParentGamma, ChildParentSym)
  std::vector<double> gamma; // gamma_{-S0}
  int m0 = 0;                // orthogonal inactive columns (PairBlocksPlusOrthogonal)
};

struct DesignSpec {
  Family family = Family::Custom;
  DesignParams params;
  std::optional<Matrix> custom; // only for Family::Custom

  static DesignSpec two_var(double rho) { return {Family::TwoVar, {{rho}}, {}}; }
  static DesignSpec pair_blocks(std::vector<double> rho) {
    return {Family::PairBlocks, {std::move(rho)}, {}};
  }
  static DesignSpec pair_blocks_plus_orthogonal(std::vector<double> rho, int m0) {
    DesignSpec s{Family::PairBlocksPlusOrthogonal, {std::move(rho)}, {}};
    s.params.m0 = m0;
    return s;
  }
  static DesignSpec parent_child(double rho, double c) {
    return {Family::ParentChildSingle, {{rho}, {c}}, {}};
  }
  static DesignSpec parent_child_many(double rho, std::vector<double> c) {
    return {Family::ParentChildMany, {{rho}, std::move(c)}, {}};
  }
  static DesignSpec parent_child_block(std::vector<double> rho, double c) {
    return {Family::ParentChildBlock2N, {std::move(rho), {c}}, {}};
  }
  static DesignSpec good_comp(double rho, double c, double tau2) {
    return {Family::GoodComp, {{rho}, {c}, {tau2}}, {}};
  }
  static DesignSpec good_lasso2(double rho, double c) {
    return {Family::GoodLasso2, {{rho}, {c}}, {}};
  }
  static DesignSpec good_lasso3(double rho) { return {Family::GoodLasso3, {{rho}}, {}}; }
  static DesignSpec block_good_comp(std::vector<double> rho, std::vector<double> c,
                                    std::vector<double> tau2) {
    return {Family::BlockGoodComp2N, {std::move(rho), std::move(c), std::move(tau2)}, {}};
  }
  static DesignSpec child_parent_gamma(double theta, double gamma3) {
    DesignSpec s{Family::ChildParentGamma, {}, {}};
    s.params.theta = theta;
    s.params.gamma = {gamma3, 1.0 - gamma3};
    return s;
  }
  static DesignSpec child_parent_sym(double theta, double c) {
    DesignSpec s{Family::ChildParentSym, {}, {}};
    s.params.theta = theta;
    s.params.c = {c};
    return s;
  }
  static DesignSpec child_parent_ortho(double c, std::vector<double> gamma) {
    DesignSpec s{Family::ChildParentOrthoInactive, {}, {}};
    s.params.c = {c};
    s.params.gamma = std::move(gamma);
    return s;
  }
  static DesignSpec custom_matrix(Matrix m) { return {Family::Custom, {}, std::move(m)}; }
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw AdmissibilityError(what);
}

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline void require_count(const std::vector<double>& v, std::size_t n, const char* name) {
  require(v.size() == n, std::string(name) + " must have " + std::to_string(n) +
                             " entr" + (n == 1 ? "y" : "ies") + ", got " +
                             std::to_string(v.size()));
}

inline void require_rho(const std::vector<double>& rho) {
  require(!rho.empty(), "rho must have at least one entry");
  for (double r : rho)
    require(r > 0.0 && r < 1.0, "rho = " + fmt(r) + " outside (0,1)");
}

inline void require_c(double c) { require(c > 1.0, "C = " + fmt(c) + " must exceed 1"); }

/// Broadcast a one-element parameter vector to n entries.
inline std::vector<double> broadcast(const std::vector<double>& v, std::size_t n, const char* name) {
  if (v.size() == 1 && n > 1) return std::vector<double>(n, v[0]);
  require_count(v, n, name);
  return v;
}

inline void place_pair(Matrix& s, int i, int j, double rho) {
  s(i, j) = s(j, i) = -rho;
}

} // namespace detail

/// Constants the constructions are parameterized by, derived from the raw
/// parameters. Only meaningful after admissibility has been checked.
struct DerivedParams {
  std::vector<double> rho;     // per active pair
  std::vector<double> varphi2; // 1 - rho_k
  std::vector<double> c;
  std::vector<double> tau2;    // orthogonal-part squared norms
  double theta = 0.0;
  double psi2 = 0.0;           // 1 - theta
  std::vector<double> gamma;
  double v_norm2 = 0.0;        // |V|^2 where a V term appears
};

/// Checks the family's admissibility constraints and returns the derived
/// constants. Throws AdmissibilityError naming the violated constraint.
inline DerivedParams derive(const DesignSpec& spec) {
  using namespace detail;
  const DesignParams& q = spec.params;
  DerivedParams d;
  auto set_pairs = [&](const std::vector<double>& rho) {
    require_rho(rho);
    d.rho = rho;
    for (double r : rho) d.varphi2.push_back(1.0 - r);
  };

  switch (spec.family) {
  case Family::TwoVar:
    require_count(q.rho, 1, "rho");
    set_pairs(q.rho);
    break;
  case Family::PairBlocks:
    set_pairs(q.rho);
    break;
  case Family::PairBlocksPlusOrthogonal:
    set_pairs(q.rho);
    require(q.m0 >= 0, "m0 must be non-negative");
    break;
  case Family::ParentChildSingle: {
    require_count(q.rho, 1, "rho");
    require_count(q.c, 1, "C");
    set_pairs(q.rho);
    const double c = q.c[0];
    require_c(c);
    const double a = c * c * d.varphi2[0] / 2.0;
    require(a < 1.0, "C^2 varphi^2/2 = " + fmt(a) + " >= 1");
    d.c = {c};
    d.tau2 = {1.0 - a};
    break;
  }
  case Family::ParentChildMany: {
    require_count(q.rho, 1, "rho");
    require(!q.c.empty(), "C must list one constant per inactive variable");
    set_pairs(q.rho);
    for (double c : q.c) {
      require_c(c);
      const double a = c * c * d.varphi2[0] / 2.0;
      require(a < 1.0, "C_k^2 varphi^2/2 = " + fmt(a) + " >= 1");
      d.c.push_back(c);
      d.tau2.push_back(1.0 - a);
    }
    break;
  }
  case Family::ParentChildBlock2N: {
    require_count(q.c, 1, "C");
    set_pairs(q.rho);
    const double c = q.c[0];
    require_c(c);
    const double s0 = 2.0 * static_cast<double>(d.rho.size());
    double sum = 0.0;
    for (double f : d.varphi2) sum += 2.0 * f;
    const double a = c * c * sum / (s0 * s0);
    require(a < 1.0, "C^2 sum_k 2 varphi_k^2 / s0^2 = " + fmt(a) + " >= 1");
    d.c = {c};
    d.tau2 = {1.0 - a};
    break;
  }
  case Family::GoodComp: {
    require_count(q.rho, 1, "rho");
    require_count(q.c, 1, "C");
    require_count(q.tau2, 1, "tau2");
    set_pairs(q.rho);
    const double c = q.c[0], t = q.tau2[0];
    require_c(c);
    const double a = c * c * d.varphi2[0] / 2.0;
    require(a < 1.0, "C^2 varphi^2/2 = " + fmt(a) + " >= 1");
    require(t > 0.0, "tau^2 = " + fmt(t) + " must be positive");
    require(t < 1.0 - a, "tau^2 = " + fmt(t) + " >= 1 - C^2 varphi^2/2 = " + fmt(1.0 - a));
    d.c = {c};
    d.tau2 = {t};
    d.v_norm2 = 1.0 - a - t;
    break;
  }
  case Family::GoodLasso2: {
    require_count(q.rho, 1, "rho");
    require_count(q.c, 1, "C");
    set_pairs(q.rho);
    const double c = q.c[0];
    require_c(c);
    const double a = c * c * d.varphi2[0] / 2.0;
    require(a < 1.0, "C^2 varphi^2/2 = " + fmt(a) + " >= 1");
    d.c = {c};
    d.tau2 = {0.0};
    d.v_norm2 = 1.0 - a;
    break;
  }
  case Family::GoodLasso3:
    require_count(q.rho, 1, "rho");
    set_pairs(q.rho);
    d.c = {1.0};
    d.tau2 = {0.0};
    d.v_norm2 = 1.0 - d.varphi2[0] / 2.0;
    break;
  case Family::BlockGoodComp2N: {
    set_pairs(q.rho);
    const std::size_t n = d.rho.size();
    d.c = broadcast(q.c, n, "C");
    d.tau2 = broadcast(q.tau2, n, "tau2");
    for (std::size_t k = 0; k < n; ++k) {
      require_c(d.c[k]);
      const double a = d.c[k] * d.c[k] * d.varphi2[k] / 2.0;
      require(a < 1.0, "C_k^2 varphi_k^2/2 = " + fmt(a) + " >= 1 in block " + std::to_string(k + 1));
      require(d.tau2[k] > 0.0 && d.tau2[k] < 1.0 - a,
              "tau_k^2 = " + fmt(d.tau2[k]) + " outside (0, 1 - C_k^2 varphi_k^2/2) in block " +
                  std::to_string(k + 1));
    }
    break;
  }
  case Family::ChildParentGamma: {
    require(q.theta > 0.0 && q.theta < 1.0, "theta = " + fmt(q.theta) + " outside (0,1)");
    std::vector<double> g = q.gamma;
    if (g.size() == 1) g.push_back(1.0 - g[0]);
    require_count(g, 2, "gamma");
    require(g[0] > 0.5 && g[0] < 1.0, "gamma_3 = " + fmt(g[0]) + " outside (1/2, 1)");
    require(std::abs(g[0] + g[1] - 1.0) < 1e-12, "gamma_4 must equal 1 - gamma_3");
    d.theta = q.theta;
    d.psi2 = 1.0 - q.theta;
    d.gamma = g;
    const double xg2 = g[0] * g[0] + g[1] * g[1] - 2.0 * g[0] * g[1] * q.theta;
    const double rho = 1.0 - 2.0 * xg2;
    require(rho > 0.0, "derived rho = 1 - 2 gamma^T Sigma gamma = " + fmt(rho) + " is not positive");
    d.rho = {rho};
    d.varphi2 = {1.0 - rho};
    d.v_norm2 = 1.0 - xg2;
    break;
  }
  case Family::ChildParentSym: {
    require(q.theta > 0.0 && q.theta < 1.0, "theta = " + fmt(q.theta) + " outside (0,1)");
    require_count(q.c, 1, "C");
    const double c = q.c[0];
    require_c(c);
    d.theta = q.theta;
    d.psi2 = 1.0 - q.theta;
    const double a = c * c * d.psi2 / 2.0;
    require(a < 1.0, "C^2 psi^2/2 = " + fmt(a) + " >= 1");
    const double rho = 1.0 - c * c * d.psi2;
    require(rho > 0.0, "derived rho = 1 - C^2 psi^2 = " + fmt(rho) + " is not positive");
    d.c = {c};
    d.rho = {rho};
    d.varphi2 = {1.0 - rho};
    d.v_norm2 = 1.0 - a;
    break;
  }
  case Family::ChildParentOrthoInactive: {
    require_count(q.c, 1, "C");
    const double c = q.c[0];
    require_c(c);
    require(!q.gamma.empty(), "gamma must have at least one entry");
    double l1 = 0.0, l2 = 0.0, linf = 0.0;
    for (double g : q.gamma) {
      l1 += std::abs(g);
      l2 += g * g;
      linf = std::max(linf, std::abs(g));
    }
    require(std::abs(l1 - 1.0) < 1e-12, "|gamma|_1 = " + fmt(l1) + " != 1");
    require(2.0 * c * c * l2 < 1.0, "2 C^2 |gamma|_2^2 = " + fmt(2.0 * c * c * l2) + " >= 1");
    require(linf <= c * l2 + 1e-15,
            "|gamma|_inf = " + fmt(linf) + " > C |gamma|_2^2 = " + fmt(c * l2));
    d.c = {c};
    d.gamma = q.gamma;
    const double rho = 1.0 - 2.0 * c * c * l2;
    d.rho = {rho};
    d.varphi2 = {1.0 - rho};
    d.v_norm2 = 1.0 - c * c * l2;
    break;
  }
  case Family::Custom:
    require(spec.custom.has_value(), "custom design needs a matrix");
    break;
  }
  return d;
}

/// Number of columns of the family's design.
inline int design_dimension(const DesignSpec& spec) {
  const DesignParams& q = spec.params;
  switch (spec.family) {
  case Family::TwoVar: return 2;
  case Family::PairBlocks: return 2 * static_cast<int>(q.rho.size());
  case Family::PairBlocksPlusOrthogonal: return 2 * static_cast<int>(q.rho.size()) + q.m0;
  case Family::ParentChildSingle: return 3;
  case Family::ParentChildMany: return 2 + static_cast<int>(q.c.size());
  case Family::ParentChildBlock2N: return 2 * static_cast<int>(q.rho.size()) + 1;
  case Family::GoodComp:
  case Family::GoodLasso2:
  case Family::GoodLasso3:
  case Family::ChildParentGamma:
  case Family::ChildParentSym: return 4;
  case Family::BlockGoodComp2N: return 4 * static_cast<int>(q.rho.size());
  case Family::ChildParentOrthoInactive: return 2 + static_cast<int>(q.gamma.size());
  case Family::Custom: return spec.custom ? static_cast<int>(spec.custom->rows()) : 0;
  }
  return 0;
}

/// The family's designated active set S0 (the columns the closed forms treat as
/// active). Custom designs have none.
inline IndexSet family_active_set(const DesignSpec& spec) {
  IndexSet s;
  switch (spec.family) {
  case Family::PairBlocks:
  case Family::PairBlocksPlusOrthogonal:
  case Family::ParentChildBlock2N:
  case Family::BlockGoodComp2N:
    for (int j = 0; j < 2 * static_cast<int>(spec.params.rho.size()); ++j) s.push_back(j);
    return s;
  case Family::Custom: return s;
  default: return {0, 1};
  }
}

/// Exact Gram matrix of the family, computed from the parameters.
inline GramMatrix build_gram(const DesignSpec& spec) {
  const DerivedParams d = derive(spec);
  if (spec.family == Family::Custom) return GramMatrix(*spec.custom);

  const int p = design_dimension(spec);
  Matrix s = Matrix::Identity(p, p);
  switch (spec.family) {
  case Family::TwoVar:
  case Family::PairBlocks:
  case Family::PairBlocksPlusOrthogonal:
    for (std::size_t k = 0; k < d.rho.size(); ++k)
      detail::place_pair(s, 2 * k, 2 * k + 1, d.rho[k]);
    break;
  case Family::ParentChildSingle:
  case Family::ParentChildMany: {
    const double f = d.varphi2[0];
    detail::place_pair(s, 0, 1, d.rho[0]);
    const int m = static_cast<int>(d.c.size());
    for (int k = 0; k < m; ++k) {
      s(0, 2 + k) = s(2 + k, 0) = s(1, 2 + k) = s(2 + k, 1) = d.c[k] * f / 2.0;
      for (int l = 0; l < m; ++l)
        if (l != k) s(2 + k, 2 + l) = d.c[k] * d.c[l] * f / 2.0;
    }
    break;
  }
  case Family::ParentChildBlock2N: {
    const int n = static_cast<int>(d.rho.size());
    const double s0 = 2.0 * n;
    for (int k = 0; k < n; ++k) {
      detail::place_pair(s, 2 * k, 2 * k + 1, d.rho[k]);
      for (int j : {2 * k, 2 * k + 1}) s(2 * n, j) = s(j, 2 * n) = d.c[0] * d.varphi2[k] / s0;
    }
    break;
  }
  case Family::GoodComp:
  case Family::GoodLasso2:
  case Family::GoodLasso3:
  case Family::BlockGoodComp2N: {
    const int n = static_cast<int>(d.rho.size());
    for (int k = 0; k < n; ++k) {
      const int a = 2 * k, b = 2 * k + 1;
      const int u = (n == 1) ? 2 : 2 * n + 2 * k, v = u + 1;
      const double f = d.varphi2[k], c = d.c[k], t = d.tau2[k];
      detail::place_pair(s, a, b, d.rho[k]);
      for (int i : {a, b})
        for (int j : {u, v}) s(i, j) = s(j, i) = c * f / 2.0;
      s(u, v) = s(v, u) = c * c * f + 2.0 * t - 1.0;
    }
    break;
  }
  case Family::ChildParentGamma: {
    const double g3 = d.gamma[0], g4 = d.gamma[1], th = d.theta;
    detail::place_pair(s, 0, 1, d.rho[0]);
    detail::place_pair(s, 2, 3, th);
    const double r3 = g3 - g4 * th, r4 = g4 - g3 * th;
    for (int i : {0, 1}) {
      s(i, 2) = s(2, i) = r3;
      s(i, 3) = s(3, i) = r4;
    }
    break;
  }
  case Family::ChildParentSym: {
    detail::place_pair(s, 0, 1, d.rho[0]);
    detail::place_pair(s, 2, 3, d.theta);
    const double e = d.c[0] * d.psi2 / 2.0;
    for (int i : {0, 1})
      for (int j : {2, 3}) s(i, j) = s(j, i) = e;
    break;
  }
  case Family::ChildParentOrthoInactive: {
    detail::place_pair(s, 0, 1, d.rho[0]);
    for (std::size_t j = 0; j < d.gamma.size(); ++j)
      for (int i : {0, 1}) s(i, 2 + j) = s(2 + j, i) = d.c[0] * d.gamma[j];
    break;
  }
  case Family::Custom: break;
  }
  return GramMatrix(std::move(s));
}

} // namespace lassocompat
