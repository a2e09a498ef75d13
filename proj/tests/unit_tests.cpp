#include "lassocompat/bounds.hpp"
#include "lassocompat/compat.hpp"
#include "lassocompat/designs.hpp"
#include "lassocompat/gram.hpp"
#include "lassocompat/io.hpp"
#include "lassocompat/noisy.hpp"
#include "lassocompat/oracle.hpp"
#include "lassocompat/parallel.hpp"
#include "lassocompat/projections.hpp"
#include "lassocompat/scenario.hpp"
#include "lassocompat/solver.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <set>

using namespace lassocompat;
using testsupport::Rng;

namespace {

/// Plain FISTA on (b - b0)^T S (b - b0) + 2 lambda |b|_1, used as an
/// independent reference for the coordinate-descent solver.
Vector fista(const Matrix& s, const Vector& b0, double lambda, int iters = 40000) {
  const double lip = 2.0 * std::max(Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues().maxCoeff(), 1e-12);
  const double step = 1.0 / lip;
  Vector x = Vector::Zero(b0.size()), y = x;
  double t = 1.0;
  for (int k = 0; k < iters; ++k) {
    const Vector g = 2.0 * s * (y - b0);
    Vector xn = y - step * g;
    for (int j = 0; j < xn.size(); ++j) xn[j] = soft_threshold(xn[j], 2.0 * lambda * step);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = xn + ((t - 1.0) / tn) * (xn - x);
    x = xn;
    t = tn;
  }
  return x;
}

/// l1-ball projection by bisection on the threshold.
Vector project_l1_bisect(const Vector& v, double r) {
  if (v.lpNorm<1>() <= r) return v;
  double lo = 0.0, hi = v.cwiseAbs().maxCoeff();
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    double s = 0.0;
    for (int j = 0; j < v.size(); ++j) s += std::max(std::abs(v[j]) - mid, 0.0);
    (s > r ? lo : hi) = mid;
  }
  Vector out(v.size());
  for (int j = 0; j < v.size(); ++j) out[j] = soft_threshold(v[j], hi);
  return out;
}

std::string catalog_path() { return LASSOCOMPAT_DEFAULT_CATALOG; }

} // namespace

// ---------------------------------------------------------------- core / io

TEST(Io, ParsesVectorsAndOneBasedSets) {
  const Vector v = parse_vector("1, 0.5,-2e-1");
  ASSERT_EQ(v.size(), 3);
  EXPECT_DOUBLE_EQ(v[2], -0.2);
  EXPECT_EQ(parse_set("3,1,3"), (IndexSet{0, 2}));
  EXPECT_THROW(parse_set("0"), ParseError);
  EXPECT_THROW(parse_set("1.5"), ParseError);
  EXPECT_THROW(parse_vector("1,x"), ParseError);
}

TEST(Io, Fmt17RoundTripsDoubles) {
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = r.normal() * std::pow(10.0, r.integer(-30, 30));
    EXPECT_EQ(parse_double(fmt17(x)), x);
  }
  EXPECT_EQ(fmt17(kInf), "inf");
}

TEST(Io, MatrixCsvRoundTrip) {
  Rng r(2);
  const Matrix m = testsupport::random_gram(r, 5, 3).matrix();
  EXPECT_EQ(parse_matrix_csv(matrix_to_csv(m)), m);
  EXPECT_THROW(parse_matrix_csv("1,2\n3\n"), ParseError);
  EXPECT_THROW(parse_matrix_csv(""), ParseError);
}

TEST(Io, SpecJsonRoundTripForEveryFamily) {
  Rng r(3);
  for (Family f : testsupport::closed_form_families()) {
    const DesignSpec spec = testsupport::random_spec(r, f);
    const DesignSpec back = spec_from_json(Json::parse(spec_to_json(spec).dump()));
    EXPECT_EQ((build_gram(back).matrix() - build_gram(spec).matrix()).cwiseAbs().maxCoeff(), 0.0)
        << family_name(f);
  }
  const DesignSpec custom = DesignSpec::custom_matrix(Matrix::Identity(3, 3));
  EXPECT_EQ(build_gram(spec_from_json(spec_to_json(custom))).matrix(), Matrix::Identity(3, 3));
  EXPECT_THROW(spec_from_json(Json{{"family", "nope"}}), ParseError);
}

// ---------------------------------------------------------------- gram

TEST(Gram, RejectsAsymmetricAndIndefinite) {
  Matrix a = Matrix::Identity(2, 2);
  a(0, 1) = 0.5;
  EXPECT_THROW(GramMatrix{a}, AdmissibilityError);
  a(1, 0) = 0.5;
  EXPECT_NO_THROW(GramMatrix{a});
  a(0, 1) = a(1, 0) = 1.5;
  EXPECT_THROW(GramMatrix{a}, AdmissibilityError);
}

TEST(Gram, FactorReproducesGramWithRequestedRows) {
  Rng r(4);
  for (int i = 0; i < 20; ++i) {
    const int p = r.integer(2, 6), n = r.integer(1, 6);
    const GramMatrix g = testsupport::random_gram(r, p, n);
    EXPECT_EQ(numerical_rank(g), std::min(p, n));
    const DesignFactor f = factorize(g, 50);
    EXPECT_EQ(f.n, 50);
    EXPECT_LT((f.gram() - g.matrix()).cwiseAbs().maxCoeff(), 1e-12);
    if (std::min(p, n) > 1) EXPECT_THROW(factorize(g, 1), RankError);
  }
}

TEST(Gram, FairnessDetectsScaledDuplicates) {
  Matrix a = Matrix::Identity(3, 3);
  a(0, 2) = a(2, 0) = -1.0;
  const FairnessVerdict v = check_fair(GramMatrix(a));
  EXPECT_FALSE(v.fair());
  ASSERT_TRUE(v.aligned_pair);
  EXPECT_EQ(*v.aligned_pair, std::make_pair(0, 2));
  EXPECT_TRUE(check_fair(GramMatrix::identity(3)).fair());
  a = Matrix::Identity(2, 2);
  a(1, 1) = 2.0;
  EXPECT_FALSE(check_fair(GramMatrix(a)).normalized);
}

// ---------------------------------------------------------------- designs

TEST(Designs, RandomSpecsAreNormalizedPsdWithTheRightShape) {
  Rng r(5);
  for (Family f : testsupport::closed_form_families()) {
    for (int i = 0; i < 10; ++i) {
      const DesignSpec spec = testsupport::random_spec(r, f);
      const GramMatrix g = build_gram(spec);
      EXPECT_TRUE(g.unit_diagonal(1e-12)) << family_name(f);
      EXPECT_EQ(g.p(), design_dimension(spec));
      EXPECT_TRUE(check_fair(g).fair()) << family_name(f);
      const IndexSet s0 = family_active_set(spec);
      EXPECT_FALSE(s0.empty());
    }
  }
}

TEST(Designs, TwoVarEntries) {
  const GramMatrix g = build_gram(DesignSpec::two_var(0.3));
  EXPECT_DOUBLE_EQ(g(0, 1), -0.3);
  EXPECT_DOUBLE_EQ(g(1, 0), -0.3);
}

TEST(Designs, ParentChildColumnInnerProducts) {
  // X3 = C (X1 + X2)/2 + U with U orthogonal to X1, X2.
  const double rho = 0.6, c = 2.0;
  const GramMatrix g = build_gram(DesignSpec::parent_child(rho, c));
  EXPECT_NEAR(g(0, 2), c * (1.0 - rho) / 2.0, 1e-15);
  EXPECT_NEAR(g(1, 2), c * (1.0 - rho) / 2.0, 1e-15);
}

TEST(Designs, AdmissibilityErrorsNameTheConstraint) {
  auto msg = [](const DesignSpec& s) {
    try {
      build_gram(s);
    } catch (const AdmissibilityError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(msg(DesignSpec::parent_child(0.6, 0.5)).find("must exceed 1"), std::string::npos);
  EXPECT_NE(msg(DesignSpec::two_var(1.0)).find("rho"), std::string::npos);
  EXPECT_NE(msg(DesignSpec::parent_child(0.1, 2.0)).find(">= 1"), std::string::npos);
  EXPECT_NE(msg(DesignSpec::good_comp(0.6, 2.0, 0.5)).find("tau^2"), std::string::npos);
  EXPECT_NE(msg(DesignSpec::child_parent_ortho(1.5, {0.5, 0.5})).find("|gamma|_2"), std::string::npos);
}

// ---------------------------------------------------------------- projections

TEST(Projections, L1BallMatchesBisection) {
  Rng r(6);
  for (int i = 0; i < 200; ++i) {
    Vector v(r.integer(1, 8));
    for (int j = 0; j < v.size(); ++j) v[j] = 3.0 * r.normal();
    const double rad = r.uniform(0.1, 3.0);
    EXPECT_LT((project_l1_ball(v, rad) - project_l1_bisect(v, rad)).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(Projections, SimplexSumsToRadius) {
  Rng r(7);
  for (int i = 0; i < 100; ++i) {
    Vector v(r.integer(1, 8));
    for (int j = 0; j < v.size(); ++j) v[j] = r.normal();
    const Vector w = project_simplex(v, 2.0);
    EXPECT_NEAR(w.sum(), 2.0, 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
  }
}

// ---------------------------------------------------------------- solver

TEST(Solver, MatchesIndependentFistaOnRandomInstances) {
  Rng r(8);
  for (int i = 0; i < 60; ++i) {
    const int p = r.integer(2, 6);
    const GramMatrix g = testsupport::random_gram(r, p, r.integer(p, p + 4));
    const Vector b0 = testsupport::random_beta0(r, p);
    const double lam = r.log_uniform(0.01, 1.0);
    const ProblemInstance inst(g, b0, lam);
    const LassoSolution sol = solve_noiseless(inst);
    EXPECT_LE(sol.kkt_residual, 1e-10);
    const Vector ref = fista(g.matrix(), b0, lam);
    EXPECT_LE(lasso_objective(inst, sol.beta_star), lasso_objective(inst, ref) + 1e-12);
    EXPECT_NEAR(lasso_objective(inst, sol.beta_star), lasso_objective(inst, ref), 1e-9);
  }
}

TEST(Solver, ObjectiveTraceIsMonotone) {
  Rng r(9);
  const GramMatrix g = testsupport::random_gram(r, 6, 4);
  SolverOptions so;
  so.track_objective = true;
  const LassoSolution sol = solve_noiseless(ProblemInstance(g, testsupport::random_beta0(r, 6), 0.05), so);
  EXPECT_TRUE(sol.monotone);
  for (std::size_t k = 1; k < sol.objective_trace.size(); ++k)
    EXPECT_LE(sol.objective_trace[k], sol.objective_trace[k - 1] + 1e-14);
}

TEST(Solver, ZeroLambdaAndZeroSignal) {
  const GramMatrix g = build_gram(DesignSpec::two_var(0.5));
  const LassoSolution a = solve_noiseless(ProblemInstance(g, Vector::Zero(2), 0.3));
  EXPECT_EQ(a.beta_star.lpNorm<Eigen::Infinity>(), 0.0);
  const Vector b0{{1.5, -0.5}};
  const LassoSolution b = solve_noiseless(ProblemInstance(g, b0, 0.0));
  EXPECT_LT((b.beta_star - b0).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Solver, NoisySolveWithoutNoiseEqualsNoiseless) {
  Rng r(10);
  for (int i = 0; i < 20; ++i) {
    const DesignSpec spec = testsupport::random_spec(r, testsupport::closed_form_families()[i % 13]);
    const GramMatrix g = build_gram(spec);
    const Vector b0 = testsupport::random_beta0(r, g.p());
    const DesignFactor f = factorize(g, g.p() + 3);
    const double lam = r.log_uniform(0.01, 0.5);
    const ProblemInstance inst(g, b0, lam);
    const Vector noisy = solve_noisy(f, f.columns * b0, lam).beta_star;
    const Vector clean = solve_noiseless(inst).beta_star;
    EXPECT_NEAR(lasso_objective(inst, noisy), lasso_objective(inst, clean), 1e-10);
  }
}

TEST(Solver, KktResidualFlagsWrongVectors) {
  const GramMatrix g = build_gram(DesignSpec::two_var(0.5));
  const Vector b0{{1.0, 1.0}};
  EXPECT_LT(kkt_residual(g, b0, 0.1, Vector{{0.8, 0.8}}), 1e-14);
  EXPECT_GT(kkt_residual(g, b0, 0.1, Vector{{0.9, 0.8}}), 1e-3);
}

TEST(Solver, UniquenessProbe) {
  const ProblemInstance gl3(build_gram(DesignSpec::good_lasso3(0.5)), Vector{{1, 1, 0, 0}}, 0.1);
  const UniquenessVerdict v = uniqueness_probe(gl3);
  EXPECT_FALSE(v.unique);
  ASSERT_TRUE(v.witnesses);
  EXPECT_LE(v.objective_gap, 1e-10);
  EXPECT_GT(v.separation, 1e-6);
  EXPECT_NEAR(lasso_objective(gl3, v.witnesses->first), lasso_objective(gl3, v.witnesses->second), 1e-10);

  const ProblemInstance gc(build_gram(DesignSpec::good_comp(0.6, 2.0, 0.1)), Vector{{2, 1.5, 0, 0}}, 0.1);
  EXPECT_TRUE(uniqueness_probe(gc).unique);
  EXPECT_TRUE(uniqueness_probe(ProblemInstance(GramMatrix::identity(3), Vector{{1, 0, -1}}, 0.2)).unique);
}

// ---------------------------------------------------------------- compat

TEST(Compat, MatchesGridSearchForSmallP) {
  Rng r(11);
  for (int i = 0; i < 6; ++i) {
    const int p = 2 + i % 2;
    const GramMatrix g = testsupport::random_gram(r, p, r.integer(2, 4));
    IndexSet s;
    for (int j = 0; j <= i % p; ++j) s.push_back(j);
    const double want = testsupport::grid_compatibility(g.matrix(), s, 1.0, 2e-3);
    const CompatReport rep = compatibility(g, s);
    EXPECT_TRUE(rep.certified);
    EXPECT_LE(rep.value, want + 1e-12);
    EXPECT_NEAR(rep.value, want, 2e-5);
  }
}

TEST(Compat, MinimizerIsFeasibleAndAttainsTheValue) {
  Rng r(12);
  for (int i = 0; i < 30; ++i) {
    const int p = r.integer(2, 6);
    const GramMatrix g = testsupport::random_gram(r, p, r.integer(1, 6));
    IndexSet s{0};
    if (p > 3) s.push_back(2);
    const double L = r.uniform(1.0, 3.0);
    const CompatReport rep = compatibility(g, s, L);
    const Vector& b = rep.minimizer;
    EXPECT_NEAR(l1_norm_on(b, s), 1.0, 1e-9);
    EXPECT_LE(l1_norm_on(b, complement(s, p)), L + 1e-9);
    EXPECT_NEAR(static_cast<double>(s.size()) * g.quad(b), rep.raw_value, 1e-9);
  }
}

TEST(Compat, StretchIsMonotone) {
  Rng r(13);
  const GramMatrix g = testsupport::random_gram(r, 5, 4);
  double prev = kInf;
  for (double L : {1.0, 1.5, 2.0, 4.0}) {
    const double v = compatibility(g, {0, 1}, L).value;
    EXPECT_LE(v, prev + 1e-10);
    prev = v;
  }
}

TEST(Compat, EmptySetAndOutOfRange) {
  const GramMatrix g = GramMatrix::identity(3);
  const CompatReport e = compatibility(g, {});
  EXPECT_EQ(e.effective_sparsity, 0.0);
  EXPECT_THROW(compatibility(g, {3}), Error);
  EXPECT_DOUBLE_EQ(compatibility(g, {0, 1, 2}).value, 1.0);
  EXPECT_THROW(compatibility(g, {0}, 0.5), Error);
}

TEST(Compat, RestrictedEigenvalueBelowCompatibility) {
  // |b_S|_1^2 <= |S| |b_S|_2^2, so kappa^2(S) <= phi^2(S) at L = 1.
  Rng r(14);
  for (int i = 0; i < 10; ++i) {
    const int p = r.integer(2, 5);
    const GramMatrix g = testsupport::random_gram(r, p, r.integer(2, 6));
    const IndexSet s = p > 2 ? IndexSet{0, 1} : IndexSet{0};
    const CompatReport rep = compatibility_with_eigen(g, s);
    ASSERT_TRUE(rep.restricted_eigenvalue);
    EXPECT_LE(*rep.restricted_eigenvalue, rep.value + 1e-8);
  }
  const GramMatrix pb = build_gram(DesignSpec::pair_blocks({0.5, 0.75}));
  EXPECT_NEAR(restricted_eigenvalue(pb, {0, 1, 2, 3}).value, 0.25, 1e-8);
}

TEST(Compat, NonFairDesignHasZeroCompatibility) {
  Matrix a = Matrix::Identity(3, 3);
  a(0, 1) = a(1, 0) = -1.0;
  EXPECT_EQ(compatibility(GramMatrix(a), {0}).value, 0.0);
}

// ---------------------------------------------------------------- oracle

TEST(Oracle, PairCasesAndBoundaries) {
  const double rho = 0.5, lam = 0.1, f = 1.0 - rho;
  const auto c1 = detail::pair_exact(1.0, 1.0, rho, lam);
  EXPECT_EQ(c1.case_no, 1);
  EXPECT_NEAR(c1.prediction, 2.0 * lam * lam / f, 1e-15);
  const auto c2 = detail::pair_exact(1.0, 0.1, rho, lam);
  EXPECT_EQ(c2.case_no, 2);
  EXPECT_NEAR(c2.prediction, 0.0175, 1e-15);
  const auto c3 = detail::pair_exact(0.1, 0.1, rho, 0.2);
  EXPECT_EQ(c3.case_no, 3);
  // lambda / varphi2 = b2 sits on the case 1 / case 2 boundary.
  EXPECT_EQ(detail::pair_exact(1.0, 0.5, rho, 0.25).case_no, 1);
}

TEST(Oracle, ClosedFormsSolveTheLassoAcrossFamilies) {
  Rng r(15);
  for (Family f : testsupport::closed_form_families()) {
    int applicable = 0;
    for (int i = 0; i < 40; ++i) {
      const DesignSpec spec = testsupport::random_spec(r, f);
      const GramMatrix g = build_gram(spec);
      Vector b0 = Vector::Zero(g.p());
      const double sg = r.coin() ? 1.0 : -1.0;
      for (int j : family_active_set(spec)) b0[j] = sg * r.uniform(0.05, 3.0);
      const double lam = r.log_uniform(0.005, 0.5);
      const OracleSolution o = closed_form(spec, b0, lam);
      if (!o.applicable) continue;
      ++applicable;
      EXPECT_LT(kkt_residual(g, b0, lam, o.beta_star), 1e-10) << family_name(f) << " " << o.case_id;
      const ProblemInstance inst(g, b0, lam);
      const LassoSolution sol = solve_noiseless(inst);
      if (o.segment) {
        EXPECT_NEAR(lasso_objective(inst, sol.beta_star), lasso_objective(inst, o.beta_star), 1e-10);
      } else {
        EXPECT_LT((sol.beta_star - o.beta_star).lpNorm<Eigen::Infinity>(), 1e-7)
            << family_name(f) << " " << o.case_id;
      }
      EXPECT_NEAR(o.prediction_error, prediction_error(g, b0, o.beta_star), 1e-12);
    }
    EXPECT_GE(applicable, 10) << family_name(f);
  }
}

TEST(Oracle, SegmentEndpointsAreMinimizers) {
  const DesignSpec spec = DesignSpec::good_lasso3(0.5);
  const Vector b0{{1, 1, 0, 0}};
  const OracleSolution o = closed_form(spec, b0, 0.1);
  ASSERT_TRUE(o.segment);
  const GramMatrix g = build_gram(spec);
  const Vector end = o.beta_star + o.segment->t_max * o.segment->direction;
  EXPECT_LT(kkt_residual(g, b0, 0.1, end), 1e-10);
  const ProblemInstance inst(g, b0, 0.1);
  EXPECT_NEAR(lasso_objective(inst, end), lasso_objective(inst, o.beta_star), 1e-12);
}

TEST(Oracle, InapplicableInputsAreReported) {
  const OracleSolution o = closed_form(DesignSpec::two_var(0.5), Vector{{1.0, -1.0}}, 0.1);
  EXPECT_FALSE(o.applicable);
  EXPECT_FALSE(o.reason.empty());
  EXPECT_THROW(closed_form(DesignSpec::custom_matrix(Matrix::Identity(2, 2)), Vector::Zero(2), 0.1),
               UnsupportedFamily);
}

// ---------------------------------------------------------------- bounds

TEST(Bounds, CandidateSubsets) {
  EXPECT_EQ(candidate_subsets(4, {0}, 10).size(), 16u);
  const auto big = candidate_subsets(12, {0, 1}, 10);
  std::set<IndexSet> uniq(big.begin(), big.end());
  EXPECT_EQ(uniq.size(), big.size());
  EXPECT_TRUE(uniq.count(IndexSet{0, 1}));
  EXPECT_TRUE(uniq.count(IndexSet{}));
  EXPECT_TRUE(uniq.count(IndexSet{11}));
}

TEST(Bounds, OrderingAndSoundness) {
  Rng r(16);
  for (int i = 0; i < 40; ++i) {
    const DesignSpec spec = testsupport::random_spec(r, testsupport::closed_form_families()[i % 13]);
    const GramMatrix g = build_gram(spec);
    const ProblemInstance inst(g, testsupport::random_beta0(r, g.p()), r.log_uniform(0.01, 1.0));
    const BoundReport rep = gap_report(inst);
    EXPECT_DOUBLE_EQ(rep.u1, std::min(rep.basic_bound_compat, rep.basic_bound_l1));
    // S = S0 in U_II gives lambda^2 s0 / phi^2; (S0, beta0) in U_III gives the same.
    EXPECT_LE(rep.u2, rep.basic_bound_compat * (1 + 1e-12) + 1e-15);
    EXPECT_LE(rep.u3, rep.basic_bound_compat * (1 + 1e-12) + 1e-15);
    // S = empty in U_II gives 2 lambda |b0|_1.
    EXPECT_LE(rep.u2, 2.0 * rep.basic_bound_l1 * (1 + 1e-12));
    const double pred = rep.exact_prediction_error;
    EXPECT_LE(pred, rep.u1 + 1e-8);
    EXPECT_LE(pred, rep.u2 + 1e-8);
    EXPECT_LE(pred, rep.u3 + 1e-8);
    EXPECT_LE(pred + inst.lambda * rep.solution.beta_star.lpNorm<1>(), rep.basic_bound_l1 + 1e-8);
    EXPECT_LE(rep.exact_penalized_error, rep.basic_bound_compat + 1e-8);
  }
}

TEST(Bounds, EqualBoundsWhenS0IsOptimal) {
  const ProblemInstance inst(build_gram(DesignSpec::two_var(0.5)), Vector{{1, 1}}, 0.1);
  const BoundReport rep = gap_report(inst, DesignSpec::two_var(0.5));
  EXPECT_NEAR(rep.u1, 0.04, 1e-12);
  EXPECT_NEAR(rep.u2, 0.04, 1e-12);
  EXPECT_NEAR(rep.u3, 0.04, 1e-12);
  EXPECT_NEAR(rep.gap_u1, 1.0, 1e-9);
  ASSERT_TRUE(rep.oracle);
  EXPECT_LT(rep.oracle_discrepancy, 1e-12);
}

TEST(Bounds, ZeroExactErrorGivesInfiniteGap) {
  const ProblemInstance inst(GramMatrix::identity(2), Vector::Zero(2), 0.1);
  const BoundReport rep = gap_report(inst);
  EXPECT_TRUE(rep.exact_is_zero);
  EXPECT_EQ(rep.u1, 0.0);
  EXPECT_EQ(rep.gap_u1, 1.0);
}

// ---------------------------------------------------------------- parallel

TEST(Parallel, EveryIndexOnceAndExceptionsPropagate) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; }, 4);
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(
                   100, [](std::size_t i) { if (i == 37) throw Error("boom"); }, 3),
               Error);
}

// ---------------------------------------------------------------- noisy

namespace {

NoisyExperiment identity_experiment(const Vector& b0, double lambda, int trials, std::uint64_t seed = 42) {
  NoisyConfig cfg;
  cfg.lambda = lambda;
  cfg.trials = trials;
  cfg.seed = seed;
  const GramMatrix g = GramMatrix::identity(static_cast<int>(b0.size()));
  return NoisyExperiment(ProblemInstance(g, b0, lambda), factorize(g, cfg.n), cfg);
}

} // namespace

TEST(Noisy, Lambda0Formula) {
  EXPECT_NEAR(lambda0(8, 200, 0.05), std::sqrt(2.0 * std::log(320.0) / 200.0), 1e-15);
  EXPECT_NEAR(lambda0(8, 200, 0.05), 0.2402, 5e-5);
}

TEST(Noisy, PreconditionIsEnforced) {
  EXPECT_THROW(identity_experiment(Vector::Zero(4), 0.6, 10), PreconditionError);
  EXPECT_NO_THROW(identity_experiment(Vector::Zero(4), 0.7, 10));
  NoisyConfig cfg;
  cfg.lambda = 0.6;
  cfg.enforce_precondition = false;
  const GramMatrix g = GramMatrix::identity(4);
  const NoisyExperiment ex(ProblemInstance(g, Vector::Zero(4), 0.6), factorize(g, 100), cfg);
  EXPECT_FALSE(ex.precondition_holds());
}

TEST(Noisy, RejectsLongColumnsAndMismatchedFactors) {
  NoisyConfig cfg;
  cfg.lambda = 0.9;
  Matrix s = 4.0 * Matrix::Identity(2, 2);
  const GramMatrix g(s);
  EXPECT_THROW(NoisyExperiment(ProblemInstance(g, Vector::Zero(2), 0.9), factorize(g, 100), cfg),
               PreconditionError);
  const GramMatrix id = GramMatrix::identity(2);
  EXPECT_THROW(NoisyExperiment(ProblemInstance(id, Vector::Zero(2), 0.9), factorize(id, 50), cfg), Error);
}

TEST(Noisy, NoiseHasVarianceOneOverN) {
  const NoisyExperiment ex = identity_experiment(Vector::Zero(4), 0.7, 1);
  double sum = 0.0, sq = 0.0;
  int count = 0;
  for (int t = 0; t < 200; ++t) {
    const Vector e = ex.noise(t);
    sum += e.sum();
    sq += e.squaredNorm();
    count += static_cast<int>(e.size());
  }
  EXPECT_NEAR(sum / count, 0.0, 4.0 * 0.1 / std::sqrt(count));
  EXPECT_NEAR(sq / count, 0.01, 0.01 * 4.0 * std::sqrt(2.0 / count));
  EXPECT_EQ(ex.noise(5), ex.noise(5));
  EXPECT_NE(ex.noise(5), ex.noise(6));
}

TEST(Noisy, ZeroBetaGivesNoiseOnlyRhs) {
  const NoisyExperiment ex = identity_experiment(Vector::Zero(4), 0.7, 1);
  EXPECT_EQ(ex.beta_star().lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_NEAR(ex.rhs_gram(), std::sqrt(2.0 * std::log(20.0) / 100.0), 1e-15);
}

TEST(Noisy, GramRhsByHand) {
  // Identity, beta0 = (1, 1, 0, 0), lambda = 0.7: beta* = (0.3, 0.3, 0, 0), bias = 0.7 sqrt 2.
  const NoisyExperiment ex = identity_experiment(Vector{{1, 1, 0, 0}}, 0.7, 1);
  EXPECT_NEAR(ex.bias(), 0.7 * std::sqrt(2.0), 1e-12);
  const double want = std::sqrt(1.0 / (100.0 * 0.49 * 0.25)) * 0.7 * std::sqrt(2.0) +
                      std::sqrt(2.0 * std::log(20.0) / 100.0);
  EXPECT_NEAR(ex.rhs_gram(), want, 1e-12);
}

TEST(Noisy, ZeroNoiseHookGivesZeroLhs) {
  NoisyConfig cfg;
  cfg.lambda = 0.7;
  cfg.trials = 1;
  cfg.noise_scale = 0.0;
  const GramMatrix g = GramMatrix::identity(4);
  const NoisyExperiment ex(ProblemInstance(g, Vector{{1, 1, 0, 0}}, 0.7), factorize(g, 100), cfg);
  const CoverageReport rep = coverage(ex);
  EXPECT_NEAR(rep.rows[0].lhs, 0.0, 1e-9);
  EXPECT_EQ(rep.empirical_coverage, 1.0);
}

TEST(Noisy, CoverageIsDeterministicAndScheduleIndependent) {
  const NoisyExperiment ex = identity_experiment(Vector{{1, 1, 0, 0}}, 0.7, 300, 7);
  ::setenv("LASSOCOMPAT_THREADS", "1", 1);
  const CoverageReport a = coverage(ex);
  ::setenv("LASSOCOMPAT_THREADS", "4", 1);
  const CoverageReport b = coverage(ex);
  ::unsetenv("LASSOCOMPAT_THREADS");
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].lhs, b.rows[i].lhs);
    EXPECT_EQ(a.rows[i].violation, b.rows[i].violation);
  }
  EXPECT_EQ(a.mean_lhs, b.mean_lhs);
  EXPECT_EQ(a.violations, b.violations);
}

TEST(Noisy, TriangleInequalityPerTrial) {
  const NoisyExperiment ex = identity_experiment(Vector{{1, 0.5, 0, 0}}, 0.7, 100);
  for (const TrialResult& t : coverage(ex).rows) EXPECT_GE(t.total, t.bias - t.lhs - 1e-10);
}

TEST(Noisy, Sigma0EqualToSigmaHatMatchesDirectRhs) {
  const GramMatrix g = build_gram(DesignSpec::two_var(0.5));
  NoisyConfig cfg;
  cfg.n = 200;
  cfg.lambda = 0.5;
  cfg.trials = 200;
  cfg.sigma0 = g;
  const NoisyExperiment ex(ProblemInstance(g, Vector{{1, 1}}, 0.5), factorize(g, 200), cfg);
  EXPECT_EQ(ex.xi(), 0.0);
  const double direct = std::sqrt(g.lambda_max()) * ex.bias() / (0.5 * 0.5) + std::sqrt(2.0 * std::log(20.0) / 200.0);
  const CoverageReport rep = coverage_sigma0(ex);
  EXPECT_EQ(rep.xi_condition_failures, 0);
  for (const TrialResult& t : rep.rows) {
    EXPECT_NEAR(t.rhs, direct, 1e-12);
    EXPECT_EQ(t.violation, t.lhs > direct);
  }
}

TEST(Noisy, PerturbedSigma0Xi) {
  const GramMatrix g = build_gram(DesignSpec::two_var(0.5));
  Matrix s0 = g.matrix();
  s0(0, 1) += 0.01;
  s0(1, 0) += 0.01;
  NoisyConfig cfg;
  cfg.n = 200;
  cfg.lambda = 0.5;
  cfg.trials = 5;
  cfg.sigma0 = GramMatrix(s0);
  const NoisyExperiment ex(ProblemInstance(g, Vector{{1, 1}}, 0.5), factorize(g, 200), cfg);
  // Case 1: beta* - beta0 = -(lambda / varphi2)(1, 1) with varphi2 = 0.5, so |.|_1 = 2.
  EXPECT_NEAR(ex.xi(), 0.02, 1e-12);
  EXPECT_TRUE(ex.xi_condition_holds());

  Matrix far = g.matrix();
  far(0, 1) = far(1, 0) = 0.4;
  cfg.sigma0 = GramMatrix(far);
  const NoisyExperiment bad(ProblemInstance(g, Vector{{1, 1}}, 0.5), factorize(g, 200), cfg);
  EXPECT_FALSE(bad.xi_condition_holds());
  const CoverageReport rep = coverage_sigma0(bad);
  EXPECT_EQ(rep.xi_condition_failures, 5);
  EXPECT_EQ(rep.evaluated, 0);
  EXPECT_TRUE(std::isnan(rep.empirical_coverage));

  cfg.sigma0.reset();
  const NoisyExperiment none(ProblemInstance(g, Vector{{1, 1}}, 0.5), factorize(g, 200), cfg);
  EXPECT_THROW(none.xi(), MissingSigma0);
  EXPECT_THROW(run_trial_sigma0(none, 0), MissingSigma0);
}

TEST(Noisy, AsymptoticSweepTrendsDown) {
  const auto pts = asymptotic_sweep({8, 32, 128}, 400, 6.0, 0.5, 5.0, 40, 1);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_GT(pts[0].ratio, pts[1].ratio);
  EXPECT_GT(pts[1].ratio, pts[2].ratio);
}

// ---------------------------------------------------------------- scenarios

TEST(Scenarios, CatalogLoadsSortedAndPasses) {
  const std::vector<Scenario> list = load_catalog(catalog_path());
  EXPECT_GE(list.size(), 20u);
  for (std::size_t i = 1; i < list.size(); ++i) EXPECT_LT(list[i - 1].id, list[i].id);
  for (const ScenarioResult& r : run_scenarios(list)) {
    EXPECT_TRUE(r.pass) << r.id;
    for (const std::string& f : r.failures) ADD_FAILURE() << r.id << ": " << f;
  }
}

TEST(Scenarios, SelfValidationRejectsWrongExpectations) {
  const std::string good = R"([{"id": "x", "design": {"family": "twovar", "rho": 0.5},
      "beta0": [1, 1], "lambda": 0.1, "expected": {"prediction_error": 0.04}}])";
  EXPECT_EQ(load_catalog_text(good).size(), 1u);
  std::string bad = good;
  bad.replace(bad.find("0.04"), 4, "0.05");
  EXPECT_THROW(load_catalog_text(bad), ParseError);
  const std::string dup = R"([{"id": "x", "design": {"identity": 2}, "beta0": [0, 0], "lambda": 0.1},
                              {"id": "x", "design": {"identity": 2}, "beta0": [0, 0], "lambda": 0.1}])";
  EXPECT_THROW(load_catalog_text(dup), ParseError);
  const std::string wrong_case = R"([{"id": "x", "design": {"family": "twovar", "rho": 0.5},
      "beta0": [1, 1], "lambda": 0.1, "expected": {"case": "case2"}}])";
  EXPECT_THROW(load_catalog_text(wrong_case), ParseError);
}

TEST(Scenarios, FailingCheckIsReported) {
  // Consistent with no closed form (custom design), so only the runtime check can catch it.
  const std::string text = R"([{"id": "custom", "design": {"family": "custom", "matrix": [[1, 0], [0, 1]]},
      "beta0": [1, 0], "lambda": 0.1, "expected": {"prediction_error": 0.5}}])";
  const auto list = load_catalog_text(text);
  const ScenarioResult r = run_scenario(list[0]);
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.failures.empty());
  EXPECT_NEAR(r.exact, 0.01, 1e-12);
}

TEST(Scenarios, ResultTableIsStable) {
  const auto list = load_catalog(catalog_path());
  const std::string a = result_table(run_scenarios(list));
  const std::string b = result_table(run_scenarios(list));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')), "id,kind,exact,oracle,u1,u2,u3,bound,gap,max_error,status");
}
