// Walks through the library on the parent-child design: exact solution,
// compatibility constant, the three bounds, and a small coverage run.

#include "lassocompat/bounds.hpp"
#include "lassocompat/noisy.hpp"
#include "lassocompat/oracle.hpp"

#include <iostream>

using namespace lassocompat;

int main() {
  const DesignSpec spec = DesignSpec::parent_child(0.75, 2.0);
  const GramMatrix gram = build_gram(spec);
  const Vector beta0{{1.0, 0.8, 0.0}};
  const double lambda = 0.1;
  const ProblemInstance inst(gram, beta0, lambda);

  std::cout << "Gram matrix\n" << gram.matrix() << "\n\n";

  const LassoSolution sol = solve_noiseless(inst);
  std::cout << "beta* (solver)      " << sol.beta_star.transpose() << "\n";
  const OracleSolution exact = closed_form(spec, beta0, lambda);
  std::cout << "beta* (closed form) " << exact.beta_star.transpose() << "  [" << exact.case_id << "]\n";
  std::cout << "KKT residual        " << sol.kkt_residual << "\n\n";

  const CompatReport c = compatibility_with_eigen(gram, inst.active_set());
  std::cout << "phi2(S0) = " << c.value << ", effective sparsity = " << c.effective_sparsity
            << ", kappa2(S0) = " << c.restricted_eigenvalue.value_or(kInf) << "\n";

  const BoundReport rep = gap_report(inst, spec);
  std::cout << "exact prediction error " << rep.exact_prediction_error << ", penalized "
            << rep.exact_penalized_error << "\n";
  std::cout << "U_I = " << rep.u1 << ", U_II = " << rep.u2 << ", U_III = " << rep.u3 << "\n";
  std::cout << "lambda^2 s0 / phi2(S0) over penalized error: " << rep.gap_compat_penalized << "\n\n";

  NoisyConfig cfg;
  cfg.n = 400;
  cfg.lambda = 0.35;
  cfg.trials = 200;
  const NoisyExperiment ex(inst, factorize(gram, cfg.n), cfg);
  const CoverageReport cov = coverage(ex);
  std::cout << "noisy case: lambda0 = " << cov.lambda0 << ", coverage " << cov.empirical_coverage << " over "
            << cov.trials << " trials (nominal " << cov.nominal << "), mean lhs " << cov.mean_lhs
            << ", rhs " << cov.mean_rhs << "\n";
  return rep.exact_prediction_error <= rep.u1 + 1e-8 ? 0 : 1;
}
