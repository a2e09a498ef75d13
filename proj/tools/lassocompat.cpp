#include "lassocompat/bounds.hpp"
#include "lassocompat/compat.hpp"
#include "lassocompat/io.hpp"
#include "lassocompat/noisy.hpp"
#include "lassocompat/scenario.hpp"
#include "lassocompat/solver.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#ifndef LASSOCOMPAT_DEFAULT_CATALOG
#define LASSOCOMPAT_DEFAULT_CATALOG "data/scenarios.json"
#endif

using namespace lassocompat;
namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 2;
constexpr int kExitReproduce = 3;

struct DesignArgs {
  std::string design, rho, c, tau2, gamma, gram_file, spec_file;
  double theta = 0.0;
  int m0 = 0;
  int p = 0;

  void attach(CLI::App* app) {
    app->add_option("--design", design, "design family (see list-designs) or 'identity'");
    app->add_option("--rho", rho, "rho value(s), comma separated");
    app->add_option("--c", c, "C value(s), comma separated");
    app->add_option("--tau2", tau2, "tau^2 value(s), comma separated");
    app->add_option("--theta", theta, "theta for the child-parent families");
    app->add_option("--gamma", gamma, "gamma weights, comma separated");
    app->add_option("--m0", m0, "number of orthogonal inactive columns");
    app->add_option("--p", p, "dimension of the identity design");
    app->add_option("--gram-file", gram_file, "Gram matrix as headerless CSV");
    app->add_option("--spec-file", spec_file, "design spec as JSON");
  }

  static std::vector<double> list(const std::string& s) {
    if (s.empty()) return {};
    const Vector v = parse_vector(s);
    return {v.data(), v.data() + v.size()};
  }

  /// The spec plus whether it came from a named family.
  DesignSpec spec() const {
    const int sources = !design.empty() + !gram_file.empty() + !spec_file.empty();
    if (sources != 1) throw ParseError("give exactly one of --design, --gram-file, --spec-file");
    if (!gram_file.empty()) return DesignSpec::custom_matrix(read_matrix_csv(gram_file));
    if (!spec_file.empty()) return design_from_json(Json::parse(read_text_file(spec_file)));
    if (design == "identity") {
      if (p < 1) throw ParseError("--design identity needs --p");
      return DesignSpec::custom_matrix(Matrix::Identity(p, p));
    }
    Json j;
    j["family"] = design;
    if (!rho.empty()) j["rho"] = list(rho);
    if (!c.empty()) j["c"] = list(c);
    if (!tau2.empty()) j["tau2"] = list(tau2);
    if (!gamma.empty()) j["gamma"] = list(gamma);
    j["theta"] = theta;
    j["m0"] = m0;
    return spec_from_json(j);
  }
};

struct Output {
  std::string dir;

  void write(const std::string& name, const std::string& text) const {
    if (dir.empty()) return;
    fs::create_directories(dir);
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    f << text;
    if (!f) throw Error("cannot write " + (fs::path(dir) / name).string());
  }
};

Json summary(const std::string& id, Json inputs, Json outputs, bool pass) {
  Json j;
  j["scenario_id"] = id;
  j["inputs"] = std::move(inputs);
  j["outputs"] = std::move(outputs);
  j["pass"] = pass;
  return j;
}

Json json_number(double x) {
  if (std::isfinite(x)) return x;
  return fmt17(x);
}

std::optional<DesignSpec> named(const DesignSpec& s) {
  if (s.family == Family::Custom) return std::nullopt;
  return s;
}

int cmd_solve(const DesignArgs& da, const std::string& beta0_text, double lambda, double tol,
              const Output& out) {
  const DesignSpec spec = da.spec();
  const ProblemInstance inst(build_gram(spec), parse_vector(beta0_text), lambda);
  SolverOptions so;
  so.tol = tol;
  const LassoSolution sol = solve_noiseless(inst, so);
  const UniquenessVerdict uv = uniqueness_probe(inst, tol);
  if (!uv.unique)
    std::cerr << "warning: non-unique minimizer (two solutions with equal objective differ by "
              << fmt17(uv.separation) << " in sup-norm)\n";

  std::string csv = "index,beta0,beta_star,subgradient\n";
  for (int j = 0; j < inst.p(); ++j)
    csv += std::to_string(j + 1) + "," + fmt17(inst.beta0[j]) + "," + fmt17(sol.beta_star[j]) + "," +
           fmt17(sol.subgradient[j]) + "\n";
  std::cout << csv;
  std::cout << "prediction_error," << fmt17(sol.prediction_error) << "\n"
            << "penalized_error," << fmt17(sol.penalized_value) << "\n"
            << "objective," << fmt17(sol.objective) << "\n"
            << "kkt_residual," << fmt17(sol.kkt_residual) << "\n"
            << "unique," << (uv.unique ? "true" : "false") << "\n";

  Json in;
  in["design"] = spec_to_json(spec);
  in["beta0"] = to_json(inst.beta0);
  in["lambda"] = lambda;
  Json o;
  o["beta_star"] = to_json(sol.beta_star);
  o["subgradient"] = to_json(sol.subgradient);
  o["prediction_error"] = sol.prediction_error;
  o["penalized_error"] = sol.penalized_value;
  o["objective"] = sol.objective;
  o["kkt_residual"] = sol.kkt_residual;
  o["iterations"] = sol.iterations;
  o["unique"] = uv.unique;
  out.write("solve.csv", csv);
  out.write("solve.json", summary("solve", in, o, true).dump(2) + "\n");
  return 0;
}

int cmd_compat(const DesignArgs& da, const std::string& set_text, double stretch, bool with_re,
               const Output& out) {
  const DesignSpec spec = da.spec();
  const GramMatrix gram = build_gram(spec);
  const IndexSet set = parse_set(set_text);
  const CompatReport rep =
      with_re ? compatibility_with_eigen(gram, set, stretch) : compatibility(gram, set, stretch);
  std::cout << "set," << format_set(rep.set) << "\n"
            << "stretch," << fmt17(rep.stretch) << "\n"
            << "phi2," << fmt17(rep.value) << "\n"
            << "effective_sparsity," << fmt17(rep.effective_sparsity) << "\n"
            << "lambda_min," << fmt17(rep.lambda_min) << "\n"
            << "lambda_max," << fmt17(rep.lambda_max) << "\n"
            << "certified," << (rep.certified ? "true" : "false") << "\n";
  if (rep.restricted_eigenvalue)
    std::cout << "restricted_eigenvalue," << fmt17(*rep.restricted_eigenvalue) << "\n"
              << "restricted_eigenvalue_status," << to_string(*rep.restricted_eigenvalue_status) << "\n";
  Json in;
  in["design"] = spec_to_json(spec);
  in["set"] = set_to_json(rep.set);
  in["stretch"] = stretch;
  Json o;
  o["phi2"] = rep.value;
  o["effective_sparsity"] = json_number(rep.effective_sparsity);
  o["minimizer"] = to_json(rep.minimizer);
  o["lambda_min"] = rep.lambda_min;
  o["lambda_max"] = rep.lambda_max;
  o["certified"] = rep.certified;
  if (rep.restricted_eigenvalue) {
    o["restricted_eigenvalue"] = *rep.restricted_eigenvalue;
    o["restricted_eigenvalue_status"] = std::string(to_string(*rep.restricted_eigenvalue_status));
  }
  out.write("compat.json", summary("compat", in, o, true).dump(2) + "\n");
  return 0;
}

int cmd_bounds(const DesignArgs& da, const std::string& beta0_text, double lambda, const Output& out) {
  const DesignSpec spec = da.spec();
  const ProblemInstance inst(build_gram(spec), parse_vector(beta0_text), lambda);
  const BoundReport rep = gap_report(inst, named(spec));
  std::string csv = "quantity,value\n";
  auto row = [&](const std::string& k, double v) { csv += k + "," + fmt17(v) + "\n"; };
  row("exact_prediction_error", rep.exact_prediction_error);
  row("exact_penalized_error", rep.exact_penalized_error);
  row("basic_bound_l1", rep.basic_bound_l1);
  row("basic_bound_compat", rep.basic_bound_compat);
  row("phi2_s0", rep.phi2_s0);
  row("u1", rep.u1);
  row("u2", rep.u2);
  row("u3_relaxed", rep.u3);
  row("gap_u1", rep.gap_u1);
  row("gap_u2", rep.gap_u2);
  row("gap_u3", rep.gap_u3);
  row("gap_compat_penalized", rep.gap_compat_penalized);
  if (rep.oracle && rep.oracle->applicable) {
    row("oracle_prediction_error", rep.oracle->prediction_error);
    row("oracle_penalized_error", rep.oracle->penalized_error);
  }
  csv += "u2_argmin_set," + format_set(rep.u2_argmin_set) + "\n";
  csv += "u3_argmin_set," + format_set(rep.u3_argmin_set) + "\n";
  if (rep.exact_is_zero) csv += "note,exact error is zero; gap ratios are flagged\n";
  std::cout << csv;

  Json in;
  in["design"] = spec_to_json(spec);
  in["beta0"] = to_json(inst.beta0);
  in["lambda"] = lambda;
  Json o;
  o["exact_prediction_error"] = rep.exact_prediction_error;
  o["exact_penalized_error"] = rep.exact_penalized_error;
  o["u1"] = json_number(rep.u1);
  o["u2"] = json_number(rep.u2);
  o["u3"] = json_number(rep.u3);
  o["u3_relaxed"] = rep.u3_relaxed;
  o["u2_argmin_set"] = set_to_json(rep.u2_argmin_set);
  o["u3_argmin_set"] = set_to_json(rep.u3_argmin_set);
  o["basic_bound_l1"] = rep.basic_bound_l1;
  o["basic_bound_compat"] = json_number(rep.basic_bound_compat);
  o["gap_u1"] = json_number(rep.gap_u1);
  o["gap_u2"] = json_number(rep.gap_u2);
  o["gap_u3"] = json_number(rep.gap_u3);
  o["exact_is_zero"] = rep.exact_is_zero;
  const bool sound = rep.exact_prediction_error <= std::min({rep.u1, rep.u2, rep.u3}) + 1e-8;
  out.write("bounds.csv", csv);
  out.write("bounds.json", summary("bounds", in, o, sound).dump(2) + "\n");
  return 0;
}

int cmd_reproduce(const std::string& which, const std::string& catalog, const Output& out) {
  std::vector<Scenario> list = load_catalog(catalog);
  if (which != "all") {
    std::erase_if(list, [&](const Scenario& s) { return s.id != which; });
    if (list.empty()) throw ParseError("no scenario with id '" + which + "'");
  }
  const std::vector<ScenarioResult> rows = run_scenarios(list);
  const std::string table = result_table(rows);
  std::cout << table;
  std::vector<std::string> failed;
  Json all = Json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Scenario& s = list[i];
    const ScenarioResult& r = rows[i];
    Json in;
    in["kind"] = std::string(kind_name(s.kind));
    in["design"] = s.spec.family == Family::Custom ? Json{{"custom_p", design_dimension(s.spec)}}
                                                   : spec_to_json(s.spec);
    if (s.beta0.size()) in["beta0"] = to_json(s.beta0);
    if (s.kind != ScenarioKind::Compat) in["lambda"] = s.lambda;
    if (!s.set.empty()) in["set"] = set_to_json(s.set);
    Json o = r.outputs;
    if (!r.failures.empty()) o["failures"] = r.failures;
    all.push_back(summary(s.id, in, o, r.pass));
    if (!r.pass) {
      failed.push_back(r.id);
      for (const std::string& f : r.failures) std::cerr << r.id << ": " << f << "\n";
    }
  }
  out.write("reproduce.csv", table);
  out.write("reproduce.json", all.dump(2) + "\n");
  std::cout << rows.size() - failed.size() << "/" << rows.size() << " scenarios passed\n";
  if (!failed.empty()) {
    std::cerr << "failing scenarios:";
    for (const auto& id : failed) std::cerr << " " << id;
    std::cerr << "\n";
    return kExitReproduce;
  }
  return 0;
}

struct CoverageArgs {
  std::string beta0, sigma0_file;
  double lambda = 0.0;
  NoisyConfig cfg;
  bool strict = false;
};

int cmd_coverage(const DesignArgs& da, const CoverageArgs& ca, const Output& out) {
  const DesignSpec spec = da.spec();
  const GramMatrix gram = build_gram(spec);
  NoisyConfig cfg = ca.cfg;
  cfg.lambda = ca.lambda;
  cfg.enforce_precondition = ca.strict;
  if (!ca.sigma0_file.empty()) cfg.sigma0 = GramMatrix(read_matrix_csv(ca.sigma0_file));
  const Vector b0 = ca.beta0.empty() ? Vector::Zero(gram.p()) : parse_vector(ca.beta0);
  const NoisyExperiment ex(ProblemInstance(gram, b0, cfg.lambda), factorize(gram, cfg.n), cfg);
  if (!ex.precondition_holds())
    std::cerr << "warning: eta * lambda = " << fmt17(cfg.eta * cfg.lambda)
              << " does not exceed lambda0 = " << fmt17(ex.lambda0()) << "; the bound is not guaranteed\n";
  const CoverageReport rep = cfg.sigma0 ? coverage_sigma0(ex) : coverage(ex);

  std::string csv = "trial,lhs,rhs,violation,bias,total,xi,xi_condition_failure\n";
  for (const TrialResult& t : rep.rows)
    csv += std::to_string(t.trial) + "," + fmt17(t.lhs) + "," + fmt17(t.rhs) + "," +
           (t.violation ? "1" : "0") + "," + fmt17(t.bias) + "," + fmt17(t.total) + "," + fmt17(t.xi) +
           "," + (t.xi_condition_failure ? "1" : "0") + "\n";
  Json in;
  in["design"] = named(spec) ? spec_to_json(spec) : Json{{"custom_p", gram.p()}};
  in["beta0"] = to_json(b0);
  in["lambda"] = cfg.lambda;
  in["n"] = cfg.n;
  in["eta"] = cfg.eta;
  in["alpha"] = cfg.alpha;
  in["alpha1"] = cfg.alpha1;
  in["trials"] = cfg.trials;
  in["seed"] = cfg.seed;
  in["sigma0"] = cfg.sigma0.has_value();
  Json o;
  o["trials"] = rep.trials;
  o["evaluated"] = rep.evaluated;
  o["violations"] = rep.violations;
  o["empirical_coverage"] = json_number(rep.empirical_coverage);
  o["nominal"] = rep.nominal;
  o["mean_lhs"] = rep.mean_lhs;
  o["mean_rhs"] = json_number(rep.mean_rhs);
  o["xi_condition_failures"] = rep.xi_condition_failures;
  o["lambda0"] = rep.lambda0;
  o["precondition_holds"] = rep.precondition_holds;
  const bool pass = rep.evaluated > 0 && rep.empirical_coverage >= rep.nominal;
  const Json sum = summary("coverage", in, o, pass);
  std::cout << sum.dump(2) << "\n";
  out.write("coverage.csv", csv);
  out.write("coverage.json", sum.dump(2) + "\n");
  return 0;
}

int cmd_list_designs() {
  struct Row {
    Family f;
    const char* params;
    const char* columns;
  };
  const Row rows[] = {
      {Family::TwoVar, "--rho r", "2"},
      {Family::PairBlocks, "--rho r1,...,rN", "2N"},
      {Family::PairBlocksPlusOrthogonal, "--rho r1,...,rN --m0 m", "2N+m"},
      {Family::ParentChildSingle, "--rho r --c C", "3"},
      {Family::ParentChildMany, "--rho r --c C1,...,Ck", "2+k"},
      {Family::ParentChildBlock2N, "--rho r1,...,rN --c C", "2N+1"},
      {Family::GoodComp, "--rho r --c C --tau2 t", "4"},
      {Family::GoodLasso2, "--rho r --c C", "4"},
      {Family::GoodLasso3, "--rho r", "4"},
      {Family::BlockGoodComp2N, "--rho r1,...,rN --c C1,...,CN --tau2 t1,...,tN", "4N"},
      {Family::ChildParentGamma, "--theta t --gamma g3[,g4]", "4"},
      {Family::ChildParentSym, "--theta t --c C", "4"},
      {Family::ChildParentOrthoInactive, "--c C --gamma g1,...,gm", "2+m"},
  };
  std::cout << "family,parameters,columns\n";
  for (const Row& r : rows) std::cout << family_name(r.f) << "," << r.params << "," << r.columns << "\n";
  std::cout << "identity,--p p,p\n";
  std::cout << "(any),--gram-file g.csv | --spec-file s.json,p\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact noiseless Lasso errors, compatibility constants and oracle bounds"};
  app.require_subcommand(1);
  Output out;
  app.add_option("--out", out.dir, "directory for CSV and JSON artifacts");

  DesignArgs solve_da, compat_da, bounds_da, cov_da;
  std::string beta0, set_text, scenario = "all", catalog = LASSOCOMPAT_DEFAULT_CATALOG;
  double lambda = 0.0, tol = 1e-10, stretch = 1.0;
  bool with_re = false;
  CoverageArgs ca;

  auto* solve = app.add_subcommand("solve", "solve the noiseless Lasso");
  solve_da.attach(solve);
  solve->add_option("--beta0", beta0, "true coefficients")->required();
  solve->add_option("--lambda", lambda, "tuning parameter")->required();
  solve->add_option("--tol", tol, "KKT tolerance");
  solve->add_option("--out", out.dir, "directory for CSV and JSON artifacts");

  auto* compat = app.add_subcommand("compat", "compatibility constant of a column set");
  compat_da.attach(compat);
  compat->add_option("--set", set_text, "1-based column indices")->required();
  compat->add_option("--stretch", stretch, "stretching factor L >= 1");
  compat->add_flag("--restricted-eigenvalue", with_re, "also compute the restricted eigenvalue");
  compat->add_option("--out", out.dir, "directory for CSV and JSON artifacts");

  auto* bounds = app.add_subcommand("bounds", "exact error against the oracle bounds");
  bounds_da.attach(bounds);
  bounds->add_option("--beta0", beta0, "true coefficients")->required();
  bounds->add_option("--lambda", lambda, "tuning parameter")->required();
  bounds->add_option("--out", out.dir, "directory for CSV and JSON artifacts");

  auto* reproduce = app.add_subcommand("reproduce", "run catalog scenarios");
  reproduce->add_option("scenario", scenario, "scenario id or 'all'");
  reproduce->add_option("--catalog", catalog, "scenario catalog (JSON)");
  reproduce->add_option("--out", out.dir, "directory for CSV and JSON artifacts");

  auto* cov = app.add_subcommand("coverage", "Monte Carlo coverage of the noisy-case bound");
  cov_da.attach(cov);
  cov->add_option("--beta0", ca.beta0, "true coefficients (default 0)");
  cov->add_option("--lambda", ca.lambda, "tuning parameter")->required();
  cov->add_option("--n", ca.cfg.n, "sample size");
  cov->add_option("--eta", ca.cfg.eta, "eta in [0,1)");
  cov->add_option("--alpha", ca.cfg.alpha, "alpha");
  cov->add_option("--alpha1", ca.cfg.alpha1, "alpha1");
  cov->add_option("--trials", ca.cfg.trials, "number of trials");
  cov->add_option("--seed", ca.cfg.seed, "random seed");
  cov->add_option("--sigma0-file", ca.sigma0_file, "approximating Gram matrix (CSV)");
  cov->add_flag("--strict", ca.strict, "fail instead of warning when eta * lambda <= lambda0");
  cov->add_option("--out", out.dir, "directory for CSV and JSON artifacts");

  auto* list = app.add_subcommand("list-designs", "list the design families and their parameters");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return cmd_solve(solve_da, beta0, lambda, tol, out);
    if (*compat) return cmd_compat(compat_da, set_text, stretch, with_re, out);
    if (*bounds) return cmd_bounds(bounds_da, beta0, lambda, out);
    if (*reproduce) return cmd_reproduce(scenario, catalog, out);
    if (*cov) return cmd_coverage(cov_da, ca, out);
    if (*list) return cmd_list_designs();
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
