#pragma once

#include "lassocompat/bounds.hpp"
#include "lassocompat/compat.hpp"
#include "lassocompat/io.hpp"
#include "lassocompat/noisy.hpp"
#include "lassocompat/oracle.hpp"

#include <map>
#include <string>
#include <vector>

namespace lassocompat {

enum class ScenarioKind { Lasso, Compat, Coverage };

/// One catalog entry. `expected` holds the closed-form quantities the run is
/// compared with; which keys are meaningful depends on the kind.
struct Scenario {
  std::string id;
  std::string claim;
  ScenarioKind kind = ScenarioKind::Lasso;
  DesignSpec spec;
  Vector beta0;
  double lambda = 0.0;
  IndexSet set;              // compat
  double stretch = 1.0;      // compat
  std::string closed_form;   // compat: name of the family constant to match
  Json coverage;             // coverage settings
  Json expected = Json::object();
};

inline constexpr double kScenarioTol = 1e-7;

namespace detail {

inline double expected_number(const Json& e, const char* key) { return e.at(key).get<double>(); }

inline double family_constant(const FamilyConstants& fc, const std::string& name) {
  if (name == "phi2_s0") return fc.phi2_s0;
  if (name == "gamma2_s0") return fc.gamma2_s0;
  const auto it = fc.named.find(name);
  if (it == fc.named.end()) throw ParseError("unknown family constant '" + name + "'");
  return it->second;
}

inline void check_close(const std::string& id, const char* what, double got, double want,
                        double tol = 1e-9) {
  const bool both_inf = std::isinf(got) && std::isinf(want) && (got > 0) == (want > 0);
  if (!both_inf && !(std::abs(got - want) <= tol * std::max(1.0, std::abs(want))))
    throw ParseError("scenario " + id + ": expected " + what + " = " + fmt17(want) +
                     " but the closed form gives " + fmt17(got));
}

/// The closed forms must reproduce every expected value they cover.
inline void self_validate(const Scenario& s) {
  if (s.spec.family == Family::Custom) return;
  const Json& e = s.expected;
  if (s.kind == ScenarioKind::Compat) {
    if (s.closed_form.empty()) return;
    const FamilyConstants fc = closed_form_family_constants(s.spec);
    check_close(s.id, "value", family_constant(fc, s.closed_form), expected_number(e, "value"));
    return;
  }
  if (s.kind != ScenarioKind::Lasso) return;
  const OracleSolution o = closed_form(s.spec, s.beta0, s.lambda);
  if (!o.applicable) throw ParseError("scenario " + s.id + ": closed form not applicable (" + o.reason + ")");
  const FamilyConstants& fc = o.constants;
  const double bound = s.lambda * s.lambda * fc.gamma2_s0;
  if (e.contains("beta_star")) {
    const Vector b = vector_from_json(e.at("beta_star"));
    if (b.size() != o.beta_star.size())
      throw ParseError("scenario " + s.id + ": beta_star has the wrong length");
    check_close(s.id, "beta_star", (b - o.beta_star).lpNorm<Eigen::Infinity>(), 0.0);
  }
  if (e.contains("case")) {
    if (e.at("case").get<std::string>() != o.case_id)
      throw ParseError("scenario " + s.id + ": expected case " + e.at("case").get<std::string>() +
                       " but the closed form gives " + o.case_id);
  }
  if (e.contains("prediction_error"))
    check_close(s.id, "prediction_error", o.prediction_error, expected_number(e, "prediction_error"));
  if (e.contains("penalized_error"))
    check_close(s.id, "penalized_error", o.penalized_error, expected_number(e, "penalized_error"));
  if (e.contains("phi2_s0")) check_close(s.id, "phi2_s0", fc.phi2_s0, expected_number(e, "phi2_s0"));
  if (e.contains("gamma2_s0"))
    check_close(s.id, "gamma2_s0", fc.gamma2_s0, expected_number(e, "gamma2_s0"));
  if (e.contains("bound_compat")) check_close(s.id, "bound_compat", bound, expected_number(e, "bound_compat"));
  if (e.contains("gap_ratio"))
    check_close(s.id, "gap_ratio", bound / o.penalized_error, expected_number(e, "gap_ratio"));
  if (e.contains("gap_difference")) {
    check_close(s.id, "gap_difference", bound - o.penalized_error, expected_number(e, "gap_difference"));
    check_close(s.id, "gap_difference", s.lambda * s.lambda * fc.tau_inv_l1,
                expected_number(e, "gap_difference"));
  }
}

inline ScenarioKind kind_from_name(const std::string& k) {
  if (k == "lasso") return ScenarioKind::Lasso;
  if (k == "compat") return ScenarioKind::Compat;
  if (k == "coverage") return ScenarioKind::Coverage;
  throw ParseError("unknown scenario kind '" + k + "'");
}

} // namespace detail

inline std::string_view kind_name(ScenarioKind k) {
  switch (k) {
  case ScenarioKind::Lasso: return "lasso";
  case ScenarioKind::Compat: return "compat";
  case ScenarioKind::Coverage: return "coverage";
  }
  return "?";
}

/// Design for a catalog entry: a family spec, or {"identity": p}.
inline DesignSpec design_from_json(const Json& j) {
  if (j.contains("identity")) {
    const int p = j.at("identity").get<int>();
    if (p < 1) throw ParseError("identity design needs p >= 1");
    return DesignSpec::custom_matrix(Matrix::Identity(p, p));
  }
  return spec_from_json(j);
}

inline Scenario scenario_from_json(const Json& j) {
  Scenario s;
  s.id = j.at("id").get<std::string>();
  try {
    s.claim = j.value("claim", "");
    s.kind = detail::kind_from_name(j.value("kind", "lasso"));
    s.spec = design_from_json(j.at("design"));
    if (j.contains("beta0")) s.beta0 = vector_from_json(j.at("beta0"));
    s.lambda = j.value("lambda", 0.0);
    if (j.contains("set")) s.set = set_from_json(j.at("set"));
    s.stretch = j.value("stretch", 1.0);
    s.closed_form = j.value("closed_form", "");
    if (j.contains("coverage")) s.coverage = j.at("coverage");
    if (j.contains("expected")) s.expected = j.at("expected");
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ParseError("scenario " + s.id + ": " + ex.what());
  }
  const int p = design_dimension(s.spec);
  if (s.kind != ScenarioKind::Compat && s.beta0.size() != p)
    throw ParseError("scenario " + s.id + ": beta0 needs " + std::to_string(p) + " entries");
  if (s.kind == ScenarioKind::Compat && s.set.empty())
    throw ParseError("scenario " + s.id + ": compat scenarios need a set");
  if (s.kind == ScenarioKind::Coverage && !s.coverage.is_object())
    throw ParseError("scenario " + s.id + ": coverage scenarios need a 'coverage' block");
  return s;
}

/// Parses the catalog (a JSON array), checks ids are unique, and self-validates
/// each entry against the closed forms. The result is sorted by id.
inline std::vector<Scenario> load_catalog_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& ex) {
    throw ParseError(std::string("catalog is not valid JSON: ") + ex.what());
  }
  const Json& list = j.is_object() ? j.at("scenarios") : j;
  std::vector<Scenario> out;
  for (const Json& e : list) out.push_back(scenario_from_json(e));
  std::sort(out.begin(), out.end(), [](const Scenario& a, const Scenario& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].id == out[i - 1].id) throw ParseError("duplicate scenario id " + out[i].id);
  for (const Scenario& s : out) detail::self_validate(s);
  return out;
}

inline std::vector<Scenario> load_catalog(const std::string& path) {
  return load_catalog_text(read_text_file(path));
}

/// Outcome of one scenario. Numbers absent for a kind stay NaN.
struct ScenarioResult {
  std::string id;
  ScenarioKind kind = ScenarioKind::Lasso;
  double exact = std::numeric_limits<double>::quiet_NaN();
  double oracle = std::numeric_limits<double>::quiet_NaN();
  double u1 = std::numeric_limits<double>::quiet_NaN();
  double u2 = std::numeric_limits<double>::quiet_NaN();
  double u3 = std::numeric_limits<double>::quiet_NaN();
  double bound = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  double max_error = 0.0; // largest deviation among the compared quantities
  bool pass = true;
  std::vector<std::string> failures;
  Json outputs = Json::object();
};

namespace detail {

class Checker {
public:
  explicit Checker(ScenarioResult& r) : r_(r) {}

  void close(const std::string& what, double got, double want, double tol = kScenarioTol) {
    r_.outputs[what] = got;
    if (std::isinf(got) && std::isinf(want) && (got > 0) == (want > 0)) return;
    const double err = std::abs(got - want);
    if (std::isfinite(err)) r_.max_error = std::max(r_.max_error, err);
    if (!(err <= tol)) fail(what + " = " + fmt17(got) + ", expected " + fmt17(want));
  }

  void at_most(const std::string& what, double got, double limit) {
    if (!(got <= limit)) fail(what + " = " + fmt17(got) + " exceeds " + fmt17(limit));
  }

  void holds(const std::string& what, bool ok) {
    if (!ok) fail(what);
  }

  void fail(std::string why) {
    r_.pass = false;
    r_.failures.push_back(std::move(why));
  }

private:
  ScenarioResult& r_;
};

inline void run_lasso(const Scenario& s, ScenarioResult& r, Checker& chk) {
  const Json& e = s.expected;
  const GramMatrix gram = build_gram(s.spec);
  const ProblemInstance inst(gram, s.beta0, s.lambda);
  const std::optional<DesignSpec> spec =
      s.spec.family == Family::Custom ? std::nullopt : std::optional<DesignSpec>(s.spec);
  const BoundReport rep = gap_report(inst, spec);
  r.exact = rep.exact_prediction_error;
  r.u1 = rep.u1;
  r.u2 = rep.u2;
  r.u3 = rep.u3;
  r.outputs["beta_star"] = to_json(rep.solution.beta_star);
  r.outputs["kkt_residual"] = rep.solution.kkt_residual;
  chk.at_most("solver KKT residual", rep.solution.kkt_residual, 1e-10);
  for (const auto& [name, v] : {std::pair{"u1", rep.u1}, {"u2", rep.u2}, {"u3", rep.u3}})
    chk.at_most(std::string("exact error vs ") + name, r.exact, v + 1e-8);

  bool segment = false;
  double penalized = rep.exact_penalized_error;
  Vector beta_ref = rep.solution.beta_star;
  if (rep.oracle) {
    const OracleSolution& o = *rep.oracle;
    chk.holds("closed form applicable", o.applicable);
    if (o.applicable) {
      r.oracle = o.prediction_error;
      segment = o.segment.has_value();
      const double kkt = kkt_residual(gram, s.beta0, s.lambda, o.beta_star);
      r.outputs["oracle_kkt_residual"] = kkt;
      chk.at_most("closed-form KKT residual", kkt, 1e-10);
      if (segment) {
        chk.close("objective(solver) - objective(closed form)",
                  lasso_objective(inst, rep.solution.beta_star) - lasso_objective(inst, o.beta_star), 0.0,
                  1e-10);
        penalized = o.penalized_error;
        beta_ref = o.beta_star;
      } else {
        chk.close("|beta_solver - beta_closed_form|_inf",
                  (rep.solution.beta_star - o.beta_star).lpNorm<Eigen::Infinity>(), 0.0);
      }
      chk.close("prediction error (solver vs closed form)", r.exact, o.prediction_error);
    }
  }

  // Numeric compatibility of the family's designated active set.
  const IndexSet s0 = spec ? family_active_set(*spec) : inst.active_set();
  const CompatReport c0 = compatibility(gram, s0);
  const double bound = c0.sparsity_infinite ? kInf : s.lambda * s.lambda * c0.effective_sparsity;
  r.bound = bound;
  r.gap = safe_ratio(bound, penalized);
  if (c0.value > 0.0 && s0 == inst.active_set())
    chk.at_most("penalized error vs lambda^2 s0 / phi2(S0)", rep.exact_penalized_error, bound + 1e-8);

  if (e.contains("beta_star"))
    chk.close("beta_star", (beta_ref - vector_from_json(e.at("beta_star"))).lpNorm<Eigen::Infinity>(), 0.0);
  if (e.contains("prediction_error")) chk.close("prediction_error", r.exact, expected_number(e, "prediction_error"));
  if (e.contains("penalized_error")) chk.close("penalized_error", penalized, expected_number(e, "penalized_error"));
  if (e.contains("phi2_s0")) chk.close("phi2_s0", c0.value, expected_number(e, "phi2_s0"));
  if (e.contains("gamma2_s0"))
    chk.close("gamma2_s0", c0.effective_sparsity, expected_number(e, "gamma2_s0"),
              kScenarioTol * std::max(1.0, expected_number(e, "gamma2_s0")));
  if (e.contains("bound_compat")) chk.close("bound_compat", bound, expected_number(e, "bound_compat"));
  if (e.contains("gap_ratio")) chk.close("gap_ratio", r.gap, expected_number(e, "gap_ratio"));
  if (e.contains("gap_difference"))
    chk.close("gap_difference", bound - penalized, expected_number(e, "gap_difference"));
  if (e.contains("u3")) chk.close("u3", r.u3, expected_number(e, "u3"));
  if (e.contains("unique")) {
    const UniquenessVerdict v = uniqueness_probe(inst);
    r.outputs["unique"] = v.unique;
    chk.holds(std::string("uniqueness probe says ") + (v.unique ? "unique" : "non-unique"),
              v.unique == e.at("unique").get<bool>());
    if (!v.unique) chk.close("witness objective gap", v.objective_gap, 0.0, 1e-10);
  }
}

inline void run_compat(const Scenario& s, ScenarioResult& r, Checker& chk) {
  const GramMatrix gram = build_gram(s.spec);
  const CompatReport c = compatibility(gram, s.set, s.stretch);
  r.exact = c.value;
  r.outputs["minimizer"] = to_json(c.minimizer);
  chk.holds("compatibility certified", c.certified);
  if (s.expected.contains("value")) chk.close("value", c.value, expected_number(s.expected, "value"), 1e-8);
  if (s.expected.contains("restricted_eigenvalue")) {
    const RestrictedEigenvalueResult re = restricted_eigenvalue(gram, s.set);
    chk.close("restricted_eigenvalue", re.value, expected_number(s.expected, "restricted_eigenvalue"), 1e-8);
  }
}

inline void run_coverage(const Scenario& s, ScenarioResult& r, Checker& chk) {
  const Json& cj = s.coverage;
  const GramMatrix gram = build_gram(s.spec);
  NoisyConfig cfg;
  cfg.n = cj.at("n").get<int>();
  cfg.alpha = cj.value("alpha", 0.05);
  cfg.alpha1 = cj.value("alpha1", 0.05);
  cfg.eta = cj.value("eta", 0.5);
  cfg.lambda = s.lambda;
  cfg.trials = cj.value("trials", 1000);
  cfg.seed = cj.value("seed", std::uint64_t{42});
  const bool sigma0 = cj.contains("sigma0_offdiag_shift");
  if (sigma0) {
    Matrix m = gram.matrix();
    const double d = cj.at("sigma0_offdiag_shift").get<double>();
    for (int i = 0; i < m.rows(); ++i)
      for (int k = 0; k < m.cols(); ++k)
        if (i != k) m(i, k) += d;
    cfg.sigma0 = GramMatrix(m);
  }
  const NoisyExperiment ex(ProblemInstance(gram, s.beta0, s.lambda), factorize(gram, cfg.n), cfg);
  const CoverageReport rep = sigma0 ? coverage_sigma0(ex) : coverage(ex);
  r.exact = rep.empirical_coverage;
  r.bound = rep.mean_rhs;
  r.outputs["violations"] = rep.violations;
  r.outputs["mean_lhs"] = rep.mean_lhs;
  r.outputs["mean_rhs"] = rep.mean_rhs;
  r.outputs["lambda0"] = rep.lambda0;
  chk.holds("eta * lambda > lambda0", rep.precondition_holds);
  if (sigma0) {
    r.outputs["xi"] = ex.xi();
    chk.holds("xi condition", rep.xi_condition_failures == 0);
    if (s.expected.contains("xi")) chk.close("xi", ex.xi(), expected_number(s.expected, "xi"), 1e-12);
  }
  const double floor = s.expected.value("min_coverage", rep.nominal);
  chk.at_most("coverage shortfall", floor - rep.empirical_coverage, 0.0);
  for (const TrialResult& t : rep.rows)
    if (t.total < t.bias - t.lhs - 1e-10)
      chk.fail("triangle inequality fails at trial " + std::to_string(t.trial));
}

} // namespace detail

inline ScenarioResult run_scenario(const Scenario& s) {
  ScenarioResult r;
  r.id = s.id;
  r.kind = s.kind;
  detail::Checker chk(r);
  try {
    switch (s.kind) {
    case ScenarioKind::Lasso: detail::run_lasso(s, r, chk); break;
    case ScenarioKind::Compat: detail::run_compat(s, r, chk); break;
    case ScenarioKind::Coverage: detail::run_coverage(s, r, chk); break;
    }
  } catch (const std::exception& ex) {
    chk.fail(std::string("error: ") + ex.what());
  }
  return r;
}

/// Runs scenarios in parallel; results keep the input order.
inline std::vector<ScenarioResult> run_scenarios(const std::vector<Scenario>& list) {
  std::vector<ScenarioResult> out(list.size());
  parallel_for(list.size(), [&](std::size_t i) { out[i] = run_scenario(list[i]); });
  return out;
}

inline std::string result_table(const std::vector<ScenarioResult>& rows) {
  auto num = [](double x) {
    if (std::isnan(x)) return std::string("-");
    if (std::isinf(x)) return std::string("inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return std::string(buf);
  };
  std::string out = "id,kind,exact,oracle,u1,u2,u3,bound,gap,max_error,status\n";
  for (const ScenarioResult& r : rows) {
    out += r.id + "," + std::string(kind_name(r.kind)) + "," + num(r.exact) + "," + num(r.oracle) + "," +
           num(r.u1) + "," + num(r.u2) + "," + num(r.u3) + "," + num(r.bound) + "," + num(r.gap) + "," +
           num(r.max_error) + "," + (r.pass ? "PASS" : "FAIL") + "\n";
  }
  return out;
}

} // namespace lassocompat
