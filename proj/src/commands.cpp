#include "nami/commands.hpp"

#include <cmath>
#include <ostream>

#include "nami/csv.hpp"
#include "nami/error.hpp"
#include "nami/numeric.hpp"

namespace nami {

using nlohmann::json;

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

json keyed(const char* key, const std::string& value, const json& rest) {
  json out{{key, value}};
  out.update(rest);
  return out;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Wald tests for a family of parameters with the configured adjustment.
// Without a usable covariance only the estimates are reported.
struct Family {
  std::vector<double> estimate;
  std::vector<TestResult> tests;
  bool inferred = false;
};

Family test_block(const Eigen::VectorXd& x, const Eigen::MatrixXd& cov, const std::vector<Eigen::Index>& idx,
                  const AnalysisOptions& o, double z_crit) {
  Family f;
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd est(m);
  for (Eigen::Index i = 0; i < m; ++i) est[i] = x[idx[i]];
  f.estimate.assign(est.begin(), est.end());
  if (cov.size() == 0 || m == 0) return f;
  Eigen::MatrixXd sub(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = cov(idx[a], idx[b]);
  if (!(sub.diagonal().minCoeff() > 0.0)) return f;
  f.tests = test_family(est, sub, o.multiplicity, {o.max_t_draws, o.seed});
  for (auto& t : f.tests) {
    t.ci_lo = t.estimate - z_crit * t.se;
    t.ci_hi = t.estimate + z_crit * t.se;
  }
  f.inferred = true;
  return f;
}

json test_json(const Family& f, std::size_t i, const char* name) {
  json j;
  j[name] = f.estimate[i];
  if (!f.inferred) {
    j["se"] = nullptr;
    return j;
  }
  const TestResult& t = f.tests[i];
  j["se"] = t.se;
  j["ci"] = {t.ci_lo, t.ci_hi};
  j["z"] = t.z;
  j["p_raw"] = t.p_raw;
  j["p_adjusted"] = t.p_adjusted;
  return j;
}

void summary_row(CsvTable& t, const std::string& parameter, const std::string& arm, const std::string& covariate,
                 const Family& f, std::size_t i) {
  std::vector<std::string> row{parameter, arm, covariate, format_double(f.estimate[i])};
  if (f.inferred) {
    const TestResult& r = f.tests[i];
    for (double v : {r.se, r.ci_lo, r.ci_hi, r.z, r.p_raw, r.p_adjusted}) row.push_back(format_double(v));
  } else {
    row.resize(row.size() + 6);
  }
  t.rows.push_back(std::move(row));
}

void value_row(CsvTable& t, const std::string& parameter, const std::string& arm, double v) {
  std::vector<std::string> row{parameter, arm, "", format_double(v)};
  row.resize(t.header.size());
  t.rows.push_back(std::move(row));
}

CsvTable summary_table() {
  CsvTable t;
  t.header = {"parameter", "arm", "covariate", "estimate", "se", "ci_lo", "ci_hi", "z", "p_raw", "p_adjusted"};
  return t;
}

json marginal_json(const std::string& name, const MarginalModel& m) {
  const TransformationBasis& b = m.basis;
  json j{{"name", name},
         {"basis", std::string(to_string(b.kind()))},
         {"link", std::string(to_string(m.link.kind()))},
         {"log_scale", b.log_scale()},
         {"coefficients", vector_json(b.coefficients())}};
  if (b.kind() == BasisKind::bernstein) j["support"] = {b.support().lo, b.support().hi};
  if (m.tau.size()) j["tau"] = vector_json(m.tau);
  return j;
}

json convergence_json(const Convergence& c) {
  return {{"converged", c.converged},
          {"iterations", c.iterations},
          {"evaluations", c.evaluations},
          {"gradient_norm", c.gradient_norm},
          {"hessian_asymmetry", c.hessian_asymmetry},
          {"status", c.status}};
}

json treatment_json(const Family& f, const Dataset& ds, const VariableDecl& outcome) {
  json out = json::array();
  for (std::size_t a = 0; a < f.estimate.size(); ++a) {
    json j = keyed("arm", ds.arm_labels[a + 1], test_json(f, a, "estimate"));
    if (outcome.link == LinkKind::probit) j["auc"] = auc_from_tau(f.estimate[a]);
    out.push_back(std::move(j));
  }
  return out;
}

void add_treatment_rows(CsvTable& t, const Family& f, const Dataset& ds) {
  for (std::size_t a = 0; a < f.estimate.size(); ++a) summary_row(t, "tau", ds.arm_labels[a + 1], "", f, a);
}

json analyse_marginal(const AnalysisConfig& cfg, const Dataset& ds, double z_crit, json& report, CsvTable& table) {
  FitOptions fo;
  fo.start = cfg.init;
  const MarginalFit fit = fit_marginal(ds.spec.marginals.back(), ds.data.observations(0), fo);
  const Eigen::Index k = fit.spec.coefficient_count();
  Eigen::VectorXd x(k + fit.model.tau.size());
  x << fit.model.basis.coefficients(), fit.model.tau;
  std::vector<Eigen::Index> ti;
  for (Eigen::Index a = 0; a < fit.model.tau.size(); ++a) ti.push_back(k + a);
  const Family taus = test_block(x, fit.covariance, ti, cfg.options, z_crit);

  report["model"] = "marginal";
  report["loglik"] = fit.loglik;
  report["parameters"] = fit.raw.size();
  report["convergence"] = convergence_json(fit.convergence);
  report["treatment_effects"] = treatment_json(taus, ds, cfg.outcome);
  report["marginals"] = json::array({marginal_json(cfg.outcome.name, fit.model)});
  report["raw"] = vector_json(fit.raw);
  add_treatment_rows(table, taus, ds);
  return report;
}

json analyse_joint(const AnalysisConfig& cfg, const Dataset& ds, double z_crit, json& report, CsvTable& table) {
  JointFitOptions jo;
  jo.start = cfg.init;
  const JointFit fit = fit_joint(ds.spec, ds.data, jo);
  const ParamLayout lay = fit.layout();
  const int J = ds.spec.dim();
  const int m = J - 1;
  const int arms = ds.spec.arms;
  const auto& names = ds.spec.names;

  std::vector<Eigen::Index> ti, li;
  for (int a = 1; a < arms; ++a) ti.push_back(lay.tau_index(a));
  for (int c = 0; c < m; ++c) li.push_back(lay.lambda_index(J - 1, c));
  const Family taus = test_block(fit.theta, fit.covariance, ti, cfg.options, z_crit);
  const Family prognostic = test_block(fit.theta, fit.covariance, li, cfg.options, z_crit);

  std::vector<OmegaFactor> treated;
  for (int a = 1; a < arms; ++a) treated.push_back(fit.model.omega(a));
  const OmegaFactor control = fit.model.omega(0);
  const Strengths st = strengths(control, treated);

  report["model"] = "joint";
  report["loglik"] = fit.loglik;
  report["parameters"] = lay.total;
  report["convergence"] = convergence_json(fit.convergence);
  report["treatment_effects"] = treatment_json(taus, ds, cfg.outcome);
  add_treatment_rows(table, taus, ds);

  json prog = json::array();
  for (int c = 0; c < m; ++c) {
    json j = keyed("covariate", names[c], test_json(prognostic, c, "lambda"));
    j["strength"] = st.prognostic[c];
    j["rank"] = std::find(st.prognostic_rank.begin(), st.prognostic_rank.end(), c) - st.prognostic_rank.begin() + 1;
    prog.push_back(std::move(j));
    summary_row(table, "lambda", "", names[c], prognostic, c);
  }
  report["prognostic"] = std::move(prog);

  json pred = json::array();
  json pred_rank = json::object();
  for (int a = 1; a < arms; ++a) {
    std::vector<Eigen::Index> gi;
    for (int c = 0; c < m; ++c) gi.push_back(lay.gamma_index(a, c));
    const Family g = test_block(fit.theta, fit.covariance, gi, cfg.options, z_crit);
    const auto& rank = st.predictive_rank[a - 1];
    json tests = json::array();
    for (int c = 0; c < m; ++c) {
      json j = keyed("covariate", names[c], test_json(g, c, "gamma"));
      j["strength"] = st.predictive[a - 1][c];
      j["rank"] = std::find(rank.begin(), rank.end(), c) - rank.begin() + 1;
      tests.push_back(std::move(j));
      summary_row(table, "gamma", ds.arm_labels[a], names[c], g, c);
    }
    pred.push_back({{"arm", ds.arm_labels[a]}, {"tests", std::move(tests)}});
    json order = json::array();
    for (int c : rank) order.push_back(names[c]);
    pred_rank[ds.arm_labels[a]] = std::move(order);
  }
  report["predictive"] = std::move(pred);
  json prog_rank = json::array();
  for (int c : st.prognostic_rank) prog_rank.push_back(names[c]);
  report["rankings"] = {{"prognostic", std::move(prog_rank)}, {"predictive", std::move(pred_rank)}};

  json dep = json::array();
  for (int r = 1; r < m; ++r)
    for (int c = 0; c < r; ++c) {
      const Eigen::Index i = lay.lambda_index(r, c);
      dep.push_back({{"row", names[r]},
                     {"column", names[c]},
                     {"lambda", fit.theta[i]},
                     {"se", fit.covariance.size() ? number_or_null(fit.se(i)) : json(nullptr)}});
    }
  report["covariate_dependence"] = std::move(dep);

  json per_arm = json::array();
  for (int a = 0; a < arms; ++a) {
    const OmegaFactor f = a == 0 ? control : treated[a - 1];
    const ConditionalSummary cs = conditional_summary(f);
    per_arm.push_back({{"arm", ds.arm_labels[a]},
                       {"r_squared", cs.r_squared},
                       {"sigma", cs.sigma},
                       {"betas", vector_json(cs.betas)},
                       {"omega", matrix_json(f.omega)},
                       {"correlation", matrix_json(correlation(f))}});
    value_row(table, "r_squared", ds.arm_labels[a], cs.r_squared);
    value_row(table, "sigma", ds.arm_labels[a], cs.sigma);
  }
  report["arms"] = std::move(per_arm);

  json marg = json::array();
  for (int j = 0; j < J; ++j) marg.push_back(marginal_json(names[j], fit.model.marginals[j]));
  report["marginals"] = std::move(marg);
  report["raw"] = vector_json(fit.raw);
  report["theta"] = vector_json(fit.theta);
  return report;
}

}  // namespace

json run_analysis(const AnalysisConfig& config, json* header) {
  const CsvTable table = read_csv(config.data_path);
  const Dataset ds = load_dataset(config, table);
  const double z_crit = normal_quantile(0.5 + 0.5 * config.options.ci_level);

  json report;
  report["schema"] = "nami-fit/1";
  report["version"] = kVersion;
  report["config"] = to_json(config);
  json arms = json::array();
  for (std::size_t a = 0; a < ds.arm_labels.size(); ++a)
    arms.push_back({{"label", ds.arm_labels[a]}, {"rows", ds.arm_rows[a]}});
  report["data"] = {{"rows", ds.data.rows()}, {"arms", std::move(arms)}, {"missing_outcomes", ds.missing_outcomes}};
  if (header) *header = report;

  CsvTable summary = summary_table();
  if (config.covariates.empty()) {
    analyse_marginal(config, ds, z_crit, report, summary);
  } else {
    analyse_joint(config, ds, z_crit, report, summary);
  }
  report["summary_csv"] = format_csv(summary);
  return report;
}

int cmd_fit(const FitCommand& cmd, std::ostream& err) {
  AnalysisConfig cfg = load_analysis_config(cmd.config);
  if (cmd.data) cfg.data_path = std::filesystem::absolute(*cmd.data).string();
  if (cmd.init) cfg.init = init_from_fit_report(*cmd.init);
  if (cmd.seed) cfg.options.seed = *cmd.seed;
  if (cmd.multiplicity) cfg.options.multiplicity = *cmd.multiplicity;
  if (cmd.discrete_approx) cfg.options.discrete_approx = true;
  cfg.validate();
  std::filesystem::create_directories(cmd.out);

  json partial;
  json report;
  try {
    report = run_analysis(cfg, &partial);
  } catch (const ConvergenceError& e) {
    partial["convergence"] = {{"converged", false}, {"status", e.what()}};
    partial["best_objective"] = number_or_null(e.best_value());
    partial["raw"] = vector_json(e.best());
    write_file_atomic(cmd.out / "fit.json", partial.dump(2) + "\n");
    err << "error: " << e.what() << "; best iterate written to " << (cmd.out / "fit.json").string() << "\n";
    return kExitNumerical;
  }
  const std::string csv = report["summary_csv"].get<std::string>();
  report.erase("summary_csv");
  write_file_atomic(cmd.out / "fit.json", report.dump(2) + "\n");
  if (!report["convergence"]["converged"].get<bool>()) {
    err << "error: optimizer did not converge (" << report["convergence"]["status"].get<std::string>()
        << "); best iterate written to " << (cmd.out / "fit.json").string() << "\n";
    return kExitNumerical;
  }
  write_file_atomic(cmd.out / "fit_summary.csv", csv);
  return kExitOk;
}

namespace {

const std::vector<std::string> kSummaryHeader{
    "outcome",  "model",     "tau",      "gamma",       "n_per_arm",   "replications", "fits",
    "failures", "mean_tau",  "sd_tau",   "mean_se",     "median_se",   "reject_rate",  "mean_gamma1",
    "gamma_reject_rate",     "censor_fraction",         "valid",       "max_gradient_norm",
    "max_hessian_asymmetry", "seed"};

const std::vector<std::string> kRecordHeader{
    "outcome",   "tau",      "gamma",     "replication", "seed",       "censor_fraction", "mi_ok",
    "mi_tau",    "mi_se",    "mi_reject", "nami_ok",     "nami_tau",   "nami_se",         "nami_reject",
    "gamma1_hat", "gamma1_se", "gamma_p", "gamma_reject", "error"};

std::string fmt_bool(bool b) { return b ? "1" : "0"; }

void append_summary(CsvTable& t, const SimSummary& s, const char* model, const ModelSummary& m) {
  const SimConfig& c = s.config;
  const bool nami = std::string(model) != "MI";
  t.rows.push_back({std::string(to_string(c.outcome)), model, format_double(c.tau), format_double(c.gamma),
                    std::to_string(c.n_per_arm), std::to_string(s.replications), std::to_string(m.fits),
                    std::to_string(m.failures), format_double(m.mean_tau), format_double(m.sd_tau),
                    format_double(m.mean_se), format_double(m.median_se), format_double(m.reject_rate),
                    nami ? format_double(s.mean_gamma1) : "", nami ? format_double(s.gamma_reject_rate) : "",
                    format_double(s.mean_censor_fraction), fmt_bool(s.valid), format_double(m.max_gradient_norm),
                    format_double(m.max_asymmetry), std::to_string(c.seed)});
}

void append_records(CsvTable& t, const SimConfig& c, const std::vector<ReplicationRecord>& recs) {
  for (const auto& r : recs) {
    std::string error = r.mi.error;
    if (!r.nami.error.empty()) error += (error.empty() ? "" : "; ") + r.nami.error;
    const bool g = r.nami.ok && r.gamma_hat.size() > 0;
    t.rows.push_back({std::string(to_string(c.outcome)), format_double(c.tau), format_double(c.gamma),
                      std::to_string(r.index), std::to_string(r.seed), format_double(r.censor_fraction),
                      fmt_bool(r.mi.ok), r.mi.ok ? format_double(r.mi.tau) : "", r.mi.ok ? format_double(r.mi.se) : "",
                      r.mi.ok ? fmt_bool(r.mi.reject) : "", fmt_bool(r.nami.ok),
                      r.nami.ok ? format_double(r.nami.tau) : "", r.nami.ok ? format_double(r.nami.se) : "",
                      r.nami.ok ? fmt_bool(r.nami.reject) : "", g ? format_double(r.gamma_hat[0]) : "",
                      g ? format_double(r.gamma_se[0]) : "", g ? format_double(r.gamma_p) : "",
                      g ? fmt_bool(r.gamma_reject) : "", error});
  }
}

}  // namespace

int cmd_simulate(const SimulateCommand& cmd, std::ostream& err) {
  SimStudyConfig study;
  if (cmd.config) {
    json j;
    try {
      j = json::parse(read_text(*cmd.config));
    } catch (const json::parse_error& e) {
      throw ConfigError("cannot parse " + cmd.config->string() + ": " + e.what());
    }
    study = sim_config_from_json(j);
  } else {
    study.taus = {0.0, 0.5};
    study.gammas = {0.0, 0.25, 0.5};
  }
  if (cmd.full_scale) study.base.replications = 10000;
  if (cmd.reps) study.base.replications = *cmd.reps;
  if (cmd.seed) study.base.seed = *cmd.seed;
  if (cmd.threads) study.base.threads = *cmd.threads;
  if (cmd.multiplicity) study.base.gamma_multiplicity = *cmd.multiplicity;
  study.validate();
  std::filesystem::create_directories(cmd.out);

  CsvTable summary, records;
  summary.header = kSummaryHeader;
  records.header = kRecordHeader;
  bool all_valid = true;
  for (const SimConfig& cell : study.cells()) {
    const StudyResult res = run_study(cell);
    const SimSummary& s = res.summary;
    if (cell.fit_mi) append_summary(summary, s, "MI", s.mi);
    if (cell.fit_nami) append_summary(summary, s, "NAMI-HTE", s.nami);
    append_records(records, cell, res.records);
    all_valid = all_valid && s.valid;
    err << to_string(cell.outcome) << " tau=" << cell.tau << " gamma=" << cell.gamma << ": "
        << (cell.fit_mi ? s.mi.failures : 0) + (cell.fit_nami ? s.nami.failures : 0) << " failed fits"
        << (s.valid ? "" : " (more than 5%, cell flagged invalid)") << "\n";
  }
  write_file_atomic(cmd.out / "sim_config.json", to_json(study).dump(2) + "\n");
  write_file_atomic(cmd.out / "sim_summary.csv", format_csv(summary));
  write_gzip_atomic(cmd.out / "sim_replications.csv.gz", format_csv(records));
  if (!all_valid) err << "warning: at least one cell exceeded the 5% failure limit\n";
  return kExitOk;
}

int cmd_theory(const TheoryCommand& cmd, std::ostream&) {
  TheoryGrid grid;
  if (cmd.config) {
    json j;
    try {
      j = json::parse(read_text(*cmd.config));
    } catch (const json::parse_error& e) {
      throw ConfigError("cannot parse " + cmd.config->string() + ": " + e.what());
    }
    grid = theory_grid_from_json(j);
  }
  grid.validate();
  std::filesystem::create_directories(cmd.out);

  CsvTable t;
  t.header = {"tau", "lambda", "gamma", "rho0", "rho1", "n_per_arm", "se_unadjusted", "se_adjusted",
              "ratio", "se_lambda", "se_gamma"};
  for (double tau : grid.taus)
    for (double l : grid.lambdas)
      for (double g : grid.gammas) {
        const TheoryPoint p{tau, l, g, grid.n_per_arm};
        const Eigen::Vector3d se = var_matrix_theory(p).diagonal().cwiseSqrt();
        t.rows.push_back({format_double(tau), format_double(l), format_double(g), format_double(latent_rho(l)),
                          format_double(latent_rho(l + g)), std::to_string(grid.n_per_arm),
                          format_double(se_lemma1(tau, grid.n_per_arm)), format_double(se_lemma4(p)),
                          format_double(efficiency_ratio(tau, l, g)), format_double(se[0]), format_double(se[1])});
      }
  write_file_atomic(cmd.out / "theory_config.json", to_json(grid).dump(2) + "\n");
  write_file_atomic(cmd.out / "theory.csv", format_csv(t));
  return kExitOk;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace nami
