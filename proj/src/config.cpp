#include "nami/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nami/error.hpp"
#include "nami/numeric.hpp"

namespace nami {

using nlohmann::json;

std::string_view to_string(VariableType t) {
  switch (t) {
    case VariableType::continuous:
      return "continuous";
    case VariableType::ordinal:
      return "ordinal";
    case VariableType::binary:
      return "binary";
    case VariableType::survival:
      return "survival";
  }
  return "unknown";
}

VariableType variable_type_from_string(std::string_view name) {
  if (name == "continuous") return VariableType::continuous;
  if (name == "ordinal") return VariableType::ordinal;
  if (name == "binary") return VariableType::binary;
  if (name == "survival") return VariableType::survival;
  throw ConfigError("unknown variable type '" + std::string(name) + "'");
}

namespace {

// Typed field access that reports the offending key.
template <class T>
T field(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return field<T>(j, key, where);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown field '" + key + "'");
}

void check_schema(const json& j, const char* expected) {
  const auto got = field<std::string>(j, "schema", "config");
  if (got != expected) throw ConfigError("config schema is '" + got + "', expected '" + expected + "'");
}

VariableDecl variable_from_json(const json& j, bool outcome) {
  const std::string where = outcome ? "outcome" : "covariate";
  check_keys(j, {"name", "type", "column", "time", "event", "levels", "basis", "order", "log_scale", "link", "support"},
             where);
  VariableDecl v;
  v.name = field<std::string>(j, "name", where);
  const std::string at = where + " '" + v.name + "'";
  v.type = variable_type_from_string(field_or<std::string>(j, "type", "continuous", at));
  v.column = field_or<std::string>(j, "column", v.name, at);
  v.levels = field_or<std::vector<std::string>>(j, "levels", {}, at);

  const bool discrete = v.type == VariableType::ordinal || v.type == VariableType::binary;
  std::string basis = "bernstein", link = "probit";
  if (discrete) {
    basis = "step";
    if (outcome) link = "logit";
  }
  if (v.type == VariableType::survival) {
    v.time_column = field<std::string>(j, "time", at);
    v.event_column = field<std::string>(j, "event", at);
    v.log_scale = true;
    link = "cloglog";
  }
  v.basis = basis_kind_from_string(field_or<std::string>(j, "basis", basis, at));
  v.link = link_from_string(field_or<std::string>(j, "link", link, at));
  v.order = field_or<int>(j, "order", 6, at);
  v.log_scale = field_or<bool>(j, "log_scale", v.log_scale, at);
  if (j.contains("support")) {
    const auto s = field<std::vector<double>>(j, "support", at);
    if (s.size() != 2) throw ConfigError(at + ": support needs two values");
    v.support = Support{s[0], s[1]};
  }
  return v;
}

json to_json(const VariableDecl& v) {
  json j;
  j["name"] = v.name;
  j["type"] = std::string(to_string(v.type));
  if (v.type == VariableType::survival) {
    j["time"] = v.time_column;
    j["event"] = v.event_column;
  } else {
    j["column"] = v.column;
  }
  if (!v.levels.empty()) j["levels"] = v.levels;
  j["basis"] = std::string(to_string(v.basis));
  if (v.basis == BasisKind::bernstein) j["order"] = v.order;
  j["log_scale"] = v.log_scale;
  j["link"] = std::string(to_string(v.link));
  if (v.support) j["support"] = {v.support->lo, v.support->hi};
  return j;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return std::filesystem::weakly_canonical(base / path);
}

}  // namespace

void AnalysisConfig::validate() const {
  if (data_path.empty()) throw ConfigError("config: no data path");
  if (treatment.column.empty()) throw ConfigError("config: no treatment column");
  if (treatment.control.empty()) throw ConfigError("config: no control level");
  std::set<std::string> names{outcome.name};
  for (const auto& c : covariates) {
    if (c.name.empty()) throw ConfigError("config: covariate without a name");
    if (!names.insert(c.name).second) throw ConfigError("config: duplicate variable '" + c.name + "'");
    if (c.type == VariableType::survival)
      throw ConfigError("config: covariate '" + c.name + "' cannot be a survival time");
  }
  auto check = [](const VariableDecl& v) {
    const bool discrete = v.type == VariableType::ordinal || v.type == VariableType::binary;
    if (discrete != (v.basis == BasisKind::step))
      throw ConfigError("config: '" + v.name + "' needs a step basis exactly when it is ordinal or binary");
    if (v.basis == BasisKind::bernstein && v.order < 1)
      throw ConfigError("config: '" + v.name + "' has a Bernstein order below 1");
    if (v.type == VariableType::binary && !v.levels.empty() && v.levels.size() != 2)
      throw ConfigError("config: binary variable '" + v.name + "' needs exactly two levels");
  };
  check(outcome);
  for (const auto& c : covariates) check(c);
  if (!(options.ci_level > 0.0 && options.ci_level < 1.0)) throw ConfigError("config: ci_level must lie in (0, 1)");
  if (options.max_t_draws < 1) throw ConfigError("config: max_t_draws must be positive");
}

AnalysisConfig analysis_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"schema", "data", "treatment", "outcome", "covariates", "missing", "options", "init"}, "config");
  check_schema(j, kAnalysisSchema);
  AnalysisConfig c;
  c.data_path = resolve(base_dir, field<std::string>(j, "data", "config")).string();

  const json& t = j.at("treatment");
  check_keys(t, {"column", "control", "levels"}, "treatment");
  c.treatment.column = field<std::string>(t, "column", "treatment");
  c.treatment.control = field<std::string>(t, "control", "treatment");
  c.treatment.levels = field_or<std::vector<std::string>>(t, "levels", {}, "treatment");

  if (!j.contains("outcome")) throw ConfigError("config: missing field 'outcome'");
  c.outcome = variable_from_json(j.at("outcome"), true);
  if (j.contains("covariates")) {
    if (!j.at("covariates").is_array()) throw ConfigError("config: covariates must be an array");
    for (const auto& v : j.at("covariates")) c.covariates.push_back(variable_from_json(v, false));
  }
  c.missing = field_or<std::string>(j, "missing", "", "config");

  if (j.contains("options")) {
    const json& o = j.at("options");
    check_keys(o, {"multiplicity", "ci_level", "discrete_approx", "seed", "max_t_draws"}, "options");
    c.options.multiplicity = multiplicity_from_string(field_or<std::string>(o, "multiplicity", "maxt", "options"));
    c.options.ci_level = field_or<double>(o, "ci_level", 0.95, "options");
    c.options.discrete_approx = field_or<bool>(o, "discrete_approx", false, "options");
    c.options.seed = field_or<std::uint64_t>(o, "seed", 1, "options");
    c.options.max_t_draws = field_or<int>(o, "max_t_draws", 100000, "options");
  }

  if (j.contains("init") && !j.at("init").is_null()) {
    const json& init = j.at("init");
    if (init.is_string()) {
      c.init = init_from_fit_report(resolve(base_dir, init.get<std::string>()));
    } else {
      const auto v = field<std::vector<double>>(j, "init", "config");
      c.init = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
  }
  c.validate();
  return c;
}

json to_json(const AnalysisConfig& c) {
  json j;
  j["schema"] = kAnalysisSchema;
  j["data"] = c.data_path;
  j["treatment"] = {{"column", c.treatment.column}, {"control", c.treatment.control}};
  if (!c.treatment.levels.empty()) j["treatment"]["levels"] = c.treatment.levels;
  j["outcome"] = to_json(c.outcome);
  j["covariates"] = json::array();
  for (const auto& v : c.covariates) j["covariates"].push_back(to_json(v));
  j["missing"] = c.missing;
  j["options"] = {{"multiplicity", std::string(to_string(c.options.multiplicity))},
                  {"ci_level", c.options.ci_level},
                  {"discrete_approx", c.options.discrete_approx},
                  {"seed", c.options.seed},
                  {"max_t_draws", c.options.max_t_draws}};
  if (c.init) j["init"] = std::vector<double>(c.init->begin(), c.init->end());
  return j;
}

AnalysisConfig load_analysis_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return analysis_config_from_json(j, std::filesystem::absolute(path).parent_path());
}

Eigen::VectorXd init_from_fit_report(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  const auto raw = field<std::vector<double>>(j, "raw", path.string());
  return Eigen::Map<const Eigen::VectorXd>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

namespace {

struct ColumnReader {
  const CsvTable& table;
  const std::string& missing;

  int index(const std::string& name, const std::string& what) const {
    const int i = table.column(name);
    if (i >= 0) return i;
    std::string have;
    for (const auto& h : table.header) have += (have.empty() ? "" : ", ") + ("'" + h + "'");
    throw InputError("column '" + name + "' (" + what + ") not found; available columns: " + have);
  }

  bool is_missing(const std::string& cell) const { return cell == missing || cell == "NA"; }

  double number(std::size_t row, int col, const std::string& name) const {
    double v;
    if (!parse_double(table.rows[row][col], v) || !std::isfinite(v))
      throw InputError("column '" + name + "', row " + std::to_string(row + 1) + ": '" + table.rows[row][col] +
                       "' is not a finite number");
    return v;
  }
};

// Category labels in model order for an ordinal or binary variable.
std::vector<std::string> category_levels(const VariableDecl& v, const ColumnReader& rd, int col) {
  if (!v.levels.empty()) return v.levels;
  std::vector<std::pair<double, std::string>> seen;
  for (std::size_t r = 0; r < rd.table.rows.size(); ++r) {
    const std::string& cell = rd.table.rows[r][col];
    if (rd.is_missing(cell)) continue;
    if (std::any_of(seen.begin(), seen.end(), [&](const auto& s) { return s.second == cell; })) continue;
    double x;
    if (!parse_double(cell, x))
      throw InputError("column '" + v.column + "': value '" + cell +
                       "' is not numeric; declare the ordered levels in the config");
    seen.emplace_back(x, cell);
  }
  std::sort(seen.begin(), seen.end());
  std::vector<std::string> out;
  for (const auto& s : seen) out.push_back(s.second);
  return out;
}

MarginalSpec marginal_spec(const VariableDecl& v, Role role, int arms, int categories) {
  MarginalSpec s;
  s.role = role;
  s.basis = v.basis;
  s.order = v.order;
  s.categories = categories;
  s.log_scale = v.log_scale;
  s.link = v.link;
  s.arms = arms;
  s.support = v.support;
  return s;
}

std::vector<Datum> read_variable(const VariableDecl& v, const ColumnReader& rd, int& categories) {
  std::vector<Datum> out;
  const std::size_t n = rd.table.rows.size();
  out.reserve(n);
  if (v.type == VariableType::survival) {
    const int tc = rd.index(v.time_column, "time of '" + v.name + "'");
    const int ec = rd.index(v.event_column, "event of '" + v.name + "'");
    for (std::size_t r = 0; r < n; ++r) {
      if (rd.is_missing(rd.table.rows[r][tc]) || rd.is_missing(rd.table.rows[r][ec])) {
        out.push_back(Datum::missing());
        continue;
      }
      const double t = rd.number(r, tc, v.time_column);
      const double e = rd.number(r, ec, v.event_column);
      if (!(t > 0.0)) throw InputError("column '" + v.time_column + "', row " + std::to_string(r + 1) +
                                       ": survival times must be positive");
      if (e != 0.0 && e != 1.0)
        throw InputError("column '" + v.event_column + "', row " + std::to_string(r + 1) + ": event must be 0 or 1");
      out.push_back(e == 1.0 ? Datum::exact(t) : Datum::right_censored(t));
    }
    return out;
  }
  const int col = rd.index(v.column, "variable '" + v.name + "'");
  if (v.type == VariableType::continuous) {
    for (std::size_t r = 0; r < n; ++r)
      out.push_back(rd.is_missing(rd.table.rows[r][col]) ? Datum::missing()
                                                          : Datum::exact(rd.number(r, col, v.column)));
    return out;
  }
  const auto levels = category_levels(v, rd, col);
  categories = static_cast<int>(levels.size());
  if (categories < 2) throw InputError("column '" + v.column + "' has fewer than two categories");
  if (v.type == VariableType::binary && categories != 2)
    throw InputError("column '" + v.column + "' is declared binary but has " + std::to_string(categories) +
                     " categories");
  for (std::size_t r = 0; r < n; ++r) {
    const std::string& cell = rd.table.rows[r][col];
    if (rd.is_missing(cell)) {
      out.push_back(Datum::missing());
      continue;
    }
    const auto it = std::find(levels.begin(), levels.end(), cell);
    if (it == levels.end())
      throw InputError("column '" + v.column + "', row " + std::to_string(r + 1) + ": '" + cell +
                       "' is not a declared level");
    out.push_back(Datum::category_of(static_cast<int>(it - levels.begin()) + 1));
  }
  return out;
}

}  // namespace

Dataset load_dataset(const AnalysisConfig& config, const CsvTable& table) {
  config.validate();
  const ColumnReader rd{table, config.missing};
  Dataset ds;

  const int tc = rd.index(config.treatment.column, "treatment");
  ds.arm_labels.push_back(config.treatment.control);
  for (const auto& l : config.treatment.levels)
    if (l != config.treatment.control) ds.arm_labels.push_back(l);
  const bool fixed = !config.treatment.levels.empty();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& cell = table.rows[r][tc];
    if (rd.is_missing(cell))
      throw InputError("column '" + config.treatment.column + "', row " + std::to_string(r + 1) +
                       ": treatment is missing");
    auto it = std::find(ds.arm_labels.begin(), ds.arm_labels.end(), cell);
    if (it == ds.arm_labels.end()) {
      if (fixed)
        throw InputError("column '" + config.treatment.column + "', row " + std::to_string(r + 1) + ": level '" +
                         cell + "' is not declared");
      ds.arm_labels.push_back(cell);
      it = ds.arm_labels.end() - 1;
    }
    ds.data.arm.push_back(static_cast<int>(it - ds.arm_labels.begin()));
  }
  const int arms = static_cast<int>(ds.arm_labels.size());
  ds.arm_rows.assign(static_cast<std::size_t>(arms), 0);
  for (int a : ds.data.arm) ++ds.arm_rows[a];
  for (int a = 0; a < arms; ++a)
    if (ds.arm_rows[a] == 0)
      throw InputError("column '" + config.treatment.column + "': no rows for level '" + ds.arm_labels[a] + "'");
  if (arms < 2) throw InputError("column '" + config.treatment.column + "' has only the control level");

  ds.spec.arms = arms;
  ds.spec.discrete_approx = config.options.discrete_approx;
  ds.spec.approx_seed = config.options.seed;
  for (const auto& v : config.covariates) {
    int k = 2;
    ds.data.columns.push_back(read_variable(v, rd, k));
    ds.spec.marginals.push_back(marginal_spec(v, Role::covariate, arms, k));
    ds.spec.names.push_back(v.name);
  }
  int k = 2;
  ds.data.columns.push_back(read_variable(config.outcome, rd, k));
  ds.spec.marginals.push_back(marginal_spec(config.outcome, Role::outcome, arms, k));
  ds.spec.names.push_back(config.outcome.name);
  for (const Datum& d : ds.data.columns.back()) ds.missing_outcomes += d.is_missing();
  ds.spec.validate();
  return ds;
}

int SimStudyConfig::n_for(OutcomeKind k) const {
  for (const auto& [kind, n] : n_per_arm)
    if (kind == k) return n;
  return base.n_per_arm;
}

std::vector<SimConfig> SimStudyConfig::cells() const {
  std::vector<SimConfig> out;
  std::uint64_t index = 0;
  for (OutcomeKind o : outcomes)
    for (double t : taus)
      for (double g : gammas) {
        SimConfig c = base;
        c.outcome = o;
        c.tau = t;
        c.gamma = g;
        c.n_per_arm = n_for(o);
        c.seed = mix_seed(base.seed, index++);
        out.push_back(c);
      }
  return out;
}

void SimStudyConfig::validate() const {
  if (outcomes.empty() || taus.empty() || gammas.empty()) throw ConfigError("simulation grid is empty");
  for (const SimConfig& c : cells()) c.validate();
}

SimStudyConfig sim_config_from_json(const json& j) {
  check_keys(j,
             {"schema", "design", "outcomes", "tau", "gamma", "n_per_arm", "replications", "seed", "threads",
              "censor_target", "multiplicity", "max_t_draws", "lambda_covariates", "lambda_outcome",
              "bernstein_order", "fit_mi", "fit_nami"},
             "simulation config");
  check_schema(j, kSimSchema);
  const std::string w = "simulation config";
  SimStudyConfig s;
  SimConfig& b = s.base;
  const std::string design = field_or<std::string>(j, "design", "standard", w);
  if (design == "standard") {
    b.design = SimDesign::standard;
  } else if (design == "single") {
    b.design = SimDesign::single;
  } else {
    throw ConfigError("unknown simulation design '" + design + "'");
  }
  if (j.contains("outcomes")) {
    s.outcomes.clear();
    for (const auto& o : field<std::vector<std::string>>(j, "outcomes", w)) s.outcomes.push_back(outcome_kind_from_string(o));
  }
  s.taus = field_or<std::vector<double>>(j, "tau", s.taus, w);
  s.gammas = field_or<std::vector<double>>(j, "gamma", s.gammas, w);
  if (j.contains("n_per_arm")) {
    const json& n = j.at("n_per_arm");
    if (n.is_number_integer()) {
      b.n_per_arm = n.get<int>();
      s.n_per_arm.clear();
    } else if (n.is_object()) {
      for (const auto& [key, value] : n.items()) {
        if (!value.is_number_integer()) throw ConfigError("n_per_arm entries must be integers");
        const OutcomeKind k = outcome_kind_from_string(key);
        auto it = std::find_if(s.n_per_arm.begin(), s.n_per_arm.end(), [&](const auto& p) { return p.first == k; });
        if (it == s.n_per_arm.end()) {
          s.n_per_arm.emplace_back(k, value.get<int>());
        } else {
          it->second = value.get<int>();
        }
      }
    } else {
      throw ConfigError("n_per_arm must be an integer or an object keyed by outcome");
    }
  }
  b.replications = field_or<int>(j, "replications", b.replications, w);
  b.seed = field_or<std::uint64_t>(j, "seed", b.seed, w);
  b.threads = field_or<int>(j, "threads", b.threads, w);
  b.censor_target = field_or<double>(j, "censor_target", b.censor_target, w);
  b.gamma_multiplicity = multiplicity_from_string(field_or<std::string>(j, "multiplicity", "maxt", w));
  b.max_t_draws = field_or<int>(j, "max_t_draws", b.max_t_draws, w);
  b.lambda_covariates = field_or<double>(j, "lambda_covariates", b.lambda_covariates, w);
  b.lambda_outcome = field_or<double>(j, "lambda_outcome", b.lambda_outcome, w);
  b.bernstein_order = field_or<int>(j, "bernstein_order", b.bernstein_order, w);
  b.fit_mi = field_or<bool>(j, "fit_mi", b.fit_mi, w);
  b.fit_nami = field_or<bool>(j, "fit_nami", b.fit_nami, w);
  s.validate();
  return s;
}

json to_json(const SimStudyConfig& s) {
  const SimConfig& b = s.base;
  json j;
  j["schema"] = kSimSchema;
  j["design"] = b.design == SimDesign::standard ? "standard" : "single";
  j["outcomes"] = json::array();
  for (OutcomeKind o : s.outcomes) j["outcomes"].push_back(std::string(to_string(o)));
  j["tau"] = s.taus;
  j["gamma"] = s.gammas;
  if (s.n_per_arm.empty()) {
    j["n_per_arm"] = b.n_per_arm;
  } else {
    j["n_per_arm"] = json::object();
    for (const auto& [k, n] : s.n_per_arm) j["n_per_arm"][std::string(to_string(k))] = n;
  }
  j["replications"] = b.replications;
  j["seed"] = b.seed;
  j["threads"] = b.threads;
  j["censor_target"] = b.censor_target;
  j["multiplicity"] = std::string(to_string(b.gamma_multiplicity));
  j["max_t_draws"] = b.max_t_draws;
  j["lambda_covariates"] = b.lambda_covariates;
  j["lambda_outcome"] = b.lambda_outcome;
  j["bernstein_order"] = b.bernstein_order;
  j["fit_mi"] = b.fit_mi;
  j["fit_nami"] = b.fit_nami;
  return j;
}

std::vector<double> value_range(double from, double to, double by) {
  if (!(by > 0.0) || !std::isfinite(from) || !std::isfinite(to) || !std::isfinite(by))
    throw ConfigError("range needs finite bounds and a positive step");
  std::vector<double> out;
  for (long k = 0;; ++k) {
    double v = from + static_cast<double>(k) * by;
    if (v > to + 1e-9 * by) break;
    v = std::round(v * 1e12) / 1e12;
    out.push_back(v);
  }
  return out;
}

TheoryGrid::TheoryGrid() : lambdas(value_range(-1.0, 1.0, 0.05)), gammas(value_range(-1.0, 1.0, 0.05)) {}

void TheoryGrid::validate() const {
  if (taus.empty() || lambdas.empty() || gammas.empty()) throw ConfigError("theory grid is empty");
  if (n_per_arm < 1) throw ConfigError("theory grid needs n_per_arm >= 1");
  for (const auto* v : {&taus, &lambdas, &gammas})
    for (double x : *v)
      if (!std::isfinite(x)) throw ConfigError("theory grid values must be finite");
}

namespace {

std::vector<double> grid_axis(const json& j, const std::string& key, std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_array()) return field<std::vector<double>>(j, key, "theory grid");
  if (v.is_object()) {
    check_keys(v, {"from", "to", "by"}, "theory grid '" + key + "'");
    return value_range(field<double>(v, "from", key), field<double>(v, "to", key), field<double>(v, "by", key));
  }
  throw ConfigError("theory grid '" + key + "' must be a list or a {from, to, by} range");
}

}  // namespace

TheoryGrid theory_grid_from_json(const json& j) {
  check_keys(j, {"schema", "tau", "lambda", "gamma", "n_per_arm"}, "theory grid");
  check_schema(j, kTheorySchema);
  TheoryGrid g;
  g.taus = grid_axis(j, "tau", g.taus);
  g.lambdas = grid_axis(j, "lambda", g.lambdas);
  g.gammas = grid_axis(j, "gamma", g.gammas);
  g.n_per_arm = field_or<int>(j, "n_per_arm", g.n_per_arm, "theory grid");
  g.validate();
  return g;
}

json to_json(const TheoryGrid& g) {
  return {{"schema", kTheorySchema}, {"tau", g.taus}, {"lambda", g.lambdas}, {"gamma", g.gammas}, {"n_per_arm", g.n_per_arm}};
}

}  // namespace nami
