#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nami/csv.hpp"
#include "nami/inference.hpp"
#include "nami/joint.hpp"
#include "nami/sim.hpp"

namespace nami {

inline constexpr const char* kAnalysisSchema = "nami-analysis/1";
inline constexpr const char* kSimSchema = "nami-sim/1";
inline constexpr const char* kTheorySchema = "nami-theory/1";

enum class VariableType { continuous, ordinal, binary, survival };

std::string_view to_string(VariableType t);
VariableType variable_type_from_string(std::string_view name);

struct VariableDecl {
  std::string name;
  VariableType type = VariableType::continuous;
  /// Data column; defaults to the name. Unused for survival variables.
  std::string column;
  /// Survival variables: event time and indicator (1 event, 0 censored).
  std::string time_column;
  std::string event_column;
  /// Ordered category labels for ordinal and binary variables. When empty,
  /// the distinct values must be numeric and are taken in ascending order.
  std::vector<std::string> levels;
  BasisKind basis = BasisKind::bernstein;
  int order = 6;
  bool log_scale = false;
  LinkKind link = LinkKind::probit;
  std::optional<Support> support;
};

struct TreatmentDecl {
  std::string column;
  std::string control;
  /// Arm order after the control; when empty the remaining levels are taken
  /// in order of first appearance.
  std::vector<std::string> levels;
};

struct AnalysisOptions {
  Multiplicity multiplicity = Multiplicity::max_t;
  double ci_level = 0.95;
  bool discrete_approx = false;
  std::uint64_t seed = 1;
  int max_t_draws = 100000;
};

/// Everything needed to rerun a fit. Covariates keep their declared order.
struct AnalysisConfig {
  std::string data_path;
  TreatmentDecl treatment;
  VariableDecl outcome;
  std::vector<VariableDecl> covariates;
  /// Cell text treated as missing, in addition to "NA".
  std::string missing;
  AnalysisOptions options;
  /// Unconstrained starting vector of the joint model.
  std::optional<Eigen::VectorXd> init;

  void validate() const;
};

/// Parses a config; relative paths resolve against `base_dir`. A string
/// "init" names a fit.json whose "raw" vector becomes the start.
AnalysisConfig analysis_config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const AnalysisConfig& c);
AnalysisConfig load_analysis_config(const std::filesystem::path& path);

/// The "raw" vector of a fit report.
Eigen::VectorXd init_from_fit_report(const std::filesystem::path& path);

struct Dataset {
  JointSpec spec;
  JointData data;
  /// Arm labels, control first.
  std::vector<std::string> arm_labels;
  std::vector<int> arm_rows;
  int missing_outcomes = 0;
};

/// Builds the model and data from a CSV table. Schema problems raise
/// InputError naming the offending column.
Dataset load_dataset(const AnalysisConfig& config, const CsvTable& table);

/// A grid of simulation cells sharing everything but outcome, tau and gamma.
struct SimStudyConfig {
  SimConfig base;
  std::vector<OutcomeKind> outcomes{OutcomeKind::continuous};
  std::vector<double> taus{0.5};
  std::vector<double> gammas{0.0};
  /// Sample size per arm for each outcome kind.
  std::vector<std::pair<OutcomeKind, int>> n_per_arm{
      {OutcomeKind::continuous, 41}, {OutcomeKind::binary, 161}, {OutcomeKind::survival, 131}};

  int n_for(OutcomeKind k) const;
  /// Cells in (outcome, tau, gamma) order; each has its own derived seed.
  std::vector<SimConfig> cells() const;
  void validate() const;
};

SimStudyConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimStudyConfig& c);

struct TheoryGrid {
  std::vector<double> taus{0.0, 0.5, 1.0};
  std::vector<double> lambdas;
  std::vector<double> gammas;
  int n_per_arm = 1;

  TheoryGrid();
  void validate() const;
};

TheoryGrid theory_grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TheoryGrid& g);

/// from, from + by, ... up to `to` (inclusive within rounding).
std::vector<double> value_range(double from, double to, double by);

}  // namespace nami
