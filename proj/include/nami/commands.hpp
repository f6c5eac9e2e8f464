#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "nami/config.hpp"

namespace nami {

inline constexpr const char* kVersion = "0.1.0";

/// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitInput = 2, kExitNumerical = 3 };

struct FitCommand {
  std::filesystem::path config;
  std::filesystem::path out = ".";
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> init;
  std::optional<std::uint64_t> seed;
  std::optional<Multiplicity> multiplicity;
  bool discrete_approx = false;
};

struct SimulateCommand {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<int> threads;
  std::optional<Multiplicity> multiplicity;
  bool full_scale = false;
};

struct TheoryCommand {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = ".";
};

/// Fits the configured model and builds the report written to fit.json, plus
/// the fit_summary.csv text under "summary_csv". When the joint optimizer
/// stops early the report carries converged = false. Marginal fits that fail
/// throw ConvergenceError; `header` then already holds the config and data
/// parts of the report.
nlohmann::json run_analysis(const AnalysisConfig& config, nlohmann::json* header = nullptr);

/// Each command writes its files into `out` (created if needed) and returns
/// an exit code; diagnostics go to `err`.
int cmd_fit(const FitCommand& cmd, std::ostream& err);
int cmd_simulate(const SimulateCommand& cmd, std::ostream& err);
int cmd_theory(const TheoryCommand& cmd, std::ostream& err);

/// Runs `body`, mapping library errors onto exit codes with a message on `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace nami
