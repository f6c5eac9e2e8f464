// Command-line front end: nami {fit, simulate, theory, version}.
#include <iostream>

#include <CLI11.hpp>

#include "nami/commands.hpp"

namespace {

std::optional<nami::Multiplicity> multiplicity(const std::string& name) {
  if (name.empty()) return std::nullopt;
  return nami::multiplicity_from_string(name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparanormal adjusted marginal inference with heterogeneous treatment effects"};
  app.require_subcommand(1);

  nami::FitCommand fit;
  std::string fit_data, fit_init, fit_mult;
  std::uint64_t fit_seed = 0;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a joint model to a CSV dataset");
  fit_cmd->add_option("--config", fit.config, "Analysis config (JSON)")->required();
  fit_cmd->add_option("--data", fit_data, "Override the data path of the config");
  fit_cmd->add_option("--out", fit.out, "Output directory");
  fit_cmd->add_option("--init", fit_init, "Warm start from a previous fit.json");
  auto* fit_seed_opt = fit_cmd->add_option("--seed", fit_seed, "Seed for jitter and max-t draws");
  fit_cmd->add_flag("--discrete-approx", fit.discrete_approx, "Allow discrete covariates via latent jitter");
  fit_cmd->add_option("--multiplicity", fit_mult, "bonferroni, maxt or none")
      ->check(CLI::IsMember({"bonferroni", "maxt", "none"}));

  nami::SimulateCommand sim;
  std::string sim_config, sim_mult;
  std::uint64_t sim_seed = 0;
  int sim_reps = 0, sim_threads = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the Monte Carlo study");
  sim_cmd->add_option("--config", sim_config, "Simulation config (JSON)");
  sim_cmd->add_option("--out", sim.out, "Output directory");
  auto* sim_seed_opt = sim_cmd->add_option("--seed", sim_seed, "Base seed");
  auto* sim_reps_opt = sim_cmd->add_option("--reps", sim_reps, "Replications per cell")->check(CLI::PositiveNumber);
  auto* sim_threads_opt = sim_cmd->add_option("--threads", sim_threads, "Worker threads")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--multiplicity", sim_mult, "Adjustment for the gamma tests")
      ->check(CLI::IsMember({"bonferroni", "maxt", "none"}));
  sim_cmd->add_flag("--full-scale", sim.full_scale, "Use 10000 replications per cell");

  nami::TheoryCommand theory;
  std::string theory_config;
  auto* theory_cmd = app.add_subcommand("theory", "Write closed-form standard errors over a grid");
  theory_cmd->add_option("--config", theory_config, "Grid config (JSON)");
  theory_cmd->add_option("--out", theory.out, "Output directory");

  app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : nami::kExitInput;
  }

  return nami::guarded(
      [&]() -> int {
        if (*fit_cmd) {
          if (!fit_data.empty()) fit.data = fit_data;
          if (!fit_init.empty()) fit.init = fit_init;
          if (*fit_seed_opt) fit.seed = fit_seed;
          fit.multiplicity = multiplicity(fit_mult);
          return nami::cmd_fit(fit, std::cerr);
        }
        if (*sim_cmd) {
          if (!sim_config.empty()) sim.config = sim_config;
          if (*sim_seed_opt) sim.seed = sim_seed;
          if (*sim_reps_opt) sim.reps = sim_reps;
          if (*sim_threads_opt) sim.threads = sim_threads;
          sim.multiplicity = multiplicity(sim_mult);
          return nami::cmd_simulate(sim, std::cerr);
        }
        if (*theory_cmd) {
          if (!theory_config.empty()) theory.config = theory_config;
          return nami::cmd_theory(theory, std::cerr);
        }
        std::cout << "nami " << nami::kVersion << "\n";
        return nami::kExitOk;
      },
      std::cerr);
}
