#include "commands.hpp"

#include "projmc2/error.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int fail(std::string_view code, const std::string& message) {
  std::cerr << "error[" << code << "]: " << message << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projected MCMC for spatial factor models"};
  app.require_subcommand(1);

  projmc2::cli::SimulateArgs sim;
  std::string sim_config;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  simulate->add_option("--config", sim_config, "JSON overrides of the default simulation")->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out, "Output directory")->required();
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "Master seed");

  projmc2::cli::FitArgs fit;
  std::uint64_t fit_seed = 0;
  auto* fitc = app.add_subcommand("fit", "Run a sampler on a dataset");
  fitc->add_option("--config", fit.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  fitc->add_option("--out", fit.out, "Chain output directory")->required();
  auto* fit_seed_opt = fitc->add_option("--seed", fit_seed, "Master seed");

  projmc2::cli::DiagnoseArgs diag;
  std::string diag_truth, diag_out;
  auto* diagnose = app.add_subcommand("diagnose", "ESS, factor recovery and traces for a chain");
  diagnose->add_option("--chain,chain", diag.chain, "Chain directory")->required();
  diagnose->add_option("--truth", diag_truth, "truth.json from simulate");
  diagnose->add_option("--out", diag_out, "Report directory (default: chain directory)");

  projmc2::cli::CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "Side-by-side ESS table of several chains");
  compare->add_option("runs", cmp.runs, "Chain directories")->required();
  compare->add_option("--out", cmp.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return fail("E_USAGE", e.what());
  }

  try {
    if (simulate->parsed()) {
      if (!sim_config.empty()) sim.config = sim_config;
      if (*sim_seed_opt) sim.seed = sim_seed;
      projmc2::cli::cmd_simulate(sim, std::cout);
    } else if (fitc->parsed()) {
      if (*fit_seed_opt) fit.seed = fit_seed;
      projmc2::cli::cmd_fit(fit, std::cout);
    } else if (diagnose->parsed()) {
      if (!diag_truth.empty()) diag.truth = diag_truth;
      if (!diag_out.empty()) diag.out = diag_out;
      projmc2::cli::cmd_diagnose(diag, std::cout);
    } else if (compare->parsed()) {
      projmc2::cli::cmd_compare(cmp, std::cout);
    }
  } catch (const projmc2::Error& e) {
    return fail(projmc2::to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail("E_INTERNAL", e.what());
  }
  return 0;
}
