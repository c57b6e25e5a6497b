// CLI front end: one subcommand per pipeline stage, a shared option set, and
// config-file loading with command-line overrides.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "strat/config.hpp"
#include "strat/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"stratified double-sampling reliability campaigns"};
  app.require_subcommand(1);

  std::string config_path, out_dir, model_name;
  std::uint64_t seed = 0;
  int workers = 0;
  std::int64_t refresh_n = 0;
  bool equal_alloc = false;

  auto* o_config = app.add_option("--config", config_path, "campaign configuration file");
  auto* o_seed = app.add_option("--seed", seed, "master seed (overrides the config)");
  auto* o_workers = app.add_option("--workers", workers, "worker threads; 0 = all cores");
  auto* o_out = app.add_option("--out", out_dir, "campaign directory (overrides the config)");
  auto* o_model = app.add_option("--model", model_name, "model name (overrides the config)");
  auto* o_refresh =
      app.add_option("--refresh-N", refresh_n, "phase1 only: re-sample at this budget with frozen strata thresholds");
  auto* o_equal = app.add_flag("--equal-allocation", equal_alloc,
                               "phase2 only: equal per-stratum counts, skipping prelim/allocate");

  auto* c_phase1 = app.add_subcommand("phase1", "build strata and bank Phase-I samples");
  auto* c_prelim = app.add_subcommand("prelim", "preliminary unit-variance study");
  auto* c_allocate = app.add_subcommand("allocate", "c.o.v.-targeted Phase-II sample allocation");
  auto* c_phase2 = app.add_subcommand("phase2", "evaluate the allocated samples");
  auto* c_report = app.add_subcommand("report", "estimates, hazard/AER curves, and summary");
  auto* c_oracle = app.add_subcommand("oracle", "closed-form reference values");
  for (auto* c : {c_phase1, c_prelim, c_allocate, c_phase2, c_report, c_oracle}) c->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*o_refresh && !c_phase1->parsed()) throw std::invalid_argument("--refresh-N applies to 'phase1' only");
    if (*o_equal && !c_phase2->parsed()) throw std::invalid_argument("--equal-allocation applies to 'phase2' only");

    strat::CampaignConfig config;
    if (*o_config) config = strat::parse_config_file(config_path);
    if (*o_seed) config.seed = seed;
    if (*o_workers) config.workers = workers;
    if (*o_out) config.out_dir = out_dir;
    if (*o_model) config.model = model_name;
    if (*o_refresh) config.refresh_n = refresh_n;
    if (*o_equal) config.equal_allocation = true;

    if (c_phase1->parsed())
      strat::cmd_phase1(config, std::cout);
    else if (c_prelim->parsed())
      strat::cmd_prelim(config, std::cout);
    else if (c_allocate->parsed())
      strat::cmd_allocate(config, std::cout);
    else if (c_phase2->parsed())
      strat::cmd_phase2(config, std::cout);
    else if (c_report->parsed())
      strat::cmd_report(config, std::cout);
    else if (c_oracle->parsed())
      strat::cmd_oracle(config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
