#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aqed/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Semiclassical comparison of the Pauli-Fierz and Abraham models"};
  app.require_subcommand(1);

  std::string config;
  std::string out = ".";
  std::uint64_t seed = 1;
  const struct {
    const char* name;
    const char* help;
  } commands[] = {
      {"check_cutoff", "regularity integrals of the charge profile (exit 1 if not admissible)"},
      {"simulate_classical", "Newton-Maxwell trajectory CSV and summary JSON"},
      {"simulate_quantum", "paired quantum/classical run per hbar, beta CSV"},
      {"rate_study", "hbar sweep with the factor-2 verdict"},
      {"diagnostics", "invariant suite as a pass/fail table"},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config, "run configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "seed for randomized checks");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : aqed::kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return aqed::run_command(command, config, {.out = out, .seed = seed});
}
