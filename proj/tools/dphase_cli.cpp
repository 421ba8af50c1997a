#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dphase/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Double-phase solver lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dphase::kVersion);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::string study;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory (overrides [output] directory)");
    sub->add_option("--seed", seed, "Random seed (overrides the config)");
  };
  add_common(app.add_subcommand("solve-var", "Variational (weak form) Dirichlet solve"));
  add_common(app.add_subcommand("solve-visc", "Monotone finite-difference viscosity solve"));
  add_common(app.add_subcommand("solve-obstacle", "Obstacle problem, active-set Newton"));
  auto* st = app.add_subcommand("study", "Run a named verification study");
  st->add_option("name", study, "equivalence | comparison | caccioppoli | regularization | "
                                "obstacle-approximation | touch (defaults to [study] name)")
      ->check(CLI::IsMember(dphase::study_names()));
  add_common(st);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : dphase::kExitConfig;
  }

  const CLI::App* sub = app.get_subcommands().front();
  std::optional<std::string> out_dir;
  if (sub->count("--out")) out_dir = out;
  std::optional<std::uint64_t> seed_override;
  if (sub->count("--seed")) seed_override = seed;
  return dphase::run_file(sub->get_name(), study, config, out_dir, seed_override, std::cerr);
}
