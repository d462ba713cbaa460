// granular-sim: command-line front end for the constrained granular flow solver.
//
//   granular-sim run <config>        simulate and write lagrangian/eulerian/summary
//   granular-sim validate <config>   check the config and the initial data only
//   granular-sim oracle <config>     write the exact two-block solution
//
// GRANULAR_OUTPUT_DIR overrides output.path from the config.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "granular/app/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Pressureless granular flow with a maximal density constraint"};
  app.require_subcommand(1);
  std::string config;
  for (const char* name : {"run", "validate", "oracle"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("config", config, "JSON run configuration")->required();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : granular::app::kConfigError;
  }
  return granular::app::execute(app.get_subcommands().front()->get_name(), config, std::cout, std::cerr);
}
