#include <CLI11.hpp>
#include <iostream>

#include "wasscc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Convex chance-constraint toolbox under Wasserstein ambiguity"};
  app.require_subcommand(1);

  wasscc::RunConfig rc;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"coeff", "cone coefficients c_p and c_o for one (eps, delta)"},
      {"watershed", "delta(eps) curve where the optimistic coefficient vanishes"},
      {"portfolio", "target-return portfolio under an individual constraint"},
      {"envelope", "risk envelope rho(u) over a budget grid"},
      {"solve-pp", "minimum-budget production plan reaching the target radius"},
      {"certify", "Monte Carlo membership certificate for a given decision"},
  };
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("-c,--config", rc.instance_path, "instance config file")
        ->required();
    sub->add_option("-o,--output", rc.output_path, "output artifact path")
        ->required();
    sub->add_option("--set", rc.overrides,
                    "override section.key=value (repeatable)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 1 : 0;
  }

  rc.command = wasscc::parse_command(app.get_subcommands().front()->get_name());
  std::string log;
  const int code = wasscc::run(rc, log);
  if (!log.empty()) std::cerr << log;
  return code;
}
