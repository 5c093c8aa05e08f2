// Command-line front end: pinneig <subcommand> --config run.json --out DIR
#include <iostream>

#include "CLI11.hpp"
#include "pinneig/cli.hpp"
#include "pinneig/errors.hpp"
#include "pinneig/snapshot.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Neural-network eigenvalue scans for elliptic operators"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;

  using Command = int (*)(const pinneig::RunConfig&, const pinneig::fs::path&, std::ostream&, std::ostream&);
  const std::pair<const char*, Command> commands[] = {
      {"scan", pinneig::cmd_scan},
      {"refine", pinneig::cmd_refine},
      {"oracle", pinneig::cmd_oracle},
      {"export-eigenfunction", pinneig::cmd_export_eigenfunction},
      {"validate", pinneig::cmd_validate},
  };
  const char* help[] = {
      "sweep the E-grid, detect minima and refine them",
      "re-run detection and refinement on an existing scan",
      "write the reference spectrum and upper-bound curve",
      "evaluate each estimate's eigenfunction on a lattice",
      "compare estimates against the reference spectrum",
  };
  std::vector<CLI::App*> subs;
  for (std::size_t k = 0; k < std::size(commands); ++k) {
    auto* sub = app.add_subcommand(commands[k].first, help[k]);
    sub->add_option("-c,--config", config_path, "JSON run config (omit for defaults)");
    sub->add_option("-o,--out", out_dir, "output directory (overrides output_dir in the config)");
    subs.push_back(sub);
  }
  CLI11_PARSE(app, argc, argv);

  pinneig::RunConfig config;
  try {
    config = pinneig::parse_config(config_path.empty() ? std::string() : pinneig::read_file(config_path));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  const std::string target = !out_dir.empty() ? out_dir : !config.output_dir.empty() ? config.output_dir : "pinneig_out";

  for (std::size_t k = 0; k < subs.size(); ++k) {
    if (subs[k]->parsed()) return commands[k].second(config, target, std::cout, std::cerr);
  }
  return 2;
}
