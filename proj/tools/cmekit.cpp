#include <cstdint>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "cmekit/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Conditional mean embedding estimation, kernel EDMD and finite-state oracle checks"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_path;
  bool timing = false;

  const std::map<std::string, std::string> about = {
      {"estimate", "fit an estimator, save it, print risk metrics as JSON"},
      {"edmd", "leading kernel-EDMD eigenvalues as CSV"},
      {"mmd", "biased and unbiased MMD^2 between two point files"},
      {"oracle-verify", "check the finite-model identities and bounds"},
      {"convergence", "operator error or eigenvalue error over an n grid"},
  };
  for (const auto& name : cmekit::cli::command_names()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--seed", seed, "overrides [data] seed");
    sub->add_option("--out", out_path, "output path (estimator file for `estimate`)");
    sub->add_flag("--timing", timing, "include wall_time_ms in the primary output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cmekit::cli::kValidationFailure;
  }

  const auto* sub = app.get_subcommands().front();
  cmekit::cli::Options opt;
  if (sub->count("--seed") > 0) opt.seed = seed;
  if (sub->count("--out") > 0) opt.out = out_path;
  opt.timing = timing;
  return cmekit::cli::run_file(sub->get_name(), config_path, opt, std::cout, std::cerr);
}
