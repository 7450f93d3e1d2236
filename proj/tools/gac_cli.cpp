#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gac/experiment.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::istringstream stream(csv);
  std::string item;
  while (std::getline(stream, item, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      // stoull accepts a leading '-' by wrapping, so reject it explicitly.
      if (item.empty() || item.front() == '-') throw std::invalid_argument("");
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = item.size() + 1;
    }
    if (used != item.size())
      throw std::invalid_argument("bad seed list entry: '" + item + "'");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guided adaptive controller: simulation experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seeds_csv;
  std::size_t workers = 0;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment config file")
        ->required();
    cmd->add_option("--out", out_dir, "override the output directory");
    cmd->add_option("--seeds", seeds_csv, "override seeds, e.g. 1,2,3");
    cmd->add_option("--workers", workers, "override the worker-thread count");
  };

  CLI::App* run = app.add_subcommand("run", "execute every arm x seed run");
  add_common(run);
  CLI::App* ablate =
      app.add_subcommand("ablate", "run the fixed component-removal grid");
  add_common(ablate);
  CLI::App* sweep =
      app.add_subcommand("sweep", "run a cross-product controller sweep");
  add_common(sweep);

  CLI::App* validate = app.add_subcommand(
      "validate", "check the closed form against brute-force oracles");
  gac::ValidateOptions vopts;
  validate->add_option("--tuples", vopts.tuples, "random tuples per check");
  validate->add_option("--grid-step", vopts.grid_step, "oracle grid step");
  validate->add_option("--seed", vopts.seed, "rng seed for the tuples");
  validate->add_flag("--inject-sign-flip", vopts.inject_sign_flip)->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return gac::cmd_validate(vopts, std::cout);

    gac::ExperimentConfig cfg = gac::load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!seeds_csv.empty()) cfg.seeds = parse_seed_list(seeds_csv);
    if (workers > 0) cfg.workers = workers;

    if (run->parsed()) return gac::cmd_run(cfg, std::cout);
    if (ablate->parsed()) return gac::cmd_ablate(cfg, std::cout);
    return gac::cmd_sweep(cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
