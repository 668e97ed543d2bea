#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "scorelab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"backward-sampler lab: exact pipelines, error ledgers, verification suites"};
  app.require_subcommand(1);

  std::string run_spec, run_out, verify_suite, sample_spec, sample_csv;
  std::uint64_t run_seed = 0, verify_seed = 12345, sample_seed = 0;
  int run_workers = 0, verify_workers = 0, sample_workers = 0;

  CLI::App* run_cmd = app.add_subcommand("run", "evaluate an experiment spec");
  run_cmd->add_option("spec", run_spec, "experiment spec (JSON)")->required();
  CLI::Option* run_out_opt = run_cmd->add_option("--out", run_out, "output directory override");
  CLI::Option* run_seed_opt = run_cmd->add_option("--seed", run_seed, "seed override");
  run_cmd->add_option("--workers", run_workers, "worker threads (0 = hardware)");

  CLI::App* verify_cmd = app.add_subcommand("verify", "run a built-in verification suite");
  verify_cmd->add_option("suite", verify_suite, "suite name")->required();
  verify_cmd->add_option("--seed", verify_seed, "suite seed");
  verify_cmd->add_option("--workers", verify_workers, "worker threads (0 = hardware)");

  CLI::App* sample_cmd = app.add_subcommand("sample", "draw backward-sampler paths to CSV");
  sample_cmd->add_option("spec", sample_spec, "single-cell experiment spec (JSON)")->required();
  sample_cmd->add_option("csv", sample_csv, "output CSV path")->required();
  CLI::Option* sample_seed_opt = sample_cmd->add_option("--seed", sample_seed, "seed override");
  sample_cmd->add_option("--workers", sample_workers, "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run_cmd->parsed()) {
    const std::optional<std::string> out =
        run_out_opt->count() ? std::optional<std::string>(run_out) : std::nullopt;
    const std::optional<std::uint64_t> seed =
        run_seed_opt->count() ? std::optional<std::uint64_t>(run_seed) : std::nullopt;
    return scorelab::cmd_run(run_spec, out, seed, run_workers, std::cout, std::cerr);
  }
  if (verify_cmd->parsed())
    return scorelab::cmd_verify(verify_suite, verify_seed, verify_workers, std::cout, std::cerr);
  const std::optional<std::uint64_t> seed =
      sample_seed_opt->count() ? std::optional<std::uint64_t>(sample_seed) : std::nullopt;
  return scorelab::cmd_sample(sample_spec, sample_csv, seed, sample_workers, std::cout,
                              std::cerr);
}
