// Batch front end for the panel estimators: one declarative JSON config per
// run, one subcommand per pipeline stage, artifacts written to --out.

#include <CLI11.hpp>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <vector>

#include "sdid/errors.hpp"
#include "sdid/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string method;
  std::string inference;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Run configuration (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "Output directory (overrides config)");
  cmd->add_option("--seed", args.seed, "Root random seed (overrides config)")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--method", args.method, "Estimator: did|scm|sdid (overrides config)");
  cmd->add_option("--inference", args.inference,
                  "Inference mode: gaussian|permutation (overrides config)");
}

int run(const CommonArgs& args, int (*command)(const sdid::RunConfig&)) {
  sdid::FlagOverrides overrides;
  if (!args.out_dir.empty()) overrides.out_dir = args.out_dir;
  if (args.seed_set) overrides.seed = args.seed;
  if (!args.method.empty()) overrides.method = args.method;
  if (!args.inference.empty()) overrides.inference = args.inference;
  try {
    sdid::RunConfig config = sdid::load_run_config(args.config_path, overrides);
    return command(config);
  } catch (const sdid::Error& err) {
    nlohmann::json j;
    j["error"]["code"] = sdid::to_string(err.code());
    j["error"]["message"] = err.what();
    std::cerr << j.dump() << std::endl;
    return static_cast<int>(sdid::classify(err.code()));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Panel-data treatment-effect estimation: difference-in-differences, synthetic "
               "control, and synthetic difference-in-differences with placebo inference"};
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    int (*command)(const sdid::RunConfig&);
  };
  const Entry entries[] = {
      {"estimate", "Point estimate, weights, and inference artifacts", sdid::cmd_estimate},
      {"placebo", "Placebo distribution and inference artifacts", sdid::cmd_placebo},
      {"figures", "Figure-ready CSV series (trend, fit, alignment)", sdid::cmd_figures},
      {"sensitivity", "Specification grid and composition checks", sdid::cmd_sensitivity},
      {"simulate", "Monte Carlo harness over the factor-model generator", sdid::cmd_simulate},
      {"validate", "Panel validation report", sdid::cmd_validate},
  };

  std::vector<std::unique_ptr<CommonArgs>> args_store;
  for (const auto& entry : entries) {
    auto* cmd = app.add_subcommand(entry.name, entry.help);
    args_store.push_back(std::make_unique<CommonArgs>());
    CommonArgs* args = args_store.back().get();
    add_common_flags(cmd, *args);
    auto command = entry.command;
    cmd->callback([args, command]() {
      int code = run(*args, command);
      if (code != 0) throw CLI::RuntimeError(code);
    });
  }

  CLI11_PARSE(app, argc, argv);
  return 0;
}
