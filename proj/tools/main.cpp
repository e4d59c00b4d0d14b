// SPDX-License-Identifier: Apache-2.0
//
// mtda <train|eval|ablate|gradcheck|visualize> [--config PATH] [--out DIR]
//      [--seed N] [--set key=value ...]

#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace mtda::cli;
  CLI::App app{"Dual-branch sound event detection toolkit"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string config_path, out_dir = ".", fault = "none", axis;
  std::uint64_t seed = 0, clip_seed = 0;
  std::string checkpoint, manifest;
  double tol = 0.0;

  std::vector<CLI::Option*> seed_opts;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--out", out_dir, "Output directory");
    seed_opts.push_back(sub->add_option("--seed", seed, "Master seed (model init and training)"));
    sub->add_option("--set", common.overrides, "Override a config key: key=value")
        ->allow_extra_args(false);
  };

  auto* train = app.add_subcommand("train", "Train and write checkpoint, metrics, manifests");
  add_common(train);
  train->add_option("--inject-fault", fault, "Failure fixture: nan-loss");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a manifest");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint.bin")->required();
  eval->add_option("--manifest", manifest, "Dataset manifest")->required();

  auto* ablate = app.add_subcommand("ablate", "Seeded training sweep along one axis");
  add_common(ablate);
  ablate->add_option("--axis", axis, "adapters | dims | stream")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of a reduced model");
  add_common(gradcheck);
  gradcheck->add_option("--tol", tol, "Maximum relative error (default 1e-4)");
  gradcheck->add_option("--inject-fault", fault, "Failure fixture: backward");

  auto* visualize = app.add_subcommand("visualize", "Dump first-block adapter activations");
  add_common(visualize);
  visualize->add_option("--checkpoint", checkpoint, "checkpoint.bin")->required();
  visualize->add_option("--clip-seed", clip_seed, "Seed of the clip to render");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (!config_path.empty()) common.config = config_path;
  common.out = out_dir;
  for (const CLI::Option* o : seed_opts) {
    if (o->count() > 0) common.seed = seed;
  }

  Fault f = Fault::kNone;
  try {
    f = parse_fault(fault);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  if (app.got_subcommand(train)) return cmd_train(common, f, std::cout, std::cerr);
  if (app.got_subcommand(eval)) return cmd_eval(common, checkpoint, manifest, std::cout, std::cerr);
  if (app.got_subcommand(ablate)) return cmd_ablate(common, axis, std::cout, std::cerr);
  if (app.got_subcommand(gradcheck)) {
    const std::optional<double> t =
        gradcheck->count("--tol") ? std::optional<double>(tol) : std::nullopt;
    return cmd_gradcheck(common, t, f, std::cout, std::cerr);
  }
  return cmd_visualize(common, checkpoint, clip_seed, std::cout, std::cerr);
}
