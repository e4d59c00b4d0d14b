// SPDX-License-Identifier: Apache-2.0
//
// Subcommands of the `mtda` tool. Each returns a process exit code and writes
// human-readable output to the given streams so tests can drive them
// in-process.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mtda/config.hpp"
#include "mtda/grad_check.hpp"
#include "mtda/model.hpp"

namespace mtda::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitDiverged = 3,
};

struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;  // key=value
};

/// Defaults, then the config file, then overrides, then --seed.
RunConfig resolve_config(const CommonOptions& options);

/// Fault injection for exercising failure paths.
enum class Fault {
  kNone,
  kBackward,  // gradcheck: a loss wrapper whose backward rule is wrong
  kNanLoss,   // train: loss becomes NaN at step 3
};
Fault parse_fault(const std::string& text);

int cmd_train(const CommonOptions& options, Fault fault, std::ostream& out, std::ostream& err);

/// Prints "mpAUC,event_f1" and one row for the manifest's clips.
int cmd_eval(const CommonOptions& options, const std::filesystem::path& checkpoint,
             const std::filesystem::path& manifest, std::ostream& out, std::ostream& err);

/// axis: adapters | dims | stream. Writes ablation_<axis>.csv.
int cmd_ablate(const CommonOptions& options, const std::string& axis, std::ostream& out,
               std::ostream& err);

int cmd_gradcheck(const CommonOptions& options, std::optional<double> tol, Fault fault,
                  std::ostream& out, std::ostream& err);

int cmd_visualize(const CommonOptions& options, const std::filesystem::path& checkpoint,
                  std::uint64_t clip_seed, std::ostream& out, std::ostream& err);

// ---- pieces shared with tests ---------------------------------------------

struct AblationRun {
  std::string label;
  RunConfig config;
};
/// The settings compared along one axis, derived from `base`.
std::vector<AblationRun> ablation_runs(const RunConfig& base, const std::string& axis);

/// Reduced double-precision model: D=16, t=16, f_in=8, 2 transformer blocks,
/// 1 CNN block, both fusion directions, nonzero adapter scales.
ModelConfig gradcheck_model_config();
GradCheckReport check_model_gradients(std::uint64_t seed, const GradCheckOptions& options,
                                      Fault fault);

/// Writes input, long_term_adapter, and short_term_adapter as .pgm and .csv
/// under `dir`, from the first transformer block (pre-scale).
void write_visualization(const DualBranchModel<float>& model, const Tensor<float>& features,
                         const std::filesystem::path& dir);

/// P2 graymap with rows = feature axis, columns = time, min-max scaled to
/// 0..255 (all zeros for a constant matrix). `m` is [time, feature].
void write_pgm(const std::filesystem::path& path, const Tensor<float>& m);
/// One matrix row per line, shortest round-trip float formatting.
void write_csv_matrix(const std::filesystem::path& path, const Tensor<float>& m);
Tensor<float> read_csv_matrix(const std::filesystem::path& path);

}  // namespace mtda::cli
