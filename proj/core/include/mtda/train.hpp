// SPDX-License-Identifier: Apache-2.0
//
// Mean-teacher training over hard, soft, and unlabeled clips, plus evaluation.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mtda/data.hpp"
#include "mtda/metrics.hpp"
#include "mtda/model.hpp"
#include "mtda/optim.hpp"

namespace mtda {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  AdamConfig adam{};
  double ema_decay = 0.999;
  double consistency_max = 2.0;
  double consistency_ramp = 0.25;  // fraction of all steps
  double mixup_prob = 0.5;
  double mixup_alpha = 0.2;
  double time_mask_prob = 0.5;
  std::size_t time_mask_max_width = 10;  // frames
  std::uint64_t seed = 7;

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

struct EvalConfig {
  double frame_hop_s = 0.02;
  double threshold = 0.5;
  std::size_t median_window = 5;
  double segment_s = 0.2;
  double gt_threshold = 0.5;
  double max_fpr = 0.1;
  double dtc = 0.7;
  double gtc = 0.7;
};

struct EpochRow {
  std::size_t epoch = 0;  // 1-based
  double loss_sup = 0.0;
  double loss_cons = 0.0;
  std::optional<double> mpauc;
  std::optional<double> event_f1;
};

/// "epoch,loss_sup,loss_cons,mpAUC,event_f1"
std::string metrics_csv_header();
/// Shortest round-trip decimal formatting; "nan" for a missing metric.
std::string to_csv_row(const EpochRow& row);
std::string format_double(double v);

/// Supervised target row layout: hard classes first, then soft classes.
struct SupervisedTarget {
  Tensor<float> targets;  // [t, hard + soft]
  Tensor<float> mask;     // [hard + soft]
};
SupervisedTarget supervised_target(const Clip& clip, std::size_t hard_classes,
                                   std::size_t soft_classes);

/// Forward pass in eval mode over each clip; scores are [t, hard + soft].
std::vector<FrameMatrix> predict_scores(const DualBranchModel<float>& model,
                                        const std::vector<Clip>& clips);

/// mpAUC over soft clips (soft classes), event F1 over hard clips (hard classes).
MetricsReport evaluate(const DualBranchModel<float>& model, const std::vector<Clip>& clips,
                       const EvalConfig& config);

/// Mean clean (no augmentation) masked BCE over labelled clips in the given
/// normalization mode.
double supervised_loss(const DualBranchModel<float>& model, const std::vector<Clip>& clips,
                       NormMode mode);

struct TrainResult {
  DualBranchModel<float> student;
  DualBranchModel<float> teacher;
  std::vector<EpochRow> rows;
  MetricsReport report;  // last validation metrics plus the loss curve
};

using EpochCallback = std::function<void(const EpochRow&)>;

/// Runs `config.epochs` passes over `train` (shuffled batches mixing all
/// subsets). Per step: masked BCE on labelled clips, ramped consistency MSE
/// against the EMA teacher on unlabeled clips, Adam, EMA. `valid` is scored
/// after every epoch (skipped when empty). Throws DivergenceError carrying
/// the 1-based step on a non-finite loss.
TrainResult train_loop(DualBranchModel<float> model, const std::vector<Clip>& train,
                       const std::vector<Clip>& valid, const TrainConfig& config,
                       const EvalConfig& eval, const EpochCallback& on_epoch = {});

/// Hook applied to each clip's scalar loss before accumulation; used to
/// exercise failure paths. Identity by default.
using LossHook = std::function<Tensor<float>(const Tensor<float>&, std::size_t step)>;
TrainResult train_loop(DualBranchModel<float> model, const std::vector<Clip>& train,
                       const std::vector<Clip>& valid, const TrainConfig& config,
                       const EvalConfig& eval, const EpochCallback& on_epoch,
                       const LossHook& loss_hook);

}  // namespace mtda
