// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics: partial ROC area, segment-pooled mean pAUC for soft
// labels, and an intersection-criterion event F1 for hard labels.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtda/data.hpp"
#include "mtda/events.hpp"

namespace mtda {

/// Normalized area under the ROC curve over FPR in [0, max_fpr].
///
/// Scores are swept in descending order; tied scores form one ROC step, so
/// the curve interpolates linearly across a tie group. Labels are 0/1.
/// Throws UndefinedMetricError when only one label value is present and
/// ContractError for max_fpr outside (0, 1].
double partial_auc(std::span<const double> scores, std::span<const int> labels,
                   double max_fpr = 0.1);

/// McClish standardization of a partial_auc value: 0.5 for a chance-level
/// (diagonal) ROC, 1 for a perfect one.
double mcclish_standardize(double normalized_pauc, double max_fpr);

struct MpaucResult {
  double value = 0.0;                            // mean over included classes
  std::vector<std::optional<double>> per_class;  // nullopt when excluded
  std::vector<std::string> notes;                // one line per excluded class
};

struct MpaucOptions {
  double frame_hop_s = 0.02;
  double segment_s = 1.0;
  double gt_threshold = 0.5;
  double max_fpr = 0.1;
};

/// Pools each clip's frames into fixed segments (mean score, mean target;
/// a trailing partial segment is kept), binarizes targets at gt_threshold,
/// and averages the McClish-standardized per-class partial_auc over classes
/// with both label values.
/// scores[i] and targets[i] are [frames, classes] for clip i. Throws
/// UndefinedMetricError when no class qualifies.
MpaucResult mpauc(std::span<const FrameMatrix> scores, std::span<const FrameMatrix> targets,
                  const MpaucOptions& options = {});

struct MatchCounts {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t reference = 0;

  MatchCounts& operator+=(const MatchCounts& o);
  /// 2 TP / (predicted + reference); 1 when both are empty.
  double f1() const;
};

/// Greedy one-to-one matching: predictions in onset order each take the
/// earliest unmatched same-class reference with
/// |pred ∩ ref| >= dtc |pred| and |pred ∩ ref| >= gtc |ref|.
MatchCounts match_events(std::span<const Event> predicted, std::span<const Event> reference,
                         double dtc = 0.7, double gtc = 0.7);

/// F1 of match_events pooled over all classes.
double event_f1_intersection(std::span<const Event> predicted, std::span<const Event> reference,
                             double dtc = 0.7, double gtc = 0.7);

/// Reference events in seconds from a clip's hard annotations.
std::vector<Event> reference_events(const Clip& clip, double frame_hop_s);

struct MetricsReport {
  std::optional<double> mpauc;     // nullopt when no soft clip was scored
  std::optional<double> event_f1;  // nullopt when no hard clip was scored
  std::vector<std::optional<double>> mpauc_per_class;
  std::vector<MatchCounts> f1_per_class;
  std::vector<std::string> notes;
  std::vector<double> loss_curve;  // per-epoch supervised loss when produced by training
};

}  // namespace mtda
