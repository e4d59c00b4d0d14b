// SPDX-License-Identifier: Apache-2.0

#include "mtda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtda/error.hpp"

namespace mtda {

double partial_auc(std::span<const double> scores, std::span<const int> labels, double max_fpr) {
  if (scores.size() != labels.size()) throw ContractError("partial_auc: size mismatch");
  if (!(max_fpr > 0.0 && max_fpr <= 1.0)) {
    throw ContractError("partial_auc: max_fpr must lie in (0, 1]");
  }
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ContractError("partial_auc: labels must be 0 or 1");
    pos += static_cast<std::size_t>(l);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw UndefinedMetricError("partial_auc: need both positive and negative labels");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double area = 0.0, prev_fpr = 0.0, prev_tpr = 0.0;
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double level = scores[order[i]];
    while (i < order.size() && scores[order[i]] == level) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    if (fpr >= max_fpr) {
      // Interpolate the segment up to the cut-off.
      const double cut_tpr =
          fpr > prev_fpr ? prev_tpr + (tpr - prev_tpr) * (max_fpr - prev_fpr) / (fpr - prev_fpr)
                         : tpr;
      area += (max_fpr - prev_fpr) * (prev_tpr + cut_tpr) / 2.0;
      return area / max_fpr;
    }
    area += (fpr - prev_fpr) * (prev_tpr + tpr) / 2.0;
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  return area / max_fpr;  // unreachable: the final point has fpr = 1
}

double mcclish_standardize(double normalized_pauc, double max_fpr) {
  const double area = normalized_pauc * max_fpr;
  const double chance = max_fpr * max_fpr / 2.0;
  return 0.5 * (1.0 + (area - chance) / (max_fpr - chance));
}

MpaucResult mpauc(std::span<const FrameMatrix> scores, std::span<const FrameMatrix> targets,
                  const MpaucOptions& options) {
  if (scores.size() != targets.size()) throw ContractError("mpauc: clip count mismatch");
  if (scores.empty()) throw UndefinedMetricError("mpauc: no clips");
  if (!(options.segment_s > 0.0 && options.frame_hop_s > 0.0)) {
    throw ContractError("mpauc: segment and hop lengths must be positive");
  }
  const std::size_t classes = scores[0].cols;
  const auto seg =
      static_cast<std::size_t>(std::max(1.0, std::round(options.segment_s / options.frame_hop_s)));

  std::vector<std::vector<double>> seg_scores(classes);
  std::vector<std::vector<int>> seg_labels(classes);
  for (std::size_t c = 0; c < scores.size(); ++c) {
    const FrameMatrix& s = scores[c];
    const FrameMatrix& t = targets[c];
    if (s.rows != t.rows || s.cols != classes || t.cols != classes) {
      throw ContractError("mpauc: score/target shape mismatch at clip " + std::to_string(c));
    }
    for (std::size_t start = 0; start < s.rows; start += seg) {
      const std::size_t end = std::min(s.rows, start + seg);
      const double n = static_cast<double>(end - start);
      for (std::size_t k = 0; k < classes; ++k) {
        double ms = 0.0, mt = 0.0;
        for (std::size_t i = start; i < end; ++i) {
          ms += s.at(i, k);
          mt += t.at(i, k);
        }
        seg_scores[k].push_back(ms / n);
        seg_labels[k].push_back(mt / n >= options.gt_threshold ? 1 : 0);
      }
    }
  }

  MpaucResult result;
  result.per_class.resize(classes);
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    const auto pos = std::count(seg_labels[k].begin(), seg_labels[k].end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(seg_labels[k].size())) {
      result.notes.push_back("class " + std::to_string(k) + " excluded: " +
                             (pos == 0 ? "no positive" : "no negative") + " segments");
      continue;
    }
    const double v = mcclish_standardize(partial_auc(seg_scores[k], seg_labels[k], options.max_fpr),
                                         options.max_fpr);
    result.per_class[k] = v;
    total += v;
    ++used;
  }
  if (used == 0) throw UndefinedMetricError("mpauc: every class has a single label value");
  result.value = total / static_cast<double>(used);
  return result;
}

MatchCounts& MatchCounts::operator+=(const MatchCounts& o) {
  true_positives += o.true_positives;
  predicted += o.predicted;
  reference += o.reference;
  return *this;
}

double MatchCounts::f1() const {
  if (predicted + reference == 0) return 1.0;
  return 2.0 * static_cast<double>(true_positives) / static_cast<double>(predicted + reference);
}

MatchCounts match_events(std::span<const Event> predicted, std::span<const Event> reference,
                         double dtc, double gtc) {
  auto by_onset = [](std::span<const Event> ev) {
    std::vector<std::size_t> idx(ev.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return ev[a].onset < ev[b].onset; });
    return idx;
  };
  for (const auto* list : {&predicted, &reference}) {
    for (const Event& e : *list) {
      if (!(e.onset < e.offset)) throw ContractError("match_events: event with onset >= offset");
    }
  }
  const std::vector<std::size_t> p_order = by_onset(predicted), r_order = by_onset(reference);
  std::vector<bool> taken(reference.size(), false);
  MatchCounts counts{0, predicted.size(), reference.size()};
  for (std::size_t pi : p_order) {
    const Event& p = predicted[pi];
    for (std::size_t ri : r_order) {
      const Event& r = reference[ri];
      if (taken[ri] || r.label != p.label) continue;
      const double inter = std::min(p.offset, r.offset) - std::max(p.onset, r.onset);
      if (inter <= 0.0) continue;
      // Relative slack absorbs rounding when event bounds are frame multiples.
      const double slack = 1e-9 * std::max(p.offset - p.onset, r.offset - r.onset);
      if (inter + slack >= dtc * (p.offset - p.onset) &&
          inter + slack >= gtc * (r.offset - r.onset)) {
        taken[ri] = true;
        ++counts.true_positives;
        break;
      }
    }
  }
  return counts;
}

double event_f1_intersection(std::span<const Event> predicted, std::span<const Event> reference,
                             double dtc, double gtc) {
  return match_events(predicted, reference, dtc, gtc).f1();
}

std::vector<Event> reference_events(const Clip& clip, double frame_hop_s) {
  std::vector<Event> out;
  if (!clip.has_hard_events()) return out;
  for (const HardEvent& e : clip.hard_events()) {
    out.push_back({e.label, static_cast<double>(e.onset_frame) * frame_hop_s,
                   static_cast<double>(e.offset_frame) * frame_hop_s});
  }
  return out;
}

}  // namespace mtda
