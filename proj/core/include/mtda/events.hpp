// SPDX-License-Identifier: Apache-2.0
//
// Frame-score post-processing into timestamped events.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mtda/tensor.hpp"

namespace mtda {

struct Event {
  std::size_t label = 0;
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds, exclusive
  bool operator==(const Event&) const = default;
};

/// Running median with an odd window; edges replicate the nearest sample.
std::vector<double> median_filter(std::span<const double> values, std::size_t window);

/// Per class: median filter, binarize (score > threshold), merge runs of
/// active frames into events. Frame i covers [i*hop, (i+1)*hop). Events are
/// ordered by onset, then class. Throws ContractError for an even window or
/// a threshold outside (0, 1).
template <typename T>
std::vector<Event> predict_events(const Tensor<T>& scores, double threshold,
                                  std::size_t median_window, double frame_hop_s);

}  // namespace mtda
