// SPDX-License-Identifier: Apache-2.0

#include "mtda/events.hpp"

#include <algorithm>
#include <string>

#include "mtda/error.hpp"

namespace mtda {

std::vector<double> median_filter(std::span<const double> values, std::size_t window) {
  if (window % 2 == 0) {
    throw ContractError("median filter window must be odd, got " + std::to_string(window));
  }
  const std::size_t n = values.size();
  if (window == 1 || n == 0) return {values.begin(), values.end()};
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(window / 2);
  std::vector<double> out(n), buf(window);
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    for (std::ptrdiff_t j = -half; j <= half; ++j) {
      const std::ptrdiff_t src =
          std::clamp<std::ptrdiff_t>(i + j, 0, static_cast<std::ptrdiff_t>(n) - 1);
      buf[static_cast<std::size_t>(j + half)] = values[static_cast<std::size_t>(src)];
    }
    std::nth_element(buf.begin(), buf.begin() + half, buf.end());
    out[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(half)];
  }
  return out;
}

template <typename T>
std::vector<Event> predict_events(const Tensor<T>& scores, double threshold,
                                  std::size_t median_window, double frame_hop_s) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ContractError("event threshold must lie in (0, 1), got " + std::to_string(threshold));
  }
  if (median_window % 2 == 0) {
    throw ContractError("median window must be odd, got " + std::to_string(median_window));
  }
  if (scores.rank() != 2) throw DimensionError("predict_events: expected [t, K] scores");
  const std::size_t frames = scores.dim(0), classes = scores.dim(1);
  std::vector<Event> events;
  std::vector<double> track(frames);
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < frames; ++i) track[i] = static_cast<double>(scores(i, k));
    const std::vector<double> smooth = median_filter(track, median_window);
    std::size_t i = 0;
    while (i < frames) {
      if (smooth[i] <= threshold) {
        ++i;
        continue;
      }
      const std::size_t start = i;
      while (i < frames && smooth[i] > threshold) ++i;
      events.push_back(
          {k, static_cast<double>(start) * frame_hop_s, static_cast<double>(i) * frame_hop_s});
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.onset != b.onset ? a.onset < b.onset : a.label < b.label;
  });
  return events;
}

template std::vector<Event> predict_events(const Tensor<float>&, double, std::size_t, double);
template std::vector<Event> predict_events(const Tensor<double>&, double, std::size_t, double);

}  // namespace mtda
