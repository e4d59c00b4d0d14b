// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic heterogeneous SED data.
//
// Clips are drawn directly on a time x frequency grid. Every class owns a
// disjoint frequency band. Subset A carries hard (class, onset, offset)
// annotations over the first `hard_classes` classes; subset B carries soft
// per-frame probabilities over the remaining `soft_classes` classes, taken
// from each event's amplitude envelope; unlabeled clips mix both. Subsets
// differ by a background spectral tilt.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mtda {

enum class Subset { kHard, kSoft, kUnlabeled };
enum class LabelKind { kHard, kSoft, kNone };

/// "A_hard", "B_soft", "unlabeled".
std::string to_string(Subset s);
Subset parse_subset(const std::string& text);
/// "hard", "soft", "none".
std::string to_string(LabelKind k);
LabelKind parse_label_kind(const std::string& text);
LabelKind label_kind_of(Subset s);

/// Row-major [rows, cols] float matrix.
struct FrameMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  float& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  bool operator==(const FrameMatrix&) const = default;
};

struct HardEvent {
  std::size_t label = 0;         // index within the hard classes
  std::size_t onset_frame = 0;   // inclusive
  std::size_t offset_frame = 0;  // exclusive
  bool operator==(const HardEvent&) const = default;
};

enum class EnvelopeShape { kBox, kTrapezoid };

struct ClassTemplate {
  std::size_t label = 0;  // index within the subset's label space
  bool soft = false;      // soft-labelled class family (trapezoid envelope)
  std::size_t band_lo = 0;
  std::size_t band_hi = 0;  // exclusive
  std::size_t min_frames = 8;
  std::size_t max_frames = 25;
  EnvelopeShape envelope = EnvelopeShape::kBox;
};

struct ScenarioSpec {
  Subset subset = Subset::kHard;
  std::size_t frames = 50;
  std::size_t bins = 32;
  std::size_t hard_classes = 5;
  std::size_t soft_classes = 5;
  std::vector<ClassTemplate> classes;
  double noise_level = 0.3;
  double tilt = 0.0;
  std::size_t min_events = 1;
  std::size_t max_events = 4;
};

/// Either no labels, hard events, or a per-frame matrix (soft labels, or the
/// activity matrix of a mixed-up hard clip).
using ClipLabels = std::variant<std::monostate, std::vector<HardEvent>, FrameMatrix>;

struct Clip {
  Subset subset = Subset::kHard;
  std::uint64_t seed = 0;
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<float> features;  // [frames, bins], nonnegative
  ClipLabels labels;

  bool has_hard_events() const { return std::holds_alternative<std::vector<HardEvent>>(labels); }
  bool has_frame_labels() const { return std::holds_alternative<FrameMatrix>(labels); }
  const std::vector<HardEvent>& hard_events() const {
    return std::get<std::vector<HardEvent>>(labels);
  }
  const FrameMatrix& frame_labels() const { return std::get<FrameMatrix>(labels); }
  bool operator==(const Clip&) const = default;
};

struct PlacedEvent {
  std::size_t template_index = 0;  // into ScenarioSpec::classes
  std::size_t onset = 0;
  std::size_t offset = 0;  // exclusive
  float amplitude = 1.0f;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

struct DataConfig {
  std::size_t frames = 50;
  std::size_t bins = 32;
  double hop_s = 0.02;
  std::size_t hard_classes = 5;
  std::size_t soft_classes = 5;
  double noise_level = 0.3;
  double hard_tilt = 0.0;
  double soft_tilt = 0.8;
  double unlabeled_tilt = 0.4;
  std::size_t min_events = 1;
  std::size_t max_events = 4;
  SplitSizes hard{64, 16, 32};
  SplitSizes soft{64, 16, 32};
  SplitSizes unlabeled{64, 0, 0};
  std::uint64_t seed = 2024;
};

/// Scenario for one subset: class bands, durations, tilt, noise.
ScenarioSpec make_scenario(const DataConfig& config, Subset subset);

/// Draws 1..max_events events and renders them; deterministic per (spec, seed).
Clip generate_clip(const ScenarioSpec& spec, std::uint64_t seed);

/// Renders explicit events over a seeded background. Same-class events must
/// not overlap.
Clip render_clip(const ScenarioSpec& spec, std::span<const PlacedEvent> events,
                 std::uint64_t noise_seed);

/// [frames, classes] frame-activity (hard) or soft matrix of a labelled clip.
FrameMatrix frame_targets(const Clip& clip, std::size_t classes);

/// Convex combination lambda*a + (1-lambda)*b of features and frame labels.
/// lambda = 1 returns `a` and lambda = 0 returns `b` unchanged.
Clip mixup(const Clip& a, const Clip& b, double lambda, std::size_t label_classes);

/// Zeroes features on frames [start, start + width); labels stay unchanged.
Clip time_mask(const Clip& clip, std::size_t start, std::size_t width);

struct ManifestEntry {
  std::uint64_t seed = 0;
  Subset subset = Subset::kHard;
  LabelKind label_kind = LabelKind::kHard;
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::map<std::string, std::string> header;  // "# key=value" lines
  std::vector<ManifestEntry> entries;
};

enum class Split { kTrain = 0, kValid = 1, kTest = 2 };

struct Dataset {
  std::array<Manifest, 3> manifests;
  std::array<std::vector<Clip>, 3> clips;

  const std::vector<Clip>& split(Split s) const { return clips[static_cast<int>(s)]; }
  const Manifest& manifest(Split s) const { return manifests[static_cast<int>(s)]; }
};

/// One SplitSizes per spec. Clip seeds come from a splitmix64 stream over
/// `seed` and are distinct across all splits.
Dataset make_dataset(std::span<const ScenarioSpec> specs, std::span<const SplitSizes> sizes,
                     std::uint64_t seed);
/// Hard, soft, and unlabeled subsets with the sizes in `config`.
Dataset make_dataset(const DataConfig& config);

/// Header keys identifying the grid and label spaces.
std::map<std::string, std::string> manifest_header(const DataConfig& config);

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
/// Throws ConfigError naming the 1-based line for malformed content and for
/// an empty manifest.
Manifest read_manifest(const std::filesystem::path& path);

std::vector<Clip> regenerate(const Manifest& manifest, const DataConfig& config);

}  // namespace mtda
