// SPDX-License-Identifier: Apache-2.0

#include "mtda/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "mtda/error.hpp"

namespace mtda {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Trapezoid with linear ramps of `rise` frames on each side, peak 1.
float trapezoid(std::size_t i, std::size_t duration) {
  const std::size_t rise = std::max<std::size_t>(1, duration / 4);
  const double up = static_cast<double>(i + 1) / static_cast<double>(rise + 1);
  const double down = static_cast<double>(duration - i) / static_cast<double>(rise + 1);
  return static_cast<float>(std::min({1.0, up, down}));
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace

std::string to_string(Subset s) {
  switch (s) {
    case Subset::kHard:
      return "A_hard";
    case Subset::kSoft:
      return "B_soft";
    case Subset::kUnlabeled:
      return "unlabeled";
  }
  return "?";
}

Subset parse_subset(const std::string& text) {
  if (text == "A_hard") return Subset::kHard;
  if (text == "B_soft") return Subset::kSoft;
  if (text == "unlabeled") return Subset::kUnlabeled;
  throw ConfigError("unknown subset '" + text + "'");
}

std::string to_string(LabelKind k) {
  switch (k) {
    case LabelKind::kHard:
      return "hard";
    case LabelKind::kSoft:
      return "soft";
    case LabelKind::kNone:
      return "none";
  }
  return "?";
}

LabelKind parse_label_kind(const std::string& text) {
  if (text == "hard") return LabelKind::kHard;
  if (text == "soft") return LabelKind::kSoft;
  if (text == "none") return LabelKind::kNone;
  throw ConfigError("unknown label kind '" + text + "'");
}

LabelKind label_kind_of(Subset s) {
  switch (s) {
    case Subset::kHard:
      return LabelKind::kHard;
    case Subset::kSoft:
      return LabelKind::kSoft;
    case Subset::kUnlabeled:
      return LabelKind::kNone;
  }
  return LabelKind::kNone;
}

ScenarioSpec make_scenario(const DataConfig& config, Subset subset) {
  const std::size_t total = config.hard_classes + config.soft_classes;
  if (total == 0) throw ConfigError("data: at least one class is required");
  if (config.bins < total) {
    throw ConfigError("data.bins (" + std::to_string(config.bins) +
                      ") must be at least the number of classes (" + std::to_string(total) + ")");
  }
  if (config.frames < 2) throw ConfigError("data.frames must be at least 2");
  if (config.min_events == 0 || config.min_events > config.max_events) {
    throw ConfigError("data: need 1 <= min_events <= max_events");
  }
  ScenarioSpec spec;
  spec.subset = subset;
  spec.frames = config.frames;
  spec.bins = config.bins;
  spec.hard_classes = config.hard_classes;
  spec.soft_classes = config.soft_classes;
  spec.noise_level = config.noise_level;
  spec.min_events = config.min_events;
  spec.max_events = config.max_events;
  switch (subset) {
    case Subset::kHard:
      spec.tilt = config.hard_tilt;
      break;
    case Subset::kSoft:
      spec.tilt = config.soft_tilt;
      break;
    case Subset::kUnlabeled:
      spec.tilt = config.unlabeled_tilt;
      break;
  }
  const std::size_t f = config.frames;
  for (std::size_t j = 0; j < total; ++j) {
    const bool soft = j >= config.hard_classes;
    if (subset == Subset::kHard && soft) continue;
    if (subset == Subset::kSoft && !soft) continue;
    ClassTemplate c;
    c.label = soft ? j - config.hard_classes : j;
    c.soft = soft;
    c.band_lo = j * config.bins / total;
    c.band_hi = (j + 1) * config.bins / total;
    c.envelope = soft ? EnvelopeShape::kTrapezoid : EnvelopeShape::kBox;
    c.min_frames = std::max<std::size_t>(1, soft ? f / 4 : f / 6);
    c.max_frames = std::max(c.min_frames, soft ? (4 * f) / 5 : f / 2);
    spec.classes.push_back(c);
  }
  return spec;
}

Clip render_clip(const ScenarioSpec& spec, std::span<const PlacedEvent> events,
                 std::uint64_t noise_seed) {
  const std::size_t t = spec.frames, f = spec.bins;
  Clip clip;
  clip.subset = spec.subset;
  clip.seed = noise_seed;
  clip.frames = t;
  clip.bins = f;
  clip.features.assign(t * f, 0.0f);
  if (spec.noise_level > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double denom = f > 1 ? static_cast<double>(f - 1) : 1.0;
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t b = 0; b < f; ++b) {
        const double tilt = spec.tilt * static_cast<double>(b) / denom;
        clip.features[i * f + b] = static_cast<float>(spec.noise_level * (u(rng) + tilt));
      }
    }
  }

  std::vector<HardEvent> hard;
  FrameMatrix soft{t, spec.soft_classes, std::vector<float>(t * spec.soft_classes, 0.0f)};
  for (std::size_t e = 0; e < events.size(); ++e) {
    const PlacedEvent& ev = events[e];
    if (ev.template_index >= spec.classes.size()) {
      throw ContractError("render_clip: template index out of range");
    }
    if (!(ev.onset < ev.offset && ev.offset <= t)) {
      throw ContractError("render_clip: event frames must satisfy onset < offset <= frames");
    }
    for (std::size_t o = 0; o < e; ++o) {
      const PlacedEvent& other = events[o];
      if (other.template_index == ev.template_index && other.onset < ev.offset &&
          ev.onset < other.offset) {
        throw ContractError("render_clip: overlapping events of the same class");
      }
    }
    const ClassTemplate& c = spec.classes[ev.template_index];
    const std::size_t duration = ev.offset - ev.onset;
    for (std::size_t i = 0; i < duration; ++i) {
      const float env = c.envelope == EnvelopeShape::kBox ? 1.0f : trapezoid(i, duration);
      const float level = ev.amplitude * env;
      const std::size_t frame = ev.onset + i;
      for (std::size_t b = c.band_lo; b < c.band_hi; ++b) clip.features[frame * f + b] += level;
      if (c.soft) soft.at(frame, c.label) = std::max(soft.at(frame, c.label), env);
    }
    if (!c.soft) hard.push_back({c.label, ev.onset, ev.offset});
  }

  switch (spec.subset) {
    case Subset::kHard:
      std::sort(hard.begin(), hard.end(), [](const HardEvent& a, const HardEvent& b) {
        return a.onset_frame != b.onset_frame ? a.onset_frame < b.onset_frame : a.label < b.label;
      });
      clip.labels = std::move(hard);
      break;
    case Subset::kSoft:
      clip.labels = std::move(soft);
      break;
    case Subset::kUnlabeled:
      clip.labels = std::monostate{};
      break;
  }
  return clip;
}

Clip generate_clip(const ScenarioSpec& spec, std::uint64_t seed) {
  if (spec.classes.empty()) throw ConfigError("scenario has no classes");
  std::uint64_t state = seed;
  std::mt19937_64 rng(splitmix64(state));
  const std::uint64_t noise_seed = splitmix64(state);
  const std::size_t count = uniform_index(rng, spec.min_events, spec.max_events);
  std::uniform_real_distribution<float> amp(0.7f, 1.0f);
  std::vector<PlacedEvent> events;
  for (std::size_t e = 0; e < count; ++e) {
    const std::size_t ti = uniform_index(rng, 0, spec.classes.size() - 1);
    const ClassTemplate& c = spec.classes[ti];
    const std::size_t max_len = std::min(c.max_frames, spec.frames);
    const std::size_t min_len = std::min(c.min_frames, max_len);
    // A few placement attempts; a clip may end with fewer events than drawn.
    for (int attempt = 0; attempt < 8; ++attempt) {
      const std::size_t len = uniform_index(rng, min_len, max_len);
      const std::size_t onset = uniform_index(rng, 0, spec.frames - len);
      const std::size_t offset = onset + len;
      // Same-class events keep a one-frame gap so activity runs stay separate.
      const bool clash = std::any_of(events.begin(), events.end(), [&](const PlacedEvent& o) {
        return o.template_index == ti && o.onset <= offset && onset <= o.offset;
      });
      if (clash) continue;
      events.push_back({ti, onset, offset, c.soft ? 1.0f : amp(rng)});
      break;
    }
  }
  Clip clip = render_clip(spec, events, noise_seed);
  clip.seed = seed;
  return clip;
}

FrameMatrix frame_targets(const Clip& clip, std::size_t classes) {
  if (clip.has_frame_labels()) {
    const FrameMatrix& m = clip.frame_labels();
    if (m.cols != classes || m.rows != clip.frames) {
      throw ContractError("frame_targets: label matrix is " + std::to_string(m.rows) + "x" +
                          std::to_string(m.cols) + ", expected " + std::to_string(clip.frames) +
                          "x" + std::to_string(classes));
    }
    return m;
  }
  if (!clip.has_hard_events()) throw ContractError("frame_targets: clip has no labels");
  FrameMatrix m{clip.frames, classes, std::vector<float>(clip.frames * classes, 0.0f)};
  for (const HardEvent& e : clip.hard_events()) {
    if (e.label >= classes) throw ContractError("frame_targets: event class out of range");
    for (std::size_t i = e.onset_frame; i < e.offset_frame; ++i) m.at(i, e.label) = 1.0f;
  }
  return m;
}

Clip mixup(const Clip& a, const Clip& b, double lambda, std::size_t label_classes) {
  if (a.subset != b.subset) {
    throw ContractError("mixup: subset mismatch (" + to_string(a.subset) + " vs " +
                        to_string(b.subset) + ")");
  }
  if (a.frames != b.frames || a.bins != b.bins) throw ContractError("mixup: shape mismatch");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("mixup: lambda must lie in [0, 1]");
  if (lambda == 1.0) return a;
  if (lambda == 0.0) return b;
  const float la = static_cast<float>(lambda), lb = static_cast<float>(1.0 - lambda);
  Clip out = a;
  for (std::size_t i = 0; i < out.features.size(); ++i) {
    out.features[i] = la * a.features[i] + lb * b.features[i];
  }
  if (a.subset == Subset::kUnlabeled) return out;
  const FrameMatrix ma = frame_targets(a, label_classes);
  const FrameMatrix mb = frame_targets(b, label_classes);
  FrameMatrix mixed = ma;
  for (std::size_t i = 0; i < mixed.values.size(); ++i) {
    mixed.values[i] = la * ma.values[i] + lb * mb.values[i];
  }
  out.labels = std::move(mixed);
  return out;
}

Clip time_mask(const Clip& clip, std::size_t start, std::size_t width) {
  if (start > clip.frames || width > clip.frames - start) {
    throw ContractError("time_mask: span [" + std::to_string(start) + ", " +
                        std::to_string(start + width) + ") exceeds " + std::to_string(clip.frames) +
                        " frames");
  }
  Clip out = clip;
  std::fill(out.features.begin() + static_cast<std::ptrdiff_t>(start * clip.bins),
            out.features.begin() + static_cast<std::ptrdiff_t>((start + width) * clip.bins), 0.0f);
  return out;
}

Dataset make_dataset(std::span<const ScenarioSpec> specs, std::span<const SplitSizes> sizes,
                     std::uint64_t seed) {
  if (specs.size() != sizes.size()) {
    throw ContractError("make_dataset: one SplitSizes per scenario is required");
  }
  Dataset ds;
  std::set<std::uint64_t> used;
  std::uint64_t state = seed;
  for (int split = 0; split < 3; ++split) {
    for (std::size_t s = 0; s < specs.size(); ++s) {
      const std::size_t n = split == 0   ? sizes[s].train
                            : split == 1 ? sizes[s].valid
                                         : sizes[s].test;
      for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t clip_seed = splitmix64(state);
        while (!used.insert(clip_seed).second) clip_seed = splitmix64(state);
        ds.manifests[split].entries.push_back(
            {clip_seed, specs[s].subset, label_kind_of(specs[s].subset)});
        ds.clips[split].push_back(generate_clip(specs[s], clip_seed));
      }
    }
  }
  return ds;
}

Dataset make_dataset(const DataConfig& config) {
  const std::vector<ScenarioSpec> specs{make_scenario(config, Subset::kHard),
                                        make_scenario(config, Subset::kSoft),
                                        make_scenario(config, Subset::kUnlabeled)};
  const std::vector<SplitSizes> sizes{config.hard, config.soft, config.unlabeled};
  Dataset ds = make_dataset(specs, sizes, config.seed);
  for (Manifest& m : ds.manifests) m.header = manifest_header(config);
  return ds;
}

std::map<std::string, std::string> manifest_header(const DataConfig& config) {
  return {
      {"frames", std::to_string(config.frames)},
      {"bins", std::to_string(config.bins)},
      {"hard_classes", std::to_string(config.hard_classes)},
      {"soft_classes", std::to_string(config.soft_classes)},
      {"noise_level", format_number(config.noise_level)},
      {"hard_tilt", format_number(config.hard_tilt)},
      {"soft_tilt", format_number(config.soft_tilt)},
      {"unlabeled_tilt", format_number(config.unlabeled_tilt)},
      {"min_events", std::to_string(config.min_events)},
      {"max_events", std::to_string(config.max_events)},
  };
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write manifest " + path.string());
  for (const auto& [key, value] : manifest.header) out << "# " << key << '=' << value << '\n';
  for (const ManifestEntry& e : manifest.entries) {
    out << e.seed << ',' << to_string(e.subset) << ',' << to_string(e.label_kind) << '\n';
  }
  if (!out) throw ConfigError("failed writing manifest " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read manifest " + path.string());
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) -> void {
    throw ConfigError("manifest " + path.string() + " line " + std::to_string(line_no) + ": " +
                      why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[0] == '#') {
      const std::string body = line.substr(line.find_first_not_of("# \t"));
      const auto eq = body.find('=');
      if (eq == std::string::npos || eq == 0) fail("header must be '# key=value'");
      m.header[body.substr(0, eq)] = body.substr(eq + 1);
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, ',');) fields.push_back(field);
    if (fields.size() != 3) fail("expected 'seed,subset,label_kind', got '" + line + "'");
    ManifestEntry e;
    const std::string& s = fields[0];
    const auto res = std::from_chars(s.data(), s.data() + s.size(), e.seed);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      fail("invalid seed '" + s + "'");
    }
    try {
      e.subset = parse_subset(fields[1]);
      e.label_kind = parse_label_kind(fields[2]);
    } catch (const ConfigError& err) {
      fail(err.what());
    }
    if (e.label_kind != label_kind_of(e.subset)) {
      fail("label kind '" + fields[2] + "' does not match subset '" + fields[1] + "'");
    }
    m.entries.push_back(e);
  }
  if (m.entries.empty()) throw ConfigError("manifest " + path.string() + " has no clips");
  return m;
}

std::vector<Clip> regenerate(const Manifest& manifest, const DataConfig& config) {
  const std::array<ScenarioSpec, 3> specs{make_scenario(config, Subset::kHard),
                                          make_scenario(config, Subset::kSoft),
                                          make_scenario(config, Subset::kUnlabeled)};
  std::vector<Clip> clips;
  clips.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) {
    clips.push_back(generate_clip(specs[static_cast<int>(e.subset)], e.seed));
  }
  return clips;
}

}  // namespace mtda
