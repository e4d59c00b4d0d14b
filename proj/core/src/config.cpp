// SPDX-License-Identifier: Apache-2.0

#include "mtda/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "mtda/error.hpp"

namespace mtda {
namespace {

using nlohmann::ordered_json;

// Reads fields out of one JSON object and rejects whatever is left over.
class Reader {
 public:
  Reader(const ordered_json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError("config key '" + path_ + "' must be an object");
  }

  std::string key(const std::string& name) const {
    return path_.empty() ? name : path_ + "." + name;
  }

  const ordered_json* find(const std::string& name) {
    auto it = node_.find(name);
    if (it == node_.end()) return nullptr;
    seen_.insert(name);
    return &*it;
  }

  void read(const std::string& name, std::size_t& out) {
    if (const auto* v = find(name)) out = as_size(*v, key(name));
  }
  void read(const std::string& name, std::uint64_t& out, int) {
    if (const auto* v = find(name)) out = as_size(*v, key(name));
  }
  void read(const std::string& name, double& out) {
    if (const auto* v = find(name)) {
      if (!v->is_number()) throw ConfigError("config key '" + key(name) + "' must be a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& name, bool& out) {
    if (const auto* v = find(name)) {
      if (!v->is_boolean()) throw ConfigError("config key '" + key(name) + "' must be a boolean");
      out = v->get<bool>();
    }
  }
  void read(const std::string& name, std::string& out) {
    if (const auto* v = find(name)) {
      if (!v->is_string()) throw ConfigError("config key '" + key(name) + "' must be a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (seen_.count(it.key())) continue;
      // Name the full dotted path down to the first leaf.
      std::string full = key(it.key());
      for (const ordered_json* v = &it.value(); v->is_object() && !v->empty();) {
        full += "." + v->begin().key();
        v = &v->begin().value();
      }
      throw ConfigError("unknown config key '" + full + "'");
    }
  }

  static std::uint64_t as_size(const ordered_json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0.0 && d == static_cast<double>(static_cast<std::uint64_t>(d))) {
        return static_cast<std::uint64_t>(d);
      }
    }
    throw ConfigError("config key '" + key + "' must be a nonnegative integer");
  }

 private:
  const ordered_json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

ordered_json to_json(const RunConfig& c) {
  ordered_json adapters = ordered_json::array();
  for (const AdapterSpec& a : c.model.adapters) {
    adapters.push_back({{"ratio", a.ratio},
                        {"activation", to_string(a.activation)},
                        {"scale_init", a.scale_init}});
  }
  ordered_json j;
  j["seed"] = c.seed;
  j["model"] = {
      {"dim", c.model.model_dim},
      {"heads", c.model.heads},
      {"transformer_blocks", c.model.transformer_blocks},
      {"cnn_blocks", c.model.cnn_blocks},
      {"cnn_channels", c.model.cnn_channels},
      {"ffn_hidden", c.model.ffn_hidden},
      {"adapters", adapters},
      {"stream", to_string(c.model.stream)},
      {"fusion", c.model.fusion_enabled},
      {"fusion_dim", c.model.fusion_dim},
      {"fusion_heads", c.model.fusion_heads},
  };
  auto sizes = [](const SplitSizes& s) {
    return ordered_json{{"train", s.train}, {"valid", s.valid}, {"test", s.test}};
  };
  j["data"] = {
      {"seed", c.data.seed},
      {"frames", c.data.frames},
      {"bins", c.data.bins},
      {"hop_s", c.data.hop_s},
      {"hard_classes", c.data.hard_classes},
      {"soft_classes", c.data.soft_classes},
      {"noise_level", c.data.noise_level},
      {"hard_tilt", c.data.hard_tilt},
      {"soft_tilt", c.data.soft_tilt},
      {"unlabeled_tilt", c.data.unlabeled_tilt},
      {"min_events", c.data.min_events},
      {"max_events", c.data.max_events},
      {"hard", sizes(c.data.hard)},
      {"soft", sizes(c.data.soft)},
      {"unlabeled", sizes(c.data.unlabeled)},
  };
  j["train"] = {
      {"epochs", c.train.epochs},
      {"batch_size", c.train.batch_size},
      {"lr", c.train.adam.lr},
      {"beta1", c.train.adam.beta1},
      {"beta2", c.train.adam.beta2},
      {"eps", c.train.adam.eps},
      {"ema_decay", c.train.ema_decay},
      {"consistency_max", c.train.consistency_max},
      {"consistency_ramp", c.train.consistency_ramp},
      {"mixup_prob", c.train.mixup_prob},
      {"mixup_alpha", c.train.mixup_alpha},
      {"time_mask_prob", c.train.time_mask_prob},
      {"time_mask_max_width", c.train.time_mask_max_width},
  };
  j["eval"] = {
      {"threshold", c.eval.threshold},
      {"median_window", c.eval.median_window},
      {"segment_s", c.eval.segment_s},
      {"gt_threshold", c.eval.gt_threshold},
      {"max_fpr", c.eval.max_fpr},
      {"dtc", c.eval.dtc},
      {"gtc", c.eval.gtc},
  };
  return j;
}

void read_sizes(Reader& parent, const std::string& name, SplitSizes& s) {
  if (const auto* v = parent.find(name)) {
    Reader r(*v, parent.key(name));
    r.read("train", s.train);
    r.read("valid", s.valid);
    r.read("test", s.test);
    r.finish();
  }
}

void from_json(const ordered_json& j, RunConfig& c) {
  Reader root(j, "");
  root.read("seed", c.seed, 0);
  if (const auto* m = root.find("model")) {
    Reader r(*m, "model");
    r.read("dim", c.model.model_dim);
    r.read("heads", c.model.heads);
    r.read("transformer_blocks", c.model.transformer_blocks);
    r.read("cnn_blocks", c.model.cnn_blocks);
    if (const auto* ch = r.find("cnn_channels")) {
      if (!ch->is_array()) throw ConfigError("config key 'model.cnn_channels' must be an array");
      c.model.cnn_channels.clear();
      for (const auto& e : *ch) {
        c.model.cnn_channels.push_back(Reader::as_size(e, "model.cnn_channels"));
      }
    }
    r.read("ffn_hidden", c.model.ffn_hidden);
    if (const auto* ad = r.find("adapters")) {
      if (!ad->is_array()) throw ConfigError("config key 'model.adapters' must be an array");
      c.model.adapters.clear();
      for (std::size_t i = 0; i < ad->size(); ++i) {
        Reader a((*ad)[i], "model.adapters[" + std::to_string(i) + "]");
        AdapterSpec spec;
        std::string act = to_string(spec.activation);
        a.read("ratio", spec.ratio);
        a.read("activation", act);
        a.read("scale_init", spec.scale_init);
        a.finish();
        try {
          spec.activation = parse_adapter_activation(act);
        } catch (const std::exception& e) {
          throw ConfigError("config key 'model.adapters[" + std::to_string(i) +
                            "].activation': " + e.what());
        }
        c.model.adapters.push_back(spec);
      }
    }
    std::string stream = to_string(c.model.stream);
    r.read("stream", stream);
    try {
      c.model.stream = parse_stream_mode(stream);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config key 'model.stream': ") + e.what());
    }
    r.read("fusion", c.model.fusion_enabled);
    r.read("fusion_dim", c.model.fusion_dim);
    r.read("fusion_heads", c.model.fusion_heads);
    r.finish();
  }
  if (const auto* d = root.find("data")) {
    Reader r(*d, "data");
    r.read("seed", c.data.seed, 0);
    r.read("frames", c.data.frames);
    r.read("bins", c.data.bins);
    r.read("hop_s", c.data.hop_s);
    r.read("hard_classes", c.data.hard_classes);
    r.read("soft_classes", c.data.soft_classes);
    r.read("noise_level", c.data.noise_level);
    r.read("hard_tilt", c.data.hard_tilt);
    r.read("soft_tilt", c.data.soft_tilt);
    r.read("unlabeled_tilt", c.data.unlabeled_tilt);
    r.read("min_events", c.data.min_events);
    r.read("max_events", c.data.max_events);
    read_sizes(r, "hard", c.data.hard);
    read_sizes(r, "soft", c.data.soft);
    read_sizes(r, "unlabeled", c.data.unlabeled);
    r.finish();
  }
  if (const auto* t = root.find("train")) {
    Reader r(*t, "train");
    r.read("epochs", c.train.epochs);
    r.read("batch_size", c.train.batch_size);
    r.read("lr", c.train.adam.lr);
    r.read("beta1", c.train.adam.beta1);
    r.read("beta2", c.train.adam.beta2);
    r.read("eps", c.train.adam.eps);
    r.read("ema_decay", c.train.ema_decay);
    r.read("consistency_max", c.train.consistency_max);
    r.read("consistency_ramp", c.train.consistency_ramp);
    r.read("mixup_prob", c.train.mixup_prob);
    r.read("mixup_alpha", c.train.mixup_alpha);
    r.read("time_mask_prob", c.train.time_mask_prob);
    r.read("time_mask_max_width", c.train.time_mask_max_width);
    r.finish();
  }
  if (const auto* e = root.find("eval")) {
    Reader r(*e, "eval");
    r.read("threshold", c.eval.threshold);
    r.read("median_window", c.eval.median_window);
    r.read("segment_s", c.eval.segment_s);
    r.read("gt_threshold", c.eval.gt_threshold);
    r.read("max_fpr", c.eval.max_fpr);
    r.read("dtc", c.eval.dtc);
    r.read("gtc", c.eval.gtc);
    r.finish();
  }
  root.finish();
}

void collect_diff(const ordered_json& a, const ordered_json& b, const std::string& path,
                  std::vector<std::string>& out) {
  if (a.is_object() && b.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      const std::string key = path.empty() ? it.key() : path + "." + it.key();
      auto other = b.find(it.key());
      if (other == b.end()) {
        out.push_back(key);
      } else {
        collect_diff(*it, *other, key, out);
      }
    }
    return;
  }
  if (a != b) out.push_back(path + ": " + a.dump() + " vs " + b.dump());
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig m = model;
  m.input_frames = data.frames;
  m.input_bins = data.bins;
  m.hard_classes = data.hard_classes;
  m.soft_classes = data.soft_classes;
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig e = eval;
  e.frame_hop_s = data.hop_s;
  return e;
}

void RunConfig::validate() const {
  model_config().validate();
  train_config().validate();
  make_scenario(data, Subset::kHard);
  if (!(data.hop_s > 0.0)) throw ConfigError("data.hop_s must be positive");
  if (!(data.noise_level >= 0.0)) throw ConfigError("data.noise_level must be nonnegative");
  if (data.hard.train + data.soft.train + data.unlabeled.train == 0) {
    throw ConfigError("data: the training split is empty");
  }
  if (!(eval.threshold > 0.0 && eval.threshold < 1.0)) {
    throw ConfigError("eval.threshold must lie in (0, 1)");
  }
  if (eval.median_window % 2 == 0) throw ConfigError("eval.median_window must be odd");
  if (!(eval.segment_s > 0.0)) throw ConfigError("eval.segment_s must be positive");
  if (!(eval.max_fpr > 0.0 && eval.max_fpr <= 1.0)) {
    throw ConfigError("eval.max_fpr must lie in (0, 1]");
  }
}

std::string to_json_string(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

RunConfig parse_run_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  from_json(j, c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key=value");
  }
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  ordered_json value;
  try {
    value = ordered_json::parse(text);
  } catch (const ordered_json::parse_error&) {
    value = text;
  }
  ordered_json doc = to_json(config);
  ordered_json* node = &doc;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!node->is_object() || !node->contains(path[i])) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    node = &(*node)[path[i]];
  }
  *node = value;
  RunConfig updated;
  from_json(doc, updated);
  config = updated;
}

std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b) {
  std::vector<std::string> out;
  collect_diff(to_json(a), to_json(b), "", out);
  return out;
}

}  // namespace mtda
