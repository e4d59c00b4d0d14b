// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "mtda/checkpoint.hpp"
#include "mtda/data.hpp"
#include "mtda/error.hpp"
#include "mtda/train.hpp"

namespace mtda::cli {
namespace fs = std::filesystem;

namespace {

class Log {
 public:
  explicit Log(const fs::path& path) : file_(path, std::ios::app) {}
  void line(const std::string& text) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::lock_guard<std::mutex> lock(mu_);
    file_ << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << text << '\n';
    file_.flush();
  }

 private:
  std::ofstream file_;
  std::mutex mu_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
  if (!f) throw ConfigError("failed writing " + path.string());
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw ConfigError("cannot create output directory " + dir.string());
}

std::string metric(const std::optional<double>& v) { return v ? format_double(*v) : "nan"; }

std::string quote_csv(const std::string& s) {
  return s.find(',') == std::string::npos ? s : "\"" + s + "\"";
}

std::size_t thread_cap(std::size_t jobs) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MTDA_THREADS")) {
    std::size_t v = 0;
    const std::string s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && v > 0) cap = v;
  }
  return std::min(cap, jobs);
}

// Identity in the forward pass; the backward rule scales the incoming
// gradient by 1.5, which is wrong on purpose.
Tensor<double> faulty_identity(const Tensor<double>& x) {
  const bool track = should_record<double>({&x});
  Tensor<double> out = make_result<double>(x.shape(), track);
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  if (track) {
    Tape<double>::active()->record(out, [sx = x.storage(), so = out.storage()]() {
      double* gx = grad_of<double>(*sx).data();
      for (std::size_t i = 0; i < so->grad.size(); ++i) gx[i] += 1.5 * so->grad[i];
    });
  }
  return out;
}

DualBranchModel<float> load_model(const fs::path& checkpoint, RunConfig& config) {
  if (!fs::exists(checkpoint))
    throw ConfigError("checkpoint " + checkpoint.string() + " not found");
  const CheckpointData data = read_checkpoint(checkpoint);
  config = parse_run_config(data.config_json);
  DualBranchModel<float> model = DualBranchModel<float>::create(config.model_config(), config.seed);
  load_into(data, model);
  return model;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const DivergenceError& e) {
    err << "error: training diverged at step " << e.step() << ": " << e.what() << '\n';
    return kExitDiverged;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace

RunConfig resolve_config(const CommonOptions& options) {
  RunConfig config;
  if (options.config) config = load_run_config(*options.config);
  for (const std::string& o : options.overrides) apply_override(config, o);
  if (options.seed) config.seed = *options.seed;
  config.validate();
  return config;
}

Fault parse_fault(const std::string& text) {
  if (text.empty() || text == "none") return Fault::kNone;
  if (text == "backward") return Fault::kBackward;
  if (text == "nan-loss") return Fault::kNanLoss;
  throw ConfigError("unknown fault '" + text + "' (expected backward or nan-loss)");
}

// ---- train -----------------------------------------------------------------

int cmd_train(const CommonOptions& options, Fault fault, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = resolve_config(options);
    prepare_out(options.out);
    Log log(options.out / "log.txt");
    const std::string resolved = to_json_string(config);
    write_text(options.out / "resolved_config.json", resolved);
    log.line("train: generating dataset");

    const Dataset ds = make_dataset(config.data);
    write_manifest(options.out / "train_manifest.txt", ds.manifest(Split::kTrain));
    write_manifest(options.out / "valid_manifest.txt", ds.manifest(Split::kValid));
    write_manifest(options.out / "test_manifest.txt", ds.manifest(Split::kTest));

    std::ofstream csv(options.out / "metrics.csv", std::ios::binary | std::ios::trunc);
    csv << metrics_csv_header() << '\n';
    auto on_epoch = [&](const EpochRow& row) {
      const std::string line = to_csv_row(row);
      csv << line << '\n';
      csv.flush();
      out << line << '\n';
      log.line("epoch " + line);
    };
    LossHook hook;
    if (fault == Fault::kNanLoss) {
      hook = [](const Tensor<float>& loss, std::size_t step) {
        return step == 3 ? scale(loss, std::numeric_limits<float>::quiet_NaN()) : loss;
      };
    }
    const DualBranchModel<float> model =
        DualBranchModel<float>::create(config.model_config(), config.seed);
    out << metrics_csv_header() << '\n';
    TrainResult result;
    try {
      result = train_loop(model, ds.split(Split::kTrain), ds.split(Split::kValid),
                          config.train_config(), config.eval_config(), on_epoch, hook);
    } catch (const DivergenceError& e) {
      log.line(std::string("diverged: ") + e.what());
      throw;
    }
    save_checkpoint(options.out / "checkpoint.bin", resolved, result.student);

    const MetricsReport test =
        evaluate(result.student, ds.split(Split::kTest), config.eval_config());
    write_text(options.out / "test_metrics.csv",
               "mpAUC,event_f1\n" + metric(test.mpauc) + "," + metric(test.event_f1) + "\n");
    out << "test mpAUC=" << metric(test.mpauc) << " event_f1=" << metric(test.event_f1) << '\n';
    log.line("train: done");
    return kExitOk;
  });
}

// ---- eval ------------------------------------------------------------------

int cmd_eval(const CommonOptions& options, const fs::path& checkpoint,
             const fs::path& manifest_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig config;
    const DualBranchModel<float> model = load_model(checkpoint, config);
    if (options.config || !options.overrides.empty()) {
      const RunConfig requested = resolve_config(options);
      std::vector<std::string> diff;
      for (const std::string& d : config_diff(config, requested)) {
        if (d.rfind("model.", 0) == 0 || d.rfind("data.", 0) == 0) diff.push_back(d);
      }
      if (!diff.empty()) {
        std::string msg = "checkpoint and config disagree:";
        for (const auto& d : diff) msg += "\n  " + d;
        throw ConfigError(msg);
      }
      config.eval = requested.eval;
    }
    const Manifest manifest = read_manifest(manifest_path);
    const auto expected = manifest_header(config.data);
    std::string diff;
    for (const auto& [key, value] : manifest.header) {
      auto it = expected.find(key);
      if (it != expected.end() && it->second != value) {
        diff += "\n  " + key + ": manifest " + value + ", checkpoint " + it->second;
      }
    }
    if (!diff.empty()) throw ConfigError("manifest does not match the checkpoint config:" + diff);
    const std::vector<Clip> clips = regenerate(manifest, config.data);
    const MetricsReport report = evaluate(model, clips, config.eval_config());
    out << "mpAUC,event_f1\n" << metric(report.mpauc) << ',' << metric(report.event_f1) << '\n';
    for (const auto& note : report.notes) err << "note: " << note << '\n';
    return kExitOk;
  });
}

// ---- ablate ----------------------------------------------------------------

std::vector<AblationRun> ablation_runs(const RunConfig& base, const std::string& axis) {
  std::vector<AblationRun> runs;
  if (axis == "stream") {
    for (StreamMode m : {StreamMode::kBToC, StreamMode::kCToB, StreamMode::kBidirectional}) {
      RunConfig c = base;
      c.model.stream = m;
      runs.push_back({to_string(m), c});
    }
  } else if (axis == "adapters") {
    for (std::size_t n = 1; n <= 3; ++n) {
      RunConfig c = base;
      c.model.adapters = adapter_bank(n);
      runs.push_back({"N=" + std::to_string(n), c});
    }
  } else if (axis == "dims") {
    const std::pair<const char*, double> settings[] = {{"2,1/2", 2.0}, {"4,1/4", 4.0}};
    for (const auto& [label, r] : settings) {
      RunConfig c = base;
      c.model.adapters = {AdapterSpec::long_term(r), AdapterSpec::short_term(1.0 / r)};
      runs.push_back({label, c});
    }
  } else {
    throw ConfigError("unknown ablation axis '" + axis + "' (expected adapters, dims, or stream)");
  }
  return runs;
}

int cmd_ablate(const CommonOptions& options, const std::string& axis, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig base = resolve_config(options);
    const std::vector<AblationRun> runs = ablation_runs(base, axis);
    prepare_out(options.out);
    Log log(options.out / "log.txt");
    write_text(options.out / "resolved_config.json", to_json_string(base));
    const Dataset ds = make_dataset(base.data);

    struct Outcome {
      MetricsReport report;
      std::optional<std::size_t> diverged_at;
      std::string error;
    };
    std::vector<Outcome> outcomes(runs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < runs.size(); i = next++) {
        const RunConfig& c = runs[i].config;
        log.line("ablate " + axis + ": start " + runs[i].label);
        try {
          c.validate();
          const auto model = DualBranchModel<float>::create(c.model_config(), c.seed);
          const TrainResult r = train_loop(model, ds.split(Split::kTrain), ds.split(Split::kValid),
                                           c.train_config(), c.eval_config());
          outcomes[i].report = evaluate(r.student, ds.split(Split::kTest), c.eval_config());
        } catch (const DivergenceError& e) {
          outcomes[i].diverged_at = e.step();
          outcomes[i].error = e.what();
        } catch (const std::exception& e) {
          outcomes[i].error = e.what();
        }
        log.line("ablate " + axis + ": done " + runs[i].label);
      }
    };
    std::vector<std::thread> pool;
    const std::size_t threads = thread_cap(runs.size());
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    int code = kExitOk;
    std::string csv = "setting,event_f1,mpAUC\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const Outcome& o = outcomes[i];
      if (o.diverged_at) {
        err << "error: run " << runs[i].label << " diverged at step " << *o.diverged_at << '\n';
        code = kExitDiverged;
      } else if (!o.error.empty()) {
        err << "error: run " << runs[i].label << ": " << o.error << '\n';
        if (code == kExitOk) code = kExitUsage;
      }
      const std::string row =
          quote_csv(runs[i].label) + "," + metric(o.report.event_f1) + "," + metric(o.report.mpauc);
      csv += row + "\n";
      out << row << '\n';
    }
    write_text(options.out / ("ablation_" + axis + ".csv"), csv);
    return code;
  });
}

// ---- gradcheck -------------------------------------------------------------

ModelConfig gradcheck_model_config() {
  ModelConfig c;
  c.input_frames = 16;
  c.input_bins = 8;
  c.transformer_blocks = 2;
  c.cnn_blocks = 1;
  c.model_dim = 16;
  c.heads = 2;
  c.cnn_channels = {3};
  c.ffn_hidden = 24;
  c.adapters = adapter_bank(2);
  c.stream = StreamMode::kBidirectional;
  c.hard_classes = 2;
  c.soft_classes = 2;
  return c;
}

GradCheckReport check_model_gradients(std::uint64_t seed, const GradCheckOptions& options,
                                      Fault fault) {
  const ModelConfig config = gradcheck_model_config();
  DualBranchModel<double> model = DualBranchModel<double>::create(config, seed);
  for (auto& block : model.blocks()) {
    for (std::size_t i = 0; i < block.adapters.size(); ++i) {
      block.adapters[i].scale[0] = i % 2 == 0 ? 0.3 : -0.2;
    }
  }
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::uniform_real_distribution<double> u(0.0, 1.0), w(-1.0, 1.0);
  Tensor<double> input(Shape{config.input_frames, config.input_bins});
  for (double& v : input.values()) v = u(rng);
  Tensor<double> weights(Shape{config.input_frames, config.num_classes()});
  for (double& v : weights.values()) v = w(rng);

  auto loss = [&]() {
    Tensor<double> scores = model.forward(input, NormMode::kTrainFrozen);
    if (fault == Fault::kBackward) scores = faulty_identity(scores);
    return sum(mul(scores, weights));
  };
  return grad_check(loss, model.parameters(), options);
}

int cmd_gradcheck(const CommonOptions& options, std::optional<double> tol, Fault fault,
                  std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = resolve_config(options);
    GradCheckOptions gc;
    gc.tol = tol.value_or(1e-4);
    if (!(gc.tol > 0.0)) throw ConfigError("--tol must be positive");
    const GradCheckReport report = check_model_gradients(config.seed, gc, fault);
    for (const TensorGradReport& t : report.tensors) {
      std::ostringstream line;
      line << std::left << std::setw(34) << t.name << " max_rel_err=" << std::scientific
           << std::setprecision(3) << t.max_rel_error << ' ' << (t.passed ? "ok" : "FAIL");
      if (t.kinks > 0) line << " (" << t.kinks << " probes straddled a kink)";
      out << line.str() << '\n';
    }
    std::ostringstream summary;
    summary << std::scientific << std::setprecision(3) << report.max_rel_error();
    if (report.passed()) {
      out << "gradcheck passed: " << report.tensors.size() << " tensors, max relative error "
          << summary.str() << " < tol " << gc.tol << '\n';
      return kExitOk;
    }
    if (report.too_many_kinks) {
      err << "gradcheck: " << report.kinks()
          << " probes straddled kinks, above the allowed share\n";
    }
    err << "gradcheck failed (tol " << gc.tol << "):";
    for (const std::string& name : report.failing()) err << ' ' << name;
    err << '\n';
    return kExitCheckFailed;
  });
}

// ---- visualize -------------------------------------------------------------

void write_pgm(const fs::path& path, const Tensor<float>& m) {
  const std::size_t time = m.dim(0), feat = m.dim(1);
  const auto [lo_it, hi_it] = std::minmax_element(m.data().begin(), m.data().end());
  const double lo = *lo_it, hi = *hi_it;
  std::ostringstream s;
  s << "P2\n" << time << ' ' << feat << "\n255\n";
  for (std::size_t r = 0; r < feat; ++r) {
    for (std::size_t c = 0; c < time; ++c) {
      const double v = hi > lo ? (static_cast<double>(m(c, r)) - lo) / (hi - lo) : 0.0;
      s << (c ? " " : "") << static_cast<int>(std::lround(255.0 * v));
    }
    s << '\n';
  }
  write_text(path, s.str());
}

void write_csv_matrix(const fs::path& path, const Tensor<float>& m) {
  std::string s;
  char buf[32];
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    for (std::size_t c = 0; c < m.dim(1); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), m(r, c));
      if (c) s += ',';
      s.append(buf, res.ptr);
    }
    s += '\n';
  }
  write_text(path, s);
}

Tensor<float> read_csv_matrix(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::vector<float> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t n = 0;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      float v = 0.0f;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc()) throw ConfigError("bad number '" + cell + "' in " + path.string());
      values.push_back(v);
      ++n;
    }
    if (rows == 0) cols = n;
    if (n != cols) throw ConfigError("ragged rows in " + path.string());
    ++rows;
  }
  return Tensor<float>(Shape{rows, cols}, std::move(values));
}

void write_visualization(const DualBranchModel<float>& model, const Tensor<float>& features,
                         const fs::path& dir) {
  Tape<float>::Pause no_tape;
  ForwardTrace<float> trace;
  model.forward(features, NormMode::kEval, &trace);
  const auto& specs = model.config().adapters;
  std::optional<std::size_t> long_idx, short_idx;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!long_idx && specs[i].activation == AdapterActivation::kRelu) long_idx = i;
    if (!short_idx && specs[i].activation == AdapterActivation::kSoftmax) short_idx = i;
  }
  if (!long_idx || !short_idx) {
    throw ConfigError(
        "visualization needs one long-term (relu) and one short-term (softmax) adapter");
  }
  const std::pair<std::string, Tensor<float>> images[] = {
      {"input", features},
      {"long_term_adapter", trace.first_block_adapters.at(*long_idx)},
      {"short_term_adapter", trace.first_block_adapters.at(*short_idx)},
  };
  for (const auto& [name, m] : images) {
    write_pgm(dir / (name + ".pgm"), m);
    write_csv_matrix(dir / (name + ".csv"), m);
  }
}

int cmd_visualize(const CommonOptions& options, const fs::path& checkpoint, std::uint64_t clip_seed,
                  std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig config;
    const DualBranchModel<float> model = load_model(checkpoint, config);
    prepare_out(options.out);
    const Clip clip = generate_clip(make_scenario(config.data, Subset::kHard), clip_seed);
    write_visualization(model, Tensor<float>(Shape{clip.frames, clip.bins}, clip.features),
                        options.out);
    out << "wrote input, long_term_adapter, short_term_adapter (.pgm, .csv) to "
        << options.out.string() << '\n';
    return kExitOk;
  });
}

}  // namespace mtda::cli
