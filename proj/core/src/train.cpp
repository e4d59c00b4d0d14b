// SPDX-License-Identifier: Apache-2.0

#include "mtda/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

#include "mtda/error.hpp"
#include "mtda/events.hpp"
#include "mtda/losses.hpp"

namespace mtda {
namespace {

Tensor<float> features_of(const Clip& clip) {
  return Tensor<float>(Shape{clip.frames, clip.bins}, clip.features);
}

FrameMatrix columns(const Tensor<float>& scores, std::size_t begin, std::size_t end) {
  const std::size_t rows = scores.dim(0);
  FrameMatrix m{rows, end - begin, std::vector<float>(rows * (end - begin))};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = begin; c < end; ++c) m.at(r, c - begin) = scores(r, c);
  }
  return m;
}

double sample_beta(double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  const double x = g(rng), y = g(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

std::size_t label_classes(Subset s, std::size_t hard, std::size_t soft) {
  switch (s) {
    case Subset::kHard:
      return hard;
    case Subset::kSoft:
      return soft;
    case Subset::kUnlabeled:
      return 0;
  }
  return 0;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
  if (epochs == 0) fail("epochs must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(adam.lr >= 0.0)) fail("lr must be nonnegative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) fail("eps must be positive");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) fail("ema_decay must lie in (0, 1)");
  if (!(consistency_max >= 0.0)) fail("consistency_max must be nonnegative");
  if (!(consistency_ramp >= 0.0 && consistency_ramp <= 1.0))
    fail("consistency_ramp outside [0, 1]");
  if (!(mixup_prob >= 0.0 && mixup_prob <= 1.0)) fail("mixup_prob outside [0, 1]");
  if (!(mixup_alpha > 0.0)) fail("mixup_alpha must be positive");
  if (!(time_mask_prob >= 0.0 && time_mask_prob <= 1.0)) fail("time_mask_prob outside [0, 1]");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv_header() { return "epoch,loss_sup,loss_cons,mpAUC,event_f1"; }

std::string to_csv_row(const EpochRow& row) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : "nan"; };
  return std::to_string(row.epoch) + "," + format_double(row.loss_sup) + "," +
         format_double(row.loss_cons) + "," + opt(row.mpauc) + "," + opt(row.event_f1);
}

SupervisedTarget supervised_target(const Clip& clip, std::size_t hard_classes,
                                   std::size_t soft_classes) {
  const std::size_t k = hard_classes + soft_classes;
  SupervisedTarget out{Tensor<float>(Shape{clip.frames, k}, 0.0f), Tensor<float>(Shape{k}, 0.0f)};
  std::size_t offset = 0, width = 0;
  if (clip.subset == Subset::kHard) {
    width = hard_classes;
  } else if (clip.subset == Subset::kSoft) {
    offset = hard_classes;
    width = soft_classes;
  } else {
    throw ContractError("supervised_target: unlabeled clip");
  }
  const FrameMatrix m = frame_targets(clip, width);
  for (std::size_t r = 0; r < clip.frames; ++r) {
    for (std::size_t c = 0; c < width; ++c) out.targets(r, offset + c) = m.at(r, c);
  }
  for (std::size_t c = 0; c < width; ++c) out.mask[offset + c] = 1.0f;
  return out;
}

std::vector<FrameMatrix> predict_scores(const DualBranchModel<float>& model,
                                        const std::vector<Clip>& clips) {
  Tape<float>::Pause no_tape;
  std::vector<FrameMatrix> out;
  out.reserve(clips.size());
  for (const Clip& clip : clips) {
    const Tensor<float> s = model.forward(features_of(clip), NormMode::kEval);
    out.push_back(columns(s, 0, s.dim(1)));
  }
  return out;
}

MetricsReport evaluate(const DualBranchModel<float>& model, const std::vector<Clip>& clips,
                       const EvalConfig& config) {
  const std::size_t hard = model.config().hard_classes, soft = model.config().soft_classes;
  Tape<float>::Pause no_tape;
  MetricsReport report;
  std::vector<FrameMatrix> soft_scores, soft_targets;
  report.f1_per_class.resize(hard);
  MatchCounts pooled;
  bool any_hard = false;
  for (const Clip& clip : clips) {
    if (clip.subset == Subset::kUnlabeled) continue;
    const Tensor<float> s = model.forward(features_of(clip), NormMode::kEval);
    if (clip.subset == Subset::kSoft) {
      soft_scores.push_back(columns(s, hard, hard + soft));
      soft_targets.push_back(frame_targets(clip, soft));
      continue;
    }
    any_hard = true;
    const FrameMatrix hs = columns(s, 0, hard);
    const Tensor<float> hard_scores(Shape{hs.rows, hs.cols}, hs.values);
    const std::vector<Event> pred =
        predict_events(hard_scores, config.threshold, config.median_window, config.frame_hop_s);
    const std::vector<Event> ref = reference_events(clip, config.frame_hop_s);
    pooled += match_events(pred, ref, config.dtc, config.gtc);
    for (std::size_t k = 0; k < hard; ++k) {
      std::vector<Event> pk, rk;
      std::copy_if(pred.begin(), pred.end(), std::back_inserter(pk),
                   [k](const Event& e) { return e.label == k; });
      std::copy_if(ref.begin(), ref.end(), std::back_inserter(rk),
                   [k](const Event& e) { return e.label == k; });
      report.f1_per_class[k] += match_events(pk, rk, config.dtc, config.gtc);
    }
  }
  if (any_hard) report.event_f1 = pooled.f1();
  if (!soft_scores.empty()) {
    MpaucOptions opt;
    opt.frame_hop_s = config.frame_hop_s;
    opt.segment_s = config.segment_s;
    opt.gt_threshold = config.gt_threshold;
    opt.max_fpr = config.max_fpr;
    try {
      MpaucResult r = mpauc(soft_scores, soft_targets, opt);
      report.mpauc = r.value;
      report.mpauc_per_class = std::move(r.per_class);
      report.notes = std::move(r.notes);
    } catch (const UndefinedMetricError& e) {
      report.notes.emplace_back(e.what());
    }
  }
  return report;
}

double supervised_loss(const DualBranchModel<float>& model, const std::vector<Clip>& clips,
                       NormMode mode) {
  Tape<float>::Pause no_tape;
  const std::size_t hard = model.config().hard_classes, soft = model.config().soft_classes;
  double total = 0.0;
  std::size_t n = 0;
  for (const Clip& clip : clips) {
    if (clip.subset == Subset::kUnlabeled) continue;
    const SupervisedTarget t = supervised_target(clip, hard, soft);
    const Tensor<float> s = model.forward(features_of(clip), mode);
    total += static_cast<double>(bce_loss(s, t.targets, t.mask).item());
    ++n;
  }
  if (n == 0) throw ContractError("supervised_loss: no labelled clips");
  return total / static_cast<double>(n);
}

TrainResult train_loop(DualBranchModel<float> model, const std::vector<Clip>& train,
                       const std::vector<Clip>& valid, const TrainConfig& config,
                       const EvalConfig& eval, const EpochCallback& on_epoch) {
  return train_loop(std::move(model), train, valid, config, eval, on_epoch, LossHook{});
}

TrainResult train_loop(DualBranchModel<float> model, const std::vector<Clip>& train,
                       const std::vector<Clip>& valid, const TrainConfig& config,
                       const EvalConfig& eval, const EpochCallback& on_epoch,
                       const LossHook& loss_hook) {
  config.validate();
  if (train.empty()) throw ContractError("train_loop: empty training set");
  const ModelConfig& mc = model.config();
  const std::size_t hard = mc.hard_classes, soft = mc.soft_classes;
  for (const Clip& c : train) {
    if (c.frames != mc.input_frames || c.bins != mc.input_bins) {
      throw ConfigError("training clip grid " + std::to_string(c.frames) + "x" +
                        std::to_string(c.bins) + " does not match model input " +
                        std::to_string(mc.input_frames) + "x" + std::to_string(mc.input_bins));
    }
  }

  TrainResult result{model.clone(), model.clone(), {}, {}};
  const DualBranchModel<float>& student = result.student;
  const DualBranchModel<float>& teacher = result.teacher;
  const ParamList<float> s_params = student.parameters(), t_params = teacher.parameters();
  const ParamList<float> s_buffers = student.buffers(), t_buffers = teacher.buffers();
  zero_grads(s_params);

  std::array<std::vector<std::size_t>, 3> by_subset;
  for (std::size_t i = 0; i < train.size(); ++i) {
    by_subset[static_cast<int>(train[i].subset)].push_back(i);
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  AdamState adam;
  const std::size_t steps_per_epoch = (train.size() + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch * config.epochs);
  const double ramp_steps = config.consistency_ramp * total_steps;
  std::size_t step = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sup_sum = 0.0, cons_sum = 0.0;
    std::size_t sup_n = 0, cons_n = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      ++step;
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const float inv_batch = 1.0f / static_cast<float>(end - begin);
      const double weight =
          ramp_steps > 0.0
              ? config.consistency_max * std::min(1.0, static_cast<double>(step - 1) / ramp_steps)
              : config.consistency_max;
      for (std::size_t b = begin; b < end; ++b) {
        Clip clip = train[order[b]];
        if (coin(rng) < config.mixup_prob) {
          const auto& pool = by_subset[static_cast<int>(clip.subset)];
          const std::size_t partner =
              pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
          const double lambda = sample_beta(config.mixup_alpha, rng);
          clip = mixup(clip, train[partner], lambda, label_classes(clip.subset, hard, soft));
        }
        if (coin(rng) < config.time_mask_prob && config.time_mask_max_width > 0) {
          const std::size_t width = std::uniform_int_distribution<std::size_t>(
              1, std::min(config.time_mask_max_width, clip.frames))(rng);
          const std::size_t start =
              std::uniform_int_distribution<std::size_t>(0, clip.frames - width)(rng);
          clip = time_mask(clip, start, width);
        }

        const Tensor<float> input = features_of(clip);
        Tape<float> tape;
        Tape<float>::Scope scope(tape);
        const Tensor<float> scores = student.forward(input, NormMode::kTrain);
        Tensor<float> loss;
        if (clip.subset == Subset::kUnlabeled) {
          Tensor<float> target;
          {
            Tape<float>::Pause no_tape;
            target = teacher.forward(input, NormMode::kTrainFrozen);
          }
          const Tensor<float> cons = consistency_loss(scores, target);
          cons_sum += static_cast<double>(cons.item());
          ++cons_n;
          loss = scale(cons, static_cast<float>(weight) * inv_batch);
        } else {
          const SupervisedTarget t = supervised_target(clip, hard, soft);
          const Tensor<float> sup = bce_loss(scores, t.targets, t.mask);
          sup_sum += static_cast<double>(sup.item());
          ++sup_n;
          loss = scale(sup, inv_batch);
        }
        if (loss_hook) loss = loss_hook(loss, step);
        if (!std::isfinite(loss.item())) {
          throw DivergenceError(step, "non-finite loss at step " + std::to_string(step));
        }
        if (loss.requires_grad()) tape.backward(loss);
      }
      for (const auto& [name, p] : s_params) {
        for (float g : p.grad()) {
          if (!std::isfinite(g)) {
            throw DivergenceError(
                step, "non-finite gradient in '" + name + "' at step " + std::to_string(step));
          }
        }
      }
      adam_step(s_params, adam, config.adam);
      zero_grads(s_params);
      ema_update(t_params, s_params, config.ema_decay);
      ema_update(t_buffers, s_buffers, config.ema_decay);
    }

    EpochRow row;
    row.epoch = epoch;
    row.loss_sup = sup_n ? sup_sum / static_cast<double>(sup_n) : 0.0;
    row.loss_cons = cons_n ? cons_sum / static_cast<double>(cons_n) : 0.0;
    if (!valid.empty()) {
      MetricsReport r = evaluate(student, valid, eval);
      row.mpauc = r.mpauc;
      row.event_f1 = r.event_f1;
      result.report = std::move(r);
    }
    result.rows.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  std::vector<double> curve;
  for (const EpochRow& r : result.rows) curve.push_back(r.loss_sup);
  result.report.loss_curve = std::move(curve);
  return result;
}

}  // namespace mtda
