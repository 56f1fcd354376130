#include "xavt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "xavt/grad_check.hpp"

namespace xavt {

Optimizer::Optimizer(Model& model, OptimConfig cfg) : cfg_(cfg) {
  int depth = model.config().depth;
  for (Parameter* p : model.trainable_parameters()) {
    Slot s;
    s.p = p;
    s.m = Tensor::zeros(p->value.shape(), Dtype::kF64);
    s.v = Tensor::zeros(p->value.shape(), Dtype::kF64);
    s.lr_scale = std::pow(cfg_.layer_decay, depth - p->layer_index);
    s.apply_decay = !p->decay_exempt;
    slots_.push_back(std::move(s));
  }
}

void Optimizer::step(double lr) {
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Slot& s : slots_) {
    Tensor g = s.p->value.grad();
    if (!g.defined())
      throw ContractError("optimizer: missing gradient for trainable parameter " + s.p->name);
    auto pm = s.m.data<double>();
    auto pv = s.v.data<double>();
    double wd = s.apply_decay ? cfg_.weight_decay : 0.0;
    double step_lr = lr * s.lr_scale;
    for (int64_t i = 0; i < s.p->value.numel(); ++i) {
      double gi = g.at(i);
      pm[i] = cfg_.beta1 * pm[i] + (1.0 - cfg_.beta1) * gi;
      pv[i] = cfg_.beta2 * pv[i] + (1.0 - cfg_.beta2) * gi * gi;
      double mhat = pm[i] / bc1;
      double vhat = pv[i] / bc2;
      double pi = s.p->value.at(i);
      double upd = mhat / (std::sqrt(vhat) + cfg_.eps) + wd * pi;
      s.p->value.set(i, pi - step_lr * upd);
    }
    s.p->value.clear_grad();
  }
}

void Optimizer::zero_grad() {
  for (Slot& s : slots_) s.p->value.clear_grad();
}

double lr_at(int64_t step, const LrSchedule& s) {
  if (step < 0) throw ContractError("lr_at: step must be >= 0");
  if (s.warmup_steps > 0 && step < s.warmup_steps)
    return s.base_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  int64_t span = s.total_steps - s.warmup_steps;
  if (span <= 0) return s.base_lr;
  double progress = static_cast<double>(step - s.warmup_steps) / static_cast<double>(span);
  progress = std::min(1.0, std::max(0.0, progress));
  return s.base_lr * 0.5 * (1.0 + std::cos(3.141592653589793 * progress));
}

// ---------------------------------------------------------------------------
// views

namespace {

int64_t view_offset(int64_t raw, int64_t want, int view, int total_views) {
  if (raw < want) throw ContractError("sample too small for the requested view");
  if (raw == want) return 0;
  if (total_views <= 1) return (raw - want) / 2;  // center
  double frac = static_cast<double>(view) / static_cast<double>(total_views - 1);
  return static_cast<int64_t>(std::llround(frac * static_cast<double>(raw - want)));
}

}  // namespace

std::pair<VideoBatch, SpectrogramBatch> extract_view(const Sample& s, const ModelConfig& cfg,
                                                     int tview, int total_tviews, int crop,
                                                     int total_crops) {
  int64_t f2r = s.video.extent(0), hr = s.video.extent(1), wr = s.video.extent(2),
          cr = s.video.extent(3);
  int64_t f2 = cfg.frames, h = cfg.height, w = cfg.width;
  if (cr != cfg.channels) throw ContractError("sample channel count does not match the model");
  int64_t foff = view_offset(f2r, f2, tview, total_tviews);
  foff -= foff % 2;  // keep frame pairs aligned
  // spatial crop: centered on the shorter side; 1 crop = center, 3 crops walk
  // the longer side (start, center, end)
  int64_t hoff = (hr - h) / 2, woff = (wr - w) / 2;
  if (hr < h || wr < w) throw ContractError("sample smaller than the model crop");
  if (total_crops == 3) {
    int64_t slack_h = hr - h, slack_w = wr - w;
    if (slack_h >= slack_w)
      hoff = crop == 0 ? 0 : (crop == 1 ? slack_h / 2 : slack_h);
    else
      woff = crop == 0 ? 0 : (crop == 1 ? slack_w / 2 : slack_w);
  } else if (total_crops != 1) {
    throw ContractError("spatial_crops must be 1 or 3");
  }

  Tensor video = Tensor::zeros({1, f2, h, w, cfg.channels}, Dtype::kF32);
  for (int64_t f = 0; f < f2; ++f)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t c = 0; c < cfg.channels; ++c) {
          int64_t src = (((foff + f) * hr + hoff + y) * wr + woff + x) * cr + c;
          int64_t dst = ((f * h + y) * w + x) * cfg.channels + c;
          video.set(dst, s.video.at(src));
        }

  int64_t tr = s.audio.extent(0), mel_r = s.audio.extent(1);
  int64_t tm = cfg.audio_frames, mel = cfg.audio_bins;
  if (mel_r != mel) throw ContractError("sample mel bins do not match the model");
  // align the audio window with the temporal view
  int64_t aoff;
  if (tr == tm) {
    aoff = 0;
  } else if (f2r == f2) {
    aoff = (tr - tm) / 2;
  } else {
    double frac = static_cast<double>(foff) / static_cast<double>(f2r - f2);
    aoff = static_cast<int64_t>(std::llround(frac * static_cast<double>(tr - tm)));
  }
  if (tr < tm) throw ContractError("sample spectrogram too short for the model");
  Tensor audio = Tensor::zeros({1, tm, mel}, Dtype::kF32);
  for (int64_t t = 0; t < tm; ++t)
    for (int64_t m = 0; m < mel; ++m)
      audio.set(t * mel + m, s.audio.at((aoff + t) * mel_r + m));

  VideoBatch vb{video, static_cast<double>(f2) / kClipDurationS};
  SpectrogramBatch sb{audio, kClipDurationS};
  return {vb, sb};
}

Tensor multi_view_predict(const Model& m, const Sample& s, const ViewSpec& vs) {
  if (vs.temporal_views < 1 || vs.spatial_crops < 1)
    throw ContractError("multi_view_predict: views must be >= 1");
  Tensor acc;
  int count = 0;
  for (int tv = 0; tv < vs.temporal_views; ++tv) {
    for (int sc = 0; sc < vs.spatial_crops; ++sc) {
      auto [video, audio] = extract_view(s, m.config(), tv, vs.temporal_views, sc, vs.spatial_crops);
      Tensor logits = m.forward(video, m.config().has_audio() ? &audio : nullptr);
      Tensor probs = softmax_lastdim(logits);
      acc = acc.defined() ? add(acc, probs) : probs;
      ++count;
    }
  }
  return reshape(scale(acc, 1.0 / count), {m.config().num_classes});
}

// ---------------------------------------------------------------------------
// metrics

EvalMetrics compute_metrics(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels,
                            int num_classes) {
  if (preds.empty() || preds.size() != labels.size())
    throw ContractError("compute_metrics: empty or mismatched inputs");
  EvalMetrics out;
  std::vector<int64_t> tp(static_cast<size_t>(num_classes), 0);
  std::vector<int64_t> fp(static_cast<size_t>(num_classes), 0);
  std::vector<int64_t> fn(static_cast<size_t>(num_classes), 0);
  out.support.assign(static_cast<size_t>(num_classes), 0);
  int64_t correct = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    int64_t p = preds[i], l = labels[i];
    if (p < 0 || p >= num_classes || l < 0 || l >= num_classes)
      throw ContractError("compute_metrics: class id out of range");
    ++out.support[static_cast<size_t>(l)];
    if (p == l) {
      ++correct;
      ++tp[static_cast<size_t>(l)];
    } else {
      ++fp[static_cast<size_t>(p)];
      ++fn[static_cast<size_t>(l)];
    }
  }
  out.top1 = static_cast<double>(correct) / static_cast<double>(preds.size());
  out.per_class_f1.resize(static_cast<size_t>(num_classes), 0.0);
  double weighted = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    double denom = 2.0 * tp[static_cast<size_t>(c)] + fp[static_cast<size_t>(c)] + fn[static_cast<size_t>(c)];
    double f1 = denom > 0.0 ? 2.0 * tp[static_cast<size_t>(c)] / denom : 0.0;
    out.per_class_f1[static_cast<size_t>(c)] = f1;
    weighted += f1 * static_cast<double>(out.support[static_cast<size_t>(c)]);
  }
  out.weighted_f1 = weighted / static_cast<double>(preds.size());
  return out;
}

double harmonic_mean(const std::vector<double>& accuracies) {
  if (accuracies.empty()) throw ContractError("harmonic_mean: empty input");
  double inv_sum = 0.0;
  for (double a : accuracies) {
    if (a < 0.0) throw ContractError("harmonic_mean: negative accuracy");
    if (a == 0.0) return 0.0;
    inv_sum += 1.0 / a;
  }
  return static_cast<double>(accuracies.size()) / inv_sum;
}

// ---------------------------------------------------------------------------
// training

std::pair<VideoBatch, SpectrogramBatch> make_batch(const std::vector<Sample>& data,
                                                   const std::vector<int64_t>& idx,
                                                   const ModelConfig& cfg) {
  if (idx.empty()) throw ContractError("make_batch: empty index list");
  int64_t b = static_cast<int64_t>(idx.size());
  Tensor video = Tensor::zeros({b, cfg.frames, cfg.height, cfg.width, cfg.channels}, Dtype::kF32);
  Tensor audio = Tensor::zeros({b, cfg.audio_frames, cfg.audio_bins}, Dtype::kF32);
  int64_t vlen = video.numel() / b;
  int64_t alen = audio.numel() / b;
  for (int64_t i = 0; i < b; ++i) {
    auto [vb, sb] = extract_view(data[static_cast<size_t>(idx[static_cast<size_t>(i)])], cfg, 0, 1, 0, 1);
    for (int64_t j = 0; j < vlen; ++j) video.set(i * vlen + j, vb.data.at(j));
    for (int64_t j = 0; j < alen; ++j) audio.set(i * alen + j, sb.data.at(j));
  }
  VideoBatch vb{video, static_cast<double>(cfg.frames) / kClipDurationS};
  SpectrogramBatch sb{audio, kClipDurationS};
  return {vb, sb};
}

TrainResult train_model(Model& m, const std::vector<Sample>& data, const TrainConfig& tc) {
  if (data.empty()) throw ContractError("train_model: empty dataset");
  const ModelConfig& cfg = m.config();
  int64_t n = static_cast<int64_t>(data.size());
  int64_t micro = tc.batch_size;
  int64_t micros_per_step = tc.update_freq;
  int64_t samples_per_step = micro * micros_per_step;
  int64_t steps_per_epoch = std::max<int64_t>(1, n / samples_per_step);
  LrSchedule sched{tc.optim.base_lr, tc.warmup_epochs * steps_per_epoch,
                   static_cast<int64_t>(tc.epochs) * steps_per_epoch};

  Optimizer opt(m, tc.optim);
  Rng drop_rng(tc.seed, "droppath");
  TrainResult result;

  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  int64_t global_step = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    Rng shuffle_rng(tc.seed, "data/epoch" + std::to_string(epoch));
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuffle_rng.next_below(static_cast<uint64_t>(i + 1)))]);
    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      double lr = lr_at(global_step, sched);
      double loss_sum = 0.0;
      int64_t correct = 0, seen = 0;
      for (int64_t u = 0; u < micros_per_step; ++u) {
        int64_t base = s * samples_per_step + u * micro;
        std::vector<int64_t> idx;
        std::vector<int64_t> labels;
        for (int64_t k = 0; k < micro; ++k) {
          int64_t j = order[static_cast<size_t>((base + k) % n)];
          idx.push_back(j);
          labels.push_back(data[static_cast<size_t>(j)].label);
        }
        auto [vb, sb] = make_batch(data, idx, cfg);
        ForwardCtx ctx;
        ctx.training = true;
        ctx.drop_path = cfg.drop_path;
        ctx.drop_rng = &drop_rng;
        Tape tape;
        Tensor logits = m.forward(vb, cfg.has_audio() ? &sb : nullptr, &ctx);
        Tensor loss = cross_entropy(logits, labels);
        if (micros_per_step > 1) loss = scale(loss, 1.0 / static_cast<double>(micros_per_step));
        tape.backward(loss);
        loss_sum += loss.item() * (micros_per_step > 1 ? micros_per_step : 1);
        for (int64_t r = 0; r < static_cast<int64_t>(labels.size()); ++r) {
          int64_t best = 0;
          for (int64_t c = 1; c < cfg.num_classes; ++c)
            if (logits.at(r * cfg.num_classes + c) > logits.at(r * cfg.num_classes + best)) best = c;
          if (best == labels[static_cast<size_t>(r)]) ++correct;
          ++seen;
        }
      }
      opt.step(lr);
      double mean_loss = loss_sum / static_cast<double>(micros_per_step);
      result.step_losses.push_back(mean_loss);
      ++global_step;
      if (tc.log) {
        (*tc.log) << global_step << '\t' << epoch << '\t' << lr << '\t' << mean_loss << '\t'
                  << static_cast<double>(correct) / static_cast<double>(seen) << '\n';
      }
    }
  }
  result.steps = global_step;
  return result;
}

EvalMetrics evaluate(const Model& m, const std::vector<Sample>& data, const ViewSpec& vs) {
  if (data.empty()) throw ContractError("evaluate: empty dataset");
  std::vector<int64_t> preds, labels;
  for (const Sample& s : data) {
    Tensor probs = multi_view_predict(m, s, vs);
    int64_t best = 0;
    for (int64_t c = 1; c < probs.numel(); ++c)
      if (probs.at(c) > probs.at(best)) best = c;
    preds.push_back(best);
    labels.push_back(s.label);
  }
  return compute_metrics(preds, labels, m.config().num_classes);
}

}  // namespace xavt
