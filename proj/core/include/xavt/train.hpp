#pragma once

#include <iosfwd>
#include <optional>

#include "xavt/data.hpp"
#include "xavt/model.hpp"

namespace xavt {

// Adaptive-moment optimizer with decoupled weight decay:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2  (bias-corrected)
//   p <- p - lr_layer * ( m^ / (sqrt(v^) + eps) + wd * p )
// Per-parameter lr is scaled by layer_decay^(depth - layer_index). Norm
// scales and biases are exempt from weight decay.
struct OptimConfig {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
  double layer_decay = 0.8;
};

class Optimizer {
 public:
  Optimizer(Model& model, OptimConfig cfg);

  // Applies one update using gradients accumulated on the trainable
  // parameters; missing gradients are a contract error. Consumes the grads.
  void step(double lr);
  void zero_grad();
  int64_t steps_taken() const { return t_; }

 private:
  struct Slot {
    Parameter* p;
    Tensor m, v;  // f64 moments
    double lr_scale;
    bool apply_decay;
  };
  OptimConfig cfg_;
  std::vector<Slot> slots_;
  int64_t t_ = 0;
};

struct LrSchedule {
  double base_lr = 1e-3;
  int64_t warmup_steps = 0;
  int64_t total_steps = 1;
};

// Linear warmup from 0 to base over warmup_steps, then cosine annealing to 0
// at total_steps.
double lr_at(int64_t step, const LrSchedule& s);

// ---------------------------------------------------------------------------
// inference views

struct ViewSpec {
  int temporal_views = 1;
  int spatial_crops = 1;  // 1 = center crop, 3 = three crops along the longer side
};

// Crops one raw sample to the model geometry for view (tview, crop).
std::pair<VideoBatch, SpectrogramBatch> extract_view(const Sample& s, const ModelConfig& cfg,
                                                     int tview, int total_tviews, int crop,
                                                     int total_crops);

// Average of per-view softmax probabilities over temporal_views x
// spatial_crops forwards; returns [num_classes].
Tensor multi_view_predict(const Model& m, const Sample& s, const ViewSpec& vs);

// ---------------------------------------------------------------------------
// metrics

struct EvalMetrics {
  double top1 = 0.0;
  std::vector<double> per_class_f1;
  double weighted_f1 = 0.0;  // weighted by class support
  std::vector<int64_t> support;
};

EvalMetrics compute_metrics(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels,
                            int num_classes);

// n / sum(1/a_i); defined as 0 when any a_i == 0. Empty input is a contract
// error.
double harmonic_mean(const std::vector<double>& accuracies);

// ---------------------------------------------------------------------------
// training loop

struct TrainConfig {
  OptimConfig optim;
  int epochs = 30;
  int warmup_epochs = 5;
  int batch_size = 16;
  int update_freq = 1;  // micro-batches accumulated per optimizer step
  uint64_t seed = 0;
  std::ostream* log = nullptr;  // per-step "step epoch lr loss top1" lines
};

struct TrainResult {
  std::vector<double> step_losses;
  int64_t steps = 0;
};

// Assembles model-geometry batches (center view) from raw samples.
std::pair<VideoBatch, SpectrogramBatch> make_batch(const std::vector<Sample>& data,
                                                   const std::vector<int64_t>& idx,
                                                   const ModelConfig& cfg);

TrainResult train_model(Model& m, const std::vector<Sample>& data, const TrainConfig& tc);

// Multi-view top-1 evaluation over a dataset.
EvalMetrics evaluate(const Model& m, const std::vector<Sample>& data, const ViewSpec& vs);

}  // namespace xavt
