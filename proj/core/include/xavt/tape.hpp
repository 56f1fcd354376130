#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "xavt/tensor.hpp"

namespace xavt {

class GradSink;
using BackwardFn = std::function<void(const Tensor& grad_out, GradSink& sink)>;

// Reverse-mode tape. While a Tape is alive on a thread, every primitive op
// touching a grad-requiring tensor records a node in execution order, which
// is a valid topological order by construction. backward() replays the
// nodes in reverse and deposits gradients on grad-requiring leaves.
//
// A tape is single-owner and single-shot: backward() consumes it and a
// second call raises ContractError. Independent tapes may live on
// independent threads; ops executed with no active tape run in inference
// mode (nothing is recorded and outputs do not require grad).
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void backward(const Tensor& loss);
  bool consumed() const { return consumed_; }
  size_t size() const { return nodes_.size(); }
  uint64_t id() const { return id_; }

  // Called by op implementations after computing `output` from `inputs`.
  void record(const Tensor& output, std::vector<Tensor> inputs, BackwardFn fn);

 private:
  struct Node {
    std::shared_ptr<TensorImpl> output;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  uint64_t id_;
  bool consumed_ = false;
};

// Accumulates gradient contributions keyed by tensor identity.
class GradSink {
 public:
  explicit GradSink(std::unordered_map<const TensorImpl*, Tensor>& grads) : grads_(grads) {}
  // No-op when `input` does not require grad.
  void add(const Tensor& input, const Tensor& grad);

 private:
  std::unordered_map<const TensorImpl*, Tensor>& grads_;
};

// Suppresses recording while alive (used internally during backward; also
// handy for inference blocks inside a taped region).
class NoRecordGuard {
 public:
  NoRecordGuard();
  ~NoRecordGuard();
  NoRecordGuard(const NoRecordGuard&) = delete;
  NoRecordGuard& operator=(const NoRecordGuard&) = delete;

 private:
  Tape* saved_;
};

}  // namespace xavt
