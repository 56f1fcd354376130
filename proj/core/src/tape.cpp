#include "xavt/tape.hpp"

#include <atomic>

namespace xavt {

namespace {
thread_local Tape* g_active_tape = nullptr;
std::atomic<uint64_t> g_next_tape_id{1};
}  // namespace

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {
  if (g_active_tape) throw ContractError("a tape is already active on this thread");
  g_active_tape = this;
}

Tape::~Tape() {
  if (g_active_tape == this) g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const Tensor& output, std::vector<Tensor> inputs, BackwardFn fn) {
  if (consumed_) throw ContractError("recording on a consumed tape");
  for (const Tensor& in : inputs) {
    TensorImpl* impl = in.impl();
    if (!impl->is_leaf && impl->tape_id != id_)
      throw ContractError("input tensor belongs to a different tape");
  }
  TensorImpl* out = output.impl();
  out->is_leaf = false;
  out->tape_id = id_;
  out->requires_grad = true;
  Node node;
  node.output = output.impl_ptr();
  node.inputs.reserve(inputs.size());
  for (const Tensor& in : inputs) node.inputs.push_back(in.impl_ptr());
  node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw ContractError("backward: tape already consumed");
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward: loss must be a defined scalar tensor");
  if (loss.impl()->tape_id != id_ || loss.impl()->is_leaf)
    throw ContractError("backward: loss was not produced on this tape");

  // Gradient computations below must not re-record onto this tape.
  NoRecordGuard guard;

  std::unordered_map<const TensorImpl*, Tensor> grads;
  grads.emplace(loss.impl(), ones_like(loss));
  GradSink sink(grads);

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto found = grads.find(it->output.get());
    if (found == grads.end()) continue;  // branch that never reached the loss
    Tensor gout = found->second;
    it->backward(gout, sink);
    grads.erase(found);  // all consumers already processed (reverse topo order)
  }

  for (auto& [key, g] : grads) {
    TensorImpl* impl = const_cast<TensorImpl*>(key);
    if (!impl->is_leaf || !impl->requires_grad) continue;
    if (!impl->grad) {
      impl->grad = g.clone().impl_ptr();
    } else if (impl->dtype == Dtype::kF32) {
      const auto& src = g.impl()->f32;
      auto& dst = impl->grad->f32;
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    } else {
      const auto& src = g.impl()->f64;
      auto& dst = impl->grad->f64;
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }

  consumed_ = true;
  nodes_.clear();
}

void GradSink::add(const Tensor& input, const Tensor& grad) {
  if (!input.requires_grad()) return;
  if (grad.shape() != input.shape())
    throw ShapeError("gradient shape " + shape_str(grad.shape()) + " does not match input shape " +
                     shape_str(input.shape()));
  auto it = grads_.find(input.impl());
  if (it == grads_.end()) {
    grads_.emplace(input.impl(), grad.clone());
    return;
  }
  Tensor& acc = it->second;
  if (acc.dtype() == Dtype::kF32) {
    auto dst = acc.data<float>();
    auto src = grad.data<float>();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  } else {
    auto dst = acc.data<double>();
    auto src = grad.data<double>();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

NoRecordGuard::NoRecordGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }
NoRecordGuard::~NoRecordGuard() { g_active_tape = saved_; }

}  // namespace xavt
