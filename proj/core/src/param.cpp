#include "xavt/param.hpp"

#include <cmath>

namespace xavt {

Parameter* ParamStore::create(const std::string& name, Shape shape, Init init, bool trainable,
                              int layer_index, bool decay_exempt) {
  if (by_name_.count(name)) throw ContractError("duplicate parameter name: " + name);
  int64_t n = shape_numel(shape);
  std::vector<float> values(static_cast<size_t>(n), 0.0f);
  switch (init.kind) {
    case Init::kZero:
      break;
    case Init::kOne:
      values.assign(values.size(), 1.0f);
      break;
    case Init::kUniformFanIn: {
      Rng rng(seed_, "init/" + name);
      float bound = 1.0f / std::sqrt(static_cast<float>(init.fan_in));
      for (auto& v : values) v = rng.uniform(-bound, bound);
      break;
    }
  }
  Tensor value = Tensor::from(std::move(shape), std::move(values));
  if (dtype_ == Dtype::kF64) value = value.to(Dtype::kF64);
  value.set_requires_grad(trainable);

  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = value;
  p->trainable = trainable;
  p->layer_index = layer_index;
  p->decay_exempt = decay_exempt;
  Parameter* raw = p.get();
  order_.push_back(std::move(p));
  by_name_[name] = raw;
  return raw;
}

Parameter* ParamStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParamStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

Parameter& ParamStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw ContractError("unknown parameter: " + name);
  return *p;
}

std::vector<Parameter*> ParamStore::sorted_by_name() const {
  std::vector<Parameter*> out;
  out.reserve(by_name_.size());
  for (const auto& [name, p] : by_name_) out.push_back(p);
  return out;
}

std::vector<Parameter*> ParamStore::trainable_params() const {
  std::vector<Parameter*> out;
  for (const auto& p : order_)
    if (p->trainable) out.push_back(p.get());
  return out;
}

}  // namespace xavt
