#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "xavt/rng.hpp"
#include "xavt/tensor.hpp"

namespace xavt {

// Named model weight. `trainable == false` means the optimizer never writes
// to it and backward may skip its gradient.
struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
  int layer_index = 0;      // 0 = input embeddings, depth+1 = head
  bool decay_exempt = false;  // no weight decay (norm scales, biases)
};

struct Init {
  enum Kind { kZero, kOne, kUniformFanIn } kind = kZero;
  int64_t fan_in = 1;

  static Init zero() { return {kZero, 1}; }
  static Init one() { return {kOne, 1}; }
  static Init uniform(int64_t fan_in) { return {kUniformFanIn, fan_in}; }
};

// Owns a model's parameters. Initial values are drawn from a stream keyed by
// (seed, parameter name), so two models built from the same seed assign
// identical values to identically named parameters regardless of creation
// order or which other parameters exist. Values are sampled in f32 and cast,
// so f32/f64 builds of the same model agree exactly.
class ParamStore {
 public:
  ParamStore(uint64_t seed, Dtype dtype) : seed_(seed), dtype_(dtype) {}

  Parameter* create(const std::string& name, Shape shape, Init init, bool trainable,
                    int layer_index = 0, bool decay_exempt = false);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  // creation order
  const std::vector<std::unique_ptr<Parameter>>& all() const { return order_; }
  // lexicographic by name
  std::vector<Parameter*> sorted_by_name() const;
  std::vector<Parameter*> trainable_params() const;

  uint64_t seed() const { return seed_; }
  Dtype dtype() const { return dtype_; }

 private:
  uint64_t seed_;
  Dtype dtype_;
  std::vector<std::unique_ptr<Parameter>> order_;
  std::map<std::string, Parameter*> by_name_;
};

}  // namespace xavt
