#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xavt/errors.hpp"

namespace xavt {

enum class Dtype { kF32, kF64 };

inline const char* dtype_name(Dtype dt) { return dt == Dtype::kF32 ? "f32" : "f64"; }

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
// strides in elements, row-major
std::vector<int64_t> row_major_strides(const Shape& shape);

struct TensorImpl;

// Dense row-major N-d array of reals. A Tensor is a cheap handle to shared
// storage; ops produce fresh storage (no aliasing views). Gradients live on
// leaf tensors only and are populated by Tape::backward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, Dtype dt = Dtype::kF32);
  static Tensor full(Shape shape, double value, Dtype dt = Dtype::kF32);
  static Tensor scalar(double value, Dtype dt = Dtype::kF32);
  static Tensor from(Shape shape, std::vector<float> values);
  static Tensor from(Shape shape, std::vector<double> values);
  // convenience for tests: Tensor::of({2,2}, {1,2,3,4})
  static Tensor of(Shape shape, std::initializer_list<double> values, Dtype dt = Dtype::kF32);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int64_t extent(int axis) const;
  int64_t numel() const;
  Dtype dtype() const;

  bool requires_grad() const;
  void set_requires_grad(bool v);
  bool is_leaf() const;

  // Gradient handle; undefined Tensor when absent.
  Tensor grad() const;
  void clear_grad();
  void accumulate_grad(const Tensor& g);

  // Typed storage access. Dtype must match.
  template <class T>
  std::span<T> data();
  template <class T>
  std::span<const T> data() const;

  // Dtype-agnostic element access (convenient for tests and IO).
  double at(int64_t flat_index) const;
  void set(int64_t flat_index, double value);
  double item() const;  // scalar tensors only

  Tensor clone() const;         // deep copy of values (no grad, leaf)
  Tensor detach() const;        // value copy without graph/grad linkage
  Tensor to(Dtype dt) const;    // casting copy (identity copy if same dtype)

  // true if same underlying storage object
  bool same_object(const Tensor& other) const { return impl_ == other.impl_; }

  TensorImpl* impl() const { return impl_.get(); }
  std::shared_ptr<TensorImpl> impl_ptr() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
  Shape shape;
  Dtype dtype = Dtype::kF32;
  std::vector<float> f32;
  std::vector<double> f64;
  bool requires_grad = false;
  std::shared_ptr<TensorImpl> grad;
  // Set when this tensor was produced by a recorded op.
  uint64_t tape_id = 0;
  bool is_leaf = true;

  int64_t numel() const { return shape_numel(shape); }
};

Tensor zeros_like(const Tensor& t);
Tensor ones_like(const Tensor& t);
bool same_shape(const Tensor& a, const Tensor& b);
// max |a-b| over all elements; shapes must match
double max_abs_diff(const Tensor& a, const Tensor& b);
bool bitwise_equal(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

}  // namespace xavt
