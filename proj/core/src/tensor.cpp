#include "xavt/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace xavt {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<int64_t> row_major_strides(const Shape& shape) {
  std::vector<int64_t> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) s[i] = s[i + 1] * shape[i + 1];
  return s;
}

namespace {

std::shared_ptr<TensorImpl> make_impl(Shape shape, Dtype dt) {
  auto impl = std::make_shared<TensorImpl>();
  int64_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->dtype = dt;
  if (dt == Dtype::kF32)
    impl->f32.assign(static_cast<size_t>(n), 0.0f);
  else
    impl->f64.assign(static_cast<size_t>(n), 0.0);
  return impl;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, Dtype dt) { return Tensor(make_impl(std::move(shape), dt)); }

Tensor Tensor::full(Shape shape, double value, Dtype dt) {
  Tensor t = zeros(std::move(shape), dt);
  if (dt == Dtype::kF32) {
    float v = static_cast<float>(value);
    for (auto& x : t.impl()->f32) x = v;
  } else {
    for (auto& x : t.impl()->f64) x = value;
  }
  return t;
}

Tensor Tensor::scalar(double value, Dtype dt) { return full({1}, value, dt); }

Tensor Tensor::from(Shape shape, std::vector<float> values) {
  int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(values.size()))
    throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->dtype = Dtype::kF32;
  impl->f32 = std::move(values);
  return Tensor(impl);
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(values.size()))
    throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->dtype = Dtype::kF64;
  impl->f64 = std::move(values);
  return Tensor(impl);
}

Tensor Tensor::of(Shape shape, std::initializer_list<double> values, Dtype dt) {
  Tensor t = zeros(std::move(shape), dt);
  if (t.numel() != static_cast<int64_t>(values.size()))
    throw ShapeError("initializer length does not match shape " + shape_str(t.shape()));
  int64_t i = 0;
  for (double v : values) t.set(i++, v);
  return t;
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

int64_t Tensor::extent(int axis) const {
  const Shape& s = shape();
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

int64_t Tensor::numel() const { return impl_ ? impl_->numel() : 0; }

Dtype Tensor::dtype() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->dtype;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
  if (!impl_) throw ContractError("use of undefined tensor");
  impl_->requires_grad = v;
}

bool Tensor::is_leaf() const { return impl_ && impl_->is_leaf; }

Tensor Tensor::grad() const {
  if (!impl_ || !impl_->grad) return Tensor();
  return Tensor(impl_->grad);
}

void Tensor::clear_grad() {
  if (impl_) impl_->grad.reset();
}

void Tensor::accumulate_grad(const Tensor& g) {
  if (!impl_) throw ContractError("use of undefined tensor");
  if (g.shape() != impl_->shape)
    throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match tensor shape " +
                     shape_str(impl_->shape));
  if (g.dtype() != impl_->dtype) throw ContractError("gradient dtype mismatch");
  if (!impl_->grad) {
    impl_->grad = g.clone().impl_ptr();
    return;
  }
  if (impl_->dtype == Dtype::kF32) {
    const auto& src = g.impl()->f32;
    auto& dst = impl_->grad->f32;
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  } else {
    const auto& src = g.impl()->f64;
    auto& dst = impl_->grad->f64;
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

template <>
std::span<float> Tensor::data<float>() {
  if (dtype() != Dtype::kF32) throw ContractError("tensor is not f32");
  return std::span<float>(impl_->f32);
}

template <>
std::span<double> Tensor::data<double>() {
  if (dtype() != Dtype::kF64) throw ContractError("tensor is not f64");
  return std::span<double>(impl_->f64);
}

template <>
std::span<const float> Tensor::data<float>() const {
  if (dtype() != Dtype::kF32) throw ContractError("tensor is not f32");
  return std::span<const float>(impl_->f32);
}

template <>
std::span<const double> Tensor::data<double>() const {
  if (dtype() != Dtype::kF64) throw ContractError("tensor is not f64");
  return std::span<const double>(impl_->f64);
}

double Tensor::at(int64_t i) const {
  if (i < 0 || i >= numel()) throw ShapeError("flat index out of range");
  return dtype() == Dtype::kF32 ? static_cast<double>(impl_->f32[static_cast<size_t>(i)])
                                : impl_->f64[static_cast<size_t>(i)];
}

void Tensor::set(int64_t i, double v) {
  if (i < 0 || i >= numel()) throw ShapeError("flat index out of range");
  if (dtype() == Dtype::kF32)
    impl_->f32[static_cast<size_t>(i)] = static_cast<float>(v);
  else
    impl_->f64[static_cast<size_t>(i)] = v;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() requires a one-element tensor, got " + shape_str(shape()));
  return at(0);
}

Tensor Tensor::clone() const {
  if (!impl_) return Tensor();
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->dtype = impl_->dtype;
  impl->f32 = impl_->f32;
  impl->f64 = impl_->f64;
  return Tensor(impl);
}

Tensor Tensor::detach() const {
  if (!impl_) return Tensor();
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->dtype = impl_->dtype;
  impl->f32 = impl_->f32;
  impl->f64 = impl_->f64;
  return Tensor(impl);
}

Tensor Tensor::to(Dtype dt) const {
  if (!impl_) return Tensor();
  if (dt == dtype()) return clone();
  Tensor out = zeros(shape(), dt);
  int64_t n = numel();
  if (dt == Dtype::kF64) {
    for (int64_t i = 0; i < n; ++i) out.impl()->f64[i] = static_cast<double>(impl_->f32[i]);
  } else {
    for (int64_t i = 0; i < n; ++i) out.impl()->f32[i] = static_cast<float>(impl_->f64[i]);
  }
  return out;
}

Tensor zeros_like(const Tensor& t) { return Tensor::zeros(t.shape(), t.dtype()); }

Tensor ones_like(const Tensor& t) { return Tensor::full(t.shape(), 1.0, t.dtype()); }

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b))
    throw ShapeError("max_abs_diff: shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined()) return a.defined() == b.defined();
  if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
  if (a.dtype() == Dtype::kF32)
    return std::memcmp(a.impl()->f32.data(), b.impl()->f32.data(), a.impl()->f32.size() * sizeof(float)) == 0;
  return std::memcmp(a.impl()->f64.data(), b.impl()->f64.data(), a.impl()->f64.size() * sizeof(double)) == 0;
}

bool all_finite(const Tensor& t) {
  for (int64_t i = 0; i < t.numel(); ++i)
    if (!std::isfinite(t.at(i))) return false;
  return true;
}

}  // namespace xavt
