#include "xavt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "parallel.hpp"

namespace xavt {

namespace {

template <class F>
void dispatch(Dtype dt, F&& f) {
  if (dt == Dtype::kF32)
    f(float{});
  else
    f(double{});
}

template <class T>
const T* cptr(const Tensor& t) {
  return t.data<T>().data();
}

template <class T>
T* mptr(Tensor& t) {
  return t.data<T>().data();
}

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

void check_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype())
    throw ContractError(std::string(op) + ": dtype mismatch (" + dtype_name(a.dtype()) + " vs " +
                        dtype_name(b.dtype()) + ")");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise

namespace {

enum class EwKind { kAdd, kSub, kMul };

Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind, const char* name) {
  check_same_dtype(a, b, name);
  check_same_shape(a, b, name);
  Tensor out = zeros_like(a);
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = cptr<T>(a);
    const T* pb = cptr<T>(b);
    T* po = mptr<T>(out);
    int64_t n = a.numel();
    switch (kind) {
      case EwKind::kAdd:
        for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
        break;
      case EwKind::kSub:
        for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
        break;
      case EwKind::kMul:
        for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
        break;
    }
  });
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = elementwise(a, b, EwKind::kAdd, "add");
  if (recording({&a, &b})) {
    Tape::active()->record(out, {a, b}, [a, b](const Tensor& g, GradSink& s) {
      if (a.requires_grad()) s.add(a, g);
      if (b.requires_grad()) s.add(b, g);
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tensor out = elementwise(a, b, EwKind::kSub, "sub");
  if (recording({&a, &b})) {
    Tape::active()->record(out, {a, b}, [a, b](const Tensor& g, GradSink& s) {
      if (a.requires_grad()) s.add(a, g);
      if (b.requires_grad()) s.add(b, scale(g, -1.0));
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tensor out = elementwise(a, b, EwKind::kMul, "mul");
  if (recording({&a, &b})) {
    Tape::active()->record(out, {a, b}, [a, b](const Tensor& g, GradSink& s) {
      if (a.requires_grad()) s.add(a, mul(g, b));
      if (b.requires_grad()) s.add(b, mul(g, a));
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = zeros_like(a);
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = cptr<T>(a);
    T* po = mptr<T>(out);
    T tc = static_cast<T>(c);
    for (int64_t i = 0; i < a.numel(); ++i) po[i] = pa[i] * tc;
  });
  if (recording({&a})) {
    Tape::active()->record(out, {a}, [a, c](const Tensor& g, GradSink& s) {
      s.add(a, scale(g, c));
    });
  }
  return out;
}

Tensor add_broadcast(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "add_broadcast");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() > sa.size() ||
      !std::equal(sb.rbegin(), sb.rend(), sa.rbegin()))
    throw ShapeError("add_broadcast: " + shape_str(sb) + " is not a suffix of " + shape_str(sa));
  Tensor out = zeros_like(a);
  int64_t inner = b.numel();
  int64_t outer = a.numel() / inner;
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = cptr<T>(a);
    const T* pb = cptr<T>(b);
    T* po = mptr<T>(out);
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < inner; ++i) po[o * inner + i] = pa[o * inner + i] + pb[i];
  });
  if (recording({&a, &b})) {
    Tape::active()->record(out, {a, b}, [a, b, outer, inner](const Tensor& g, GradSink& s) {
      if (a.requires_grad()) s.add(a, g);
      if (b.requires_grad()) {
        Tensor gb = zeros_like(b);
        dispatch(b.dtype(), [&](auto tag) {
          using T = decltype(tag);
          const T* pg = cptr<T>(g);
          T* po = mptr<T>(gb);
          for (int64_t i = 0; i < inner; ++i) {
            double acc = 0.0;
            for (int64_t o = 0; o < outer; ++o) acc += static_cast<double>(pg[o * inner + i]);
            po[i] = static_cast<T>(acc);
          }
        });
        s.add(b, gb);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// matmul

namespace {

template <class T>
void matmul_kernel(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p)
        acc += static_cast<double>(a[i * k + p]) * static_cast<double>(b[p * n + j]);
      c[i * n + j] = static_cast<T>(acc);
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  auto fail = [&] {
    throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  };
  if (sa.size() < 2 || sb.size() < 2) fail();
  int64_t m = sa[sa.size() - 2], k = sa[sa.size() - 1];
  int64_t kb = sb[sb.size() - 2], n = sb[sb.size() - 1];
  if (k != kb) fail();
  bool shared_b = sb.size() == 2;
  if (!shared_b) {
    if (sa.size() != sb.size()) fail();
    if (!std::equal(sa.begin(), sa.end() - 2, sb.begin())) fail();
  }
  Shape out_shape(sa.begin(), sa.end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out = Tensor::zeros(out_shape, a.dtype());
  int64_t batches = a.numel() / (m * k);
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = cptr<T>(a);
    const T* pb = cptr<T>(b);
    T* po = mptr<T>(out);
    for (int64_t bi = 0; bi < batches; ++bi)
      matmul_kernel(pa + bi * m * k, shared_b ? pb : pb + bi * k * n, po + bi * m * n, m, k, n);
  });
  if (recording({&a, &b})) {
    Tape::active()->record(out, {a, b}, [a, b, m, k, n, shared_b](const Tensor& g, GradSink& s) {
      if (a.requires_grad()) s.add(a, matmul(g, transpose_last2(b)));
      if (b.requires_grad()) {
        if (shared_b && a.rank() > 2) {
          Tensor a2 = reshape(a, {a.numel() / k, k});
          Tensor g2 = reshape(g, {g.numel() / n, n});
          s.add(b, matmul(transpose_last2(a2), g2));
        } else {
          s.add(b, matmul(transpose_last2(a), g));
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// softmax

Tensor softmax_lastdim(const Tensor& x) {
  if (x.rank() < 1) throw ShapeError("softmax_lastdim: rank must be >= 1");
  if (!all_finite(x)) throw NumericError("softmax_lastdim: non-finite input");
  int64_t cols = x.extent(x.rank() - 1);
  int64_t rows = x.numel() / cols;
  Tensor out = zeros_like(x);
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = cptr<T>(x);
    T* po = mptr<T>(out);
    for (int64_t r = 0; r < rows; ++r) {
      const T* row = px + r * cols;
      T* orow = po + r * cols;
      double mx = static_cast<double>(row[0]);
      for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, static_cast<double>(row[j]));
      double denom = 0.0;
      for (int64_t j = 0; j < cols; ++j) {
        double e = std::exp(static_cast<double>(row[j]) - mx);
        orow[j] = static_cast<T>(e);
        denom += e;
      }
      for (int64_t j = 0; j < cols; ++j) orow[j] = static_cast<T>(static_cast<double>(orow[j]) / denom);
    }
  });
  if (recording({&x})) {
    Tensor y = out;
    Tape::active()->record(out, {x}, [x, y, rows, cols](const Tensor& g, GradSink& s) {
      Tensor gx = zeros_like(x);
      dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* py = cptr<T>(y);
        const T* pg = cptr<T>(g);
        T* po = mptr<T>(gx);
        for (int64_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (int64_t j = 0; j < cols; ++j)
            dot += static_cast<double>(pg[r * cols + j]) * static_cast<double>(py[r * cols + j]);
          for (int64_t j = 0; j < cols; ++j) {
            double v = (static_cast<double>(pg[r * cols + j]) - dot) *
                       static_cast<double>(py[r * cols + j]);
            po[r * cols + j] = static_cast<T>(v);
          }
        }
      });
      s.add(x, gx);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// layer norm

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  check_same_dtype(x, gamma, "layer_norm");
  check_same_dtype(x, beta, "layer_norm");
  int64_t cols = x.extent(x.rank() - 1);
  if (gamma.numel() != cols || beta.numel() != cols)
    throw ShapeError("layer_norm: gamma/beta extents must equal the last extent " +
                     std::to_string(cols) + ", got " + shape_str(gamma.shape()) + " and " +
                     shape_str(beta.shape()));
  int64_t rows = x.numel() / cols;
  Tensor out = zeros_like(x);
  Tensor xhat = zeros_like(x);
  Tensor inv_std = Tensor::zeros({rows}, x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = cptr<T>(x);
    const T* pg = cptr<T>(gamma);
    const T* pb = cptr<T>(beta);
    T* po = mptr<T>(out);
    T* ph = mptr<T>(xhat);
    T* pis = mptr<T>(inv_std);
    for (int64_t r = 0; r < rows; ++r) {
      const T* row = px + r * cols;
      double mean = 0.0;
      for (int64_t j = 0; j < cols; ++j) mean += static_cast<double>(row[j]);
      mean /= static_cast<double>(cols);
      double var = 0.0;
      for (int64_t j = 0; j < cols; ++j) {
        double d = static_cast<double>(row[j]) - mean;
        var += d * d;
      }
      var /= static_cast<double>(cols);
      double is = 1.0 / std::sqrt(var + eps);
      pis[r] = static_cast<T>(is);
      for (int64_t j = 0; j < cols; ++j) {
        double h = (static_cast<double>(row[j]) - mean) * is;
        ph[r * cols + j] = static_cast<T>(h);
        po[r * cols + j] = static_cast<T>(h * static_cast<double>(pg[j]) + static_cast<double>(pb[j]));
      }
    }
  });
  if (recording({&x, &gamma, &beta})) {
    Tape::active()->record(
        out, {x, gamma, beta},
        [x, gamma, beta, xhat, inv_std, rows, cols](const Tensor& g, GradSink& s) {
          Tensor gx = zeros_like(x);
          Tensor ggamma = zeros_like(gamma);
          Tensor gbeta = zeros_like(beta);
          dispatch(x.dtype(), [&](auto tag) {
            using T = decltype(tag);
            const T* pg = cptr<T>(g);
            const T* ph = cptr<T>(xhat);
            const T* pga = cptr<T>(gamma);
            const T* pis = cptr<T>(inv_std);
            T* pgx = mptr<T>(gx);
            T* pgg = mptr<T>(ggamma);
            T* pgb = mptr<T>(gbeta);
            std::vector<double> acc_g(cols, 0.0), acc_b(cols, 0.0);
            for (int64_t r = 0; r < rows; ++r) {
              double mean_dh = 0.0, mean_dh_h = 0.0;
              for (int64_t j = 0; j < cols; ++j) {
                double go = static_cast<double>(pg[r * cols + j]);
                double h = static_cast<double>(ph[r * cols + j]);
                double dh = go * static_cast<double>(pga[j]);
                mean_dh += dh;
                mean_dh_h += dh * h;
                acc_g[j] += go * h;
                acc_b[j] += go;
              }
              mean_dh /= static_cast<double>(cols);
              mean_dh_h /= static_cast<double>(cols);
              double is = static_cast<double>(pis[r]);
              for (int64_t j = 0; j < cols; ++j) {
                double go = static_cast<double>(pg[r * cols + j]);
                double h = static_cast<double>(ph[r * cols + j]);
                double dh = go * static_cast<double>(pga[j]);
                pgx[r * cols + j] = static_cast<T>(is * (dh - mean_dh - h * mean_dh_h));
              }
            }
            for (int64_t j = 0; j < cols; ++j) {
              pgg[j] = static_cast<T>(acc_g[j]);
              pgb[j] = static_cast<T>(acc_b[j]);
            }
          });
          if (x.requires_grad()) s.add(x, gx);
          if (gamma.requires_grad()) s.add(gamma, ggamma);
          if (beta.requires_grad()) s.add(beta, gbeta);
        });
  }
  return out;
}

// ---------------------------------------------------------------------------
// gelu

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& x) {
  Tensor out = zeros_like(x);
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = cptr<T>(x);
    T* po = mptr<T>(out);
    for (int64_t i = 0; i < x.numel(); ++i) {
      double v = static_cast<double>(px[i]);
      double u = kGeluC * (v + kGeluA * v * v * v);
      po[i] = static_cast<T>(0.5 * v * (1.0 + std::tanh(u)));
    }
  });
  if (recording({&x})) {
    Tape::active()->record(out, {x}, [x](const Tensor& g, GradSink& s) {
      Tensor gx = zeros_like(x);
      dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* px = cptr<T>(x);
        const T* pg = cptr<T>(g);
        T* po = mptr<T>(gx);
        for (int64_t i = 0; i < x.numel(); ++i) {
          double v = static_cast<double>(px[i]);
          double u = kGeluC * (v + kGeluA * v * v * v);
          double t = std::tanh(u);
          double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
          double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
          po[i] = static_cast<T>(static_cast<double>(pg[i]) * d);
        }
      });
      s.add(x, gx);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// shape ops

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  Tensor out = x.clone();
  out.impl()->shape = std::move(shape);
  if (recording({&x})) {
    Shape orig = x.shape();
    Tape::active()->record(out, {x}, [x, orig](const Tensor& g, GradSink& s) {
      s.add(x, reshape(g, orig));
    });
  }
  return out;
}

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  int r = x.rank();
  if (static_cast<int>(perm.size()) != r) throw ShapeError("permute: perm size must equal rank");
  std::vector<bool> seen(r, false);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[p]) throw ShapeError("permute: invalid permutation");
    seen[p] = true;
  }
  Shape out_shape(r);
  for (int i = 0; i < r; ++i) out_shape[i] = x.shape()[perm[i]];
  Tensor out = Tensor::zeros(out_shape, x.dtype());
  auto in_strides = row_major_strides(x.shape());
  auto out_strides = row_major_strides(out_shape);
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = cptr<T>(x);
    T* po = mptr<T>(out);
    int64_t n = x.numel();
    std::vector<int64_t> idx(r, 0);
    for (int64_t o = 0; o < n; ++o) {
      int64_t rem = o;
      int64_t src = 0;
      for (int i = 0; i < r; ++i) {
        int64_t c = rem / out_strides[i];
        rem %= out_strides[i];
        src += c * in_strides[perm[i]];
      }
      po[o] = px[src];
    }
  });
  if (recording({&x})) {
    std::vector<int> inv(r);
    for (int i = 0; i < r; ++i) inv[perm[i]] = i;
    Tape::active()->record(out, {x}, [x, inv](const Tensor& g, GradSink& s) {
      s.add(x, permute(g, inv));
    });
  }
  return out;
}

Tensor transpose_last2(const Tensor& x) {
  int r = x.rank();
  if (r < 2) throw ShapeError("transpose_last2: rank must be >= 2");
  std::vector<int> perm(r);
  for (int i = 0; i < r; ++i) perm[i] = i;
  std::swap(perm[r - 1], perm[r - 2]);
  return permute(x, perm);
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw ContractError("concat: need at least one tensor");
  int r = xs[0].rank();
  if (axis < 0 || axis >= r) throw ShapeError("concat: axis out of range");
  Shape out_shape = xs[0].shape();
  int64_t total = 0;
  for (const Tensor& t : xs) {
    if (t.rank() != r) throw ShapeError("concat: rank mismatch");
    if (t.dtype() != xs[0].dtype()) throw ContractError("concat: dtype mismatch");
    for (int i = 0; i < r; ++i)
      if (i != axis && t.shape()[i] != out_shape[i])
        throw ShapeError("concat: shape mismatch " + shape_str(t.shape()) + " vs " +
                         shape_str(out_shape));
    total += t.shape()[axis];
  }
  out_shape[axis] = total;
  Tensor out = Tensor::zeros(out_shape, xs[0].dtype());
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[i];
  for (int i = axis + 1; i < r; ++i) inner *= out_shape[i];
  dispatch(out.dtype(), [&](auto tag) {
    using T = decltype(tag);
    T* po = mptr<T>(out);
    int64_t off = 0;
    for (const Tensor& t : xs) {
      const T* pt = cptr<T>(t);
      int64_t len = t.shape()[axis];
      for (int64_t o = 0; o < outer; ++o)
        std::memcpy(po + (o * total + off) * inner, pt + o * len * inner,
                    static_cast<size_t>(len * inner) * sizeof(T));
      off += len;
    }
  });
  bool rec = false;
  if (Tape::active())
    for (const Tensor& t : xs)
      if (t.requires_grad()) rec = true;
  if (rec) {
    std::vector<Tensor> inputs = xs;
    Tape::active()->record(out, inputs, [inputs, axis](const Tensor& g, GradSink& s) {
      int64_t off = 0;
      for (const Tensor& t : inputs) {
        int64_t len = t.shape()[axis];
        if (t.requires_grad()) s.add(t, narrow(g, axis, off, len));
        off += len;
      }
    });
  }
  return out;
}

Tensor narrow(const Tensor& x, int axis, int64_t start, int64_t len) {
  int r = x.rank();
  if (axis < 0 || axis >= r) throw ShapeError("narrow: axis out of range");
  int64_t ext = x.shape()[axis];
  if (start < 0 || len <= 0 || start + len > ext)
    throw ShapeError("narrow: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of extent " + std::to_string(ext));
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  Tensor out = Tensor::zeros(out_shape, x.dtype());
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (int i = axis + 1; i < r; ++i) inner *= x.shape()[i];
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = cptr<T>(x);
    T* po = mptr<T>(out);
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(po + o * len * inner, px + (o * ext + start) * inner,
                  static_cast<size_t>(len * inner) * sizeof(T));
  });
  if (recording({&x})) {
    Tape::active()->record(out, {x}, [x, axis, start, len, outer, inner, ext](const Tensor& g,
                                                                              GradSink& s) {
      Tensor gx = zeros_like(x);
      dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* pg = cptr<T>(g);
        T* po = mptr<T>(gx);
        for (int64_t o = 0; o < outer; ++o)
          std::memcpy(po + (o * ext + start) * inner, pg + o * len * inner,
                      static_cast<size_t>(len * inner) * sizeof(T));
      });
      s.add(x, gx);
    });
  }
  return out;
}

Tensor repeat_leading(const Tensor& x, int64_t n) {
  if (n <= 0) throw ShapeError("repeat_leading: n must be positive");
  Shape out_shape;
  out_shape.push_back(n);
  for (int64_t e : x.shape()) out_shape.push_back(e);
  Tensor out = Tensor::zeros(out_shape, x.dtype());
  int64_t sz = x.numel();
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = cptr<T>(x);
    T* po = mptr<T>(out);
    for (int64_t i = 0; i < n; ++i) std::memcpy(po + i * sz, px, static_cast<size_t>(sz) * sizeof(T));
  });
  if (recording({&x})) {
    Tape::active()->record(out, {x}, [x, n, sz](const Tensor& g, GradSink& s) {
      Tensor gx = zeros_like(x);
      dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* pg = cptr<T>(g);
        T* po = mptr<T>(gx);
        for (int64_t j = 0; j < sz; ++j) {
          double acc = 0.0;
          for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(pg[i * sz + j]);
          po[j] = static_cast<T>(acc);
        }
      });
      s.add(x, gx);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions

namespace {

Tensor reduce_axis(const Tensor& x, int axis, bool mean) {
  int r = x.rank();
  if (axis < 0 || axis >= r) throw ShapeError("reduce: axis out of range");
  Shape out_shape;
  for (int i = 0; i < r; ++i)
    if (i != axis) out_shape.push_back(x.shape()[i]);
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out = Tensor::zeros(out_shape, x.dtype());
  int64_t outer = 1, inner = 1;
  int64_t ext = x.shape()[axis];
  for (int i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (int i = axis + 1; i < r; ++i) inner *= x.shape()[i];
  double inv = mean ? 1.0 / static_cast<double>(ext) : 1.0;
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = cptr<T>(x);
    T* po = mptr<T>(out);
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t i = 0; i < inner; ++i) {
        double acc = 0.0;
        for (int64_t e = 0; e < ext; ++e)
          acc += static_cast<double>(px[(o * ext + e) * inner + i]);
        po[o * inner + i] = static_cast<T>(acc * inv);
      }
    }
  });
  if (recording({&x})) {
    Tape::active()->record(out, {x}, [x, outer, inner, ext, inv](const Tensor& g, GradSink& s) {
      Tensor gx = zeros_like(x);
      dispatch(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* pg = cptr<T>(g);
        T* po = mptr<T>(gx);
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t e = 0; e < ext; ++e)
            for (int64_t i = 0; i < inner; ++i)
              po[(o * ext + e) * inner + i] = static_cast<T>(static_cast<double>(pg[o * inner + i]) * inv);
      });
      s.add(x, gx);
    });
  }
  return out;
}

}  // namespace

Tensor sum_axis(const Tensor& x, int axis) { return reduce_axis(x, axis, false); }
Tensor mean_axis(const Tensor& x, int axis) { return reduce_axis(x, axis, true); }

Tensor sum_all(const Tensor& x) {
  Tensor out = Tensor::zeros({1}, x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = cptr<T>(x);
    double acc = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) acc += static_cast<double>(px[i]);
    mptr<T>(out)[0] = static_cast<T>(acc);
  });
  if (recording({&x})) {
    Tape::active()->record(out, {x}, [x](const Tensor& g, GradSink& s) {
      s.add(x, Tensor::full(x.shape(), g.at(0), x.dtype()));
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// gather

Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& indices) {
  if (table.rank() < 1) throw ShapeError("gather_rows: table rank must be >= 1");
  int64_t rows = table.shape()[0];
  int64_t cols = table.numel() / rows;
  for (int64_t i : indices)
    if (i < 0 || i >= rows)
      throw ContractError("gather_rows: index " + std::to_string(i) + " out of range [0," +
                          std::to_string(rows) + ")");
  Shape out_shape = table.shape();
  out_shape[0] = static_cast<int64_t>(indices.size());
  Tensor out = Tensor::zeros(out_shape, table.dtype());
  dispatch(table.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pt = cptr<T>(table);
    T* po = mptr<T>(out);
    for (size_t i = 0; i < indices.size(); ++i)
      std::memcpy(po + static_cast<int64_t>(i) * cols, pt + indices[i] * cols,
                  static_cast<size_t>(cols) * sizeof(T));
  });
  if (recording({&table})) {
    Tape::active()->record(out, {table}, [table, indices, cols](const Tensor& g, GradSink& s) {
      Tensor gt = zeros_like(table);
      dispatch(table.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* pg = cptr<T>(g);
        T* po = mptr<T>(gt);
        for (size_t i = 0; i < indices.size(); ++i)
          for (int64_t j = 0; j < cols; ++j)
            po[indices[i] * cols + j] += pg[static_cast<int64_t>(i) * cols + j];
      });
      s.add(table, gt);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// cross entropy

Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& labels) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy: logits must be [batch, classes]");
  int64_t b = logits.extent(0), k = logits.extent(1);
  if (static_cast<int64_t>(labels.size()) != b)
    throw ContractError("cross_entropy: batch size mismatch");
  for (int64_t l : labels)
    if (l < 0 || l >= k)
      throw ContractError("cross_entropy: label " + std::to_string(l) + " out of range [0," +
                          std::to_string(k) + ")");
  Tensor out = Tensor::zeros({1}, logits.dtype());
  dispatch(logits.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pl = cptr<T>(logits);
    double total = 0.0;
    for (int64_t r = 0; r < b; ++r) {
      const T* row = pl + r * k;
      double mx = static_cast<double>(row[0]);
      for (int64_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
      double denom = 0.0;
      for (int64_t j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
      double lse = mx + std::log(denom);
      total += lse - static_cast<double>(row[labels[r]]);
    }
    mptr<T>(out)[0] = static_cast<T>(total / static_cast<double>(b));
  });
  if (recording({&logits})) {
    Tape::active()->record(out, {logits}, [logits, labels, b, k](const Tensor& g, GradSink& s) {
      Tensor gl = zeros_like(logits);
      double gv = g.at(0) / static_cast<double>(b);
      dispatch(logits.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* pl = cptr<T>(logits);
        T* po = mptr<T>(gl);
        for (int64_t r = 0; r < b; ++r) {
          const T* row = pl + r * k;
          double mx = static_cast<double>(row[0]);
          for (int64_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
          double denom = 0.0;
          for (int64_t j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
          for (int64_t j = 0; j < k; ++j) {
            double p = std::exp(static_cast<double>(row[j]) - mx) / denom;
            double d = (j == labels[r]) ? p - 1.0 : p;
            po[r * k + j] = static_cast<T>(d * gv);
          }
        }
      });
      s.add(logits, gl);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// row scaling (stochastic depth)

Tensor scale_rows(const Tensor& x, const Tensor& scales) {
  check_same_dtype(x, scales, "scale_rows");
  if (scales.numel() != x.shape()[0])
    throw ShapeError("scale_rows: scales extent " + std::to_string(scales.numel()) +
                     " must equal leading extent " + std::to_string(x.shape()[0]));
  Tensor out = zeros_like(x);
  int64_t rows = x.shape()[0];
  int64_t inner = x.numel() / rows;
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = cptr<T>(x);
    const T* ps = cptr<T>(scales);
    T* po = mptr<T>(out);
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t i = 0; i < inner; ++i) po[r * inner + i] = px[r * inner + i] * ps[r];
  });
  if (recording({&x})) {
    Tape::active()->record(out, {x}, [x, scales](const Tensor& g, GradSink& s) {
      s.add(x, scale_rows(g, scales));
    });
  }
  return out;
}

}  // namespace xavt
