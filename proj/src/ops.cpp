#include "vega/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vega/kernels.hpp"

namespace vega {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

template <typename T>
bool record_if_needed(Tape<T>& tape, std::initializer_list<const Tensor<T>*> inputs,
                      const Tensor<T>& out, std::function<void()> fn) {
  if (!tape.needs_record(inputs)) return false;
  std::vector<NodePtr<T>> nodes;
  nodes.reserve(inputs.size());
  for (const auto* t : inputs) nodes.push_back(t->node());
  tape.record(std::move(nodes), out.node(), std::move(fn));
  return true;
}

// Grad buffer of a node, or nullptr when it takes no gradient.
template <typename T>
T* grad_of(TensorNode<T>* n) {
  return n->requires_grad ? n->grad.data() : nullptr;
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ArgumentError(std::string(op) + ": axis " + std::to_string(axis) +
                        " invalid for shape " + to_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Second operand broadcast: same shape, scalar, or trailing suffix.
bool broadcastable(const Shape& big, const Shape& small) {
  if (numel(small) == 1) return true;
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

template <typename T>
Tensor<T> unary(Tape<T>& tape, const Tensor<T>& x, T (*fwd)(T),
                T (*dfdx)(T x, T y)) {
  auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  Tensor<T> y(x.shape(), std::move(out));
  auto* xn = x.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&x}, y, [xn, yn, dfdx] {
    T* gx = grad_of(xn);
    if (!gx) return;
    for (std::size_t i = 0; i < yn->values.size(); ++i) {
      gx[i] += yn->grad[i] * dfdx(xn->values[i], yn->values[i]);
    }
  });
  return y;
}

}  // namespace

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + to_string(a.shape()) + " by " +
                         to_string(b.shape()));
  }
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  Tensor<T> c = Tensor<T>::zeros({M, N});
  kernels::gemm_nn(M, N, K, a.values().data(), b.values().data(), c.values().data(), false);
  auto* an = a.node().get();
  auto* bn = b.node().get();
  auto* cn = c.node().get();
  record_if_needed<T>(tape, {&a, &b}, c, [an, bn, cn, M, N, K] {
    const T* gc = cn->grad.data();
    if (T* ga = grad_of(an)) kernels::gemm_nt(M, K, N, gc, bn->values.data(), ga, true);
    if (T* gb = grad_of(bn)) kernels::gemm_tn(K, N, M, an->values.data(), gc, gb, true);
  });
  return c;
}

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& x) {
  if (x.rank() != 2) throw DimensionError("transpose: expected a matrix, got " + to_string(x.shape()));
  const std::size_t R = x.dim(0), C = x.dim(1);
  std::vector<T> out(R * C);
  auto xv = x.values();
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[c * R + r] = xv[r * C + c];
  Tensor<T> y({C, R}, std::move(out));
  auto* xn = x.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&x}, y, [xn, yn, R, C] {
    T* gx = grad_of(xn);
    if (!gx) return;
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) gx[r * C + c] += yn->grad[c * R + r];
  });
  return y;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.numel() < b.numel()) return add(tape, b, a);
  if (!broadcastable(a.shape(), b.shape())) {
    throw DimensionError("add: cannot broadcast " + to_string(b.shape()) + " onto " +
                         to_string(a.shape()));
  }
  const std::size_t n = a.numel(), inner = b.numel();
  std::vector<T> out(n);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i % inner];
  Tensor<T> y(a.shape(), std::move(out));
  auto* an = a.node().get();
  auto* bn = b.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&a, &b}, y, [an, bn, yn, n, inner] {
    const T* gy = yn->grad.data();
    if (T* ga = grad_of(an)) kernels::axpy(n, T(1), gy, ga);
    if (T* gb = grad_of(bn)) {
      for (std::size_t i = 0; i < n; ++i) gb[i % inner] += gy[i];
    }
  });
  return y;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.numel() < b.numel()) return mul(tape, b, a);
  if (!broadcastable(a.shape(), b.shape())) {
    throw DimensionError("mul: cannot broadcast " + to_string(b.shape()) + " onto " +
                         to_string(a.shape()));
  }
  const std::size_t n = a.numel(), inner = b.numel();
  std::vector<T> out(n);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i % inner];
  Tensor<T> y(a.shape(), std::move(out));
  auto* an = a.node().get();
  auto* bn = b.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&a, &b}, y, [an, bn, yn, n, inner] {
    const T* gy = yn->grad.data();
    if (T* ga = grad_of(an)) {
      for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * bn->values[i % inner];
    }
    if (T* gb = grad_of(bn)) {
      for (std::size_t i = 0; i < n; ++i) gb[i % inner] += gy[i] * an->values[i];
    }
  });
  return y;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor) {
  std::vector<T> out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= factor;
  Tensor<T> y(x.shape(), std::move(out));
  auto* xn = x.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&x}, y, [xn, yn, factor] {
    if (T* gx = grad_of(xn)) kernels::axpy(yn->grad.size(), factor, yn->grad.data(), gx);
  });
  return y;
}

template <typename T>
Tensor<T> neg(Tape<T>& tape, const Tensor<T>& x) {
  return scale(tape, x, T(-1));
}

template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  return add(tape, matmul(tape, x, weight), bias);
}

template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ArgumentError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw ArgumentError("concat: axis " + std::to_string(axis) + " invalid for shape " +
                        to_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: shape " + to_string(s) + " incompatible with " +
                           to_string(first) + " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const auto split = split_axis(out_shape, axis, "concat");
  std::vector<T> out(numel(out_shape));
  std::vector<std::size_t> chunk(parts.size()), offset(parts.size());
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    chunk[k] = parts[k].dim(axis) * split.inner;
    offset[k] = off;
    off += chunk[k];
  }
  const std::size_t row = off;
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t k = 0; k < parts.size(); ++k) {
      auto src = parts[k].values().subspan(o * chunk[k], chunk[k]);
      std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(o * row + offset[k]));
    }
  }
  Tensor<T> y(out_shape, std::move(out));
  if (tape.needs_record(parts)) {
    std::vector<NodePtr<T>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    auto* yn = y.node().get();
    std::vector<TensorNode<T>*> raw;
    for (auto& n : nodes) raw.push_back(n.get());
    const std::size_t outer = split.outer;
    tape.record(std::move(nodes), y.node(), [raw, yn, chunk, offset, row, outer] {
      for (std::size_t k = 0; k < raw.size(); ++k) {
        T* g = grad_of(raw[k]);
        if (!g) continue;
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = yn->grad.data() + o * row + offset[k];
          for (std::size_t i = 0; i < chunk[k]; ++i) g[o * chunk[k] + i] += src[i];
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> slice(Tape<T>& tape, const Tensor<T>& x, std::size_t axis, std::size_t start,
                std::size_t length) {
  const auto split = split_axis(x.shape(), axis, "slice");
  if (length == 0 || start + length > split.len) {
    throw ArgumentError("slice: range [" + std::to_string(start) + ", " +
                        std::to_string(start + length) + ") outside axis of size " +
                        std::to_string(split.len));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const std::size_t in_row = split.len * split.inner;
  const std::size_t out_row = length * split.inner;
  const std::size_t skip = start * split.inner;
  std::vector<T> out(split.outer * out_row);
  auto xv = x.values();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(o * in_row + skip), out_row,
                out.begin() + static_cast<std::ptrdiff_t>(o * out_row));
  }
  Tensor<T> y(out_shape, std::move(out));
  auto* xn = x.node().get();
  auto* yn = y.node().get();
  const std::size_t outer = split.outer;
  record_if_needed<T>(tape, {&x}, y, [xn, yn, outer, in_row, out_row, skip] {
    T* gx = grad_of(xn);
    if (!gx) return;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < out_row; ++i) gx[o * in_row + skip + i] += yn->grad[o * out_row + i];
  });
  return y;
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  Tensor<T> y(std::move(shape), std::vector<T>(x.values().begin(), x.values().end()));
  auto* xn = x.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&x}, y, [xn, yn] {
    if (T* gx = grad_of(xn)) kernels::axpy(yn->grad.size(), T(1), yn->grad.data(), gx);
  });
  return y;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.values()) acc += v;
  auto y = Tensor<T>::scalar(acc);
  auto* xn = x.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&x}, y, [xn, yn] {
    T* gx = grad_of(xn);
    if (!gx) return;
    const T g = yn->grad[0];
    for (std::size_t i = 0; i < xn->values.size(); ++i) gx[i] += g;
  });
  return y;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  if (x.numel() == 0) throw ArgumentError("mean of an empty tensor");
  return scale(tape, sum(tape, x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  return unary<T>(
      tape, x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> silu(Tape<T>& tape, const Tensor<T>& x) {
  return unary<T>(
      tape, x, [](T v) { return v / (T(1) + std::exp(-v)); },
      [](T v, T) {
        const T s = T(1) / (T(1) + std::exp(-v));
        return s * (T(1) + v * (T(1) - s));
      });
}

template <typename T>
Tensor<T> log(Tape<T>& tape, const Tensor<T>& x) {
  return unary<T>(
      tape, x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> exp(Tape<T>& tape, const Tensor<T>& x) {
  return unary<T>(
      tape, x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> embedding_lookup(Tape<T>& tape, const Tensor<T>& table,
                           const std::vector<std::size_t>& indices) {
  if (table.rank() != 2) {
    throw DimensionError("embedding_lookup: table must be a matrix, got " + to_string(table.shape()));
  }
  const std::size_t V = table.dim(0), D = table.dim(1);
  std::vector<T> out(indices.size() * D);
  auto tv = table.values();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= V) {
      throw ArgumentError("embedding_lookup: index " + std::to_string(indices[r]) +
                          " out of range for table with " + std::to_string(V) + " rows");
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(indices[r] * D), D,
                out.begin() + static_cast<std::ptrdiff_t>(r * D));
  }
  Tensor<T> y({indices.size(), D}, std::move(out));
  auto* tn = table.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&table}, y, [tn, yn, indices, D] {
    T* gt = grad_of(tn);
    if (!gt) return;
    for (std::size_t r = 0; r < indices.size(); ++r)
      for (std::size_t d = 0; d < D; ++d) gt[indices[r] * D + d] += yn->grad[r * D + d];
  });
  return y;
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, Rng& rng, bool train) {
  if (!(p >= 0.0 && p < 1.0)) throw ArgumentError("dropout: p must lie in [0, 1), got " + std::to_string(p));
  if (!train || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = uniform01(rng) < p ? T(0) : keep_scale;
  std::vector<T> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  Tensor<T> y(x.shape(), std::move(out));
  auto* xn = x.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&x}, y, [xn, yn, mask = std::move(mask)] {
    T* gx = grad_of(xn);
    if (!gx) return;
    for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += yn->grad[i] * mask[i];
  });
  return y;
}

template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, std::size_t axis, double eps) {
  const auto s = split_axis(x.shape(), axis, "layer_norm");
  std::vector<T> out(x.numel());
  std::vector<T> inv_std(s.outer * s.inner);
  auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      T mu = 0;
      for (std::size_t l = 0; l < s.len; ++l) mu += xv[base + l * s.inner];
      mu /= static_cast<T>(s.len);
      T var = 0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const T d = xv[base + l * s.inner] - mu;
        var += d * d;
      }
      var /= static_cast<T>(s.len);
      const T r = T(1) / std::sqrt(var + static_cast<T>(eps));
      inv_std[o * s.inner + i] = r;
      for (std::size_t l = 0; l < s.len; ++l) {
        out[base + l * s.inner] = (xv[base + l * s.inner] - mu) * r;
      }
    }
  }
  Tensor<T> y(x.shape(), std::move(out));
  auto* xn = x.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&x}, y, [xn, yn, s, inv_std = std::move(inv_std)] {
    T* gx = grad_of(xn);
    if (!gx) return;
    const T inv_len = T(1) / static_cast<T>(s.len);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        T mean_g = 0, mean_gy = 0;
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = base + l * s.inner;
          mean_g += yn->grad[k];
          mean_gy += yn->grad[k] * yn->values[k];
        }
        mean_g *= inv_len;
        mean_gy *= inv_len;
        const T r = inv_std[o * s.inner + i];
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = base + l * s.inner;
          gx[k] += r * (yn->grad[k] - mean_g - yn->values[k] * mean_gy);
        }
      }
    }
  });
  return y;
}

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis, "softmax");
  std::vector<T> out(x.numel());
  auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, xv[base + l * s.inner]);
      T z = 0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const T e = std::exp(xv[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= z;
    }
  }
  Tensor<T> y(x.shape(), std::move(out));
  auto* xn = x.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&x}, y, [xn, yn, s] {
    T* gx = grad_of(xn);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        T dot = 0;
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = base + l * s.inner;
          dot += yn->grad[k] * yn->values[k];
        }
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = base + l * s.inner;
          gx[k] += yn->values[k] * (yn->grad[k] - dot);
        }
      }
    }
  });
  return y;
}

template <typename T>
Tensor<T> kl_div(Tape<T>& tape, const Tensor<T>& p, const Tensor<T>& q) {
  if (p.shape() != q.shape() || p.rank() == 0) {
    throw DimensionError("kl_div: shapes " + to_string(p.shape()) + " and " +
                         to_string(q.shape()) + " differ");
  }
  const std::size_t C = p.shape().back();
  const std::size_t R = p.numel() / C;
  Shape out_shape(p.shape().begin(), p.shape().end() - 1);
  const T eps = static_cast<T>(kEps);
  std::vector<T> out(R, T(0));
  auto pv = p.values();
  auto qv = q.values();
  for (std::size_t r = 0; r < R; ++r) {
    T acc = 0;
    for (std::size_t c = 0; c < C; ++c) {
      const T pi = pv[r * C + c];
      if (pi <= T(0)) continue;
      acc += pi * (std::log(pi) - std::log(std::max(qv[r * C + c], eps)));
    }
    out[r] = acc;
  }
  Tensor<T> y(out_shape, std::move(out));
  auto* pn = p.node().get();
  auto* qn = q.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&p, &q}, y, [pn, qn, yn, R, C, eps] {
    T* gp = grad_of(pn);
    T* gq = grad_of(qn);
    for (std::size_t r = 0; r < R; ++r) {
      const T g = yn->grad[r];
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t k = r * C + c;
        const T pi = pn->values[k];
        const T qi = qn->values[k];
        if (pi <= T(0)) continue;
        if (gp) gp[k] += g * (std::log(pi) - std::log(std::max(qi, eps)) + T(1));
        if (gq && qi > eps) gq[k] -= g * pi / qi;
      }
    }
  });
  return y;
}

template <typename T>
Tensor<T> cosine_sim_matrix(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y) {
  if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(1) || x.dim(1) == 0) {
    throw DimensionError("cosine_sim: operands " + to_string(x.shape()) + " and " +
                         to_string(y.shape()) + " disagree in width");
  }
  const std::size_t R = x.dim(0), C = y.dim(0), D = x.dim(1);
  const T eps = static_cast<T>(kEps);
  std::vector<T> xnorm(R), ynorm(C);
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t r = 0; r < R; ++r) {
    T acc = 0;
    for (std::size_t d = 0; d < D; ++d) acc += xv[r * D + d] * xv[r * D + d];
    xnorm[r] = std::sqrt(acc);
  }
  for (std::size_t c = 0; c < C; ++c) {
    T acc = 0;
    for (std::size_t d = 0; d < D; ++d) acc += yv[c * D + d] * yv[c * D + d];
    ynorm[c] = std::sqrt(acc);
  }
  std::vector<T> dots(R * C);
  kernels::gemm_nt(R, C, D, xv.data(), yv.data(), dots.data(), false);
  std::vector<T> out(R * C);
  std::vector<unsigned char> clamped(R * C, 0);
  std::size_t n_clamped = 0;
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      const T den = xnorm[r] * ynorm[c];
      if (den < eps) {
        clamped[r * C + c] = 1;
        ++n_clamped;
        out[r * C + c] = dots[r * C + c] / eps;
      } else {
        out[r * C + c] = dots[r * C + c] / den;
      }
    }
  }
  if (n_clamped > 0) {
    tape.warn("cosine_sim: " + std::to_string(n_clamped) +
              " pair(s) with near-zero norm; denominator clamped");
  }
  Tensor<T> s({R, C}, std::move(out));
  auto* xn = x.node().get();
  auto* yn = y.node().get();
  auto* sn = s.node().get();
  record_if_needed<T>(tape, {&x, &y}, s,
                      [xn, yn, sn, R, C, D, eps, xnorm = std::move(xnorm),
                       ynorm = std::move(ynorm), clamped = std::move(clamped)] {
    T* gx = grad_of(xn);
    T* gy = grad_of(yn);
    const auto& xv = xn->values;
    const auto& yv = yn->values;
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t k = r * C + c;
        const T g = sn->grad[k];
        if (g == T(0)) continue;
        if (clamped[k]) {
          if (gx) for (std::size_t d = 0; d < D; ++d) gx[r * D + d] += g * yv[c * D + d] / eps;
          if (gy) for (std::size_t d = 0; d < D; ++d) gy[c * D + d] += g * xv[r * D + d] / eps;
          continue;
        }
        const T den = xnorm[r] * ynorm[c];
        const T sv = sn->values[k];
        if (gx) {
          const T ax = sv / (xnorm[r] * xnorm[r]);
          for (std::size_t d = 0; d < D; ++d) {
            gx[r * D + d] += g * (yv[c * D + d] / den - ax * xv[r * D + d]);
          }
        }
        if (gy) {
          const T ay = sv / (ynorm[c] * ynorm[c]);
          for (std::size_t d = 0; d < D; ++d) {
            gy[c * D + d] += g * (xv[r * D + d] / den - ay * yv[c * D + d]);
          }
        }
      }
    }
  });
  return s;
}

template <typename T>
Tensor<T> cosine_sim(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 1 || b.rank() != 1 || a.numel() != b.numel() || a.numel() == 0) {
    throw DimensionError("cosine_sim: vectors " + to_string(a.shape()) + " and " +
                         to_string(b.shape()) + " must have equal nonzero length");
  }
  const std::size_t D = a.numel();
  auto m = cosine_sim_matrix(tape, reshape(tape, a, {1, D}), reshape(tape, b, {1, D}));
  return reshape(tape, m, {});
}

template <typename T>
Tensor<T> nll(Tape<T>& tape, const Tensor<T>& probs, const std::vector<std::size_t>& labels) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) {
    throw DimensionError("nll: probabilities " + to_string(probs.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t R = probs.dim(0), C = probs.dim(1);
  const T eps = static_cast<T>(kEps);
  std::vector<T> out(R);
  auto pv = probs.values();
  for (std::size_t r = 0; r < R; ++r) {
    if (labels[r] >= C) {
      throw ArgumentError("label " + std::to_string(labels[r]) + " out of range for " +
                          std::to_string(C) + " classes");
    }
    out[r] = -std::log(std::max(pv[r * C + labels[r]], eps));
  }
  Tensor<T> y({R}, std::move(out));
  auto* pn = probs.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&probs}, y, [pn, yn, labels, C, eps] {
    T* gp = grad_of(pn);
    if (!gp) return;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      const T pr = pn->values[r * C + labels[r]];
      if (pr > eps) gp[r * C + labels[r]] -= yn->grad[r] / pr;
    }
  });
  return y;
}

template <typename T>
Tensor<T> detach(const Tensor<T>& x) {
  return Tensor<T>(x.shape(), std::vector<T>(x.values().begin(), x.values().end()), false);
}

template <typename T>
Tensor<T> unfold_time(Tape<T>& tape, const Tensor<T>& x, std::size_t half_window) {
  if (x.rank() != 2) throw DimensionError("unfold_time: expected [N x D], got " + to_string(x.shape()));
  const std::size_t N = x.dim(0), D = x.dim(1);
  const std::size_t taps = 2 * half_window + 1;
  const std::size_t W = taps * D;
  std::vector<T> out(N * W, T(0));
  auto xv = x.values();
  const auto k = static_cast<std::ptrdiff_t>(half_window);
  for (std::size_t t = 0; t < N; ++t) {
    for (std::size_t j = 0; j < taps; ++j) {
      const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - k;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(N)) continue;
      std::copy_n(xv.begin() + src * static_cast<std::ptrdiff_t>(D), D,
                  out.begin() + static_cast<std::ptrdiff_t>(t * W + j * D));
    }
  }
  Tensor<T> y({N, W}, std::move(out));
  auto* xn = x.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&x}, y, [xn, yn, N, D, W, taps, k] {
    T* gx = grad_of(xn);
    if (!gx) return;
    for (std::size_t t = 0; t < N; ++t) {
      for (std::size_t j = 0; j < taps; ++j) {
        const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - k;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(N)) continue;
        for (std::size_t d = 0; d < D; ++d) {
          gx[static_cast<std::size_t>(src) * D + d] += yn->grad[t * W + j * D + d];
        }
      }
    }
  });
  return y;
}

template <typename T>
Tensor<T> scale_rows(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& s) {
  if (x.rank() != 2 || s.numel() != x.dim(0)) {
    throw DimensionError("scale_rows: " + to_string(s.shape()) + " does not match rows of " +
                         to_string(x.shape()));
  }
  const std::size_t N = x.dim(0), D = x.dim(1);
  std::vector<T> out(N * D);
  auto xv = x.values();
  auto sv = s.values();
  for (std::size_t t = 0; t < N; ++t)
    for (std::size_t d = 0; d < D; ++d) out[t * D + d] = xv[t * D + d] * sv[t];
  Tensor<T> y({N, D}, std::move(out));
  auto* xn = x.node().get();
  auto* sn = s.node().get();
  auto* yn = y.node().get();
  record_if_needed<T>(tape, {&x, &s}, y, [xn, sn, yn, N, D] {
    T* gx = grad_of(xn);
    T* gs = grad_of(sn);
    for (std::size_t t = 0; t < N; ++t) {
      for (std::size_t d = 0; d < D; ++d) {
        const T g = yn->grad[t * D + d];
        if (gx) gx[t * D + d] += g * sn->values[t];
        if (gs) gs[t] += g * xn->values[t * D + d];
      }
    }
  });
  return y;
}

#define VEGA_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> transpose(Tape<T>&, const Tensor<T>&);                                      \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                       \
  template Tensor<T> neg(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> concat(Tape<T>&, const std::vector<Tensor<T>>&, std::size_t);               \
  template Tensor<T> slice(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t, std::size_t);   \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                                 \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> mean(Tape<T>&, const Tensor<T>&);                                           \
  template Tensor<T> sigmoid(Tape<T>&, const Tensor<T>&);                                        \
  template Tensor<T> silu(Tape<T>&, const Tensor<T>&);                                           \
  template Tensor<T> log(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> exp(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> embedding_lookup(Tape<T>&, const Tensor<T>&, const std::vector<std::size_t>&); \
  template Tensor<T> dropout(Tape<T>&, const Tensor<T>&, double, Rng&, bool);                    \
  template Tensor<T> layer_norm(Tape<T>&, const Tensor<T>&, std::size_t, double);                \
  template Tensor<T> softmax(Tape<T>&, const Tensor<T>&, std::size_t);                           \
  template Tensor<T> kl_div(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> cosine_sim(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> cosine_sim_matrix(Tape<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> nll(Tape<T>&, const Tensor<T>&, const std::vector<std::size_t>&);           \
  template Tensor<T> detach(const Tensor<T>&);                                                   \
  template Tensor<T> unfold_time(Tape<T>&, const Tensor<T>&, std::size_t);                       \
  template Tensor<T> scale_rows(Tape<T>&, const Tensor<T>&, const Tensor<T>&);

VEGA_INSTANTIATE_OPS(float)
VEGA_INSTANTIATE_OPS(double)

#undef VEGA_INSTANTIATE_OPS

}  // namespace vega
