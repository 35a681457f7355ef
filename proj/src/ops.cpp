#include "trg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "trg/rng.hpp"

namespace trg {

using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

/// Runs `fn(grad_buffer)` only when `in` takes part in differentiation.
template <class Fn>
void push_grad(const ImplPtr& in, Fn&& fn) {
  if (!in->requires_grad) return;
  in->ensure_grad();
  fn(in->grad);
}

/// Splits a shape around `axis` into (outer, n, inner).
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <class F, class D>
Tensor unary(const Tensor& x, F fwd, D dfdx) {
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  ImplPtr xi = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [xi, dfdx](TensorImpl& o) {
    push_grad(xi, [&](std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * dfdx(xi->data[i], o.data[i]);
    });
  });
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> st(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) st[i - 1] = st[i] * shape[i];
  return st;
}

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto ad = a.data(), bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [ai, bi](TensorImpl& o) {
    push_grad(ai, [&](auto& g) { for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i]; });
    push_grad(bi, [&](auto& g) { for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i]; });
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto ad = a.data(), bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [ai, bi](TensorImpl& o) {
    push_grad(ai, [&](auto& g) { for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i]; });
    push_grad(bi, [&](auto& g) { for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i]; });
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto ad = a.data(), bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [ai, bi](TensorImpl& o) {
    push_grad(ai, [&](auto& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bi->data[i];
    });
    push_grad(bi, [&](auto& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * ai->data[i];
    });
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  auto ad = a.data(), bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] / bd[i];
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [ai, bi](TensorImpl& o) {
    push_grad(ai, [&](auto& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] / bi->data[i];
    });
    push_grad(bi, [&](auto& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i] * o.data[i] / bi->data[i];
    });
  });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor scale(const Tensor& x, double s) {
  return unary(x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary(x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x, double eps) {
  return unary(
      x, [eps](double v) { return std::log(v + eps); },
      [eps](double v, double) { return 1.0 / (v + eps); });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v < 0 ? 0.0 : v; },  // NaN passes through
      [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt2pi](double v, double) {
        return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * std::exp(-0.5 * v * v) * inv_sqrt2pi;
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.n; ++k) mx = std::max(mx, xd[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        const double e = std::exp(xd[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.n; ++k) out[base + k * s.inner] /= z;
    }
  }
  ImplPtr xi = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [xi, s](TensorImpl& o) {
    push_grad(xi, [&](auto& g) {
      for (std::size_t ou = 0; ou < s.outer; ++ou) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = ou * s.n * s.inner + in;
          double dot = 0.0;
          for (std::size_t k = 0; k < s.n; ++k)
            dot += o.grad[base + k * s.inner] * o.data[base + k * s.inner];
          for (std::size_t k = 0; k < s.n; ++k) {
            const std::size_t idx = base + k * s.inner;
            g[idx] += o.data[idx] * (o.grad[idx] - dot);
          }
        }
      }
    });
  });
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  ImplPtr xi = x.impl();
  return make_result(Shape{}, {total}, {x}, [xi](TensorImpl& o) {
    push_grad(xi, [&](auto& g) { for (auto& v : g) v += o.grad[0]; });
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  auto xd = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < s.n; ++k) {
      const double* src = xd.data() + (o * s.n + k) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t in = 0; in < s.inner; ++in) dst[in] += src[in];
    }
  ImplPtr xi = x.impl();
  return make_result(std::move(out_shape), std::move(out), {x}, [xi, s](TensorImpl& o) {
    push_grad(xi, [&](auto& g) {
      for (std::size_t ou = 0; ou < s.outer; ++ou)
        for (std::size_t k = 0; k < s.n; ++k) {
          double* dst = g.data() + (ou * s.n + k) * s.inner;
          const double* src = o.grad.data() + ou * s.inner;
          for (std::size_t in = 0; in < s.inner; ++in) dst[in] += src[in];
        }
    });
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const double n = static_cast<double>(x.dim(axis));
  return scale(sum_axis(x, axis), 1.0 / n);
}

namespace {
Tensor extreme_all(const Tensor& x, bool take_max) {
  auto xd = x.data();
  if (xd.empty()) throw ShapeError("max/min of an empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < xd.size(); ++i)
    if (take_max ? xd[i] > xd[best] : xd[i] < xd[best]) best = i;
  ImplPtr xi = x.impl();
  return make_result(Shape{}, {xd[best]}, {x}, [xi, best](TensorImpl& o) {
    push_grad(xi, [&](auto& g) { g[best] += o.grad[0]; });
  });
}
}  // namespace

Tensor max_all(const Tensor& x) { return extreme_all(x, true); }
Tensor min_all(const Tensor& x) { return extreme_all(x, false); }

// ---------------------------------------------------------------------------
// layout

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  ImplPtr xi = x.impl();
  return make_result(std::move(shape), std::move(out), {x}, [xi](TensorImpl& o) {
    push_grad(xi, [&](auto& g) { for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i]; });
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const auto& in_shape = x.shape();
  const std::size_t r = in_shape.size();
  if (axes.size() != r) throw ShapeError("permute: axes rank mismatch for " + shape_str(in_shape));
  std::vector<bool> seen(r, false);
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (axes[i] >= r || seen[axes[i]]) throw ShapeError("permute: invalid axes");
    seen[axes[i]] = true;
    out_shape[i] = in_shape[axes[i]];
  }
  const auto in_strides = strides_of(in_shape);
  // source offset for each output flat index
  std::vector<std::size_t> src(x.size());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < src.size(); ++flat) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_strides[axes[i]];
    src[flat] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  auto xd = x.data();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = xd[src[i]];
  ImplPtr xi = x.impl();
  return make_result(std::move(out_shape), std::move(out), {x},
                     [xi, src = std::move(src)](TensorImpl& o) {
                       push_grad(xi, [&](auto& g) {
                         for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += o.grad[i];
                       });
                     });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose needs rank 2, got " + shape_str(x.shape()));
  return permute(x, {1, 0});
}

Tensor expand(const Tensor& x, Shape shape) {
  const auto& in_shape = x.shape();
  if (in_shape.size() > shape.size())
    throw ShapeError("expand " + shape_str(in_shape) + " -> " + shape_str(shape));
  const std::size_t lead = shape.size() - in_shape.size();
  Shape aligned(shape.size(), 1);
  for (std::size_t i = 0; i < in_shape.size(); ++i) {
    aligned[lead + i] = in_shape[i];
    if (in_shape[i] != shape[lead + i] && in_shape[i] != 1)
      throw ShapeError("expand " + shape_str(in_shape) + " -> " + shape_str(shape));
  }
  auto in_strides = strides_of(aligned);
  for (std::size_t i = 0; i < aligned.size(); ++i)
    if (aligned[i] == 1) in_strides[i] = 0;
  const std::size_t total = numel(shape);
  std::vector<std::size_t> src(total);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) off += idx[i] * in_strides[i];
    src[flat] = off;
    for (std::size_t i = shape.size(); i-- > 0;) {
      if (++idx[i] < shape[i]) break;
      idx[i] = 0;
    }
  }
  auto xd = x.data();
  std::vector<double> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = xd[src[i]];
  ImplPtr xi = x.impl();
  return make_result(std::move(shape), std::move(out), {x},
                     [xi, src = std::move(src)](TensorImpl& o) {
                       push_grad(xi, [&](auto& g) {
                         for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += o.grad[i];
                       });
                     });
}

Tensor concat(const std::vector<Tensor>& xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat of nothing");
  Shape out_shape = xs[0].shape();
  const auto s0 = split_at(out_shape, axis);
  std::size_t total_n = 0;
  for (const auto& t : xs) {
    const auto s = split_at(t.shape(), axis);
    Shape a = t.shape(), b = out_shape;
    a[axis] = b[axis] = 0;
    if (a != b) throw ShapeError("concat: incompatible shapes " + shape_str(t.shape()) + " and " +
                                 shape_str(out_shape));
    total_n += s.n;
  }
  out_shape[axis] = total_n;
  std::vector<double> out(s0.outer * total_n * s0.inner);
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const auto& t : xs) {
    const std::size_t n = t.dim(axis);
    offsets.push_back(at);
    auto td = t.data();
    for (std::size_t o = 0; o < s0.outer; ++o)
      std::copy_n(td.data() + o * n * s0.inner, n * s0.inner,
                  out.data() + (o * total_n + at) * s0.inner);
    at += n;
  }
  std::vector<ImplPtr> impls;
  for (const auto& t : xs) impls.push_back(t.impl());

  return make_result(std::move(out_shape), std::move(out), xs,
                     [impls, offsets, s0, total_n, axis](TensorImpl& o) {
                       for (std::size_t k = 0; k < impls.size(); ++k) {
                         const std::size_t n = impls[k]->shape[axis];
                         push_grad(impls[k], [&](auto& g) {
                           for (std::size_t ou = 0; ou < s0.outer; ++ou) {
                             const double* src =
                                 o.grad.data() + (ou * total_n + offsets[k]) * s0.inner;
                             double* dst = g.data() + ou * n * s0.inner;
                             for (std::size_t i = 0; i < n * s0.inner; ++i) dst[i] += src[i];
                           }
                         });
                       }
                     });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto s = split_at(x.shape(), axis);
  if (begin > end || end > s.n)
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + shape_str(x.shape()));
  Shape out_shape = x.shape();
  const std::size_t n = end - begin;
  out_shape[axis] = n;
  auto xd = x.data();
  std::vector<double> out(s.outer * n * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(xd.data() + (o * s.n + begin) * s.inner, n * s.inner,
                out.data() + o * n * s.inner);
  ImplPtr xi = x.impl();
  return make_result(std::move(out_shape), std::move(out), {x}, [xi, s, n, begin](TensorImpl& o) {
    push_grad(xi, [&](auto& g) {
      for (std::size_t ou = 0; ou < s.outer; ++ou) {
        const double* src = o.grad.data() + ou * n * s.inner;
        double* dst = g.data() + (ou * s.n + begin) * s.inner;
        for (std::size_t i = 0; i < n * s.inner; ++i) dst[i] += src[i];
      }
    });
  });
}

// ---------------------------------------------------------------------------
// products

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result(Shape{m, n}, std::move(out), {a, b}, [ai, bi, m, k, n](TensorImpl& o) {
    push_grad(ai, [&](auto& g) { gemm_nt(o.grad.data(), bi->data.data(), g.data(), m, n, k); });
    push_grad(bi, [&](auto& g) { gemm_tn(ai->data.data(), o.grad.data(), g.data(), m, k, n); });
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
    throw ShapeError("bmm " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<double> out(bs * m * n, 0.0);
  for (std::size_t i = 0; i < bs; ++i)
    gemm_nn(a.data().data() + i * m * k, b.data().data() + i * k * n, out.data() + i * m * n, m,
            k, n);
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result(Shape{bs, m, n}, std::move(out), {a, b},
                     [ai, bi, bs, m, k, n](TensorImpl& o) {
                       push_grad(ai, [&](auto& g) {
                         for (std::size_t i = 0; i < bs; ++i)
                           gemm_nt(o.grad.data() + i * m * n, bi->data.data() + i * k * n,
                                   g.data() + i * m * k, m, n, k);
                       });
                       push_grad(bi, [&](auto& g) {
                         for (std::size_t i = 0; i < bs; ++i)
                           gemm_tn(ai->data.data() + i * m * k, o.grad.data() + i * m * n,
                                   g.data() + i * k * n, m, k, n);
                       });
                     });
}

Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (w.rank() != 2 || x.rank() < 1 || x.dim(0) != w.dim(1))
    throw ShapeError("conv1x1: input " + shape_str(x.shape()) + " weight " + shape_str(w.shape()));
  const bool has_bias = bias.rank() == 1;
  if (has_bias && bias.dim(0) != w.dim(0))
    throw ShapeError("conv1x1: bias " + shape_str(bias.shape()) + " weight " +
                     shape_str(w.shape()));
  const std::size_t cout = w.dim(0), cin = w.dim(1), r = x.size() / cin;
  std::vector<double> out(cout * r, 0.0);
  if (has_bias)
    for (std::size_t o = 0; o < cout; ++o) std::fill_n(out.data() + o * r, r, bias.data()[o]);
  gemm_nn(w.data().data(), x.data().data(), out.data(), cout, cin, r);
  Shape out_shape = x.shape();
  out_shape[0] = cout;
  ImplPtr xi = x.impl(), wi = w.impl(), bi = bias.impl();
  return make_result(std::move(out_shape), std::move(out), {x, w, bias},
                     [xi, wi, bi, has_bias, cout, cin, r](TensorImpl& o) {
                       push_grad(xi, [&](auto& g) {
                         gemm_tn(wi->data.data(), o.grad.data(), g.data(), cout, cin, r);
                       });
                       push_grad(wi, [&](auto& g) {
                         gemm_nt(o.grad.data(), xi->data.data(), g.data(), cout, r, cin);
                       });
                       if (has_bias)
                         push_grad(bi, [&](auto& g) {
                           for (std::size_t oc = 0; oc < cout; ++oc) {
                             double s = 0.0;
                             const double* row = o.grad.data() + oc * r;
                             for (std::size_t i = 0; i < r; ++i) s += row[i];
                             g[oc] += s;
                           }
                         });
                     });
}

Tensor conv1x1(const Tensor& x, const Tensor& w) { return conv1x1(x, w, Tensor()); }

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t dilation) {
  if (x.rank() != 2 || w.rank() != 3 || w.dim(1) != x.dim(0) || w.dim(2) % 2 == 0 ||
      bias.rank() != 1 || bias.dim(0) != w.dim(0) || dilation == 0)
    throw ShapeError("conv1d: input " + shape_str(x.shape()) + " weight " + shape_str(w.shape()) +
                     " bias " + shape_str(bias.shape()));
  const std::size_t cout = w.dim(0), cin = w.dim(1), ks = w.dim(2), t_len = x.dim(1);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(ks / 2);
  const std::ptrdiff_t T = static_cast<std::ptrdiff_t>(t_len);
  const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(dilation);
  auto xd = x.data();
  auto wd = w.data();
  std::vector<double> out(cout * t_len);
  for (std::size_t o = 0; o < cout; ++o) std::fill_n(out.data() + o * t_len, t_len, bias.data()[o]);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t k = 0; k < ks; ++k) {
        const double wv = wd[(o * cin + i) * ks + k];
        const std::ptrdiff_t shift = (static_cast<std::ptrdiff_t>(k) - half) * d;
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(T, T - shift);
        double* orow = out.data() + o * t_len;
        const double* xrow = xd.data() + i * t_len;
        for (std::ptrdiff_t t = t0; t < t1; ++t) orow[t] += wv * xrow[t + shift];
      }
  ImplPtr xi = x.impl(), wi = w.impl(), bi = bias.impl();
  return make_result(
      Shape{cout, t_len}, std::move(out), {x, w, bias},
      [xi, wi, bi, cout, cin, ks, t_len, half, T, d](TensorImpl& o) {
        const bool need_x = xi->requires_grad, need_w = wi->requires_grad;
        if (need_x) xi->ensure_grad();
        if (need_w) wi->ensure_grad();
        for (std::size_t oc = 0; oc < cout; ++oc)
          for (std::size_t i = 0; i < cin; ++i)
            for (std::size_t k = 0; k < ks; ++k) {
              const std::ptrdiff_t shift = (static_cast<std::ptrdiff_t>(k) - half) * d;
              const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
              const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(T, T - shift);
              const double* grow = o.grad.data() + oc * t_len;
              const double* xrow = xi->data.data() + i * t_len;
              const std::size_t widx = (oc * cin + i) * ks + k;
              if (need_w) {
                double s = 0.0;
                for (std::ptrdiff_t t = t0; t < t1; ++t) s += grow[t] * xrow[t + shift];
                wi->grad[widx] += s;
              }
              if (need_x) {
                const double wv = wi->data[widx];
                double* gx = xi->grad.data() + i * t_len;
                for (std::ptrdiff_t t = t0; t < t1; ++t) gx[t + shift] += wv * grow[t];
              }
            }
        push_grad(bi, [&](auto& g) {
          for (std::size_t oc = 0; oc < cout; ++oc) {
            double s = 0.0;
            for (std::size_t t = 0; t < t_len; ++t) s += o.grad[oc * t_len + t];
            g[oc] += s;
          }
        });
      });
}

Tensor pairwise_l2(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("pairwise_l2 needs [n, d], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), dd = x.dim(1);
  auto xd = x.data();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dd; ++k) {
        const double diff = xd[i * dd + k] - xd[j * dd + k];
        s += diff * diff;
      }
      out[i * n + j] = out[j * n + i] = std::sqrt(s);
    }
  ImplPtr xi = x.impl();
  return make_result(Shape{n, n}, std::move(out), {x}, [xi, n, dd](TensorImpl& o) {
    push_grad(xi, [&](auto& g) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          const double dist = o.data[i * n + j];
          if (dist == 0.0) continue;
          const double c = (o.grad[i * n + j] + o.grad[j * n + i]) / dist;
          for (std::size_t k = 0; k < dd; ++k)
            g[i * dd + k] += c * (xi->data[i * dd + k] - xi->data[j * dd + k]);
        }
    });
  });
}

// ---------------------------------------------------------------------------
// normalization / regularization

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  bool training) {
  if (x.rank() < 1) throw ShapeError("batch_norm on a scalar");
  const std::size_t c = x.dim(0), r = x.size() / c;
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c} || state.running_mean.size() != c)
    throw ShapeError("batch_norm: channel mismatch for input " + shape_str(x.shape()));
  auto xd = x.data();
  std::vector<double> mu(c), invstd(c), xhat(x.size()), out(x.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* row = xd.data() + ch * r;
    double m, v;
    if (training) {
      m = 0.0;
      for (std::size_t i = 0; i < r; ++i) m += row[i];
      m /= static_cast<double>(r);
      v = 0.0;
      for (std::size_t i = 0; i < r; ++i) v += (row[i] - m) * (row[i] - m);
      v /= static_cast<double>(r);
      const double unbiased = r > 1 ? v * static_cast<double>(r) / static_cast<double>(r - 1) : v;
      state.running_mean[ch] = (1.0 - state.momentum) * state.running_mean[ch] + state.momentum * m;
      state.running_var[ch] =
          (1.0 - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
    } else {
      m = state.running_mean[ch];
      v = state.running_var[ch];
    }
    mu[ch] = m;
    invstd[ch] = 1.0 / std::sqrt(v + state.eps);
    for (std::size_t i = 0; i < r; ++i) {
      xhat[ch * r + i] = (row[i] - m) * invstd[ch];
      out[ch * r + i] = gamma.data()[ch] * xhat[ch * r + i] + beta.data()[ch];
    }
  }
  ImplPtr xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [xi, gi, bi, c, r, training, invstd = std::move(invstd),
       xhat = std::move(xhat)](TensorImpl& o) {
        std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t i = 0; i < r; ++i) {
            sum_dy[ch] += o.grad[ch * r + i];
            sum_dy_xhat[ch] += o.grad[ch * r + i] * xhat[ch * r + i];
          }
        push_grad(gi, [&](auto& g) { for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy_xhat[ch]; });
        push_grad(bi, [&](auto& g) { for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy[ch]; });
        push_grad(xi, [&](auto& g) {
          const double n = static_cast<double>(r);
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double k = gi->data[ch] * invstd[ch];
            for (std::size_t i = 0; i < r; ++i) {
              const std::size_t idx = ch * r + i;
              if (training)
                g[idx] += k * (o.grad[idx] - sum_dy[ch] / n - xhat[idx] * sum_dy_xhat[ch] / n);
              else
                g[idx] += k * o.grad[idx];
            }
          }
        });
      });
}

Tensor dropout(const Tensor& x, double rate, CounterRng& rng, bool training) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw Error(Error::Kind::InvalidArgument, "dropout rate must be < 1");
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  auto xd = x.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * mask[i];
  ImplPtr xi = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [xi, mask = std::move(mask)](TensorImpl& o) {
    push_grad(xi, [&](auto& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * mask[i];
    });
  });
}

}  // namespace trg
