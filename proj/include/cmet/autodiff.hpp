#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cmet/errors.hpp"
#include "cmet/kernels.hpp"
#include "cmet/rng.hpp"
#include "cmet/tensor.hpp"

// Reverse-mode autodiff on a dynamically built graph of shared_ptr nodes.
// Ops compute values eagerly (through the kernels layer) and attach a
// backprop closure that scatters the node's grad into its parents' grads.
// Gradients accumulate with += until explicitly reset, so repeated backward
// calls without a reset add up.

namespace cmet::ad {

template <class S>
struct Node {
  Tensor<S> val;
  Tensor<S> grad;            // same shape as val, zero until backward
  bool needs_grad = false;   // true for parameters and anything built on one
  std::vector<std::shared_ptr<Node<S>>> parents;
  // Scatters self.grad into parents' grads. Parents are captured as raw
  // pointers inside the closure; the parents vector keeps them alive.
  std::function<void(Node<S>&)> backprop;
  std::string name;          // nonempty only for parameters

  explicit Node(Tensor<S> v) : val(std::move(v)), grad(Tensor<S>::zeros(val.shape)) {}
};

template <class S>
using Var = std::shared_ptr<Node<S>>;

template <class S>
Var<S> make_param(Tensor<S> t, std::string name) {
  auto n = std::make_shared<Node<S>>(std::move(t));
  n->needs_grad = true;
  n->name = std::move(name);
  return n;
}

template <class S>
Var<S> make_const(Tensor<S> t) {
  return std::make_shared<Node<S>>(std::move(t));
}

template <class S>
void zero_grad(const Var<S>& v) {
  std::fill(v->grad.data.begin(), v->grad.data.end(), S(0));
}

template <class S>
S scalar_value(const Var<S>& v) {
  if (v->val.numel() != 1) throw usage_error("expected scalar, got shape " + shape_str(v->val.shape));
  return v->val.data[0];
}

// Backward pass from a scalar loss: topological order by DFS over parents,
// then reversed. Seeds the loss grad with 1.
template <class S>
void backward(const Var<S>& loss) {
  if (loss->val.numel() != 1)
    throw usage_error("backward requires a scalar loss, got shape " + shape_str(loss->val.shape));
  if (!loss->needs_grad) return;  // nothing reachable requires gradients

  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  // iterative postorder DFS
  std::vector<std::pair<Node<S>*, size_t>> stack;
  stack.push_back({loss.get(), 0});
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<S>* p = node->parents[idx++].get();
      if (p->needs_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->grad.data[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

namespace detail {

template <class S>
Var<S> unary(const Var<S>& a, Tensor<S> val, std::function<void(Node<S>&, Node<S>&)> back) {
  auto out = std::make_shared<Node<S>>(std::move(val));
  out->needs_grad = a->needs_grad;
  if (out->needs_grad) {
    out->parents = {a};
    Node<S>* pa = a.get();
    out->backprop = [pa, back = std::move(back)](Node<S>& self) { back(self, *pa); };
  }
  return out;
}

template <class S>
Var<S> binary(const Var<S>& a, const Var<S>& b, Tensor<S> val,
              std::function<void(Node<S>&, Node<S>&, Node<S>&)> back) {
  auto out = std::make_shared<Node<S>>(std::move(val));
  out->needs_grad = a->needs_grad || b->needs_grad;
  if (out->needs_grad) {
    out->parents = {a, b};
    Node<S>* pa = a.get();
    Node<S>* pb = b.get();
    out->backprop = [pa, pb, back = std::move(back)](Node<S>& self) { back(self, *pa, *pb); };
  }
  return out;
}

}  // namespace detail

// ---- elementwise ----

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  check_same_shape(a->val, b->val, "add");
  Tensor<S> y(a->val.shape);
  kernels::add(a->val.data.data(), b->val.data.data(), y.data.data(), y.numel());
  return detail::binary<S>(a, b, std::move(y), [](Node<S>& self, Node<S>& pa, Node<S>& pb) {
    for (size_t i = 0; i < self.grad.data.size(); ++i) {
      if (pa.needs_grad) pa.grad.data[i] += self.grad.data[i];
      if (pb.needs_grad) pb.grad.data[i] += self.grad.data[i];
    }
  });
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  check_same_shape(a->val, b->val, "sub");
  Tensor<S> y(a->val.shape);
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] = a->val.data[i] - b->val.data[i];
  return detail::binary<S>(a, b, std::move(y), [](Node<S>& self, Node<S>& pa, Node<S>& pb) {
    for (size_t i = 0; i < self.grad.data.size(); ++i) {
      if (pa.needs_grad) pa.grad.data[i] += self.grad.data[i];
      if (pb.needs_grad) pb.grad.data[i] -= self.grad.data[i];
    }
  });
}

template <class S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  check_same_shape(a->val, b->val, "mul");
  Tensor<S> y(a->val.shape);
  kernels::mul(a->val.data.data(), b->val.data.data(), y.data.data(), y.numel());
  return detail::binary<S>(a, b, std::move(y), [](Node<S>& self, Node<S>& pa, Node<S>& pb) {
    for (size_t i = 0; i < self.grad.data.size(); ++i) {
      if (pa.needs_grad) pa.grad.data[i] += self.grad.data[i] * pb.val.data[i];
      if (pb.needs_grad) pb.grad.data[i] += self.grad.data[i] * pa.val.data[i];
    }
  });
}

// y = alpha * x + beta (elementwise, scalar coefficients)
template <class S>
Var<S> affine(const Var<S>& a, S alpha, S beta) {
  Tensor<S> y(a->val.shape);
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] = alpha * a->val.data[i] + beta;
  return detail::unary<S>(a, std::move(y), [alpha](Node<S>& self, Node<S>& pa) {
    for (size_t i = 0; i < self.grad.data.size(); ++i) pa.grad.data[i] += alpha * self.grad.data[i];
  });
}

// y[i,j] = x[i,j] + v[j] — broadcast a row vector over all rows (bias add)
template <class S>
Var<S> add_rowvec(const Var<S>& a, const Var<S>& v) {
  const int m = a->val.rows(), n = a->val.cols();
  if (v->val.numel() != (size_t)n)
    throw shape_error("add_rowvec: vector length " + std::to_string(v->val.numel()) +
                      " vs row width " + std::to_string(n));
  Tensor<S> y(a->val.shape);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) y.data[(size_t)i * n + j] = a->val.data[(size_t)i * n + j] + v->val.data[j];
  return detail::binary<S>(a, v, std::move(y), [m, n](Node<S>& self, Node<S>& pa, Node<S>& pv) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        const S g = self.grad.data[(size_t)i * n + j];
        if (pa.needs_grad) pa.grad.data[(size_t)i * n + j] += g;
        if (pv.needs_grad) pv.grad.data[j] += g;
      }
  });
}

// ---- matrix products ----

// c[m x n] = a[m x k] * b[k x n]
template <class S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  const int m = a->val.rows(), k = a->val.cols(), k2 = b->val.rows(), n = b->val.cols();
  if (k != k2)
    throw shape_error("matmul: inner dims " + shape_str(a->val.shape) + " x " + shape_str(b->val.shape));
  Tensor<S> y(Shape{m, n});
  kernels::matmul_nn(a->val.data.data(), b->val.data.data(), y.data.data(), m, k, n, false);
  return detail::binary<S>(a, b, std::move(y), [m, k, n](Node<S>& self, Node<S>& pa, Node<S>& pb) {
    // dA += dC * B^T ; dB += A^T * dC
    if (pa.needs_grad)
      kernels::matmul_nt(self.grad.data.data(), pb.val.data.data(), pa.grad.data.data(), m, n, k, true);
    if (pb.needs_grad)
      kernels::matmul_tn(pa.val.data.data(), self.grad.data.data(), pb.grad.data.data(), k, m, n, true);
  });
}

// c[m x n] = a[m x k] * b[n x k]^T — used for attention scores q k^T
template <class S>
Var<S> matmul_nt(const Var<S>& a, const Var<S>& b) {
  const int m = a->val.rows(), k = a->val.cols(), n = b->val.rows();
  if (b->val.cols() != k)
    throw shape_error("matmul_nt: inner dims " + shape_str(a->val.shape) + " x " + shape_str(b->val.shape));
  Tensor<S> y(Shape{m, n});
  kernels::matmul_nt(a->val.data.data(), b->val.data.data(), y.data.data(), m, k, n, false);
  return detail::binary<S>(a, b, std::move(y), [m, k, n](Node<S>& self, Node<S>& pa, Node<S>& pb) {
    // dA += dC * B ; dB += dC^T * A
    if (pa.needs_grad)
      kernels::matmul_nn(self.grad.data.data(), pb.val.data.data(), pa.grad.data.data(), m, n, k, true);
    if (pb.needs_grad)
      kernels::matmul_tn(self.grad.data.data(), pa.val.data.data(), pb.grad.data.data(), n, m, k, true);
  });
}

// ---- nonlinearities / normalization ----

template <class S>
Var<S> gelu(const Var<S>& a) {
  Tensor<S> y(a->val.shape);
  kernels::gelu(a->val.data.data(), y.data.data(), y.numel());
  return detail::unary<S>(a, std::move(y), [](Node<S>& self, Node<S>& pa) {
    const S inv_sqrt2 = S(0.7071067811865475244);
    const S inv_sqrt_2pi = S(0.3989422804014326779);
    for (size_t i = 0; i < self.grad.data.size(); ++i) {
      const S x = pa.val.data[i];
      const S cdf = S(0.5) * (S(1) + std::erf(x * inv_sqrt2));
      const S pdf = inv_sqrt_2pi * std::exp(S(-0.5) * x * x);
      pa.grad.data[i] += self.grad.data[i] * (cdf + x * pdf);
    }
  });
}

// Softmax along `axis` of an arbitrary-rank tensor.
template <class S>
Var<S> softmax(const Var<S>& a, int axis) {
  const auto& sh = a->val.shape;
  if (axis < 0 || axis >= (int)sh.size())
    throw shape_error("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(sh));
  size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= (size_t)sh[i];
  for (int i = axis + 1; i < (int)sh.size(); ++i) inner *= (size_t)sh[i];
  const int len = sh[axis];
  Tensor<S> y(sh);
  kernels::softmax_lines(a->val.data.data(), y.data.data(), outer, len, inner);
  return detail::unary<S>(a, std::move(y), [outer, len, inner](Node<S>& self, Node<S>& pa) {
    // dx_a = y_a * (g_a - sum_b g_b y_b) per line
    for (size_t o = 0; o < outer; ++o)
      for (size_t i = 0; i < inner; ++i) {
        const size_t base = o * (size_t)len * inner + i;
        S dot = 0;
        for (int t = 0; t < len; ++t)
          dot += self.grad.data[base + (size_t)t * inner] * self.val.data[base + (size_t)t * inner];
        for (int t = 0; t < len; ++t) {
          const size_t ix = base + (size_t)t * inner;
          pa.grad.data[ix] += self.val.data[ix] * (self.grad.data[ix] - dot);
        }
      }
  });
}

template <class S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gain, const Var<S>& bias, S eps) {
  const int rows = x->val.rows(), cols = x->val.cols();
  if (gain->val.numel() != (size_t)cols || bias->val.numel() != (size_t)cols)
    throw shape_error("layer_norm: gain/bias length vs row width " + std::to_string(cols));
  if (!(eps > S(0))) throw config_error("layer_norm: eps must be > 0");
  Tensor<S> y(x->val.shape);
  auto mean = std::make_shared<Tensor<S>>(Shape{rows});
  auto rstd = std::make_shared<Tensor<S>>(Shape{rows});
  kernels::layer_norm_rows(x->val.data.data(), gain->val.data.data(), bias->val.data.data(), eps,
                           y.data.data(), mean->data.data(), rstd->data.data(), rows, cols);
  auto out = std::make_shared<Node<S>>(std::move(y));
  out->needs_grad = x->needs_grad || gain->needs_grad || bias->needs_grad;
  if (out->needs_grad) {
    out->parents = {x, gain, bias};
    Node<S>* px = x.get();
    Node<S>* pg = gain.get();
    Node<S>* pb = bias.get();
    out->backprop = [px, pg, pb, mean, rstd, rows, cols](Node<S>& self) {
      for (int r = 0; r < rows; ++r) {
        const S mu = mean->data[r], rs = rstd->data[r];
        const S* xr = px->val.data.data() + (size_t)r * cols;
        const S* gr = self.grad.data.data() + (size_t)r * cols;
        S m1 = 0, m2 = 0;
        for (int c = 0; c < cols; ++c) {
          const S xhat = (xr[c] - mu) * rs;
          const S dyg = gr[c] * pg->val.data[c];
          m1 += dyg;
          m2 += dyg * xhat;
        }
        m1 /= (S)cols;
        m2 /= (S)cols;
        for (int c = 0; c < cols; ++c) {
          const S xhat = (xr[c] - mu) * rs;
          if (px->needs_grad) {
            const S dyg = gr[c] * pg->val.data[c];
            px->grad.data[(size_t)r * cols + c] += rs * (dyg - m1 - xhat * m2);
          }
          if (pg->needs_grad) pg->grad.data[c] += gr[c] * xhat;
          if (pb->needs_grad) pb->grad.data[c] += gr[c];
        }
      }
    };
  }
  return out;
}

// 1-D convolution over the frame axis. x: [t_in x c_in], w: [K x c_in x c_out]
// (rank-3), optional bias [c_out]; zero padding.
template <class S>
Var<S> conv1d(const Var<S>& x, const Var<S>& w, const Var<S>& bias, int stride, int pad) {
  if (w->val.rank() != 3) throw shape_error("conv1d: kernel must be rank 3, got " + shape_str(w->val.shape));
  const int t_in = x->val.rows(), c_in = x->val.cols();
  const int ksize = w->val.shape[0], wc_in = w->val.shape[1], c_out = w->val.shape[2];
  if (wc_in != c_in)
    throw shape_error("conv1d: input channels " + std::to_string(c_in) + " vs kernel " + std::to_string(wc_in));
  if (ksize > t_in + 2 * pad)
    throw shape_error("conv1d: kernel size " + std::to_string(ksize) + " exceeds padded length");
  const int t_out = (t_in + 2 * pad - ksize) / stride + 1;
  if (t_out < 1) throw shape_error("conv1d: empty output");
  if (bias && bias->val.numel() != (size_t)c_out)
    throw shape_error("conv1d: bias length vs output channels " + std::to_string(c_out));

  Tensor<S> y(Shape{t_out, c_out});
  kernels::conv1d(x->val.data.data(), w->val.data.data(), bias ? bias->val.data.data() : nullptr,
                  y.data.data(), t_in, c_in, c_out, ksize, stride, pad);
  auto out = std::make_shared<Node<S>>(std::move(y));
  out->needs_grad = x->needs_grad || w->needs_grad || (bias && bias->needs_grad);
  if (out->needs_grad) {
    out->parents = {x, w};
    if (bias) out->parents.push_back(bias);
    Node<S>* px = x.get();
    Node<S>* pw = w.get();
    Node<S>* pb = bias ? bias.get() : nullptr;
    out->backprop = [px, pw, pb, t_in, c_in, c_out, ksize, stride, pad, t_out](Node<S>& self) {
      for (int t = 0; t < t_out; ++t)
        for (int co = 0; co < c_out; ++co) {
          const S go = self.grad.data[(size_t)t * c_out + co];
          if (pb && pb->needs_grad) pb->grad.data[co] += go;
          for (int kk = 0; kk < ksize; ++kk) {
            const int ti = t * stride - pad + kk;
            if (ti < 0 || ti >= t_in) continue;
            for (int ci = 0; ci < c_in; ++ci) {
              if (px->needs_grad)
                px->grad.data[(size_t)ti * c_in + ci] += go * pw->val.data[((size_t)kk * c_in + ci) * c_out + co];
              if (pw->needs_grad)
                pw->grad.data[((size_t)kk * c_in + ci) * c_out + co] += go * px->val.data[(size_t)ti * c_in + ci];
            }
          }
        }
    };
  }
  return out;
}

// ---- shape surgery ----

namespace detail {
template <class S>
int part_rows(const Tensor<S>& t) {  // rank-1 counts as a single row
  return t.rank() == 1 ? 1 : t.rows();
}
}  // namespace detail

template <class S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw shape_error("concat_rows: no parts");
  const int n = parts[0]->val.cols();
  int m = 0;
  for (const auto& p : parts) {
    if (p->val.cols() != n) throw shape_error("concat_rows: column mismatch");
    m += detail::part_rows(p->val);
  }
  Tensor<S> y(Shape{m, n});
  size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->val.data.begin(), p->val.data.end(), y.data.begin() + off);
    off += p->val.numel();
  }
  auto out = std::make_shared<Node<S>>(std::move(y));
  for (const auto& p : parts) out->needs_grad = out->needs_grad || p->needs_grad;
  if (out->needs_grad) {
    out->parents = parts;
    std::vector<Node<S>*> raw;
    for (const auto& p : parts) raw.push_back(p.get());
    out->backprop = [raw](Node<S>& self) {
      size_t off2 = 0;
      for (Node<S>* p : raw) {
        const size_t cnt = p->val.numel();
        if (p->needs_grad)
          for (size_t i = 0; i < cnt; ++i) p->grad.data[i] += self.grad.data[off2 + i];
        off2 += cnt;
      }
    };
  }
  return out;
}

template <class S>
Var<S> slice_rows(const Var<S>& a, int r0, int r1) {
  const int m = a->val.rows(), n = a->val.cols();
  if (r0 < 0 || r1 > m || r0 >= r1)
    throw shape_error("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) + ") of " +
                      std::to_string(m) + " rows");
  Tensor<S> y(Shape{r1 - r0, n});
  std::copy(a->val.data.begin() + (size_t)r0 * n, a->val.data.begin() + (size_t)r1 * n, y.data.begin());
  return detail::unary<S>(a, std::move(y), [r0, n](Node<S>& self, Node<S>& pa) {
    const size_t cnt = self.grad.data.size();
    for (size_t i = 0; i < cnt; ++i) pa.grad.data[(size_t)r0 * n + i] += self.grad.data[i];
  });
}

template <class S>
Var<S> slice_cols(const Var<S>& a, int c0, int c1) {
  const int m = a->val.rows(), n = a->val.cols();
  if (c0 < 0 || c1 > n || c0 >= c1)
    throw shape_error("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) + ") of " +
                      std::to_string(n) + " cols");
  const int w = c1 - c0;
  Tensor<S> y(Shape{m, w});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < w; ++j) y.data[(size_t)i * w + j] = a->val.data[(size_t)i * n + c0 + j];
  return detail::unary<S>(a, std::move(y), [m, n, c0, w](Node<S>& self, Node<S>& pa) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j) pa.grad.data[(size_t)i * n + c0 + j] += self.grad.data[(size_t)i * w + j];
  });
}

template <class S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw shape_error("concat_cols: no parts");
  const int m = parts[0]->val.rows();
  int n = 0;
  for (const auto& p : parts) {
    if (p->val.rows() != m) throw shape_error("concat_cols: row mismatch");
    n += p->val.cols();
  }
  Tensor<S> y(Shape{m, n});
  int coff = 0;
  for (const auto& p : parts) {
    const int w = p->val.cols();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j) y.data[(size_t)i * n + coff + j] = p->val.data[(size_t)i * w + j];
    coff += w;
  }
  auto out = std::make_shared<Node<S>>(std::move(y));
  for (const auto& p : parts) out->needs_grad = out->needs_grad || p->needs_grad;
  if (out->needs_grad) {
    out->parents = parts;
    std::vector<Node<S>*> raw;
    for (const auto& p : parts) raw.push_back(p.get());
    out->backprop = [raw, m, n](Node<S>& self) {
      int coff2 = 0;
      for (Node<S>* p : raw) {
        const int w = p->val.cols();
        if (p->needs_grad)
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
              p->grad.data[(size_t)i * w + j] += self.grad.data[(size_t)i * n + coff2 + j];
        coff2 += w;
      }
    };
  }
  return out;
}

// ---- reductions ----

template <class S>
Var<S> mean_rows(const Var<S>& a) {  // [m x n] -> [n]
  const int m = a->val.rows(), n = a->val.cols();
  Tensor<S> y(Shape{n});
  for (int j = 0; j < n; ++j) {
    S acc = 0;
    for (int i = 0; i < m; ++i) acc += a->val.data[(size_t)i * n + j];
    y.data[j] = acc / (S)m;
  }
  return detail::unary<S>(a, std::move(y), [m, n](Node<S>& self, Node<S>& pa) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) pa.grad.data[(size_t)i * n + j] += self.grad.data[j] / (S)m;
  });
}

template <class S>
Var<S> sum_all(const Var<S>& a) {
  S acc = 0;
  for (S v : a->val.data) acc += v;
  Tensor<S> y(Shape{1});
  y.data[0] = acc;
  return detail::unary<S>(a, std::move(y), [](Node<S>& self, Node<S>& pa) {
    for (auto& g : pa.grad.data) g += self.grad.data[0];
  });
}

template <class S>
Var<S> mean_all(const Var<S>& a) {
  const S inv = S(1) / (S)a->val.numel();
  S acc = 0;
  for (S v : a->val.data) acc += v;
  Tensor<S> y(Shape{1});
  y.data[0] = acc * inv;
  return detail::unary<S>(a, std::move(y), [inv](Node<S>& self, Node<S>& pa) {
    for (auto& g : pa.grad.data) g += self.grad.data[0] * inv;
  });
}

// Sum of row-wise Euclidean norms; subgradient 0 at exactly-zero rows.
template <class S>
Var<S> l2_rows_sum(const Var<S>& a) {
  const int m = a->val.rows(), n = a->val.cols();
  auto norms = std::make_shared<std::vector<S>>(m);
  S acc = 0;
  for (int i = 0; i < m; ++i) {
    S s = 0;
    for (int j = 0; j < n; ++j) {
      const S v = a->val.data[(size_t)i * n + j];
      s += v * v;
    }
    (*norms)[i] = std::sqrt(s);
    acc += (*norms)[i];
  }
  Tensor<S> y(Shape{1});
  y.data[0] = acc;
  return detail::unary<S>(a, std::move(y), [norms, m, n](Node<S>& self, Node<S>& pa) {
    const S g = self.grad.data[0];
    for (int i = 0; i < m; ++i) {
      const S nr = (*norms)[i];
      if (nr == S(0)) continue;
      for (int j = 0; j < n; ++j) pa.grad.data[(size_t)i * n + j] += g * pa.val.data[(size_t)i * n + j] / nr;
    }
  });
}

// ---- cosine similarities ----

inline constexpr double kCosineEps = 1e-8;

// Row-paired cosine: out[r] = <a_r, b_r> / (|a_r||b_r| + eps).
template <class S>
Var<S> cosine_rows(const Var<S>& a, const Var<S>& b) {
  check_same_shape(a->val, b->val, "cosine_rows");
  const int m = detail::part_rows(a->val), n = a->val.cols();
  const S eps = S(kCosineEps);
  auto pn = std::make_shared<std::vector<S>>(m);
  auto qn = std::make_shared<std::vector<S>>(m);
  Tensor<S> y(Shape{m});
  for (int r = 0; r < m; ++r) {
    S dot = 0, pp = 0, qq = 0;
    for (int j = 0; j < n; ++j) {
      const S av = a->val.data[(size_t)r * n + j], bv = b->val.data[(size_t)r * n + j];
      dot += av * bv;
      pp += av * av;
      qq += bv * bv;
    }
    (*pn)[r] = std::sqrt(pp);
    (*qn)[r] = std::sqrt(qq);
    y.data[r] = dot / ((*pn)[r] * (*qn)[r] + eps);
  }
  return detail::binary<S>(a, b, std::move(y), [pn, qn, m, n, eps](Node<S>& self, Node<S>& pa, Node<S>& pb) {
    for (int r = 0; r < m; ++r) {
      const S g = self.grad.data[r];
      if (g == S(0)) continue;
      const S p = (*pn)[r], q = (*qn)[r];
      const S inv = S(1) / (p * q + eps);
      const S s = self.val.data[r];
      for (int j = 0; j < n; ++j) {
        const S av = pa.val.data[(size_t)r * n + j], bv = pb.val.data[(size_t)r * n + j];
        if (pa.needs_grad) {
          S d = bv * inv;
          if (p > S(0)) d -= s * inv * (q / p) * av;
          pa.grad.data[(size_t)r * n + j] += g * d;
        }
        if (pb.needs_grad) {
          S d = av * inv;
          if (q > S(0)) d -= s * inv * (p / q) * bv;
          pb.grad.data[(size_t)r * n + j] += g * d;
        }
      }
    }
  });
}

// All-pairs cosine: out[i,j] = cos(a_i, b_j) for a,b of shape [B x d].
template <class S>
Var<S> cosine_matrix(const Var<S>& a, const Var<S>& b) {
  check_same_shape(a->val, b->val, "cosine_matrix");
  const int bsz = a->val.rows(), d = a->val.cols();
  const S eps = S(kCosineEps);
  auto pn = std::make_shared<std::vector<S>>(bsz);
  auto qn = std::make_shared<std::vector<S>>(bsz);
  for (int i = 0; i < bsz; ++i) {
    S pp = 0, qq = 0;
    for (int j = 0; j < d; ++j) {
      pp += a->val.data[(size_t)i * d + j] * a->val.data[(size_t)i * d + j];
      qq += b->val.data[(size_t)i * d + j] * b->val.data[(size_t)i * d + j];
    }
    (*pn)[i] = std::sqrt(pp);
    (*qn)[i] = std::sqrt(qq);
  }
  Tensor<S> y(Shape{bsz, bsz});
  for (int i = 0; i < bsz; ++i)
    for (int j = 0; j < bsz; ++j) {
      S dot = 0;
      for (int t = 0; t < d; ++t) dot += a->val.data[(size_t)i * d + t] * b->val.data[(size_t)j * d + t];
      y.data[(size_t)i * bsz + j] = dot / ((*pn)[i] * (*qn)[j] + eps);
    }
  return detail::binary<S>(a, b, std::move(y), [pn, qn, bsz, d, eps](Node<S>& self, Node<S>& pa, Node<S>& pb) {
    for (int i = 0; i < bsz; ++i)
      for (int j = 0; j < bsz; ++j) {
        const S g = self.grad.data[(size_t)i * bsz + j];
        if (g == S(0)) continue;
        const S p = (*pn)[i], q = (*qn)[j];
        const S inv = S(1) / (p * q + eps);
        const S s = self.val.data[(size_t)i * bsz + j];
        for (int t = 0; t < d; ++t) {
          const S av = pa.val.data[(size_t)i * d + t], bv = pb.val.data[(size_t)j * d + t];
          if (pa.needs_grad) {
            S dv = bv * inv;
            if (p > S(0)) dv -= s * inv * (q / p) * av;
            pa.grad.data[(size_t)i * d + t] += g * dv;
          }
          if (pb.needs_grad) {
            S dv = av * inv;
            if (q > S(0)) dv -= s * inv * (p / q) * bv;
            pb.grad.data[(size_t)j * d + t] += g * dv;
          }
        }
      }
  });
}

// Bidirectional InfoNCE over a similarity matrix: positives on the diagonal,
// each direction a sum over rows (resp. columns) of -log softmax(sim/tau);
// the two directions are averaged. Optional division by B.
template <class S>
Var<S> info_nce(const Var<S>& sims, S tau, bool mean_over_batch) {
  if (!(tau > S(0))) throw config_error("info_nce: temperature must be > 0");
  const int bsz = sims->val.rows();
  if (sims->val.cols() != bsz) throw shape_error("info_nce: similarity matrix must be square");
  const S w = mean_over_batch ? S(1) / (S)bsz : S(1);

  auto prow = std::make_shared<Tensor<S>>(Shape{bsz, bsz});
  auto pcol = std::make_shared<Tensor<S>>(Shape{bsz, bsz});
  {
    Tensor<S> scaled(sims->val.shape);
    for (size_t i = 0; i < scaled.data.size(); ++i) scaled.data[i] = sims->val.data[i] / tau;
    kernels::softmax_lines(scaled.data.data(), prow->data.data(), (size_t)bsz, bsz, 1);
    // column softmax = softmax along the outer axis of the same scaled matrix
    kernels::softmax_lines(scaled.data.data(), pcol->data.data(), 1, bsz, (size_t)bsz);
  }

  S loss = 0;
  for (int i = 0; i < bsz; ++i) {
    loss -= std::log(prow->data[(size_t)i * bsz + i]);
    loss -= std::log(pcol->data[(size_t)i * bsz + i]);
  }
  loss *= S(0.5) * w;

  Tensor<S> y(Shape{1});
  y.data[0] = loss;
  return detail::unary<S>(sims, std::move(y), [prow, pcol, bsz, tau, w](Node<S>& self, Node<S>& pa) {
    const S g = self.grad.data[0] * S(0.5) * w / tau;
    for (int i = 0; i < bsz; ++i)
      for (int j = 0; j < bsz; ++j) {
        const S delta = (i == j) ? S(1) : S(0);
        pa.grad.data[(size_t)i * bsz + j] +=
            g * ((prow->data[(size_t)i * bsz + j] - delta) + (pcol->data[(size_t)i * bsz + j] - delta));
      }
  });
}

// Inverted-scale dropout; p = 0 is an exact no-op (returns the input node).
template <class S>
Var<S> dropout(const Var<S>& a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw config_error("dropout: rate must be < 1");
  auto mask = std::make_shared<Tensor<S>>(a->val.shape);
  const S keep_inv = S(1.0 / (1.0 - p));
  for (auto& v : mask->data) v = (rng.uniform() < p) ? S(0) : keep_inv;
  Tensor<S> y(a->val.shape);
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] = a->val.data[i] * mask->data[i];
  return detail::unary<S>(a, std::move(y), [mask](Node<S>& self, Node<S>& pa) {
    for (size_t i = 0; i < self.grad.data.size(); ++i) pa.grad.data[i] += self.grad.data[i] * mask->data[i];
  });
}

// mean squared error over all elements
template <class S>
Var<S> mse(const Var<S>& pred, const Var<S>& target) {
  auto d = sub(pred, target);
  return mean_all(mul(d, d));
}

}  // namespace cmet::ad
