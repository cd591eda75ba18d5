#pragma once

#include <cmath>
#include <memory>

#include "monomm/tensor.hpp"

namespace monomm {

// 8-way unrolled dot product. Fixed association order keeps results
// reproducible while breaking the FP dependency chain.
template <typename T>
inline T dot_span(const T* a, const T* b, int64_t n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
    s4 += a[i + 4] * b[i + 4];
    s5 += a[i + 5] * b[i + 5];
    s6 += a[i + 6] * b[i + 6];
    s7 += a[i + 7] * b[i + 7];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return (((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7))) + tail;
}

template <typename T>
inline void grad_add(Node<T>& dst, const std::vector<T>& g) {
  dst.ensure_grad();
  for (size_t i = 0; i < g.size(); ++i) dst.grad[i] += g[i];
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
  Tensor<T> out = make_output<T>(a.shape());
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (int64_t i = 0, n = out.numel(); i < n; ++i) po[i] = pa[i] + pb[i];
  if (track_grad<T>({&a, &b})) {
    auto an = a.node(), bn = b.node();
    attach<T>(out, {a, b}, [an, bn](Node<T>& o) {
      if (an->on_graph) grad_add(*an, o.grad);
      if (bn->on_graph) grad_add(*bn, o.grad);
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.shape() == b.shape(), "sub: shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
  Tensor<T> out = make_output<T>(a.shape());
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (int64_t i = 0, n = out.numel(); i < n; ++i) po[i] = pa[i] - pb[i];
  if (track_grad<T>({&a, &b})) {
    auto an = a.node(), bn = b.node();
    attach<T>(out, {a, b}, [an, bn](Node<T>& o) {
      if (an->on_graph) grad_add(*an, o.grad);
      if (bn->on_graph) {
        bn->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] -= o.grad[i];
      }
    });
  }
  return out;
}

// Hadamard product
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
  Tensor<T> out = make_output<T>(a.shape());
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (int64_t i = 0, n = out.numel(); i < n; ++i) po[i] = pa[i] * pb[i];
  if (track_grad<T>({&a, &b})) {
    auto an = a.node(), bn = b.node();
    attach<T>(out, {a, b}, [an, bn](Node<T>& o) {
      if (an->on_graph) {
        an->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i)
          an->grad[i] += o.grad[i] * bn->data[i];
      }
      if (bn->on_graph) {
        bn->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i)
          bn->grad[i] += o.grad[i] * an->data[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  Tensor<T> out = make_output<T>(a.shape());
  const T* pa = a.data();
  T* po = out.data();
  for (int64_t i = 0, n = out.numel(); i < n; ++i) po[i] = pa[i] * c;
  if (track_grad<T>({&a})) {
    auto an = a.node();
    attach<T>(out, {a}, [an, c](Node<T>& o) {
      an->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * c;
    });
  }
  return out;
}

// elementwise sum of k same-shape tensors
template <typename T>
Tensor<T> add_n(const std::vector<Tensor<T>>& xs) {
  check(!xs.empty(), "add_n: empty input list");
  for (auto& x : xs)
    check(x.shape() == xs[0].shape(), "add_n: shape mismatch");
  Tensor<T> out = make_output<T>(xs[0].shape());
  T* po = out.data();
  for (auto& x : xs) {
    const T* px = x.data();
    for (int64_t i = 0, n = out.numel(); i < n; ++i) po[i] += px[i];
  }
  bool track = false;
  for (auto& x : xs)
    if (GradMode::enabled() && x.on_graph()) track = true;
  if (track) {
    std::vector<std::shared_ptr<Node<T>>> nodes;
    for (auto& x : xs) nodes.push_back(x.node());
    attach<T>(out, xs, [nodes](Node<T>& o) {
      for (auto& n : nodes)
        if (n->on_graph) grad_add(*n, o.grad);
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  Tensor<T> out = make_output<T>({1});
  const T* pa = a.data();
  T s = 0;
  for (int64_t i = 0, n = a.numel(); i < n; ++i) s += pa[i];
  out.data()[0] = s;
  if (track_grad<T>({&a})) {
    auto an = a.node();
    attach<T>(out, {a}, [an](Node<T>& o) {
      an->ensure_grad();
      T g = o.grad[0];
      for (auto& v : an->grad) v += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / T(a.numel()));
}

template <typename T>
Tensor<T> dot(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.numel() == b.numel(), "dot: size mismatch");
  Tensor<T> out = make_output<T>({1});
  out.data()[0] = dot_span(a.data(), b.data(), a.numel());
  if (track_grad<T>({&a, &b})) {
    auto an = a.node(), bn = b.node();
    attach<T>(out, {a, b}, [an, bn](Node<T>& o) {
      T g = o.grad[0];
      if (an->on_graph) {
        an->ensure_grad();
        for (size_t i = 0; i < an->grad.size(); ++i)
          an->grad[i] += g * bn->data[i];
      }
      if (bn->on_graph) {
        bn->ensure_grad();
        for (size_t i = 0; i < bn->grad.size(); ++i)
          bn->grad[i] += g * an->data[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  Tensor<T> out = make_output<T>(a.shape());
  const T* pa = a.data();
  T* po = out.data();
  for (int64_t i = 0, n = out.numel(); i < n; ++i)
    po[i] = pa[i] > T(0) ? pa[i] : T(0);
  if (track_grad<T>({&a})) {
    auto an = a.node();
    attach<T>(out, {a}, [an](Node<T>& o) {
      an->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i)
        if (an->data[i] > T(0)) an->grad[i] += o.grad[i];
    });
  }
  return out;
}

template <typename T>
inline T sigmoid_scalar(T x) {
  // split on sign so exp never overflows
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  Tensor<T> out = make_output<T>(a.shape());
  const T* pa = a.data();
  T* po = out.data();
  for (int64_t i = 0, n = out.numel(); i < n; ++i)
    po[i] = sigmoid_scalar(pa[i]);
  if (track_grad<T>({&a})) {
    auto an = a.node();
    attach<T>(out, {a}, [an](Node<T>& o) {
      an->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) {
        T s = o.data[i];
        an->grad[i] += o.grad[i] * s * (T(1) - s);
      }
    });
  }
  return out;
}

// x * sigmoid(x)
template <typename T>
Tensor<T> silu(const Tensor<T>& a) {
  Tensor<T> out = make_output<T>(a.shape());
  auto sig = std::make_shared<std::vector<T>>(size_t(a.numel()));
  const T* pa = a.data();
  T* po = out.data();
  T* ps = sig->data();
  for (int64_t i = 0, n = out.numel(); i < n; ++i) {
    ps[i] = sigmoid_scalar(pa[i]);
    po[i] = pa[i] * ps[i];
  }
  if (track_grad<T>({&a})) {
    auto an = a.node();
    attach<T>(out, {a}, [an, sig](Node<T>& o) {
      an->ensure_grad();
      const T* s = sig->data();
      for (size_t i = 0; i < o.grad.size(); ++i) {
        T d = s[i] * (T(1) + an->data[i] * (T(1) - s[i]));
        an->grad[i] += o.grad[i] * d;
      }
    });
  }
  return out;
}

// ln(1 + e^x), overflow-safe
template <typename T>
inline T softplus_scalar(T x) {
  T m = x > T(0) ? x : T(0);
  return m + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& a) {
  Tensor<T> out = make_output<T>(a.shape());
  const T* pa = a.data();
  T* po = out.data();
  for (int64_t i = 0, n = out.numel(); i < n; ++i)
    po[i] = softplus_scalar(pa[i]);
  if (track_grad<T>({&a})) {
    auto an = a.node();
    attach<T>(out, {a}, [an](Node<T>& o) {
      an->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i)
        an->grad[i] += o.grad[i] * sigmoid_scalar(an->data[i]);
    });
  }
  return out;
}

// x: [N,Cin], w: [Cout,Cin], b: [Cout] or undefined
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  check(x.ndim() == 2 && w.ndim() == 2, "linear: need 2-d input and weight");
  int N = x.dim(0), Ci = x.dim(1), Co = w.dim(0);
  check(w.dim(1) == Ci, "linear: weight " + shape_str(w.shape()) +
                            " does not match input " + shape_str(x.shape()));
  if (b.defined())
    check(b.numel() == Co, "linear: bias size mismatch");
  Tensor<T> out = make_output<T>({N, Co});
  const T* px = x.data();
  const T* pw = w.data();
  T* po = out.data();
  for (int i = 0; i < N; ++i) {
    const T* xr = px + int64_t(i) * Ci;
    T* orow = po + int64_t(i) * Co;
    for (int o = 0; o < Co; ++o)
      orow[o] = dot_span(xr, pw + int64_t(o) * Ci, Ci);
    if (b.defined()) {
      const T* pb = b.data();
      for (int o = 0; o < Co; ++o) orow[o] += pb[o];
    }
  }
  bool track = b.defined() ? track_grad<T>({&x, &w, &b})
                           : track_grad<T>({&x, &w});
  if (track) {
    auto xn = x.node(), wn = w.node();
    auto bn = b.defined() ? b.node() : nullptr;
    std::vector<Tensor<T>> parents{x, w};
    if (b.defined()) parents.push_back(b);
    attach<T>(out, parents, [xn, wn, bn, N, Ci, Co](Node<T>& o) {
      const T* g = o.grad.data();
      if (xn->on_graph) {
        xn->ensure_grad();
        for (int i = 0; i < N; ++i) {
          T* gx = xn->grad.data() + int64_t(i) * Ci;
          const T* gr = g + int64_t(i) * Co;
          for (int oc = 0; oc < Co; ++oc) {
            T gv = gr[oc];
            const T* wr = wn->data.data() + int64_t(oc) * Ci;
            for (int c = 0; c < Ci; ++c) gx[c] += gv * wr[c];
          }
        }
      }
      if (wn->on_graph) {
        wn->ensure_grad();
        for (int i = 0; i < N; ++i) {
          const T* xr = xn->data.data() + int64_t(i) * Ci;
          const T* gr = g + int64_t(i) * Co;
          for (int oc = 0; oc < Co; ++oc) {
            T gv = gr[oc];
            T* wr = wn->grad.data() + int64_t(oc) * Ci;
            for (int c = 0; c < Ci; ++c) wr[c] += gv * xr[c];
          }
        }
      }
      if (bn && bn->on_graph) {
        bn->ensure_grad();
        for (int i = 0; i < N; ++i) {
          const T* gr = g + int64_t(i) * Co;
          for (int oc = 0; oc < Co; ++oc) bn->grad[oc] += gr[oc];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w) {
  return linear(x, w, Tensor<T>());
}

// Row-wise layer norm over the last axis of [N,C].
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5)) {
  check(x.ndim() == 2, "layer_norm: need [rows, features]");
  int N = x.dim(0), C = x.dim(1);
  check(gamma.numel() == C && beta.numel() == C,
        "layer_norm: gamma/beta size mismatch");
  Tensor<T> out = make_output<T>(x.shape());
  auto stats = std::make_shared<std::vector<T>>(size_t(N) * 2);  // mu, rstd
  const T* px = x.data();
  const T* pg = gamma.data();
  const T* pb = beta.data();
  T* po = out.data();
  for (int i = 0; i < N; ++i) {
    const T* xr = px + int64_t(i) * C;
    T mu = 0;
    for (int c = 0; c < C; ++c) mu += xr[c];
    mu /= T(C);
    T var = 0;
    for (int c = 0; c < C; ++c) {
      T d = xr[c] - mu;
      var += d * d;
    }
    var /= T(C);
    T rstd = T(1) / std::sqrt(var + eps);
    (*stats)[size_t(i) * 2] = mu;
    (*stats)[size_t(i) * 2 + 1] = rstd;
    T* orow = po + int64_t(i) * C;
    for (int c = 0; c < C; ++c)
      orow[c] = (xr[c] - mu) * rstd * pg[c] + pb[c];
  }
  if (track_grad<T>({&x, &gamma, &beta})) {
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    attach<T>(out, {x, gamma, beta}, [xn, gn, bn, stats, N, C](Node<T>& o) {
      const T* g = o.grad.data();
      for (int i = 0; i < N; ++i) {
        const T* xr = xn->data.data() + int64_t(i) * C;
        const T* gr = g + int64_t(i) * C;
        T mu = (*stats)[size_t(i) * 2];
        T rstd = (*stats)[size_t(i) * 2 + 1];
        if (gn->on_graph || bn->on_graph) {
          gn->ensure_grad();
          bn->ensure_grad();
          for (int c = 0; c < C; ++c) {
            T xhat = (xr[c] - mu) * rstd;
            gn->grad[c] += gr[c] * xhat;
            bn->grad[c] += gr[c];
          }
        }
        if (xn->on_graph) {
          xn->ensure_grad();
          // dx = rstd * (dxh - mean(dxh) - xhat * mean(dxh * xhat))
          T sum_dxh = 0, sum_dxh_xhat = 0;
          for (int c = 0; c < C; ++c) {
            T xhat = (xr[c] - mu) * rstd;
            T dxh = gr[c] * gn->data[c];
            sum_dxh += dxh;
            sum_dxh_xhat += dxh * xhat;
          }
          T m1 = sum_dxh / T(C), m2 = sum_dxh_xhat / T(C);
          T* gx = xn->grad.data() + int64_t(i) * C;
          for (int c = 0; c < C; ++c) {
            T xhat = (xr[c] - mu) * rstd;
            T dxh = gr[c] * gn->data[c];
            gx[c] += rstd * (dxh - m1 - xhat * m2);
          }
        }
      }
    });
  }
  return out;
}

// copies; gradient passes through untouched
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& s) {
  check(shape_numel(s) == x.numel(), "reshape: " + shape_str(x.shape()) +
                                         " -> " + shape_str(s) +
                                         " changes element count");
  Tensor<T> out = make_output<T>(s);
  std::copy(x.data(), x.data() + x.numel(), out.data());
  if (track_grad<T>({&x})) {
    auto xn = x.node();
    attach<T>(out, {x}, [xn](Node<T>& o) { grad_add(*xn, o.grad); });
  }
  return out;
}

// concatenate [Ci,H,W] maps along the channel axis
template <typename T>
Tensor<T> concat_ch(const std::vector<Tensor<T>>& xs) {
  check(!xs.empty(), "concat_ch: empty input list");
  int H = xs[0].dim(1), W = xs[0].dim(2);
  int Ct = 0;
  for (auto& x : xs) {
    check(x.ndim() == 3 && x.dim(1) == H && x.dim(2) == W,
          "concat_ch: spatial mismatch");
    Ct += x.dim(0);
  }
  Tensor<T> out = make_output<T>({Ct, H, W});
  T* po = out.data();
  int64_t off = 0;
  for (auto& x : xs) {
    std::copy(x.data(), x.data() + x.numel(), po + off);
    off += x.numel();
  }
  bool track = false;
  for (auto& x : xs)
    if (GradMode::enabled() && x.on_graph()) track = true;
  if (track) {
    std::vector<std::shared_ptr<Node<T>>> nodes;
    for (auto& x : xs) nodes.push_back(x.node());
    attach<T>(out, xs, [nodes](Node<T>& o) {
      int64_t off = 0;
      for (auto& n : nodes) {
        int64_t cnt = int64_t(n->data.size());
        if (n->on_graph) {
          n->ensure_grad();
          for (int64_t i = 0; i < cnt; ++i) n->grad[i] += o.grad[off + i];
        }
        off += cnt;
      }
    });
  }
  return out;
}

// flip [N,E] along the row axis
template <typename T>
Tensor<T> reverse_rows(const Tensor<T>& x) {
  check(x.ndim() == 2, "reverse_rows: need [rows, features]");
  int N = x.dim(0), E = x.dim(1);
  Tensor<T> out = make_output<T>(x.shape());
  const T* px = x.data();
  T* po = out.data();
  for (int i = 0; i < N; ++i)
    std::copy(px + int64_t(i) * E, px + int64_t(i + 1) * E,
              po + int64_t(N - 1 - i) * E);
  if (track_grad<T>({&x})) {
    auto xn = x.node();
    attach<T>(out, {x}, [xn, N, E](Node<T>& o) {
      xn->ensure_grad();
      for (int i = 0; i < N; ++i) {
        const T* gr = o.grad.data() + int64_t(N - 1 - i) * E;
        T* gx = xn->grad.data() + int64_t(i) * E;
        for (int e = 0; e < E; ++e) gx[e] += gr[e];
      }
    });
  }
  return out;
}

// Depthwise causal conv over tokens: x [N,E], w [K,E], b [E].
// out[t,e] = b[e] + sum_k w[k,e] * x[t-(K-1)+k, e], zero-padded on the left.
template <typename T>
Tensor<T> causal_conv1d(const Tensor<T>& x, const Tensor<T>& w,
                        const Tensor<T>& b) {
  check(x.ndim() == 2 && w.ndim() == 2, "causal_conv1d: need 2-d x and w");
  int N = x.dim(0), E = x.dim(1), K = w.dim(0);
  check(w.dim(1) == E && b.numel() == E, "causal_conv1d: weight/bias mismatch");
  Tensor<T> out = make_output<T>(x.shape());
  const T* px = x.data();
  const T* pw = w.data();
  const T* pb = b.data();
  T* po = out.data();
  for (int t = 0; t < N; ++t) {
    T* orow = po + int64_t(t) * E;
    for (int e = 0; e < E; ++e) orow[e] = pb[e];
    for (int k = 0; k < K; ++k) {
      int src = t - (K - 1) + k;
      if (src < 0) continue;
      const T* xr = px + int64_t(src) * E;
      const T* wr = pw + int64_t(k) * E;
      for (int e = 0; e < E; ++e) orow[e] += wr[e] * xr[e];
    }
  }
  if (track_grad<T>({&x, &w, &b})) {
    auto xn = x.node(), wn = w.node(), bn = b.node();
    attach<T>(out, {x, w, b}, [xn, wn, bn, N, E, K](Node<T>& o) {
      const T* g = o.grad.data();
      if (xn->on_graph) xn->ensure_grad();
      if (wn->on_graph) wn->ensure_grad();
      if (bn->on_graph) bn->ensure_grad();
      for (int t = 0; t < N; ++t) {
        const T* gr = g + int64_t(t) * E;
        if (bn->on_graph)
          for (int e = 0; e < E; ++e) bn->grad[e] += gr[e];
        for (int k = 0; k < K; ++k) {
          int src = t - (K - 1) + k;
          if (src < 0) continue;
          if (xn->on_graph) {
            T* gx = xn->grad.data() + int64_t(src) * E;
            const T* wr = wn->data.data() + int64_t(k) * E;
            for (int e = 0; e < E; ++e) gx[e] += wr[e] * gr[e];
          }
          if (wn->on_graph) {
            T* gw = wn->grad.data() + int64_t(k) * E;
            const T* xr = xn->data.data() + int64_t(src) * E;
            for (int e = 0; e < E; ++e) gw[e] += xr[e] * gr[e];
          }
        }
      }
    });
  }
  return out;
}

// [C,H,W] -> [p, C*ph*pw]; patches scan the image row-major, and within a
// patch the layout is channel-major: idx = (c*ph + py)*pw + px.
template <typename T>
Tensor<T> patch_extract(const Tensor<T>& x, int ph, int pw) {
  check(x.ndim() == 3, "patch_extract: need [C,H,W]");
  int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  check(H % ph == 0 && W % pw == 0,
        "patch_extract: " + shape_str(x.shape()) + " not divisible by " +
            std::to_string(ph) + "x" + std::to_string(pw));
  int gh = H / ph, gw = W / pw;
  int P = gh * gw, D = C * ph * pw;
  Tensor<T> out = make_output<T>({P, D});
  const T* px = x.data();
  T* po = out.data();
  for (int pr = 0; pr < gh; ++pr)
    for (int pc = 0; pc < gw; ++pc) {
      T* tok = po + int64_t(pr * gw + pc) * D;
      for (int c = 0; c < C; ++c)
        for (int py = 0; py < ph; ++py) {
          const T* src =
              px + (int64_t(c) * H + (pr * ph + py)) * W + pc * pw;
          std::copy(src, src + pw, tok + (c * ph + py) * pw);
        }
    }
  if (track_grad<T>({&x})) {
    auto xn = x.node();
    attach<T>(out, {x}, [xn, C, H, W, ph, pw, gh, gw, D](Node<T>& o) {
      xn->ensure_grad();
      for (int pr = 0; pr < gh; ++pr)
        for (int pc = 0; pc < gw; ++pc) {
          const T* tok = o.grad.data() + int64_t(pr * gw + pc) * D;
          for (int c = 0; c < C; ++c)
            for (int py = 0; py < ph; ++py) {
              T* dst = xn->grad.data() +
                       (int64_t(c) * H + (pr * ph + py)) * W + pc * pw;
              const T* src = tok + (c * ph + py) * pw;
              for (int px2 = 0; px2 < pw; ++px2) dst[px2] += src[px2];
            }
        }
    });
  }
  return out;
}

// inverse of patch_extract: [p, C*ph*pw] -> [C,H,W]
template <typename T>
Tensor<T> patch_fold(const Tensor<T>& tokens, int C, int H, int W, int ph,
                     int pw) {
  check(tokens.ndim() == 2, "patch_fold: need [p, d]");
  int gh = H / ph, gw = W / pw;
  check(H % ph == 0 && W % pw == 0 && tokens.dim(0) == gh * gw &&
            tokens.dim(1) == C * ph * pw,
        "patch_fold: token grid does not tile " + std::to_string(C) + "x" +
            std::to_string(H) + "x" + std::to_string(W));
  int D = C * ph * pw;
  Tensor<T> out = make_output<T>({C, H, W});
  const T* pt = tokens.data();
  T* po = out.data();
  for (int pr = 0; pr < gh; ++pr)
    for (int pc = 0; pc < gw; ++pc) {
      const T* tok = pt + int64_t(pr * gw + pc) * D;
      for (int c = 0; c < C; ++c)
        for (int py = 0; py < ph; ++py) {
          T* dst = po + (int64_t(c) * H + (pr * ph + py)) * W + pc * pw;
          const T* src = tok + (c * ph + py) * pw;
          std::copy(src, src + pw, dst);
        }
    }
  if (track_grad<T>({&tokens})) {
    auto tn = tokens.node();
    attach<T>(out, {tokens}, [tn, C, H, W, ph, pw, gh, gw, D](Node<T>& o) {
      tn->ensure_grad();
      for (int pr = 0; pr < gh; ++pr)
        for (int pc = 0; pc < gw; ++pc) {
          T* tok = tn->grad.data() + int64_t(pr * gw + pc) * D;
          for (int c = 0; c < C; ++c)
            for (int py = 0; py < ph; ++py) {
              const T* src = o.grad.data() +
                             (int64_t(c) * H + (pr * ph + py)) * W + pc * pw;
              T* dst = tok + (c * ph + py) * pw;
              for (int px2 = 0; px2 < pw; ++px2) dst[px2] += src[px2];
            }
        }
    });
  }
  return out;
}

}  // namespace monomm
