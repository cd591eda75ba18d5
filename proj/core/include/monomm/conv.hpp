#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>

#include "monomm/tensor.hpp"

namespace monomm {

struct ConvSpec {
  int kh = 1, kw = 1;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;
  int dh = 1, dw = 1;
  int groups = 1;
};

inline int div_ceil(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
inline int div_floor(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

inline int conv_out_extent(int in, int k, int s, int p, int d) {
  return (in + 2 * p - d * (k - 1) - 1) / s + 1;
}

// Cross-correlation (no kernel flip), NCHW without the batch axis.
// x: [Cin,H,W], w: [Cout,Cin/groups,KH,KW], b: [Cout] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 const ConvSpec& cs) {
  check(x.ndim() == 3 && w.ndim() == 4, "conv2d: need [C,H,W] x and 4-d w");
  int Ci = x.dim(0), H = x.dim(1), W = x.dim(2);
  int Co = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  check(cs.groups >= 1 && Ci % cs.groups == 0 && Co % cs.groups == 0,
        "conv2d: channels not divisible by groups");
  int cig = Ci / cs.groups, cog = Co / cs.groups;
  check(w.dim(1) == cig && KH == cs.kh && KW == cs.kw,
        "conv2d: weight " + shape_str(w.shape()) + " does not match spec");
  if (b.defined()) check(b.numel() == Co, "conv2d: bias size mismatch");
  int OH = conv_out_extent(H, cs.kh, cs.sh, cs.ph, cs.dh);
  int OW = conv_out_extent(W, cs.kw, cs.sw, cs.pw, cs.dw);
  check(OH > 0 && OW > 0, "conv2d: empty output for input " +
                              shape_str(x.shape()));

  Tensor<T> out = make_output<T>({Co, OH, OW});
  const T* px = x.data();
  const T* pw_ = w.data();
  T* po = out.data();
  for (int co = 0; co < Co; ++co) {
    T* oc = po + int64_t(co) * OH * OW;
    if (b.defined()) {
      T bv = b.data()[co];
      for (int64_t i = 0; i < int64_t(OH) * OW; ++i) oc[i] = bv;
    }
    int g = co / cog;
    for (int cg = 0; cg < cig; ++cg) {
      const T* ic = px + int64_t(g * cig + cg) * H * W;
      const T* wc = pw_ + (int64_t(co) * cig + cg) * KH * KW;
      for (int kh = 0; kh < KH; ++kh) {
        int oh_lo = std::max(0, div_ceil(cs.ph - kh * cs.dh, cs.sh));
        int oh_hi = std::min(OH, div_floor(H - 1 - kh * cs.dh + cs.ph, cs.sh) + 1);
        for (int kw = 0; kw < KW; ++kw) {
          T wv = wc[kh * KW + kw];
          int ow_lo = std::max(0, div_ceil(cs.pw - kw * cs.dw, cs.sw));
          int ow_hi = std::min(OW, div_floor(W - 1 - kw * cs.dw + cs.pw, cs.sw) + 1);
          for (int oh = oh_lo; oh < oh_hi; ++oh) {
            const T* irow = ic + int64_t(oh * cs.sh - cs.ph + kh * cs.dh) * W;
            T* orow = oc + int64_t(oh) * OW;
            if (cs.sw == 1) {
              const T* src = irow - cs.pw + kw * cs.dw;
              for (int ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += wv * src[ow];
            } else {
              for (int ow = ow_lo; ow < ow_hi; ++ow)
                orow[ow] += wv * irow[ow * cs.sw - cs.pw + kw * cs.dw];
            }
          }
        }
      }
    }
  }

  bool track = b.defined() ? track_grad<T>({&x, &w, &b})
                           : track_grad<T>({&x, &w});
  if (track) {
    auto xn = x.node(), wn = w.node();
    auto bn = b.defined() ? b.node() : nullptr;
    std::vector<Tensor<T>> parents{x, w};
    if (b.defined()) parents.push_back(b);
    attach<T>(out, parents,
              [xn, wn, bn, cs, Ci, H, W, Co, KH, KW, OH, OW, cig,
               cog](Node<T>& o) {
      const T* g = o.grad.data();
      if (xn->on_graph) xn->ensure_grad();
      if (wn->on_graph) wn->ensure_grad();
      if (bn && bn->on_graph) bn->ensure_grad();
      for (int co = 0; co < Co; ++co) {
        const T* gc = g + int64_t(co) * OH * OW;
        if (bn && bn->on_graph) {
          T s = 0;
          for (int64_t i = 0; i < int64_t(OH) * OW; ++i) s += gc[i];
          bn->grad[co] += s;
        }
        int gr = co / cog;
        for (int cg = 0; cg < cig; ++cg) {
          int ci = gr * cig + cg;
          const T* ic = xn->data.data() + int64_t(ci) * H * W;
          T* gic = xn->on_graph ? xn->grad.data() + int64_t(ci) * H * W
                                : nullptr;
          const T* wc = wn->data.data() + (int64_t(co) * cig + cg) * KH * KW;
          T* gwc = wn->on_graph
                       ? wn->grad.data() + (int64_t(co) * cig + cg) * KH * KW
                       : nullptr;
          for (int kh = 0; kh < KH; ++kh) {
            int oh_lo = std::max(0, div_ceil(cs.ph - kh * cs.dh, cs.sh));
            int oh_hi =
                std::min(OH, div_floor(H - 1 - kh * cs.dh + cs.ph, cs.sh) + 1);
            for (int kw = 0; kw < KW; ++kw) {
              int ow_lo = std::max(0, div_ceil(cs.pw - kw * cs.dw, cs.sw));
              int ow_hi = std::min(
                  OW, div_floor(W - 1 - kw * cs.dw + cs.pw, cs.sw) + 1);
              T wv = wc[kh * KW + kw];
              T wsum = 0;
              for (int oh = oh_lo; oh < oh_hi; ++oh) {
                int ih = oh * cs.sh - cs.ph + kh * cs.dh;
                const T* grow = gc + int64_t(oh) * OW;
                if (gic) {
                  T* gxr = gic + int64_t(ih) * W;
                  if (cs.sw == 1) {
                    T* dst = gxr - cs.pw + kw * cs.dw;
                    for (int ow = ow_lo; ow < ow_hi; ++ow)
                      dst[ow] += wv * grow[ow];
                  } else {
                    for (int ow = ow_lo; ow < ow_hi; ++ow)
                      gxr[ow * cs.sw - cs.pw + kw * cs.dw] += wv * grow[ow];
                  }
                }
                if (gwc) {
                  const T* xr = ic + int64_t(ih) * W;
                  if (cs.sw == 1) {
                    const T* src = xr - cs.pw + kw * cs.dw;
                    T s = 0;
                    for (int ow = ow_lo; ow < ow_hi; ++ow)
                      s += src[ow] * grow[ow];
                    wsum += s;
                  } else {
                    T s = 0;
                    for (int ow = ow_lo; ow < ow_hi; ++ow)
                      s += xr[ow * cs.sw - cs.pw + kw * cs.dw] * grow[ow];
                    wsum += s;
                  }
                }
              }
              if (gwc) gwc[kh * KW + kw] += wsum;
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& cs) {
  return conv2d(x, w, Tensor<T>(), cs);
}

// Adjoint of conv2d in space: out = (H-1)*s - 2p + d*(k-1) + 1 per axis.
// x: [Cin,H,W], w: [Cin,Cout,KH,KW], b: [Cout] or undefined. groups = 1.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>& b, const ConvSpec& cs) {
  check(x.ndim() == 3 && w.ndim() == 4,
        "conv_transpose2d: need [C,H,W] x and 4-d w");
  check(cs.groups == 1, "conv_transpose2d: groups unsupported");
  int Ci = x.dim(0), H = x.dim(1), W = x.dim(2);
  int Co = w.dim(1), KH = w.dim(2), KW = w.dim(3);
  check(w.dim(0) == Ci && KH == cs.kh && KW == cs.kw,
        "conv_transpose2d: weight " + shape_str(w.shape()) +
            " does not match spec");
  if (b.defined()) check(b.numel() == Co, "conv_transpose2d: bias mismatch");
  int OH = (H - 1) * cs.sh - 2 * cs.ph + cs.dh * (KH - 1) + 1;
  int OW = (W - 1) * cs.sw - 2 * cs.pw + cs.dw * (KW - 1) + 1;
  check(OH > 0 && OW > 0, "conv_transpose2d: empty output");

  Tensor<T> out = make_output<T>({Co, OH, OW});
  const T* px = x.data();
  const T* pw_ = w.data();
  T* po = out.data();
  if (b.defined()) {
    for (int co = 0; co < Co; ++co) {
      T bv = b.data()[co];
      T* oc = po + int64_t(co) * OH * OW;
      for (int64_t i = 0; i < int64_t(OH) * OW; ++i) oc[i] = bv;
    }
  }
  for (int ci = 0; ci < Ci; ++ci) {
    const T* ic = px + int64_t(ci) * H * W;
    for (int co = 0; co < Co; ++co) {
      T* oc = po + int64_t(co) * OH * OW;
      const T* wc = pw_ + (int64_t(ci) * Co + co) * KH * KW;
      for (int kh = 0; kh < KH; ++kh) {
        // ih valid iff oh = ih*sh - ph + kh*dh lands inside [0,OH)
        int ih_lo = std::max(0, div_ceil(cs.ph - kh * cs.dh, cs.sh));
        int ih_hi =
            std::min(H, div_floor(OH - 1 - kh * cs.dh + cs.ph, cs.sh) + 1);
        for (int kw = 0; kw < KW; ++kw) {
          T wv = wc[kh * KW + kw];
          int iw_lo = std::max(0, div_ceil(cs.pw - kw * cs.dw, cs.sw));
          int iw_hi =
              std::min(W, div_floor(OW - 1 - kw * cs.dw + cs.pw, cs.sw) + 1);
          for (int ih = ih_lo; ih < ih_hi; ++ih) {
            int oh = ih * cs.sh - cs.ph + kh * cs.dh;
            const T* irow = ic + int64_t(ih) * W;
            T* orow = oc + int64_t(oh) * OW;
            for (int iw = iw_lo; iw < iw_hi; ++iw)
              orow[iw * cs.sw - cs.pw + kw * cs.dw] += wv * irow[iw];
          }
        }
      }
    }
  }

  bool track = b.defined() ? track_grad<T>({&x, &w, &b})
                           : track_grad<T>({&x, &w});
  if (track) {
    auto xn = x.node(), wn = w.node();
    auto bn = b.defined() ? b.node() : nullptr;
    std::vector<Tensor<T>> parents{x, w};
    if (b.defined()) parents.push_back(b);
    attach<T>(out, parents,
              [xn, wn, bn, cs, Ci, H, W, Co, KH, KW, OH, OW](Node<T>& o) {
      const T* g = o.grad.data();
      if (xn->on_graph) xn->ensure_grad();
      if (wn->on_graph) wn->ensure_grad();
      if (bn && bn->on_graph) {
        bn->ensure_grad();
        for (int co = 0; co < Co; ++co) {
          const T* gc = g + int64_t(co) * OH * OW;
          T s = 0;
          for (int64_t i = 0; i < int64_t(OH) * OW; ++i) s += gc[i];
          bn->grad[co] += s;
        }
      }
      for (int ci = 0; ci < Ci; ++ci) {
        const T* ic = xn->data.data() + int64_t(ci) * H * W;
        T* gic =
            xn->on_graph ? xn->grad.data() + int64_t(ci) * H * W : nullptr;
        for (int co = 0; co < Co; ++co) {
          const T* gc = g + int64_t(co) * OH * OW;
          const T* wc = wn->data.data() + (int64_t(ci) * Co + co) * KH * KW;
          T* gwc = wn->on_graph
                       ? wn->grad.data() + (int64_t(ci) * Co + co) * KH * KW
                       : nullptr;
          for (int kh = 0; kh < KH; ++kh) {
            int ih_lo = std::max(0, div_ceil(cs.ph - kh * cs.dh, cs.sh));
            int ih_hi =
                std::min(H, div_floor(OH - 1 - kh * cs.dh + cs.ph, cs.sh) + 1);
            for (int kw = 0; kw < KW; ++kw) {
              T wv = wc[kh * KW + kw];
              int iw_lo = std::max(0, div_ceil(cs.pw - kw * cs.dw, cs.sw));
              int iw_hi = std::min(
                  W, div_floor(OW - 1 - kw * cs.dw + cs.pw, cs.sw) + 1);
              T wsum = 0;
              for (int ih = ih_lo; ih < ih_hi; ++ih) {
                int oh = ih * cs.sh - cs.ph + kh * cs.dh;
                const T* grow = gc + int64_t(oh) * OW;
                const T* irow = ic + int64_t(ih) * W;
                for (int iw = iw_lo; iw < iw_hi; ++iw) {
                  T gv = grow[iw * cs.sw - cs.pw + kw * cs.dw];
                  if (gic) gic[int64_t(ih) * W + iw] += wv * gv;
                  if (gwc) wsum += irow[iw] * gv;
                }
              }
              if (gwc) gwc[kh * KW + kw] += wsum;
            }
          }
        }
      }
    });
  }
  return out;
}

enum class PoolKind { kMax, kAvg };

// No padding; windows always lie fully inside the input. Max pooling routes
// the gradient to the first maximal element in window scan order.
template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, int kh, int kw, int sh,
                 int sw) {
  check(x.ndim() == 3, "pool2d: need [C,H,W]");
  int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  check(H >= kh && W >= kw, "pool2d: window larger than input");
  int OH = (H - kh) / sh + 1;
  int OW = (W - kw) / sw + 1;
  Tensor<T> out = make_output<T>({C, OH, OW});
  const T* px = x.data();
  T* po = out.data();
  auto argmax = kind == PoolKind::kMax
                    ? std::make_shared<std::vector<int32_t>>(out.numel())
                    : nullptr;
  T inv = T(1) / T(kh * kw);
  for (int c = 0; c < C; ++c) {
    const T* ic = px + int64_t(c) * H * W;
    for (int oh = 0; oh < OH; ++oh)
      for (int ow = 0; ow < OW; ++ow) {
        int64_t oidx = (int64_t(c) * OH + oh) * OW + ow;
        if (kind == PoolKind::kAvg) {
          T s = 0;
          for (int i = 0; i < kh; ++i) {
            const T* row = ic + int64_t(oh * sh + i) * W + ow * sw;
            for (int j = 0; j < kw; ++j) s += row[j];
          }
          po[oidx] = s * inv;
        } else {
          T best = ic[int64_t(oh * sh) * W + ow * sw];
          int32_t bi = int32_t((oh * sh) * W + ow * sw);
          for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
              int64_t idx = int64_t(oh * sh + i) * W + ow * sw + j;
              if (ic[idx] > best) {
                best = ic[idx];
                bi = int32_t(idx);
              }
            }
          po[oidx] = best;
          (*argmax)[size_t(oidx)] = bi;
        }
      }
  }
  if (track_grad<T>({&x})) {
    auto xn = x.node();
    attach<T>(out, {x}, [xn, kind, kh, kw, sh, sw, C, H, W, OH, OW, argmax,
                         inv](Node<T>& o) {
      xn->ensure_grad();
      for (int c = 0; c < C; ++c) {
        T* gx = xn->grad.data() + int64_t(c) * H * W;
        const T* gc = o.grad.data() + int64_t(c) * OH * OW;
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow) {
            T g = gc[int64_t(oh) * OW + ow];
            if (kind == PoolKind::kAvg) {
              for (int i = 0; i < kh; ++i) {
                T* row = gx + int64_t(oh * sh + i) * W + ow * sw;
                for (int j = 0; j < kw; ++j) row[j] += g * inv;
              }
            } else {
              gx[(*argmax)[size_t((int64_t(c) * OH + oh) * OW + ow)]] += g;
            }
          }
      }
    });
  }
  return out;
}

// nearest-neighbour 2x upsample
template <typename T>
Tensor<T> upsample_nearest2(const Tensor<T>& x) {
  check(x.ndim() == 3, "upsample_nearest2: need [C,H,W]");
  int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  Tensor<T> out = make_output<T>({C, 2 * H, 2 * W});
  const T* px = x.data();
  T* po = out.data();
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < 2 * H; ++y) {
      const T* irow = px + (int64_t(c) * H + y / 2) * W;
      T* orow = po + (int64_t(c) * 2 * H + y) * 2 * W;
      for (int xq = 0; xq < 2 * W; ++xq) orow[xq] = irow[xq / 2];
    }
  if (track_grad<T>({&x})) {
    auto xn = x.node();
    attach<T>(out, {x}, [xn, C, H, W](Node<T>& o) {
      xn->ensure_grad();
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < 2 * H; ++y) {
          T* gx = xn->grad.data() + (int64_t(c) * H + y / 2) * W;
          const T* grow = o.grad.data() + (int64_t(c) * 2 * H + y) * 2 * W;
          for (int xq = 0; xq < 2 * W; ++xq) gx[xq / 2] += grow[xq];
        }
    });
  }
  return out;
}

}  // namespace monomm
