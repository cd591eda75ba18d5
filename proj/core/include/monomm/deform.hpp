#pragma once

#include <cmath>

#include "monomm/tensor.hpp"

namespace monomm {

// Depthwise deformable conv over the token axis. Each output position t
// samples K fractional locations p = t + (k - (K-1)/2) + offsets[t,k] with
// linear interpolation, zero outside [0,T-1].
//   x: [T,E], offsets: [T,K], w: [K,E], b: [E]
// At integer sample positions the interpolation kink resolves to the right
// derivative, which is the subgradient actually used at zero-initialized
// offsets.
template <typename T>
Tensor<T> deform_conv1d(const Tensor<T>& x, const Tensor<T>& offsets,
                        const Tensor<T>& w, const Tensor<T>& b) {
  check(x.ndim() == 2 && offsets.ndim() == 2 && w.ndim() == 2,
        "deform_conv1d: need 2-d x, offsets, w");
  int Tn = x.dim(0), E = x.dim(1), K = w.dim(0);
  check(offsets.dim(0) == Tn && offsets.dim(1) == K,
        "deform_conv1d: offsets must be [T,K]");
  check(w.dim(1) == E && b.numel() == E, "deform_conv1d: weight/bias mismatch");

  Tensor<T> out = make_output<T>({Tn, E});
  const T* px = x.data();
  const T* poff = offsets.data();
  const T* pw = w.data();
  const T* pb = b.data();
  T* po = out.data();
  int center = (K - 1) / 2;
  for (int t = 0; t < Tn; ++t) {
    T* orow = po + int64_t(t) * E;
    for (int e = 0; e < E; ++e) orow[e] = pb[e];
    for (int k = 0; k < K; ++k) {
      T p = T(t + k - center) + poff[int64_t(t) * K + k];
      T fl = std::floor(p);
      int i0 = int(fl);
      T frac = p - fl;
      const T* wr = pw + int64_t(k) * E;
      if (i0 >= 0 && i0 < Tn) {
        const T* xr = px + int64_t(i0) * E;
        T c = T(1) - frac;
        for (int e = 0; e < E; ++e) orow[e] += wr[e] * c * xr[e];
      }
      if (i0 + 1 >= 0 && i0 + 1 < Tn && frac != T(0)) {
        const T* xr = px + int64_t(i0 + 1) * E;
        for (int e = 0; e < E; ++e) orow[e] += wr[e] * frac * xr[e];
      }
    }
  }

  if (track_grad<T>({&x, &offsets, &w, &b})) {
    auto xn = x.node(), on = offsets.node(), wn = w.node(), bn = b.node();
    attach<T>(out, {x, offsets, w, b}, [xn, on, wn, bn, Tn, E, K,
                                        center](Node<T>& o) {
      xn->ensure_grad();
      on->ensure_grad();
      wn->ensure_grad();
      bn->ensure_grad();
      const T* g = o.grad.data();
      for (int t = 0; t < Tn; ++t) {
        const T* gr = g + int64_t(t) * E;
        for (int e = 0; e < E; ++e) bn->grad[e] += gr[e];
        for (int k = 0; k < K; ++k) {
          T p = T(t + k - center) + on->data[int64_t(t) * K + k];
          T fl = std::floor(p);
          int i0 = int(fl);
          T frac = p - fl;
          const T* wr = wn->data.data() + int64_t(k) * E;
          T* gw = wn->grad.data() + int64_t(k) * E;
          bool v0 = i0 >= 0 && i0 < Tn;
          bool v1 = i0 + 1 >= 0 && i0 + 1 < Tn;
          const T* x0 = v0 ? xn->data.data() + int64_t(i0) * E : nullptr;
          const T* x1 = v1 ? xn->data.data() + int64_t(i0 + 1) * E : nullptr;
          T* gx0 = v0 ? xn->grad.data() + int64_t(i0) * E : nullptr;
          T* gx1 = v1 ? xn->grad.data() + int64_t(i0 + 1) * E : nullptr;
          T doff = 0;
          T c = T(1) - frac;
          for (int e = 0; e < E; ++e) {
            T ge = gr[e];
            T v = 0;     // sampled value, for dw
            T slope = 0; // d(sample)/dp, for doffset
            if (v0) {
              v += c * x0[e];
              slope -= x0[e];
              gx0[e] += ge * wr[e] * c;
            }
            if (v1) {
              v += frac * x1[e];
              slope += x1[e];
              if (frac != T(0)) gx1[e] += ge * wr[e] * frac;
            }
            gw[e] += ge * v;
            doff += ge * wr[e] * slope;
          }
          on->grad[int64_t(t) * K + k] += doff;
        }
      }
    });
  }
  return out;
}

// Depthwise deformable conv over tokens laid out as a rows x cols grid in
// row-major order. Each output cell (r,c) samples K*K fractional grid
// positions (r + ky - (K-1)/2 + dy, c + kx - (K-1)/2 + dx) with bilinear
// interpolation, zero outside the grid. K must be odd.
//   x: [rows*cols, E], offsets: [rows*cols, 2*K*K] as (dy,dx) per tap,
//   w: [K*K, E], b: [E]
// As in the 1-d form, integer sample positions take the right derivative.
template <typename T>
Tensor<T> deform_conv2d_grid(const Tensor<T>& x, const Tensor<T>& offsets,
                             const Tensor<T>& w, const Tensor<T>& b, int rows,
                             int cols, int K) {
  check(x.ndim() == 2 && offsets.ndim() == 2 && w.ndim() == 2,
        "deform_conv2d_grid: need 2-d x, offsets, w");
  check(K >= 1 && K % 2 == 1, "deform_conv2d_grid: kernel must be odd");
  int Tn = x.dim(0), E = x.dim(1), K2 = K * K;
  check(Tn == rows * cols, "deform_conv2d_grid: grid does not tile tokens");
  check(offsets.dim(0) == Tn && offsets.dim(1) == 2 * K2,
        "deform_conv2d_grid: offsets must be [T,2*K*K]");
  check(w.dim(0) == K2 && w.dim(1) == E && b.numel() == E,
        "deform_conv2d_grid: weight/bias mismatch");

  int center = (K - 1) / 2;
  // the four bilinear corners of one fractional sample, with weights
  struct Corner {
    int idx;
    T wgt;
  };
  auto gather = [rows, cols](T py, T px, Corner* cs, T* fy, T* fx, int* r0,
                             int* c0) {
    T fly = std::floor(py), flx = std::floor(px);
    *r0 = int(fly);
    *c0 = int(flx);
    *fy = py - fly;
    *fx = px - flx;
    int n = 0;
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        int rr = *r0 + dy, cc = *c0 + dx;
        if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
        T wy = dy ? *fy : T(1) - *fy;
        T wx = dx ? *fx : T(1) - *fx;
        if (wy == T(0) || wx == T(0)) continue;
        cs[n++] = {rr * cols + cc, wy * wx};
      }
    return n;
  };

  Tensor<T> out = make_output<T>({Tn, E});
  const T* px = x.data();
  const T* poff = offsets.data();
  const T* pw = w.data();
  const T* pb = b.data();
  T* po = out.data();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      int t = r * cols + c;
      T* orow = po + int64_t(t) * E;
      for (int e = 0; e < E; ++e) orow[e] = pb[e];
      const T* off = poff + int64_t(t) * 2 * K2;
      for (int k = 0; k < K2; ++k) {
        T py = T(r + k / K - center) + off[2 * k];
        T pxs = T(c + k % K - center) + off[2 * k + 1];
        Corner cs[4];
        T fy, fx;
        int r0, c0;
        int n = gather(py, pxs, cs, &fy, &fx, &r0, &c0);
        const T* wr = pw + int64_t(k) * E;
        for (int q = 0; q < n; ++q) {
          const T* xr = px + int64_t(cs[q].idx) * E;
          T cw = cs[q].wgt;
          for (int e = 0; e < E; ++e) orow[e] += wr[e] * cw * xr[e];
        }
      }
    }

  if (track_grad<T>({&x, &offsets, &w, &b})) {
    auto xn = x.node(), on = offsets.node(), wn = w.node(), bn = b.node();
    attach<T>(out, {x, offsets, w, b}, [xn, on, wn, bn, rows, cols, E, K2, K,
                                        center](Node<T>& o) {
      xn->ensure_grad();
      on->ensure_grad();
      wn->ensure_grad();
      bn->ensure_grad();
      const T* g = o.grad.data();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          int t = r * cols + c;
          const T* gr = g + int64_t(t) * E;
          for (int e = 0; e < E; ++e) bn->grad[e] += gr[e];
          const T* off = on->data.data() + int64_t(t) * 2 * K2;
          for (int k = 0; k < K2; ++k) {
            T py = T(r + k / K - center) + off[2 * k];
            T pxs = T(c + k % K - center) + off[2 * k + 1];
            T fly = std::floor(py), flx = std::floor(pxs);
            int r0 = int(fly), c0 = int(flx);
            T fy = py - fly, fx = pxs - flx;
            const T* wr = wn->data.data() + int64_t(k) * E;
            T* gw = wn->grad.data() + int64_t(k) * E;
            // corner values per lattice cell, zero when out of bounds
            const T* xv[2][2] = {{nullptr, nullptr}, {nullptr, nullptr}};
            T* gx[2][2] = {{nullptr, nullptr}, {nullptr, nullptr}};
            for (int dy = 0; dy <= 1; ++dy)
              for (int dx = 0; dx <= 1; ++dx) {
                int rr = r0 + dy, cc = c0 + dx;
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                xv[dy][dx] = xn->data.data() + int64_t(rr * cols + cc) * E;
                gx[dy][dx] = xn->grad.data() + int64_t(rr * cols + cc) * E;
              }
            T wy[2] = {T(1) - fy, fy};
            T wx[2] = {T(1) - fx, fx};
            T dgy = 0, dgx = 0;
            for (int e = 0; e < E; ++e) {
              T ge = gr[e];
              T v = 0, sy = 0, sx = 0;
              for (int dy = 0; dy <= 1; ++dy)
                for (int dx = 0; dx <= 1; ++dx) {
                  if (!xv[dy][dx]) continue;
                  T xe = xv[dy][dx][e];
                  T cw = wy[dy] * wx[dx];
                  v += cw * xe;
                  sy += (dy ? wx[dx] : -wx[dx]) * xe;
                  sx += (dx ? wy[dy] : -wy[dy]) * xe;
                  if (cw != T(0)) gx[dy][dx][e] += ge * wr[e] * cw;
                }
              gw[e] += ge * v;
              dgy += ge * wr[e] * sy;
              dgx += ge * wr[e] * sx;
            }
            on->grad[int64_t(t) * 2 * K2 + 2 * k] += dgy;
            on->grad[int64_t(t) * 2 * K2 + 2 * k + 1] += dgx;
          }
        }
    });
  }
  return out;
}

}  // namespace monomm
