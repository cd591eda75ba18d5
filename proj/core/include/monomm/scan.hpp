#pragma once

#include <cmath>
#include <memory>

#include "monomm/tensor.hpp"

namespace monomm {

// Selective state-space scan with zero-order-hold discretization.
//   A[e,n]   = -exp(A_log[e,n])            (always negative, keeps |a| < 1)
//   a_t      = exp(delta[t,e] * A[e,n])
//   h_t      = a_t * h_{t-1} + delta[t,e] * B[t,n] * u[t,e]
//   y[t,e]   = sum_n C[t,n] * h_t[e,n] + D[e] * u[t,e]
//
// u, delta: [T,E]; B, C: [T,N]; A_log: [E,N]; D: [E].
//
// Both forward kernels produce the same math; the fast one restructures the
// loops around a compile-time state width so the n loop fully unrolls. The
// n reduction into y keeps ascending order in both, so they agree to within
// a few ulps (reassociation inside a token only).

namespace detail {

template <typename T>
struct ScanSaved {
  std::vector<T> h;  // [T,E,N]
  std::vector<T> a;  // [T,E,N] decay factors
};

template <typename T>
void scan_forward_ref(const T* u, const T* delta, const T* B, const T* C,
                      const T* A, const T* D, int Tn, int E, int N, T* y,
                      ScanSaved<T>& sv) {
  std::vector<T> h(size_t(E) * N, T(0));
  for (int t = 0; t < Tn; ++t) {
    for (int e = 0; e < E; ++e) {
      T dt = delta[int64_t(t) * E + e];
      T du = dt * u[int64_t(t) * E + e];
      T acc = 0;
      for (int n = 0; n < N; ++n) {
        int64_t i = int64_t(e) * N + n;
        T a = std::exp(dt * A[i]);
        T hv = a * h[size_t(i)] + du * B[int64_t(t) * N + n];
        h[size_t(i)] = hv;
        int64_t si = (int64_t(t) * E + e) * N + n;
        sv.h[size_t(si)] = hv;
        sv.a[size_t(si)] = a;
        acc += C[int64_t(t) * N + n] * hv;
      }
      y[int64_t(t) * E + e] = acc + D[e] * u[int64_t(t) * E + e];
    }
  }
}

template <typename T, int NS>
void scan_forward_fixed(const T* u, const T* delta, const T* B, const T* C,
                        const T* A, const T* D, int Tn, int E, T* y,
                        ScanSaved<T>& sv) {
  std::vector<T> h(size_t(E) * NS, T(0));
  for (int t = 0; t < Tn; ++t) {
    const T* Bt = B + int64_t(t) * NS;
    const T* Ct = C + int64_t(t) * NS;
    const T* ut = u + int64_t(t) * E;
    const T* dt_row = delta + int64_t(t) * E;
    T* yt = y + int64_t(t) * E;
    T* sh = sv.h.data() + int64_t(t) * E * NS;
    T* sa = sv.a.data() + int64_t(t) * E * NS;
    for (int e = 0; e < E; ++e) {
      T dt = dt_row[e];
      T du = dt * ut[e];
      const T* Ae = A + int64_t(e) * NS;
      T* he = h.data() + int64_t(e) * NS;
      T acc = 0;
      for (int n = 0; n < NS; ++n) {
        T a = std::exp(dt * Ae[n]);
        T hv = a * he[n] + du * Bt[n];
        he[n] = hv;
        sh[int64_t(e) * NS + n] = hv;
        sa[int64_t(e) * NS + n] = a;
        acc += Ct[n] * hv;
      }
      yt[e] = acc + D[e] * ut[e];
    }
  }
}

template <typename T>
void scan_forward_fast(const T* u, const T* delta, const T* B, const T* C,
                       const T* A, const T* D, int Tn, int E, int N, T* y,
                       ScanSaved<T>& sv) {
  switch (N) {
    case 4:
      scan_forward_fixed<T, 4>(u, delta, B, C, A, D, Tn, E, y, sv);
      return;
    case 8:
      scan_forward_fixed<T, 8>(u, delta, B, C, A, D, Tn, E, y, sv);
      return;
    case 16:
      scan_forward_fixed<T, 16>(u, delta, B, C, A, D, Tn, E, y, sv);
      return;
    default:
      scan_forward_ref(u, delta, B, C, A, D, Tn, E, N, y, sv);
  }
}

}  // namespace detail

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta,
                         const Tensor<T>& Bm, const Tensor<T>& Cm,
                         const Tensor<T>& A_log, const Tensor<T>& D,
                         bool fast = true) {
  check(u.ndim() == 2 && delta.shape() == u.shape(),
        "selective_scan: u/delta must both be [T,E]");
  int Tn = u.dim(0), E = u.dim(1);
  check(Bm.ndim() == 2 && Cm.ndim() == 2 && Bm.dim(0) == Tn &&
            Cm.dim(0) == Tn && Bm.dim(1) == Cm.dim(1),
        "selective_scan: B/C must be [T,N]");
  int N = Bm.dim(1);
  check(A_log.ndim() == 2 && A_log.dim(0) == E && A_log.dim(1) == N,
        "selective_scan: A_log must be [E,N]");
  check(D.numel() == E, "selective_scan: D must be [E]");

  // A = -exp(A_log)
  std::vector<T> A(size_t(E) * N);
  for (size_t i = 0; i < A.size(); ++i) A[i] = -std::exp(A_log.data()[i]);

  auto sv = std::make_shared<detail::ScanSaved<T>>();
  sv->h.resize(size_t(Tn) * E * N);
  sv->a.resize(size_t(Tn) * E * N);

  Tensor<T> out = make_output<T>({Tn, E});
  if (fast)
    detail::scan_forward_fast(u.data(), delta.data(), Bm.data(), Cm.data(),
                              A.data(), D.data(), Tn, E, N, out.data(), *sv);
  else
    detail::scan_forward_ref(u.data(), delta.data(), Bm.data(), Cm.data(),
                             A.data(), D.data(), Tn, E, N, out.data(), *sv);

  if (track_grad<T>({&u, &delta, &Bm, &Cm, &A_log, &D})) {
    auto un = u.node(), dn = delta.node(), bn = Bm.node(), cn = Cm.node(),
         an = A_log.node(), Dn = D.node();
    auto Ah = std::make_shared<std::vector<T>>(std::move(A));
    attach<T>(out, {u, delta, Bm, Cm, A_log, D},
              [un, dn, bn, cn, an, Dn, sv, Ah, Tn, E, N](Node<T>& o) {
      const T* g = o.grad.data();
      const T* A = Ah->data();
      un->ensure_grad();
      dn->ensure_grad();
      bn->ensure_grad();
      cn->ensure_grad();
      an->ensure_grad();
      Dn->ensure_grad();
      // lam[e,n] = dL/dh[t,e,n]; runs t descending
      std::vector<T> lam(size_t(E) * N, T(0));
      std::vector<T> dA(size_t(E) * N, T(0));
      for (int t = Tn - 1; t >= 0; --t) {
        const T* gt = g + int64_t(t) * E;
        const T* Bt = bn->data.data() + int64_t(t) * N;
        const T* Ct = cn->data.data() + int64_t(t) * N;
        const T* ut = un->data.data() + int64_t(t) * E;
        const T* dt_row = dn->data.data() + int64_t(t) * E;
        const T* sh = sv->h.data() + int64_t(t) * E * N;
        const T* sa = sv->a.data() + int64_t(t) * E * N;
        const T* sa_next =
            t + 1 < Tn ? sv->a.data() + int64_t(t + 1) * E * N : nullptr;
        const T* sh_prev =
            t > 0 ? sv->h.data() + int64_t(t - 1) * E * N : nullptr;
        T* gB = bn->grad.data() + int64_t(t) * N;
        T* gC = cn->grad.data() + int64_t(t) * N;
        for (int e = 0; e < E; ++e) {
          T gy = gt[e];
          T dt = dt_row[e];
          T ue = ut[e];
          T ddt = 0, due = 0;
          const T* Ae = A + int64_t(e) * N;
          T* le = lam.data() + int64_t(e) * N;
          for (int n = 0; n < N; ++n) {
            int64_t i = int64_t(e) * N + n;
            // fold in this step's output tap and the future state path
            T l = gy * Ct[n];
            if (sa_next) l += sa_next[i] * le[n];
            le[n] = l;
            T hprev = sh_prev ? sh_prev[i] : T(0);
            T a = sa[i];
            dA[size_t(i)] += l * hprev * a * dt;
            ddt += l * (hprev * a * Ae[n] + Bt[n] * ue);
            due += l * dt * Bt[n];
            gB[n] += l * dt * ue;
            gC[n] += gy * sh[i];
          }
          dn->grad[int64_t(t) * E + e] += ddt;
          un->grad[int64_t(t) * E + e] += due + gy * Dn->data[e];
          Dn->grad[e] += gy * ue;
        }
      }
      // dA_log = dA * dA/dA_log = dA * A  (A = -exp(A_log))
      for (size_t i = 0; i < dA.size(); ++i) an->grad[i] += dA[i] * A[i];
    });
  }
  return out;
}

}  // namespace monomm
