#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "monomm/config.hpp"
#include "monomm/conv.hpp"
#include "monomm/losses.hpp"
#include "monomm/nn.hpp"
#include "monomm/ops.hpp"
#include "monomm/scene.hpp"

namespace monomm {

// Depth discretization and the auxiliary depth branch. Bins follow
// linear-increasing discretization: boundary k sits at
//   b_k = d_min + (d_max - d_min) * k*(k+1) / (n*(n+1)),
// so bin widths grow linearly with distance.

constexpr int32_t kDepthInvalid = -1;

inline double lid_boundary(int k, int n, double dmin, double dmax) {
  return dmin + (dmax - dmin) * double(k) * double(k + 1) /
                    (double(n) * double(n + 1));
}

// depth (meters, must be finite) -> bin in [0, n); out-of-range clamps
inline int lid_bin(double d, int n, double dmin, double dmax) {
  if (d <= dmin) return 0;
  if (d >= dmax) return n - 1;
  double u = (d - dmin) / (dmax - dmin) * double(n) * double(n + 1);
  // largest k with k*(k+1) <= u
  int k = int(std::floor((std::sqrt(1.0 + 4.0 * u) - 1.0) * 0.5));
  // guard the float boundary of the quadratic inversion
  while (k > 0 && lid_boundary(k, n, dmin, dmax) > d) --k;
  while (k + 1 < n && lid_boundary(k + 1, n, dmin, dmax) <= d) ++k;
  return k < 0 ? 0 : (k >= n ? n - 1 : k);
}

inline double lid_center(int k, int n, double dmin, double dmax) {
  return 0.5 * (lid_boundary(k, n, dmin, dmax) +
                lid_boundary(k + 1, n, dmin, dmax));
}

// depth <= 0 marks no return (sky); those pixels carry no target
inline std::vector<int32_t> discretize_depth(const std::vector<double>& depth,
                                             int n, double dmin, double dmax) {
  std::vector<int32_t> bins(depth.size(), kDepthInvalid);
  for (size_t i = 0; i < depth.size(); ++i)
    if (depth[i] > 0.0) bins[size_t(i)] = int32_t(lid_bin(depth[i], n, dmin, dmax));
  return bins;
}

// Stride-aligned supervision: nearest-neighbour sample at each output cell
// center, then discretize; dap_keep < 1 sparsifies the surviving targets to
// mimic partial coverage. Consumes one rng draw per valid pixel.
inline std::vector<int32_t> depth_bin_targets(const SyntheticScene& s,
                                              int stride,
                                              const RunConfig& cfg, Rng& rng) {
  int oh = s.h / stride, ow = s.w / stride;
  std::vector<int32_t> bins(size_t(oh) * ow, kDepthInvalid);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double d = s.depth[size_t(y * stride + stride / 2) * size_t(s.w) +
                         size_t(x * stride + stride / 2)];
      if (d <= 0.0) continue;
      int32_t b = int32_t(lid_bin(d, cfg.dap_bins, cfg.dap_dmin, cfg.dap_dmax));
      if (cfg.dap_keep >= 1.0 || rng.uniform() < cfg.dap_keep)
        bins[size_t(y) * size_t(ow) + size_t(x)] = b;
    }
  return bins;
}

template <typename T>
void dap_init(ParamStore<T>& ps, const RunConfig& cfg, Rng& rng) {
  int c = cfg.fmf_cout;
  for (int i = 0; i < cfg.dap_layers; ++i)
    add_conv(ps, "dap.c" + std::to_string(i), c, c, 3, 3, rng);
  add_conv(ps, "dap.head", cfg.dap_bins, c, 1, 1, rng);
  add_conv(ps, "dap.ctx", c, c, 3, 3, rng);
}

// visual map -> (depth-aware features, per-pixel bin logits); extents kept
template <typename T>
std::pair<Tensor<T>, Tensor<T>> dap_forward(const ParamStore<T>& ps,
                                            const Tensor<T>& visual,
                                            const RunConfig& cfg) {
  ConvSpec same{3, 3, 1, 1, 1, 1};
  ConvSpec pt{1, 1, 1, 1, 0, 0};
  Tensor<T> x = visual;
  for (int i = 0; i < cfg.dap_layers; ++i) {
    std::string pre = "dap.c" + std::to_string(i);
    x = relu(conv2d(x, ps.at(pre + ".w"), ps.at(pre + ".b"), same));
  }
  Tensor<T> logits =
      conv2d(x, ps.at("dap.head.w"), ps.at("dap.head.b"), pt);
  return {x, logits};
}

// context conv on the visual path, then elementwise sum
template <typename T>
Tensor<T> fuse_depth_visual(const ParamStore<T>& ps, const Tensor<T>& visual,
                            const Tensor<T>& depth_feat) {
  ConvSpec same{3, 3, 1, 1, 1, 1};
  return add(conv2d(visual, ps.at("dap.ctx.w"), ps.at("dap.ctx.b"), same),
             depth_feat);
}

// mean multiclass focal loss over valid target pixels; exactly 0 when none
template <typename T>
Tensor<T> depth_loss(const Tensor<T>& logits, const std::vector<int32_t>& bins,
                     const RunConfig& cfg) {
  check(logits.ndim() == 3 && logits.dim(0) == cfg.dap_bins,
        "depth_loss: logits must be [n_bins,H,W]");
  Tensor<T> flat =
      reshape(logits, {cfg.dap_bins, logits.dim(1) * logits.dim(2)});
  return softmax_focal(flat, bins, T(cfg.dap_alpha), T(cfg.dap_gamma));
}

}  // namespace monomm
