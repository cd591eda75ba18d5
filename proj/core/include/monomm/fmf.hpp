#pragma once

#include <string>
#include <vector>

#include "monomm/config.hpp"
#include "monomm/conv.hpp"
#include "monomm/nn.hpp"
#include "monomm/ops.hpp"

namespace monomm {

// Two-stage cross-scale fusion.
//
// Stage 1 aligns the three backbone taps at stride 16 and concatenates:
// f1 drops through an AConv (parallel avg-pool+conv and max-pool+conv,
// summed), f2 is projected 1x1, f3 is projected 1x1 and upsampled 2x.
//
// Stage 2 runs depthwise-separable convs of the configured kernel sizes
// in parallel over the concatenated map F, sums the branch outputs
// together with F itself, reduces 1x1 to the output width, optionally adds
// a 1x1-projected copy of F, and doubles the extents with a transposed
// conv so the result lands back at stride 8.

template <typename T>
void fmf_init(ParamStore<T>& ps, const RunConfig& cfg, Rng& rng) {
  int cm = cfg.fmf_cmid, co = cfg.fmf_cout;
  add_conv(ps, "fmf.ac.avg", cm, cfg.bb_c8, 1, 1, rng);
  add_conv(ps, "fmf.ac.max", cm, cfg.bb_c8, 1, 1, rng);
  add_conv(ps, "fmf.p2", cm, cfg.bb_c16, 1, 1, rng);
  add_conv(ps, "fmf.p3", cm, cfg.bb_c32, 1, 1, rng);
  for (int k : cfg.fmf_dw_kernels) {
    std::string pre = "fmf.dw" + std::to_string(k);
    // depthwise kernel: one [1,k,k] filter per channel of F
    ps.add(pre + ".d.w", init_conv<T>(3 * cm, 1, k, k, rng));
    ps.add(pre + ".d.b", init_zeros<T>({3 * cm}));
    add_conv(ps, pre + ".p", 3 * cm, 3 * cm, 1, 1, rng);
  }
  add_conv(ps, "fmf.reduce", co, 3 * cm, 1, 1, rng);
  if (cfg.fmf_residual_mode == "project")
    add_conv(ps, "fmf.proj", co, 3 * cm, 1, 1, rng);
  // transposed-conv weight layout is [Cin, Cout, KH, KW]
  ps.add("fmf.up.w", init_conv<T>(co, co, 2, 2, rng));
  ps.add("fmf.up.b", init_zeros<T>({co}));
}

// parallel pooled 1x1 convs; halves both extents
template <typename T>
Tensor<T> fmf_aconv(const ParamStore<T>& ps, const Tensor<T>& x) {
  ConvSpec pt{1, 1, 1, 1, 0, 0};
  Tensor<T> a = conv2d(pool2d(x, PoolKind::kAvg, 2, 2, 2, 2),
                       ps.at("fmf.ac.avg.w"), ps.at("fmf.ac.avg.b"), pt);
  Tensor<T> m = conv2d(pool2d(x, PoolKind::kMax, 2, 2, 2, 2),
                       ps.at("fmf.ac.max.w"), ps.at("fmf.ac.max.b"), pt);
  return add(a, m);
}

// stride-16 concatenation [3*cmid, H/16, W/16]; f3's slot is the last third
template <typename T>
Tensor<T> fmf_initial_fusion(const ParamStore<T>& ps, const Tensor<T>& f1,
                             const Tensor<T>& f2, const Tensor<T>& f3) {
  ConvSpec pt{1, 1, 1, 1, 0, 0};
  Tensor<T> a = fmf_aconv(ps, f1);
  Tensor<T> b = conv2d(f2, ps.at("fmf.p2.w"), ps.at("fmf.p2.b"), pt);
  Tensor<T> c = upsample_nearest2(
      conv2d(f3, ps.at("fmf.p3.w"), ps.at("fmf.p3.b"), pt));
  return concat_ch<T>({a, b, c});
}

template <typename T>
Tensor<T> fmf_detail_fusion(const ParamStore<T>& ps, const Tensor<T>& F,
                            const RunConfig& cfg) {
  ConvSpec pt{1, 1, 1, 1, 0, 0};
  int cf = F.dim(0);
  std::vector<Tensor<T>> branches;
  branches.reserve(cfg.fmf_dw_kernels.size() + 1);
  for (int k : cfg.fmf_dw_kernels) {
    std::string pre = "fmf.dw" + std::to_string(k);
    ConvSpec dw{k, k, 1, 1, k / 2, k / 2, 1, 1, cf};
    Tensor<T> d = conv2d(F, ps.at(pre + ".d.w"), ps.at(pre + ".d.b"), dw);
    branches.push_back(
        conv2d(d, ps.at(pre + ".p.w"), ps.at(pre + ".p.b"), pt));
  }
  branches.push_back(F);
  Tensor<T> g = add_n(branches);
  Tensor<T> r = conv2d(g, ps.at("fmf.reduce.w"), ps.at("fmf.reduce.b"), pt);
  if (cfg.fmf_residual_mode == "project")
    r = add(r, conv2d(F, ps.at("fmf.proj.w"), ps.at("fmf.proj.b"), pt));
  ConvSpec up{2, 2, 2, 2, 0, 0};
  return conv_transpose2d(r, ps.at("fmf.up.w"), ps.at("fmf.up.b"), up);
}

// f1 at stride 8, f2 at 16, f3 at 32 -> fused map [fmf_cout, H/8, W/8]
template <typename T>
Tensor<T> fmf_forward(const ParamStore<T>& ps, const Tensor<T>& f1,
                      const Tensor<T>& f2, const Tensor<T>& f3,
                      const RunConfig& cfg) {
  return fmf_detail_fusion(ps, fmf_initial_fusion(ps, f1, f2, f3), cfg);
}

}  // namespace monomm
