#pragma once

#include <array>
#include <string>

#include "monomm/config.hpp"
#include "monomm/conv.hpp"
#include "monomm/nn.hpp"
#include "monomm/ops.hpp"

namespace monomm {

// Plain five-stage CNN. Each stage halves both extents with a stride-2
// 3x3 conv and refines with two residual 3x3 blocks, so an input divisible
// by 32 yields taps at strides 8 (f1), 16 (f2), and 32 (f3).
template <typename T>
struct BackboneOut {
  Tensor<T> f1, f2, f3;
};

inline std::array<int, 5> backbone_widths(const RunConfig& cfg) {
  return {cfg.bb_stem, cfg.bb_c4, cfg.bb_c8, cfg.bb_c16, cfg.bb_c32};
}

template <typename T>
void backbone_init(ParamStore<T>& ps, const RunConfig& cfg, Rng& rng) {
  auto widths = backbone_widths(cfg);
  int cin = 3;
  for (int s = 0; s < 5; ++s) {
    std::string pre = "bb.s" + std::to_string(s);
    add_conv(ps, pre + ".down", widths[size_t(s)], cin, 3, 3, rng);
    for (int r = 0; r < 2; ++r) {
      std::string rp = pre + ".r" + std::to_string(r);
      add_conv(ps, rp + ".c1", widths[size_t(s)], widths[size_t(s)], 3, 3, rng);
      add_conv(ps, rp + ".c2", widths[size_t(s)], widths[size_t(s)], 3, 3, rng);
    }
    cin = widths[size_t(s)];
  }
}

template <typename T>
BackboneOut<T> backbone_forward(const ParamStore<T>& ps, const Tensor<T>& img,
                                const RunConfig&) {
  check(img.ndim() == 3 && img.dim(0) == 3,
        "backbone: need a [3,H,W] image, got " + shape_str(img.shape()));
  ConvSpec down{3, 3, 2, 2, 1, 1};
  ConvSpec same{3, 3, 1, 1, 1, 1};
  BackboneOut<T> out;
  Tensor<T> x = img;
  for (int s = 0; s < 5; ++s) {
    std::string pre = "bb.s" + std::to_string(s);
    x = relu(conv2d(x, ps.at(pre + ".down.w"), ps.at(pre + ".down.b"), down));
    for (int r = 0; r < 2; ++r) {
      std::string rp = pre + ".r" + std::to_string(r);
      Tensor<T> y =
          relu(conv2d(x, ps.at(rp + ".c1.w"), ps.at(rp + ".c1.b"), same));
      y = conv2d(y, ps.at(rp + ".c2.w"), ps.at(rp + ".c2.b"), same);
      x = relu(add(x, y));
    }
    if (s == 2) out.f1 = x;
    if (s == 3) out.f2 = x;
    if (s == 4) out.f3 = x;
  }
  return out;
}

}  // namespace monomm
