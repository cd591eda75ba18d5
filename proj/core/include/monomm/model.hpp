#pragma once

#include <utility>
#include <vector>

#include "monomm/anchors.hpp"
#include "monomm/backbone.hpp"
#include "monomm/config.hpp"
#include "monomm/dap.hpp"
#include "monomm/dmb.hpp"
#include "monomm/fmf.hpp"
#include "monomm/head.hpp"
#include "monomm/nn.hpp"

namespace monomm {

// The composed detector. Construction is deterministic per (cfg, stats,
// seed); parameter prefixes partition by module ("bb.", "fmf.", "dap.",
// "dmb.", "head.") so ablation variants can assert structure by name.
//
// Ablation wiring:
//   enable_fmf=0  drops the fusion neck; a 1x1 conv ("neck.") lifts the
//                 stride-8 backbone tap to the working width instead.
//   enable_dmb=0  leaves the enhancement slot between the depth-fused map
//                 and the head empty.
//   enable_dmb=1  fills the slot per fusion_mode: "mamba" runs the token
//                 mixer, "conv-sum" a residual 3x3 conv ("dmb.sum.").
template <typename T>
class Model {
 public:
  Model(const RunConfig& cfg, const std::vector<TemplateStats>& stats,
        uint64_t seed)
      : cfg_(cfg) {
    Rng rng(seed);
    backbone_init(ps_, cfg_, rng);
    int h8 = cfg_.image_h / 8, w8 = cfg_.image_w / 8;
    if (cfg_.enable_fmf)
      fmf_init(ps_, cfg_, rng);
    else
      add_conv(ps_, "neck.proj", cfg_.fmf_cout, cfg_.bb_c8, 1, 1, rng);
    dap_init(ps_, cfg_, rng);
    if (cfg_.enable_dmb) {
      if (cfg_.fusion_mode == "mamba")
        dmb_init(ps_, cfg_, cfg_.fmf_cout, h8, w8, rng);
      else
        add_conv(ps_, "dmb.sum", cfg_.fmf_cout, cfg_.fmf_cout, 3, 3, rng);
    }
    head_init(ps_, cfg_, rng);
    anchors_ = generate_anchors(h8, w8, 8, anchor_templates(cfg_), stats);
  }

  struct Out {
    Tensor<T> fused;         // head input, stride 8
    Tensor<T> depth_logits;  // [n_bins, H/8, W/8]
    HeadOut<T> head;
  };

  Out forward(const Tensor<T>& img) {
    check(img.ndim() == 3 && img.dim(1) == cfg_.image_h &&
              img.dim(2) == cfg_.image_w,
          "model: image " + shape_str(img.shape()) +
              " does not match the configured extents");
    BackboneOut<T> bb = backbone_forward(ps_, img, cfg_);
    ConvSpec pt{1, 1, 1, 1, 0, 0};
    Tensor<T> visual =
        cfg_.enable_fmf
            ? fmf_forward(ps_, bb.f1, bb.f2, bb.f3, cfg_)
            : conv2d(bb.f1, ps_.at("neck.proj.w"), ps_.at("neck.proj.b"), pt);
    auto [dfeat, dlogits] = dap_forward(ps_, visual, cfg_);
    Tensor<T> fd = fuse_depth_visual(ps_, visual, dfeat);
    if (cfg_.enable_dmb) {
      if (cfg_.fusion_mode == "mamba") {
        fd = dmb_forward(ps_, fd, cfg_);
      } else {
        ConvSpec same{3, 3, 1, 1, 1, 1};
        fd = add(conv2d(fd, ps_.at("dmb.sum.w"), ps_.at("dmb.sum.b"), same),
                 fd);
      }
    }
    return {fd, dlogits, head_forward(ps_, fd)};
  }

  LossParts<T> loss(const Out& out, const std::vector<GroundTruthObject>& gts,
                    const CalibP2& P, const std::vector<int32_t>& depth_bins) {
    return detection_loss(out.head, anchors_, gts, P, out.depth_logits,
                          depth_bins, cfg_);
  }

  std::vector<Detection> decode(const Out& out, const CalibP2& P) const {
    return decode_detections(out.head, anchors_, P, cfg_);
  }

  ParamStore<T>& params() { return ps_; }
  const ParamStore<T>& params() const { return ps_; }
  const AnchorSet& anchors() const { return anchors_; }
  const RunConfig& config() const { return cfg_; }

 private:
  RunConfig cfg_;
  ParamStore<T> ps_;
  AnchorSet anchors_;
};

}  // namespace monomm
