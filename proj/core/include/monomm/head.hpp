#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monomm/anchors.hpp"
#include "monomm/config.hpp"
#include "monomm/conv.hpp"
#include "monomm/losses.hpp"
#include "monomm/nn.hpp"
#include "monomm/ops.hpp"

namespace monomm {

// Anchor head over the enhanced stride-8 map: a shared 3x3 trunk and three
// 1x1 branches. Channel layout is template-major: for grid cell (y,x) and
// template k, anchor index a = (y*W + x)*K + k reads class c at channel
// k*ncls + c, 2D target j at k*4 + j, 3D target j at k*7 + j.

template <typename T>
struct HeadOut {
  Tensor<T> cls;  // [K*ncls, H, W] logits
  Tensor<T> b2;   // [K*4,    H, W]
  Tensor<T> b3;   // [K*7,    H, W]
};

template <typename T>
void head_init(ParamStore<T>& ps, const RunConfig& cfg, Rng& rng) {
  int k = cfg.anchor_scales * int(cfg.anchor_ratios.size());
  int ncls = int(cfg.classes.size());
  add_conv(ps, "head.trunk", cfg.head_ch, cfg.fmf_cout, 3, 3, rng);
  add_conv(ps, "head.cls", k * ncls, cfg.head_ch, 1, 1, rng);
  // bias the untrained scores to ~1e-2 so negatives dominate neither the
  // focal loss nor the score gate at step 0
  {
    T v = T(-std::log(99.0));
    for (auto& x : ps.at("head.cls.b").raw()) x = v;
  }
  add_conv(ps, "head.b2", k * 4, cfg.head_ch, 1, 1, rng);
  add_conv(ps, "head.b3", k * 7, cfg.head_ch, 1, 1, rng);
}

template <typename T>
HeadOut<T> head_forward(const ParamStore<T>& ps, const Tensor<T>& feat) {
  ConvSpec same{3, 3, 1, 1, 1, 1};
  ConvSpec pt{1, 1, 1, 1, 0, 0};
  Tensor<T> t =
      relu(conv2d(feat, ps.at("head.trunk.w"), ps.at("head.trunk.b"), same));
  return {conv2d(t, ps.at("head.cls.w"), ps.at("head.cls.b"), pt),
          conv2d(t, ps.at("head.b2.w"), ps.at("head.b2.b"), pt),
          conv2d(t, ps.at("head.b3.w"), ps.at("head.b3.b"), pt)};
}

template <typename T>
struct LossParts {
  Tensor<T> total, cls, reg, dep;
  int n_pos = 0;
};

// Classification: mean binary focal over every non-ignored (anchor, class)
// element. Regression: mean smooth-L1 over the 11 target elements of each
// positive anchor; exactly 0 with no positives. Anchors are ignored inside
// the IoU band, when matched to an unknown class, or when they mostly
// overlap a DontCare region.
template <typename T>
LossParts<T> detection_loss(const HeadOut<T>& out, const AnchorSet& as,
                            const std::vector<GroundTruthObject>& gts,
                            const CalibP2& P, const Tensor<T>& depth_logits,
                            const std::vector<int32_t>& depth_bins,
                            const RunConfig& cfg) {
  int K = as.n_templates;
  int ncls = int(cfg.classes.size());
  int H = as.feat_h, W = as.feat_w;
  check(out.cls.ndim() == 3 && out.cls.dim(0) == K * ncls &&
            out.cls.dim(1) == H && out.cls.dim(2) == W,
        "detection_loss: cls map does not match the anchor grid");

  std::vector<GroundTruthObject> real;
  std::vector<Box2> boxes, dontcare;
  for (const auto& g : gts) {
    if (g.cls == "DontCare") {
      dontcare.push_back(g.bbox);
    } else {
      real.push_back(g);
      boxes.push_back(g.bbox);
    }
  }
  std::vector<int> assign = match_anchors(as, boxes, cfg.iou_pos, cfg.iou_neg);

  int64_t n_anchor = int64_t(as.anchors.size());
  // per-anchor role: gt index, negative, or ignore
  for (int64_t a = 0; a < n_anchor; ++a) {
    if (assign[size_t(a)] >= 0) {
      if (cfg.class_id(real[size_t(assign[size_t(a)])].cls) < 0)
        assign[size_t(a)] = kAssignIgnore;
      continue;
    }
    if (assign[size_t(a)] == kAssignNegative && !dontcare.empty()) {
      Box2 ab = anchor_box(as.anchors[size_t(a)]);
      for (const auto& dc : dontcare)
        if (iou2d(ab, dc) >= cfg.iou_neg) {
          assign[size_t(a)] = kAssignIgnore;
          break;
        }
    }
  }

  // classification mask over the [K*ncls, H, W] layout
  int64_t n_cls_el = int64_t(K) * ncls * H * W;
  std::vector<uint8_t> cls_tgt(size_t(n_cls_el), 0);
  std::vector<T> cls_w(size_t(n_cls_el), T(0));
  std::vector<T> b2_tgt(size_t(int64_t(K) * 4 * H * W), T(0));
  std::vector<T> b2_w(b2_tgt.size(), T(0));
  std::vector<T> b3_tgt(size_t(int64_t(K) * 7 * H * W), T(0));
  std::vector<T> b3_w(b3_tgt.size(), T(0));

  auto cls_idx = [&](int k, int c, int y, int x) {
    return ((int64_t(k) * ncls + c) * H + y) * W + x;
  };
  int64_t n_counted = 0, n_pos = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int k = 0; k < K; ++k) {
        int64_t a = (int64_t(y) * W + x) * K + k;
        int as_a = assign[size_t(a)];
        if (as_a == kAssignIgnore) continue;
        for (int c = 0; c < ncls; ++c) cls_w[size_t(cls_idx(k, c, y, x))] = T(1);
        n_counted += ncls;
        if (as_a < 0) continue;
        const GroundTruthObject& gt = real[size_t(as_a)];
        cls_tgt[size_t(cls_idx(k, cfg.class_id(gt.cls), y, x))] = 1;
        ++n_pos;
        auto t = encode_targets(as.anchors[size_t(a)], gt, P);
        for (int j = 0; j < 4; ++j) {
          int64_t i = ((int64_t(k) * 4 + j) * H + y) * W + x;
          b2_tgt[size_t(i)] = T(t[size_t(j)]);
          b2_w[size_t(i)] = T(1);
        }
        for (int j = 0; j < 7; ++j) {
          int64_t i = ((int64_t(k) * 7 + j) * H + y) * W + x;
          b3_tgt[size_t(i)] = T(t[size_t(4 + j)]);
          b3_w[size_t(i)] = T(1);
        }
      }

  if (n_counted > 0) {
    T wc = T(1) / T(n_counted);
    for (auto& w : cls_w)
      if (w != T(0)) w = wc;
  }
  if (n_pos > 0) {
    T wr = T(1) / T(n_pos * kNumTargets);
    for (auto& w : b2_w)
      if (w != T(0)) w = wr;
    for (auto& w : b3_w)
      if (w != T(0)) w = wr;
  }

  LossParts<T> parts;
  parts.n_pos = int(n_pos);
  parts.cls = masked_binary_focal(out.cls, cls_tgt, cls_w, T(cfg.cls_alpha),
                                  T(cfg.cls_gamma));
  parts.reg = add(masked_smooth_l1(out.b2, b2_tgt, b2_w, T(cfg.reg_delta)),
                  masked_smooth_l1(out.b3, b3_tgt, b3_w, T(cfg.reg_delta)));
  parts.dep = depth_loss(depth_logits, depth_bins, cfg);
  parts.total = add(add(scale(parts.cls, T(cfg.w_cls)),
                        scale(parts.reg, T(cfg.w_reg))),
                    scale(parts.dep, T(cfg.w_dep)));
  return parts;
}

// Raw head maps -> scored, NMS-filtered detections.
template <typename T>
std::vector<Detection> decode_detections(const HeadOut<T>& out,
                                         const AnchorSet& as,
                                         const CalibP2& P,
                                         const RunConfig& cfg) {
  int K = as.n_templates;
  int ncls = int(cfg.classes.size());
  int H = as.feat_h, W = as.feat_w;
  const T* pc = out.cls.data();
  const T* p2 = out.b2.data();
  const T* p3 = out.b3.data();
  std::vector<Detection> dets;
  double t[kNumTargets];
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int k = 0; k < K; ++k) {
        int64_t a = (int64_t(y) * W + x) * K + k;
        for (int c = 0; c < ncls; ++c) {
          double s = double(
              sigmoid_scalar(pc[((int64_t(k) * ncls + c) * H + y) * W + x]));
          if (s < cfg.score_thr) continue;
          for (int j = 0; j < 4; ++j)
            t[j] = double(p2[((int64_t(k) * 4 + j) * H + y) * W + x]);
          for (int j = 0; j < 7; ++j)
            t[4 + j] = double(p3[((int64_t(k) * 7 + j) * H + y) * W + x]);
          Detection d;
          d.cls = c;
          d.score = s;
          decode_box(as.anchors[size_t(a)], t, P, d.box2d, d.box3d, d.theta);
          if (d.box3d.z <= 0) continue;  // behind the camera: not a detection
          dets.push_back(d);
        }
      }
  return nms(std::move(dets), cfg.nms_iou, cfg.score_thr);
}

}  // namespace monomm
