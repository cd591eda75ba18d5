#pragma once

#include <array>
#include <vector>

#include "monomm/config.hpp"
#include "monomm/geometry.hpp"
#include "monomm/kitti.hpp"

namespace monomm {

// One grid anchor: a 2D box template plus 3D priors drawn from dataset
// statistics of the template's matched ground truths.
struct Anchor {
  double x2d = 0, y2d = 0;  // box center, pixels
  double w2d = 0, h2d = 0;  // box size, pixels
  double xp = 0, yp = 0;    // projected 3D-center prior, pixels
  double z = 0;             // depth prior, meters
  double sig_z = 1;         // depth spread used by the z target
  double w3d = 0, h3d = 0, l3d = 0;  // size priors, meters
  double theta = 0;                  // viewing-angle prior
};

inline Box2 anchor_box(const Anchor& a) {
  return Box2{a.x2d - 0.5 * a.w2d, a.y2d - 0.5 * a.h2d, a.x2d + 0.5 * a.w2d,
              a.y2d + 0.5 * a.h2d};
}

// Per-template statistics of matched ground truths (z and metric dims).
struct TemplateStats {
  double mean_z = 0, var_z = 0;
  double mean_w = 0, var_w = 0;
  double mean_h = 0, var_h = 0;
  double mean_l = 0, var_l = 0;
  long count = 0;
};

// (h, w) pixel sizes: anchor_scales exponential heights x aspect ratios,
// scale-major. Ratio r gives w = h * r.
std::vector<std::pair<double, double>> anchor_templates(const RunConfig& cfg);

// Position-independent template/gt matching: each template is centered on
// the gt box and accumulates the gt's (z, w3d, h3d, l3d) when the centered
// IoU clears `iou_pos`. Templates with no matches fall back to the global
// statistics. Throws if no usable gt exists.
std::vector<TemplateStats> compute_anchor_stats(
    const std::vector<std::pair<double, double>>& templates,
    const std::vector<GroundTruthObject>& gts, double iou_pos);

struct AnchorSet {
  int feat_h = 0, feat_w = 0, stride = 0, n_templates = 0;
  std::vector<Anchor> anchors;  // location-major, template-minor
};

AnchorSet generate_anchors(int feat_h, int feat_w, int stride,
                           const std::vector<std::pair<double, double>>& tpls,
                           const std::vector<TemplateStats>& stats);

// Per-anchor assignment: >= 0 index of the matched gt, -1 negative,
// -2 ignore (inside the [iou_neg, iou_pos] band). Ties on the best IoU go
// to the lowest gt index.
constexpr int kAssignNegative = -1;
constexpr int kAssignIgnore = -2;
std::vector<int> match_anchors(const AnchorSet& as,
                               const std::vector<Box2>& gt_boxes,
                               double iou_pos, double iou_neg);

// Regression target layout: [tx ty tw th | txp typ tz | tw3 th3 tl3 | tth].
constexpr int kNumTargets = 11;

std::array<double, kNumTargets> encode_targets(const Anchor& a,
                                               const GroundTruthObject& gt,
                                               const CalibP2& P);

struct Detection {
  int cls = 0;
  double score = 0;
  Box2 box2d;
  Box3 box3d;
  double theta = 0;  // viewing angle; box3d.ry = theta + atan2(x, z)
};

// Exact inverse of encode_targets given the same anchor and calibration.
void decode_box(const Anchor& a, const double* t, const CalibP2& P,
                Box2& box2d, Box3& box3d, double& theta);

// Greedy per-class suppression after the score gate. Output is sorted by
// descending score (ties by input order).
std::vector<Detection> nms(std::vector<Detection> dets, double iou_thr,
                           double score_thr);

}  // namespace monomm
