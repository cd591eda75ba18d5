#include "monomm/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace monomm {

std::vector<std::pair<double, double>> anchor_templates(const RunConfig& cfg) {
  if (cfg.anchor_scales < 1 || cfg.anchor_ratios.empty())
    throw std::runtime_error("anchor config needs scales >= 1 and ratios");
  std::vector<std::pair<double, double>> out;
  out.reserve(size_t(cfg.anchor_scales) * cfg.anchor_ratios.size());
  for (int k = 0; k < cfg.anchor_scales; ++k) {
    double h = cfg.anchor_base * std::exp2(double(k) / 3.0);
    for (double r : cfg.anchor_ratios) out.emplace_back(h, h * r);
  }
  return out;
}

namespace {

// IoU of two boxes sharing a center depends only on their sizes.
double centered_iou(double wa, double ha, double wb, double hb) {
  double inter = std::min(wa, wb) * std::min(ha, hb);
  double uni = wa * ha + wb * hb - inter;
  return uni > 0 ? inter / uni : 0.0;
}

struct Acc {
  double s[4] = {0, 0, 0, 0};
  double ss[4] = {0, 0, 0, 0};
  long n = 0;
  void add(const GroundTruthObject& g) {
    double v[4] = {g.z, g.w, g.h, g.l};
    for (int i = 0; i < 4; ++i) {
      s[i] += v[i];
      ss[i] += v[i] * v[i];
    }
    ++n;
  }
  TemplateStats stats() const {
    TemplateStats t;
    t.count = n;
    double m[4], var[4];
    for (int i = 0; i < 4; ++i) {
      m[i] = s[i] / double(n);
      var[i] = std::max(0.0, ss[i] / double(n) - m[i] * m[i]);
    }
    t.mean_z = m[0];
    t.var_z = std::max(var[0], 1e-2);  // floor keeps the z target bounded
    t.mean_w = m[1];
    t.var_w = var[1];
    t.mean_h = m[2];
    t.var_h = var[2];
    t.mean_l = m[3];
    t.var_l = var[3];
    return t;
  }
};

}  // namespace

std::vector<TemplateStats> compute_anchor_stats(
    const std::vector<std::pair<double, double>>& templates,
    const std::vector<GroundTruthObject>& gts, double iou_pos) {
  std::vector<Acc> acc(templates.size());
  Acc global;
  for (const auto& g : gts) {
    if (g.z <= 0 || g.w <= 0 || g.h <= 0 || g.l <= 0) continue;  // sentinels
    double gw = g.bbox.w(), gh = g.bbox.h();
    if (gw <= 0 || gh <= 0) continue;
    global.add(g);
    for (size_t t = 0; t < templates.size(); ++t)
      if (centered_iou(templates[t].second, templates[t].first, gw, gh) >
          iou_pos)
        acc[t].add(g);
  }
  if (global.n == 0)
    throw std::runtime_error(
        "anchor stats need at least one ground truth with valid 3D fields");
  TemplateStats fallback = global.stats();
  std::vector<TemplateStats> out(templates.size());
  for (size_t t = 0; t < templates.size(); ++t)
    out[t] = acc[t].n > 0 ? acc[t].stats() : fallback;
  return out;
}

AnchorSet generate_anchors(int feat_h, int feat_w, int stride,
                           const std::vector<std::pair<double, double>>& tpls,
                           const std::vector<TemplateStats>& stats) {
  if (tpls.empty() || tpls.size() != stats.size())
    throw std::runtime_error("generate_anchors: template/stats mismatch");
  AnchorSet as;
  as.feat_h = feat_h;
  as.feat_w = feat_w;
  as.stride = stride;
  as.n_templates = int(tpls.size());
  as.anchors.reserve(size_t(feat_h) * size_t(feat_w) * tpls.size());
  for (int y = 0; y < feat_h; ++y) {
    for (int x = 0; x < feat_w; ++x) {
      double cx = (x + 0.5) * stride;
      double cy = (y + 0.5) * stride;
      for (size_t t = 0; t < tpls.size(); ++t) {
        Anchor a;
        a.x2d = cx;
        a.y2d = cy;
        a.h2d = tpls[t].first;
        a.w2d = tpls[t].second;
        a.xp = cx;
        a.yp = cy;
        a.z = stats[t].mean_z;
        a.sig_z = std::sqrt(stats[t].var_z);
        a.w3d = stats[t].mean_w;
        a.h3d = stats[t].mean_h;
        a.l3d = stats[t].mean_l;
        a.theta = 0.0;
        as.anchors.push_back(a);
      }
    }
  }
  return as;
}

std::vector<int> match_anchors(const AnchorSet& as,
                               const std::vector<Box2>& gt_boxes,
                               double iou_pos, double iou_neg) {
  std::vector<int> assign(as.anchors.size(), kAssignNegative);
  for (size_t i = 0; i < as.anchors.size(); ++i) {
    Box2 ab = anchor_box(as.anchors[i]);
    double best = 0.0;
    int best_g = -1;
    for (size_t g = 0; g < gt_boxes.size(); ++g) {
      double v = iou2d(ab, gt_boxes[g]);
      if (v > best) {  // strict: ties stay with the lowest gt index
        best = v;
        best_g = int(g);
      }
    }
    if (best > iou_pos)
      assign[i] = best_g;
    else if (best >= iou_neg)
      assign[i] = kAssignIgnore;
  }
  return assign;
}

std::array<double, kNumTargets> encode_targets(const Anchor& a,
                                               const GroundTruthObject& gt,
                                               const CalibP2& P) {
  if (gt.w <= 0 || gt.h <= 0 || gt.l <= 0 || gt.bbox.w() <= 0 ||
      gt.bbox.h() <= 0)
    throw std::runtime_error("encode_targets: non-positive gt size");
  std::array<double, kNumTargets> t{};
  t[0] = (gt.bbox.cx() - a.x2d) / a.w2d;
  t[1] = (gt.bbox.cy() - a.y2d) / a.h2d;
  t[2] = std::log(gt.bbox.w() / a.w2d);
  t[3] = std::log(gt.bbox.h() / a.h2d);
  double pu, pv;
  Box2 hull;
  project_box3d(gt.box3(), P, pu, pv, hull);
  t[4] = (pu - a.xp) / a.w2d;
  t[5] = (pv - a.yp) / a.h2d;
  t[6] = (gt.z - a.z) / a.sig_z;
  t[7] = std::log(gt.w / a.w3d);
  t[8] = std::log(gt.h / a.h3d);
  t[9] = std::log(gt.l / a.l3d);
  double theta_gt = wrap_angle(gt.ry - std::atan2(gt.x, gt.z));
  t[10] = wrap_angle(theta_gt - a.theta);
  return t;
}

void decode_box(const Anchor& a, const double* t, const CalibP2& P,
                Box2& box2d, Box3& box3d, double& theta) {
  double cx = a.x2d + t[0] * a.w2d;
  double cy = a.y2d + t[1] * a.h2d;
  double w = a.w2d * std::exp(t[2]);
  double h = a.h2d * std::exp(t[3]);
  box2d = Box2{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  double pu = a.xp + t[4] * a.w2d;
  double pv = a.yp + t[5] * a.h2d;
  box3d.z = a.z + t[6] * a.sig_z;
  box3d.w = a.w3d * std::exp(t[7]);
  box3d.h = a.h3d * std::exp(t[8]);
  box3d.l = a.l3d * std::exp(t[9]);
  double x, yc;
  backproject_point(P, pu, pv, box3d.z, x, yc);
  box3d.x = x;
  box3d.y = yc + 0.5 * box3d.h;  // geometric center -> bottom-face anchor
  theta = wrap_angle(a.theta + t[10]);
  box3d.ry = wrap_angle(theta + std::atan2(box3d.x, box3d.z));
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thr,
                           double score_thr) {
  std::vector<size_t> order(dets.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    if (dets[i].score != dets[j].score) return dets[i].score > dets[j].score;
    return i < j;
  });
  std::vector<Detection> kept;
  for (size_t oi : order) {
    const Detection& d = dets[oi];
    if (d.score < score_thr) continue;
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.cls != d.cls) continue;
      if (iou2d(k.box2d, d.box2d) > iou_thr) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

}  // namespace monomm
