#include "monomm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace monomm {

DifficultyRules DifficultyRules::from_config(const RunConfig& cfg) {
  DifficultyRules r;
  r.min_h = {cfg.diff_easy_h, cfg.diff_mod_h, cfg.diff_hard_h};
  r.max_tr = {cfg.diff_easy_tr, cfg.diff_mod_tr, cfg.diff_hard_tr};
  r.max_occ = {cfg.diff_easy_occ, cfg.diff_mod_occ, cfg.diff_hard_occ};
  return r;
}

Difficulty difficulty(const GroundTruthObject& gt, const DifficultyRules& r) {
  double h = gt.bbox.h();
  for (int d = 0; d < 3; ++d)
    if (h >= r.min_h[size_t(d)] && gt.occlusion <= r.max_occ[size_t(d)] &&
        gt.truncation <= r.max_tr[size_t(d)])
      return Difficulty(d);
  return Difficulty::kIgnored;
}

namespace {

double det_iou(const Detection& d, const GroundTruthObject& g, IouKind kind) {
  switch (kind) {
    case IouKind::k2d:
      return iou2d(d.box2d, g.bbox);
    case IouKind::kBev:
      return bev_iou(d.box3d, g.box3());
    case IouKind::k3d:
      return iou3d(d.box3d, g.box3());
  }
  return 0.0;
}

// DontCare absorption uses intersection over detection area in 2D: the
// region marks pixels, not an object with matching geometry.
bool covers_dontcare(const Detection& d, const GroundTruthObject& dc,
                     double thr) {
  double ix = std::min(d.box2d.x2, dc.bbox.x2) -
              std::max(d.box2d.x1, dc.bbox.x1);
  double iy = std::min(d.box2d.y2, dc.bbox.y2) -
              std::max(d.box2d.y1, dc.bbox.y1);
  if (ix <= 0 || iy <= 0) return false;
  double da = d.box2d.area();
  return da > 0 && (ix * iy) / da > thr;
}

}  // namespace

double ap40(const std::vector<EvalFrame>& frames, const RunConfig& cfg,
            int cls_id, IouKind kind, int bucket, const DifficultyRules& r) {
  double thr = cfg.eval_iou[size_t(cls_id)];
  struct Scored {
    double score;
    bool tp;
  };
  std::vector<Scored> pool;
  long n_gt = 0;

  for (const auto& frame : frames) {
    // partition this frame's gts for the class/bucket at hand
    std::vector<size_t> counted, absorbing, dontcare;
    for (size_t g = 0; g < frame.gts.size(); ++g) {
      const auto& gt = frame.gts[g];
      if (gt.cls == "DontCare") {
        dontcare.push_back(g);
        continue;
      }
      if (cfg.class_id(gt.cls) != cls_id) continue;
      Difficulty d = difficulty(gt, r);
      if (int(d) <= bucket)
        counted.push_back(g);
      else
        absorbing.push_back(g);
    }
    n_gt += long(counted.size());

    // greedy match in descending score order (ties by detection order)
    std::vector<size_t> order;
    for (size_t i = 0; i < frame.dets.size(); ++i)
      if (frame.dets[i].cls == cls_id) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
      if (frame.dets[i].score != frame.dets[j].score)
        return frame.dets[i].score > frame.dets[j].score;
      return i < j;
    });
    std::vector<char> gt_used(frame.gts.size(), 0);
    for (size_t di : order) {
      const Detection& det = frame.dets[di];
      double best = -1.0;
      long best_g = -1;
      for (size_t g : counted) {
        if (gt_used[g]) continue;
        double v = det_iou(det, frame.gts[g], kind);
        if (v >= thr && v > best) {  // IoU ties keep the lowest gt index
          best = v;
          best_g = long(g);
        }
      }
      if (best_g >= 0) {
        gt_used[size_t(best_g)] = 1;
        pool.push_back({det.score, true});
        continue;
      }
      // not a hit: absorbed by out-of-bucket gts or DontCare regions?
      bool absorbed = false;
      for (size_t g : absorbing)
        if (det_iou(det, frame.gts[g], kind) >= thr) {
          absorbed = true;
          break;
        }
      if (!absorbed)
        for (size_t g : dontcare)
          if (covers_dontcare(det, frame.gts[g], thr)) {
            absorbed = true;
            break;
          }
      if (!absorbed) pool.push_back({det.score, false});
    }
  }

  if (n_gt == 0) return 0.0;
  std::sort(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) {
    return a.score > b.score;
  });
  // precision/recall after each prefix of the pooled ranking
  std::vector<double> prec(pool.size()), rec(pool.size());
  long tp = 0, fp = 0;
  for (size_t i = 0; i < pool.size(); ++i) {
    (pool[i].tp ? tp : fp) += 1;
    prec[i] = double(tp) / double(tp + fp);
    rec[i] = double(tp) / double(n_gt);
  }
  double ap = 0.0;
  for (int k = 1; k <= 40; ++k) {
    double r_pt = double(k) / 40.0;
    double best = 0.0;
    for (size_t i = 0; i < pool.size(); ++i)
      if (rec[i] >= r_pt) best = std::max(best, prec[i]);
    ap += best;
  }
  return ap / 40.0;
}

EvalReport evaluate_frames(const std::vector<EvalFrame>& frames,
                           const RunConfig& cfg) {
  DifficultyRules rules = DifficultyRules::from_config(cfg);
  EvalReport rep;
  for (size_t c = 0; c < cfg.classes.size(); ++c) {
    ClassAP ap;
    ap.cls = cfg.classes[c];
    for (int b = 0; b < 3; ++b) {
      ap.ap3d[size_t(b)] = ap40(frames, cfg, int(c), IouKind::k3d, b, rules);
      ap.apbev[size_t(b)] = ap40(frames, cfg, int(c), IouKind::kBev, b, rules);
    }
    rep.per_class.push_back(ap);
  }
  return rep;
}

std::string EvalReport::text() const {
  std::ostringstream ss;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %-6s %8s %8s %8s\n", "class",
                "metric", "easy", "mod", "hard");
  ss << buf;
  for (const auto& c : per_class) {
    std::snprintf(buf, sizeof(buf), "%-12s %-6s %8.4f %8.4f %8.4f\n",
                  c.cls.c_str(), "AP3D", c.ap3d[0], c.ap3d[1], c.ap3d[2]);
    ss << buf;
    std::snprintf(buf, sizeof(buf), "%-12s %-6s %8.4f %8.4f %8.4f\n",
                  c.cls.c_str(), "APBEV", c.apbev[0], c.apbev[1], c.apbev[2]);
    ss << buf;
  }
  return ss.str();
}

std::string EvalReport::key_values() const {
  static const char* kBuckets[3] = {"easy", "moderate", "hard"};
  std::ostringstream ss;
  char buf[160];
  for (const auto& c : per_class)
    for (int b = 0; b < 3; ++b) {
      std::snprintf(buf, sizeof(buf), "ap3d_%s_%s=%.6f\n", c.cls.c_str(),
                    kBuckets[b], c.ap3d[size_t(b)]);
      ss << buf;
      std::snprintf(buf, sizeof(buf), "apbev_%s_%s=%.6f\n", c.cls.c_str(),
                    kBuckets[b], c.apbev[size_t(b)]);
      ss << buf;
    }
  return ss.str();
}

}  // namespace monomm
