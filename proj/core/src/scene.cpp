#include "monomm/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "monomm/rng.hpp"

namespace monomm {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kCamHeight = 1.2;  // ground plane at y = +1.2 (y down)

struct SizeRange {
  double h_lo, h_hi, w_lo, w_hi, l_lo, l_hi;
};

// Footprints keep w noticeably smaller than l so the entry depth of a
// center ray stays within half the object length at any yaw.
SizeRange size_range(const std::string& cls) {
  if (cls == "Car") return {1.3, 1.8, 1.5, 1.8, 3.5, 4.5};
  if (cls == "Pedestrian") return {1.6, 1.9, 0.40, 0.55, 0.8, 1.1};
  if (cls == "Cyclist") return {1.5, 1.8, 0.5, 0.8, 1.6, 2.0};
  return {0.8, 1.6, 0.5, 1.0, 1.5, 2.4};
}

struct RenderObj {
  double cx, cy, cz;        // geometric center
  double ex, ey, ez;        // half extents along object axes (l,h,w)/2
  double c, s;              // cos/sin of yaw
  double r, g, b;           // base albedo
};

// Slab-method ray/box intersection in the object frame. The ray starts at
// the camera origin with dir.z == 1, so the entry parameter IS camera z.
bool ray_box(const RenderObj& o, double dx, double dy, double dz, double& t,
             int& face) {
  double ox = -o.cx, oy = -o.cy, oz = -o.cz;  // origin relative to center
  double po[3] = {o.c * ox - o.s * oz, oy, o.s * ox + o.c * oz};
  double pd[3] = {o.c * dx - o.s * dz, dy, o.s * dx + o.c * dz};
  double ext[3] = {o.ex, o.ey, o.ez};
  double tmin = 0.0, tmax = std::numeric_limits<double>::max();
  int axis = -1;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(pd[i]) < 1e-12) {
      if (std::abs(po[i]) > ext[i]) return false;
      continue;
    }
    double inv = 1.0 / pd[i];
    double t1 = (-ext[i] - po[i]) * inv;
    double t2 = (ext[i] - po[i]) * inv;
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > tmin) {
      tmin = t1;
      axis = i;
    }
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return false;
  }
  if (axis < 0 || tmin <= 0) return false;  // camera inside or behind
  t = tmin;
  face = axis;
  return true;
}

Box2 clip_box(const Box2& b, double w, double h) {
  return Box2{std::clamp(b.x1, 0.0, w), std::clamp(b.y1, 0.0, h),
              std::clamp(b.x2, 0.0, w), std::clamp(b.y2, 0.0, h)};
}

}  // namespace

SyntheticScene synth_scene(uint64_t seed, const RunConfig& cfg) {
  SyntheticScene sc;
  sc.seed = seed;
  sc.h = cfg.image_h;
  sc.w = cfg.image_w;
  sc.calib = CalibP2::simple(cfg.scene_f, 0.5 * cfg.image_w,
                             0.5 * cfg.image_h);
  Rng rng(seed);

  // --- place objects with rejection sampling -------------------------------
  int want = rng.uniform_int(cfg.scene_objects_min, cfg.scene_objects_max);
  std::vector<Box2> hulls;
  for (int i = 0; i < want; ++i) {
    for (int attempt = 0; attempt < 60; ++attempt) {
      GroundTruthObject g;
      g.cls = cfg.classes[size_t(
          rng.uniform_int(0, int(cfg.classes.size()) - 1))];
      SizeRange sr = size_range(g.cls);
      g.h = rng.uniform(sr.h_lo, sr.h_hi);
      g.w = rng.uniform(sr.w_lo, sr.w_hi);
      g.l = rng.uniform(sr.l_lo, sr.l_hi);
      g.z = rng.uniform(cfg.scene_zmin, cfg.scene_zmax);
      double u_tgt = rng.uniform(0.12 * cfg.image_w, 0.88 * cfg.image_w);
      g.x = (u_tgt - sc.calib.cu()) * g.z / sc.calib.fu();
      g.y = kCamHeight;  // standing on the ground plane
      g.ry = rng.uniform(-kPi, kPi);
      g.alpha = wrap_angle(g.ry - std::atan2(g.x, g.z));

      double pu, pv;
      Box2 hull;
      project_box3d(g.box3(), sc.calib, pu, pv, hull);
      Box2 clipped = clip_box(hull, cfg.image_w, cfg.image_h);
      double full = hull.area();
      if (full <= 0 || clipped.area() <= 0) continue;
      g.truncation = 1.0 - clipped.area() / full;
      if (g.truncation > 0.3) continue;
      bool crowded = false;
      for (const Box2& other : hulls)
        if (iou2d(hull, other) > 0.3) {
          crowded = true;
          break;
        }
      if (crowded) continue;
      g.bbox = clipped;
      hulls.push_back(hull);
      sc.objects.push_back(g);
      break;
    }
  }

  // --- render: ground + sky background, then z-buffered cuboids ------------
  std::vector<RenderObj> robs;
  for (const auto& g : sc.objects) {
    RenderObj o;
    o.cx = g.x;
    o.cy = g.y - 0.5 * g.h;
    o.cz = g.z;
    o.ex = 0.5 * g.l;
    o.ey = 0.5 * g.h;
    o.ez = 0.5 * g.w;
    o.c = std::cos(g.ry);
    o.s = std::sin(g.ry);
    o.r = rng.uniform(0.35, 0.95);
    o.g = rng.uniform(0.35, 0.95);
    o.b = rng.uniform(0.35, 0.95);
    robs.push_back(o);
  }
  static const double kFaceShade[3] = {0.85, 1.0, 0.7};

  size_t npx = size_t(sc.h) * size_t(sc.w);
  sc.image.assign(3 * npx, 0.0);
  sc.depth.assign(npx, 0.0);
  std::vector<long> hits(robs.size(), 0), wins(robs.size(), 0);

  double f = sc.calib.fu(), cu = sc.calib.cu(), cv = sc.calib.cv();
  for (int v = 0; v < sc.h; ++v) {
    for (int u = 0; u < sc.w; ++u) {
      size_t px = size_t(v) * size_t(sc.w) + size_t(u);
      double dx = (u + 0.5 - cu) / f;
      double dy = (v + 0.5 - cv) / f;
      double rr, gg, bb, zval;
      if (dy > 1e-6) {  // ground: y = kCamHeight at depth z = camH / dy
        zval = kCamHeight / dy;
        double shade = 0.32 + 0.06 * std::sin(0.9 * zval) +
                       0.05 * std::sin(3.1 * zval * dx);
        rr = shade + 0.05;
        gg = shade + 0.07;
        bb = shade;
      } else {  // sky gradient, no depth return
        zval = 0.0;
        double tsky = std::min(1.0, -dy * 4.0);
        rr = 0.55 - 0.15 * tsky;
        gg = 0.68 - 0.10 * tsky;
        bb = 0.85;
      }
      double best_t = std::numeric_limits<double>::max();
      int best_o = -1, best_face = -1;
      for (size_t i = 0; i < robs.size(); ++i) {
        double t;
        int face;
        if (!ray_box(robs[i], dx, dy, 1.0, t, face)) continue;
        ++hits[i];
        if (t < best_t) {
          best_t = t;
          best_o = int(i);
          best_face = face;
        }
      }
      if (best_o >= 0) {
        const RenderObj& o = robs[size_t(best_o)];
        double sh = kFaceShade[best_face];
        rr = o.r * sh;
        gg = o.g * sh;
        bb = o.b * sh;
        zval = best_t;
        ++wins[size_t(best_o)];
      }
      sc.image[px] = rr;
      sc.image[npx + px] = gg;
      sc.image[2 * npx + px] = bb;
      sc.depth[px] = zval;
    }
  }

  // --- occlusion levels from rendered visibility ---------------------------
  for (size_t i = 0; i < robs.size(); ++i) {
    double occl =
        hits[i] > 0 ? 1.0 - double(wins[i]) / double(hits[i]) : 1.0;
    sc.objects[i].occlusion = occl <= 0.2 ? 0 : occl <= 0.5 ? 1 : 2;
  }
  return sc;
}

void flip_scene_horizontal(SyntheticScene& s) {
  size_t npx = size_t(s.h) * size_t(s.w);
  for (int c = 0; c < 3; ++c)
    for (int v = 0; v < s.h; ++v) {
      double* row = s.image.data() + size_t(c) * npx + size_t(v) * size_t(s.w);
      std::reverse(row, row + s.w);
    }
  for (int v = 0; v < s.h; ++v) {
    double* row = s.depth.data() + size_t(v) * size_t(s.w);
    std::reverse(row, row + s.w);
  }
  for (auto& g : s.objects) {
    double x1 = g.bbox.x1, x2 = g.bbox.x2;
    g.bbox.x1 = s.w - x2;
    g.bbox.x2 = s.w - x1;
    g.x = -g.x;
    g.ry = wrap_angle(kPi - g.ry);
    g.alpha = wrap_angle(g.ry - std::atan2(g.x, g.z));
  }
}

}  // namespace monomm
