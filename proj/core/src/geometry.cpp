#include "monomm/geometry.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace monomm {

void project_point(const CalibP2& P, double x, double y, double z, double& u,
                   double& v) {
  double d = P.p[8] * x + P.p[9] * y + P.p[10] * z + P.p[11];
  if (d <= 0) throw std::runtime_error("project_point: point behind camera");
  u = (P.p[0] * x + P.p[1] * y + P.p[2] * z + P.p[3]) / d;
  v = (P.p[4] * x + P.p[5] * y + P.p[6] * z + P.p[7]) / d;
}

std::array<std::array<double, 3>, 8> box3d_corners(const Box3& b) {
  // footprint corners in object frame (x along length, z along width),
  // bottom face y=0, top face y=-h (camera y points down)
  static const double sx[8] = {1, 1, -1, -1, 1, 1, -1, -1};
  static const double sz[8] = {1, -1, -1, 1, 1, -1, -1, 1};
  static const double sy[8] = {0, 0, 0, 0, -1, -1, -1, -1};
  double c = std::cos(b.ry), s = std::sin(b.ry);
  std::array<std::array<double, 3>, 8> out;
  for (int i = 0; i < 8; ++i) {
    double ox = sx[i] * b.l * 0.5;
    double oz = sz[i] * b.w * 0.5;
    out[size_t(i)][0] = b.x + c * ox + s * oz;
    out[size_t(i)][1] = b.y + sy[i] * b.h;
    out[size_t(i)][2] = b.z - s * ox + c * oz;
  }
  return out;
}

void project_box3d(const Box3& b, const CalibP2& P, double& cu, double& cv,
                   Box2& hull) {
  project_point(P, b.x, b.y - 0.5 * b.h, b.z, cu, cv);
  auto corners = box3d_corners(b);
  double x1 = 1e30, y1 = 1e30, x2 = -1e30, y2 = -1e30;
  for (auto& c : corners) {
    double u, v;
    project_point(P, c[0], c[1], c[2], u, v);
    x1 = std::min(x1, u);
    y1 = std::min(y1, v);
    x2 = std::max(x2, u);
    y2 = std::max(y2, v);
  }
  hull = Box2{x1, y1, x2, y2};
}

void backproject_point(const CalibP2& P, double u, double v, double z,
                       double& x, double& y) {
  // u = (p0 x + p2 z + p3) / d, v = (p5 y + p6 z + p7) / d with
  // d = p8 x + p9 y + p10 z + p11; rectified cameras have p8 = p9 = 0
  double d = P.p[10] * z + P.p[11];
  if (d <= 0) throw std::runtime_error("backproject_point: depth behind camera");
  x = (u * d - P.p[2] * z - P.p[3]) / P.p[0];
  y = (v * d - P.p[6] * z - P.p[7]) / P.p[5];
}

double iou2d(const Box2& a, const Box2& b) {
  double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0.0;
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

namespace {

struct Pt {
  double x, z;
};

// footprint polygon, counter-clockwise in the (x,z) plane
std::vector<Pt> footprint(const Box3& b) {
  static const double sx[4] = {1, 1, -1, -1};
  static const double sz[4] = {1, -1, -1, 1};
  double c = std::cos(b.ry), s = std::sin(b.ry);
  std::vector<Pt> out(4);
  for (int i = 0; i < 4; ++i) {
    double ox = sx[i] * b.l * 0.5;
    double oz = sz[i] * b.w * 0.5;
    out[size_t(i)] = {b.x + c * ox + s * oz, b.z - s * ox + c * oz};
  }
  return out;
}

double cross(const Pt& o, const Pt& a, const Pt& b) {
  return (a.x - o.x) * (b.z - o.z) - (a.z - o.z) * (b.x - o.x);
}

double polygon_area(const std::vector<Pt>& p) {
  double a = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const Pt& u = p[i];
    const Pt& v = p[(i + 1) % p.size()];
    a += u.x * v.z - v.x * u.z;
  }
  return std::abs(a) * 0.5;
}

// Sutherland-Hodgman: clip subject polygon against one directed edge (a->b)
// of a convex clipper, keeping the left side
std::vector<Pt> clip_edge(const std::vector<Pt>& poly, const Pt& a,
                          const Pt& b) {
  std::vector<Pt> out;
  size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Pt& cur = poly[i];
    const Pt& nxt = poly[(i + 1) % n];
    double dc = cross(a, b, cur);
    double dn = cross(a, b, nxt);
    if (dc >= 0) out.push_back(cur);
    if ((dc > 0 && dn < 0) || (dc < 0 && dn > 0)) {
      double t = dc / (dc - dn);
      out.push_back({cur.x + t * (nxt.x - cur.x), cur.z + t * (nxt.z - cur.z)});
    }
  }
  return out;
}

}  // namespace

double bev_intersection_area(const Box3& a, const Box3& b) {
  auto pa = footprint(a);
  auto pb = footprint(b);
  // ensure counter-clockwise orientation for the clipper
  double sb = 0;
  for (size_t i = 0; i < pb.size(); ++i) {
    const Pt& u = pb[i];
    const Pt& v = pb[(i + 1) % pb.size()];
    sb += u.x * v.z - v.x * u.z;
  }
  if (sb < 0) std::reverse(pb.begin(), pb.end());
  std::vector<Pt> poly = pa;
  for (size_t i = 0; i < pb.size() && !poly.empty(); ++i)
    poly = clip_edge(poly, pb[i], pb[(i + 1) % pb.size()]);
  if (poly.size() < 3) return 0.0;
  double area = polygon_area(poly);
  return area < 1e-9 ? 0.0 : area;
}

double bev_iou(const Box3& a, const Box3& b) {
  double inter = bev_intersection_area(a, b);
  double uni = a.w * a.l + b.w * b.l - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double iou3d(const Box3& a, const Box3& b) {
  double inter_bev = bev_intersection_area(a, b);
  // boxes span [y-h, y]; camera y points down
  double ylo = std::max(a.y - a.h, b.y - b.h);
  double yhi = std::min(a.y, b.y);
  double yov = std::max(0.0, yhi - ylo);
  double inter = inter_bev * yov;
  double uni = a.w * a.h * a.l + b.w * b.h * b.l - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace monomm
