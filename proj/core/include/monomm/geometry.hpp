#pragma once

#include <array>
#include <cmath>

namespace monomm {

// image-plane box, (x1,y1) top-left, (x2,y2) bottom-right, pixels
struct Box2 {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double w() const { return x2 - x1; }
  double h() const { return y2 - y1; }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  double area() const { return (x2 > x1 && y2 > y1) ? w() * h() : 0.0; }
};

// camera-frame box, KITTI convention: x right, y down, z forward;
// (x,y,z) is the bottom-face center, the box spans [y-h, y] vertically;
// ry rotates around the y axis
struct Box3 {
  double x = 0, y = 0, z = 0;
  double w = 0, h = 0, l = 0;
  double ry = 0;
};

// wrap to [-pi, pi)
inline double wrap_angle(double a) {
  constexpr double kPi = 3.14159265358979323846;
  a = std::fmod(a + kPi, 2 * kPi);
  if (a < 0) a += 2 * kPi;
  return a - kPi;
}

struct CalibP2 {
  // row-major 3x4
  std::array<double, 12> p{};
  static CalibP2 simple(double f, double cu, double cv) {
    CalibP2 c;
    c.p = {f, 0, cu, 0, 0, f, cv, 0, 0, 0, 1, 0};
    return c;
  }
  double fu() const { return p[0]; }
  double fv() const { return p[5]; }
  double cu() const { return p[2]; }
  double cv() const { return p[6]; }
};

// pinhole projection of a camera-frame point; z must be positive
void project_point(const CalibP2& P, double x, double y, double z, double& u,
                   double& v);

// 8 yaw-rotated corners in camera frame, KITTI corner order
std::array<std::array<double, 3>, 8> box3d_corners(const Box3& b);

// projected center (of the 3D geometric center) and the 2D hull of the
// projected corners; throws if the box center is behind the camera
void project_box3d(const Box3& b, const CalibP2& P, double& cu, double& cv,
                   Box2& hull);

// Inverse pinhole: recover (x, y) from pixel (u, v) at depth z. Assumes the
// P2 skew terms p[1], p[4] are zero (true for KITTI rectified cameras).
void backproject_point(const CalibP2& P, double u, double v, double z,
                       double& x, double& y);

double iou2d(const Box2& a, const Box2& b);

// yaw-rotated footprint overlap in the ground (x,z) plane
double bev_intersection_area(const Box3& a, const Box3& b);
double bev_iou(const Box3& a, const Box3& b);

// BEV overlap x vertical overlap over volume union
double iou3d(const Box3& a, const Box3& b);

}  // namespace monomm
