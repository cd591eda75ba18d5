#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "monomm/geometry.hpp"
#include "monomm/rng.hpp"

using namespace monomm;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Grid oracle for the BEV footprint intersection: sample cell centers of a
// fine grid over the AABB overlap and count points inside both footprints.
double bev_inter_grid(const Box3& a, const Box3& b, int n) {
  auto aabb = [](const Box3& q, double& x1, double& z1, double& x2,
                 double& z2) {
    auto cs = box3d_corners(q);
    x1 = z1 = 1e30;
    x2 = z2 = -1e30;
    for (int i = 0; i < 4; ++i) {
      x1 = std::min(x1, cs[size_t(i)][0]);
      x2 = std::max(x2, cs[size_t(i)][0]);
      z1 = std::min(z1, cs[size_t(i)][2]);
      z2 = std::max(z2, cs[size_t(i)][2]);
    }
  };
  double ax1, az1, ax2, az2, bx1, bz1, bx2, bz2;
  aabb(a, ax1, az1, ax2, az2);
  aabb(b, bx1, bz1, bx2, bz2);
  double x1 = std::max(ax1, bx1), x2 = std::min(ax2, bx2);
  double z1 = std::max(az1, bz1), z2 = std::min(az2, bz2);
  if (x1 >= x2 || z1 >= z2) return 0.0;
  double hx = (x2 - x1) / n, hz = (z2 - z1) / n;
  auto inside = [](const Box3& q, double px, double pz) {
    double c = std::cos(q.ry), s = std::sin(q.ry);
    double dx = px - q.x, dz = pz - q.z;
    double ox = c * dx - s * dz;   // object-frame length axis
    double oz = s * dx + c * dz;   // object-frame width axis
    return std::abs(ox) <= q.l * 0.5 && std::abs(oz) <= q.w * 0.5;
  };
  long cnt = 0;
  for (int i = 0; i < n; ++i) {
    double px = x1 + (i + 0.5) * hx;
    for (int j = 0; j < n; ++j) {
      double pz = z1 + (j + 0.5) * hz;
      if (inside(a, px, pz) && inside(b, px, pz)) ++cnt;
    }
  }
  return double(cnt) * hx * hz;
}

Box3 rand_box(Rng& rng) {
  Box3 b;
  b.x = rng.uniform(-2.0, 2.0);
  b.z = rng.uniform(-2.0, 2.0);
  b.y = rng.uniform(-1.0, 1.0);
  b.w = rng.uniform(0.8, 2.5);
  b.l = rng.uniform(0.8, 2.5);
  b.h = rng.uniform(0.8, 2.0);
  b.ry = rng.uniform(-kPi, kPi);
  return b;
}

}  // namespace

TEST_CASE("wrap_angle maps into [-pi, pi)") {
  CHECK(wrap_angle(0.3) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(wrap_angle(kPi) == doctest::Approx(-kPi).epsilon(1e-12));
  CHECK(wrap_angle(1.5 * kPi) == doctest::Approx(-0.5 * kPi).epsilon(1e-12));
  CHECK(wrap_angle(-1.5 * kPi) == doctest::Approx(0.5 * kPi).epsilon(1e-12));
  CHECK(wrap_angle(4 * kPi + 0.1) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("pinhole projection") {
  CalibP2 P = CalibP2::simple(700.0, 600.0, 180.0);
  double u, v;
  project_point(P, 1.0, 0.0, 10.0, u, v);
  CHECK(u == doctest::Approx(670.0).epsilon(1e-12));
  CHECK(v == doctest::Approx(180.0).epsilon(1e-12));
  project_point(P, 0.0, -1.0, 5.0, u, v);
  CHECK(u == doctest::Approx(600.0).epsilon(1e-12));
  CHECK(v == doctest::Approx(40.0).epsilon(1e-12));
  CHECK_THROWS(project_point(P, 0.0, 0.0, -1.0, u, v));
  CHECK_THROWS(project_point(P, 0.0, 0.0, 0.0, u, v));
}

TEST_CASE("box corners: axis aligned") {
  Box3 b{1.0, 2.0, 10.0, 2.0, 1.5, 4.0, 0.0};
  auto cs = box3d_corners(b);
  // x spans l, z spans w, y spans [y-h, y]
  double x1 = 1e30, x2 = -1e30, y1 = 1e30, y2 = -1e30, z1 = 1e30, z2 = -1e30;
  for (auto& c : cs) {
    x1 = std::min(x1, c[0]);
    x2 = std::max(x2, c[0]);
    y1 = std::min(y1, c[1]);
    y2 = std::max(y2, c[1]);
    z1 = std::min(z1, c[2]);
    z2 = std::max(z2, c[2]);
  }
  CHECK(x1 == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(x2 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(y1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(y2 == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(z1 == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(z2 == doctest::Approx(11.0).epsilon(1e-12));
}

TEST_CASE("box corners: quarter turn swaps extents") {
  Box3 b{1.0, 2.0, 10.0, 2.0, 1.5, 4.0, 0.5 * kPi};
  auto cs = box3d_corners(b);
  // first footprint corner: object-frame (+l/2, +w/2) rotated by pi/2
  CHECK(cs[0][0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(cs[0][2] == doctest::Approx(8.0).epsilon(1e-9));
  double x1 = 1e30, x2 = -1e30, z1 = 1e30, z2 = -1e30;
  for (auto& c : cs) {
    x1 = std::min(x1, c[0]);
    x2 = std::max(x2, c[0]);
    z1 = std::min(z1, c[2]);
    z2 = std::max(z2, c[2]);
  }
  CHECK(x2 - x1 == doctest::Approx(2.0).epsilon(1e-9));  // now spans w
  CHECK(z2 - z1 == doctest::Approx(4.0).epsilon(1e-9));  // now spans l
}

TEST_CASE("project_box3d: center and hull") {
  CalibP2 P = CalibP2::simple(700.0, 600.0, 180.0);
  Box3 b{1.0, 2.0, 10.0, 2.0, 1.5, 4.0, 0.0};
  double cu, cv;
  Box2 hull;
  project_box3d(b, P, cu, cv, hull);
  // geometric center (1, 1.25, 10)
  CHECK(cu == doctest::Approx(670.0).epsilon(1e-12));
  CHECK(cv == doctest::Approx(267.5).epsilon(1e-12));
  // near face (z=9) wins the horizontal extremes and the bottom edge; the
  // top edge (y=0.5, below the optical axis) projects highest via the far
  // face (z=11) where the downward offset shrinks
  CHECK(hull.x1 == doctest::Approx(600.0 + 700.0 * (-1.0) / 9.0).epsilon(1e-9));
  CHECK(hull.x2 == doctest::Approx(600.0 + 700.0 * (3.0) / 9.0).epsilon(1e-9));
  CHECK(hull.y1 == doctest::Approx(180.0 + 700.0 * (0.5) / 11.0).epsilon(1e-9));
  CHECK(hull.y2 == doctest::Approx(180.0 + 700.0 * (2.0) / 9.0).epsilon(1e-9));

  Box3 behind{0.0, 0.0, 1.0, 2.0, 1.0, 4.0, 0.0};  // near corners at z<0
  CHECK_THROWS(project_box3d(behind, P, cu, cv, hull));
}

TEST_CASE("iou2d frozen values") {
  CHECK(iou2d({0, 0, 2, 2}, {1, 1, 3, 3}) ==
        doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  CHECK(iou2d({0, 0, 2, 2}, {2, 0, 4, 2}) == 0.0);   // touching edge
  CHECK(iou2d({0, 0, 2, 2}, {5, 5, 6, 6}) == 0.0);   // disjoint
  CHECK(iou2d({0, 0, 2, 2}, {0, 0, 2, 2}) == doctest::Approx(1.0));
  CHECK(iou2d({0, 0, 4, 4}, {1, 1, 3, 3}) ==
        doctest::Approx(4.0 / 16.0).epsilon(1e-12));  // containment
}

TEST_CASE("bev intersection: hand cases") {
  // identical squares, one rotated a quarter turn
  Box3 a{0, 0, 0, 2, 1, 2, 0};
  Box3 b{0, 0, 0, 2, 1, 2, 0.5 * kPi};
  CHECK(bev_intersection_area(a, b) == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(bev_iou(a, b) == doctest::Approx(1.0).epsilon(1e-9));

  // square rotated 45 degrees inside itself: intersection is an octagon
  Box3 c{0, 0, 0, 2, 1, 2, 0.25 * kPi};
  // analytic: two unit squares (half-width 1) at 45 deg -> area 8*(sqrt(2)-1)
  double expect = 8.0 * (std::sqrt(2.0) - 1.0);
  CHECK(bev_intersection_area(a, c) == doctest::Approx(expect).epsilon(1e-9));

  // axis-aligned offset overlap
  Box3 d{1.0, 0, 1.0, 2, 1, 2, 0};
  CHECK(bev_intersection_area(a, d) == doctest::Approx(1.0).epsilon(1e-9));

  // touching edges -> degenerate sliver collapses to zero
  Box3 e{2.0, 0, 0.0, 2, 1, 2, 0};
  CHECK(bev_intersection_area(a, e) == 0.0);

  // containment
  Box3 f{0, 0, 0, 1, 1, 1, 0.3};
  CHECK(bev_intersection_area(a, f) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("bev intersection vs grid oracle") {
  Rng rng(2024);
  double worst = 0.0;
  for (int it = 0; it < 200; ++it) {
    Box3 a = rand_box(rng);
    Box3 b = rand_box(rng);
    double got = bev_intersection_area(a, b);
    double ref = bev_inter_grid(a, b, 300);
    worst = std::max(worst, std::abs(got - ref));
    CHECK(std::abs(got - ref) < 0.02);
    // symmetry and bounds hold exactly
    CHECK(bev_intersection_area(b, a) == doctest::Approx(got).epsilon(1e-9));
    CHECK(got <= std::min(a.w * a.l, b.w * b.l) + 1e-9);
    CHECK(got >= 0.0);
  }
  CHECK(worst < 0.02);
}

TEST_CASE("iou3d: axis-aligned exact oracle") {
  Rng rng(77);
  for (int it = 0; it < 100; ++it) {
    Box3 a = rand_box(rng);
    Box3 b = rand_box(rng);
    a.ry = 0.0;
    b.ry = 0.0;
    double ix = std::max(
        0.0, std::min(a.x + a.l / 2, b.x + b.l / 2) -
                 std::max(a.x - a.l / 2, b.x - b.l / 2));
    double iz = std::max(
        0.0, std::min(a.z + a.w / 2, b.z + b.w / 2) -
                 std::max(a.z - a.w / 2, b.z - b.w / 2));
    double iy =
        std::max(0.0, std::min(a.y, b.y) - std::max(a.y - a.h, b.y - b.h));
    double inter = ix * iz * iy;
    double uni = a.w * a.h * a.l + b.w * b.h * b.l - inter;
    double expect = uni > 0 ? inter / uni : 0.0;
    // grid-degenerate slivers are floored to zero by the polygon clip
    if (inter > 1e-6)
      CHECK(iou3d(a, b) == doctest::Approx(expect).epsilon(1e-9));
    else
      CHECK(iou3d(a, b) <= expect + 1e-9);
  }
}

TEST_CASE("iou3d: vertical separation kills overlap") {
  Box3 a{0, 0, 0, 2, 1, 2, 0};
  Box3 b = a;
  b.y = 1.0;  // b spans [0,1], a spans [-1,0]: touching only
  CHECK(iou3d(a, b) == 0.0);
  b.y = 0.5;  // half overlap in y, identical footprint
  // inter = 4*0.5 = 2; union = 4 + 4 - 2 = 6
  CHECK(iou3d(a, b) == doctest::Approx(2.0 / 6.0).epsilon(1e-9));
  CHECK(iou3d(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}
