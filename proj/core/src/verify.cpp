#include "monomm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "monomm/anchors.hpp"
#include "monomm/conv.hpp"
#include "monomm/dap.hpp"
#include "monomm/deform.hpp"
#include "monomm/eval.hpp"
#include "monomm/geometry.hpp"
#include "monomm/gradcheck.hpp"
#include "monomm/losses.hpp"
#include "monomm/ops.hpp"
#include "monomm/rng.hpp"
#include "monomm/scan.hpp"

namespace monomm {

bool VerifyReport::ok() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

std::string VerifyReport::text() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.passed ? "PASS" : "FAIL") << "  " << suite << "/" << c.name;
    if (!c.detail.empty()) os << "  [" << c.detail << "]";
    os << "\n";
  }
  return os.str();
}

namespace {

using Td = Tensor<double>;
using Fn = std::function<Td(std::vector<Td>&)>;
constexpr double kPi = 3.14159265358979323846;

std::string fmt_g(const char* label, double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%s %.3g", label, v);
  return b;
}

// Scalarizes an op output against a fixed random probe so index-shuffling
// backward bugs cannot cancel under a plain sum.
Td probe_loss(const Td& out, const Td& probe) {
  return sum(mul(out, probe));
}

double fd_conv2d(Rng& rng) {
  int ci = int(rng.uniform_int(1, 3));
  int g = (rng.uniform() < 0.3) ? ci : 1;
  int co = int(rng.uniform_int(1, 3)) * g;
  ConvSpec cs;
  cs.kh = int(rng.uniform_int(1, 3));
  cs.kw = int(rng.uniform_int(1, 3));
  cs.sh = int(rng.uniform_int(1, 2));
  cs.sw = int(rng.uniform_int(1, 2));
  cs.ph = int(rng.uniform_int(0, cs.kh / 2));
  cs.pw = int(rng.uniform_int(0, cs.kw / 2));
  cs.dh = int(rng.uniform_int(1, 2));
  cs.dw = 1;
  cs.groups = g;
  int h = int(rng.uniform_int(cs.dh * (cs.kh - 1) + 1, 6));
  int w = int(rng.uniform_int(cs.kw, 6));
  Td x = Td::randn({ci, h, w}, rng);
  Td wt = Td::randn({co, ci / g, cs.kh, cs.kw}, rng, 0.0, 0.7);
  Td b = Td::randn({co}, rng);
  Td probe;
  {
    NoGradGuard ng;
    probe = Td::randn(conv2d(x, wt, b, cs).shape(), rng);
  }
  Fn f = [cs, probe](std::vector<Td>& in) {
    return probe_loss(conv2d(in[0], in[1], in[2], cs), probe);
  };
  return finite_diff_check<double>(f, {x, wt, b}, 1e-5);
}

double fd_conv_transpose2d(Rng& rng) {
  int ci = int(rng.uniform_int(1, 3));
  int co = int(rng.uniform_int(1, 3));
  ConvSpec cs;
  cs.kh = int(rng.uniform_int(1, 3));
  cs.kw = int(rng.uniform_int(1, 3));
  cs.sh = int(rng.uniform_int(1, 2));
  cs.sw = int(rng.uniform_int(1, 2));
  cs.ph = int(rng.uniform_int(0, (cs.kh - 1) / 2));
  cs.pw = int(rng.uniform_int(0, (cs.kw - 1) / 2));
  int h = int(rng.uniform_int(1, 5));
  int w = int(rng.uniform_int(1, 5));
  Td x = Td::randn({ci, h, w}, rng);
  Td wt = Td::randn({ci, co, cs.kh, cs.kw}, rng, 0.0, 0.7);
  Td b = Td::randn({co}, rng);
  Td probe;
  {
    NoGradGuard ng;
    probe = Td::randn(conv_transpose2d(x, wt, b, cs).shape(), rng);
  }
  Fn f = [cs, probe](std::vector<Td>& in) {
    return probe_loss(conv_transpose2d(in[0], in[1], in[2], cs), probe);
  };
  return finite_diff_check<double>(f, {x, wt, b}, 1e-5);
}

double fd_pool(Rng& rng, PoolKind kind) {
  int c = int(rng.uniform_int(1, 3));
  int kh = int(rng.uniform_int(1, 3)), kw = int(rng.uniform_int(1, 3));
  int h = int(rng.uniform_int(kh, 6)), w = int(rng.uniform_int(kw, 6));
  int sh = int(rng.uniform_int(1, 2)), sw = int(rng.uniform_int(1, 2));
  Td x = Td::randn({c, h, w}, rng);  // continuous draws: max ties measure-zero
  Td probe;
  {
    NoGradGuard ng;
    probe = Td::randn(pool2d(x, kind, kh, kw, sh, sw).shape(), rng);
  }
  Fn f = [=](std::vector<Td>& in) {
    return probe_loss(pool2d(in[0], kind, kh, kw, sh, sw), probe);
  };
  return finite_diff_check<double>(f, x, 1e-5);
}

double fd_linear(Rng& rng) {
  int m = int(rng.uniform_int(1, 5));
  int k = int(rng.uniform_int(1, 6));
  int o = int(rng.uniform_int(1, 5));
  Td x = Td::randn({m, k}, rng);
  Td w = Td::randn({o, k}, rng, 0.0, 0.7);
  Td b = Td::randn({o}, rng);
  Td probe = Td::randn({m, o}, rng);
  Fn f = [probe](std::vector<Td>& in) {
    return probe_loss(linear(in[0], in[1], in[2]), probe);
  };
  return finite_diff_check<double>(f, {x, w, b}, 1e-5);
}

double fd_silu(Rng& rng) {
  int n = int(rng.uniform_int(1, 12));
  Td x = Td::randn({n}, rng, 0.0, 2.0);
  Td probe = Td::randn({n}, rng);
  Fn f = [probe](std::vector<Td>& in) { return probe_loss(silu(in[0]), probe); };
  return finite_diff_check<double>(f, x, 1e-5);
}

double fd_softplus(Rng& rng) {
  int n = int(rng.uniform_int(1, 12));
  Td x = Td::randn({n}, rng, 0.0, 2.0);
  Td probe = Td::randn({n}, rng);
  Fn f = [probe](std::vector<Td>& in) {
    return probe_loss(softplus(in[0]), probe);
  };
  return finite_diff_check<double>(f, x, 1e-5);
}

double fd_layer_norm(Rng& rng) {
  int r = int(rng.uniform_int(1, 4));
  // at c = 2 every x-direction is eps-suppressed (gradient ~ eps/var), below
  // what central differences can resolve against an O(1) loss; c >= 3 keeps
  // the probe well-conditioned without loosening the tolerance
  int c = int(rng.uniform_int(3, 8));
  Td x = Td::randn({r, c}, rng, 0.3, 1.5);
  Td g = Td::randn({c}, rng, 1.0, 0.3);
  Td b = Td::randn({c}, rng, 0.0, 0.3);
  Td probe = Td::randn({r, c}, rng);
  Fn f = [probe](std::vector<Td>& in) {
    return probe_loss(layer_norm(in[0], in[1], in[2]), probe);
  };
  return finite_diff_check<double>(f, {x, g, b}, 1e-5);
}

// Sample positions are integer + offset, and bilinear interpolation kinks at
// integers; an offset within the FD window of one makes the central
// difference straddle the corner. Shift those draws off the seam.
void nudge_off_integers(Td& off) {
  for (auto& v : off.raw())
    if (std::abs(v - std::round(v)) < 1e-3) v += 0.05;
}

double fd_causal_conv1d(Rng& rng) {
  int t = int(rng.uniform_int(1, 6));
  int e = int(rng.uniform_int(1, 4));
  int k = int(rng.uniform_int(1, 4));
  Td x = Td::randn({t, e}, rng);
  Td w = Td::randn({k, e}, rng, 0.0, 0.7);
  Td b = Td::randn({e}, rng);
  Td probe = Td::randn({t, e}, rng);
  Fn f = [probe](std::vector<Td>& in) {
    return probe_loss(causal_conv1d(in[0], in[1], in[2]), probe);
  };
  return finite_diff_check<double>(f, {x, w, b}, 1e-5);
}

double fd_deform_conv1d(Rng& rng) {
  int t = int(rng.uniform_int(2, 6));
  int e = int(rng.uniform_int(1, 3));
  int k = int(rng.uniform_int(1, 4));
  Td x = Td::randn({t, e}, rng);
  Td off = Td::randn({t, k}, rng, 0.0, 0.37);
  nudge_off_integers(off);
  Td w = Td::randn({k, e}, rng, 0.0, 0.7);
  Td b = Td::randn({e}, rng);
  Td probe = Td::randn({t, e}, rng);
  Fn f = [probe](std::vector<Td>& in) {
    return probe_loss(deform_conv1d(in[0], in[1], in[2], in[3]), probe);
  };
  return finite_diff_check<double>(f, {x, off, w, b}, 1e-5);
}

double fd_deform_conv2d(Rng& rng) {
  int rows = int(rng.uniform_int(2, 4));
  int cols = int(rng.uniform_int(2, 4));
  int e = int(rng.uniform_int(1, 3));
  int K = rng.uniform() < 0.3 ? 1 : 3;
  Td x = Td::randn({rows * cols, e}, rng);
  Td off = Td::randn({rows * cols, 2 * K * K}, rng, 0.0, 0.37);
  nudge_off_integers(off);
  Td w = Td::randn({K * K, e}, rng, 0.0, 0.7);
  Td b = Td::randn({e}, rng);
  Td probe = Td::randn({rows * cols, e}, rng);
  Fn f = [=](std::vector<Td>& in) {
    return probe_loss(deform_conv2d_grid(in[0], in[1], in[2], in[3], rows,
                                         cols, K),
                      probe);
  };
  return finite_diff_check<double>(f, {x, off, w, b}, 1e-5);
}

double fd_selective_scan(Rng& rng) {
  int t = int(rng.uniform_int(2, 8));
  int e = int(rng.uniform_int(1, 3));
  const int ns[] = {4, 8, 16, 5};  // 5 exercises the generic-width path
  int n = ns[rng.uniform_int(0, 3)];
  Td u = Td::randn({t, e}, rng);
  Td delta = Td::rand_uniform({t, e}, rng, 0.02, 0.4);
  Td B = Td::randn({t, n}, rng, 0.0, 0.5);
  Td C = Td::randn({t, n}, rng, 0.0, 0.5);
  Td a_log = Td::rand_uniform({e, n}, rng, -2.0, 0.5);
  Td d = Td::randn({e}, rng);
  Td probe = Td::randn({t, e}, rng);
  Fn f = [probe](std::vector<Td>& in) {
    return probe_loss(
        selective_scan(in[0], in[1], in[2], in[3], in[4], in[5]), probe);
  };
  return finite_diff_check<double>(f, {u, delta, B, C, a_log, d}, 1e-5);
}

double fd_binary_focal(Rng& rng) {
  int n = int(rng.uniform_int(2, 12));
  Td z = Td::randn({n}, rng, 0.0, 2.0);
  std::vector<uint8_t> targets(size_t(n), 0);
  std::vector<double> weights(size_t(n), 0.0);
  for (int i = 0; i < n; ++i) {
    targets[size_t(i)] = uint8_t(rng.uniform() < 0.5);
    weights[size_t(i)] = rng.uniform() < 0.25 ? 0.0 : rng.uniform(0.1, 1.0);
  }
  double alpha = rng.uniform(0.1, 0.9);
  double gamma = rng.uniform() < 0.3 ? 0.0 : 2.0;
  Fn f = [=](std::vector<Td>& in) {
    return masked_binary_focal(in[0], targets, weights, alpha, gamma);
  };
  return finite_diff_check<double>(f, z, 1e-5);
}

double fd_smooth_l1(Rng& rng) {
  int n = int(rng.uniform_int(2, 12));
  double delta = rng.uniform(0.4, 2.0);
  Td p = Td::randn({n}, rng);
  std::vector<double> target(size_t(n), 0.0), weights(size_t(n), 0.0);
  for (int i = 0; i < n; ++i) {
    target[size_t(i)] = rng.normal();
    weights[size_t(i)] = rng.uniform() < 0.25 ? 0.0 : rng.uniform(0.1, 1.0);
    // the loss is only C^1 at |d| = delta; nudge FD probes off the seam
    double d = std::abs(p.data()[i] - target[size_t(i)]);
    if (std::abs(d - delta) < 1e-3) p.raw()[size_t(i)] += 0.05;
  }
  Fn f = [=](std::vector<Td>& in) {
    return masked_smooth_l1(in[0], target, weights, delta);
  };
  return finite_diff_check<double>(f, p, 1e-5);
}

double fd_depth_loss(Rng& rng) {
  RunConfig cfg;
  cfg.dap_bins = int(rng.uniform_int(2, 5));
  int h = int(rng.uniform_int(1, 3)), w = int(rng.uniform_int(1, 4));
  Td logits = Td::randn({cfg.dap_bins, h, w}, rng, 0.0, 1.5);
  std::vector<int32_t> bins(size_t(h) * size_t(w));
  for (auto& b : bins)
    b = rng.uniform() < 0.3 ? kDepthInvalid
                            : int32_t(rng.uniform_int(0, cfg.dap_bins - 1));
  Fn f = [=](std::vector<Td>& in) { return depth_loss(in[0], bins, cfg); };
  return finite_diff_check<double>(f, logits, 1e-5);
}

// Forward value is exactly silu(x) but the recorded gradient carries a
// +1e-2 bias: the x - snapshot(x) term is identically zero at every probe
// point yet differentiates to 1. A healthy harness must flag this.
double fd_injected_bug(Rng& rng) {
  int n = int(rng.uniform_int(3, 8));
  Td x = Td::randn({n}, rng);
  Td probe = Td::randn({n}, rng);
  Fn f = [probe](std::vector<Td>& in) {
    Td snap = Td::from_data(in[0].shape(), in[0].raw());
    Td ghost = scale(sub(in[0], snap), 1e-2);
    return probe_loss(add(silu(in[0]), ghost), probe);
  };
  return finite_diff_check<double>(f, x, 1e-5);
}

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
    double ox = c * dx - s * dz;
    double oz = s * dx + c * dz;
    return std::abs(ox) <= q.l / 2 && std::abs(oz) <= q.w / 2;
  };
  int64_t hits = 0;
  for (int i = 0; i < n; ++i) {
    double px = x1 + (i + 0.5) * hx;
    for (int j = 0; j < n; ++j) {
      double pz = z1 + (j + 0.5) * hz;
      if (inside(a, px, pz) && inside(b, px, pz)) ++hits;
    }
  }
  return double(hits) * hx * hz;
}

Box3 rand_box3(Rng& rng) {
  Box3 b;
  b.x = rng.uniform(-2.0, 2.0);
  b.z = rng.uniform(-2.0, 2.0);
  b.y = rng.uniform(-1.0, 1.0);
  b.w = rng.uniform(1.0, 3.0);
  b.l = rng.uniform(1.0, 3.0);
  b.h = rng.uniform(0.8, 2.0);
  b.ry = rng.uniform(-kPi, kPi);
  return b;
}

double angle_gap(double a, double b) { return std::abs(wrap_angle(a - b)); }

}  // namespace

VerifyReport verify_gradcheck(int shapes_per_op, bool inject_bug,
                              uint64_t seed) {
  VerifyReport r;
  r.suite = "gradcheck";
  Rng rng(seed);
  const double tol = 1e-4;
  struct Entry {
    const char* name;
    std::function<double(Rng&)> one;
  };
  std::vector<Entry> entries = {
      {"conv2d", fd_conv2d},
      {"conv_transpose2d", fd_conv_transpose2d},
      {"max_pool", [](Rng& g) { return fd_pool(g, PoolKind::kMax); }},
      {"avg_pool", [](Rng& g) { return fd_pool(g, PoolKind::kAvg); }},
      {"linear", fd_linear},
      {"silu", fd_silu},
      {"softplus", fd_softplus},
      {"layer_norm", fd_layer_norm},
      {"causal_conv1d", fd_causal_conv1d},
      {"deform_conv1d", fd_deform_conv1d},
      {"deform_conv2d", fd_deform_conv2d},
      {"selective_scan", fd_selective_scan},
      {"binary_focal", fd_binary_focal},
      {"smooth_l1", fd_smooth_l1},
      {"depth_loss", fd_depth_loss},
  };
  if (inject_bug) entries.push_back({"silu_injected_bug", fd_injected_bug});
  for (const auto& e : entries) {
    double worst = 0.0;
    for (int i = 0; i < shapes_per_op; ++i)
      worst = std::max(worst, e.one(rng));
    r.checks.push_back({e.name, worst < tol, fmt_g("max rel err", worst)});
  }
  return r;
}

VerifyReport verify_scan(int params_per_length, uint64_t seed) {
  VerifyReport r;
  r.suite = "scan";
  Rng rng(seed);
  NoGradGuard ng;
  const int lengths[] = {1, 2, 3, 7, 8, 64, 255, 1024};
  for (int t : lengths) {
    double worst = 0.0;
    for (int p = 0; p < params_per_length; ++p) {
      int e = int(rng.uniform_int(1, 3));
      const int ns[] = {4, 8, 16};
      int n = ns[p % 3];
      Td u = Td::randn({t, e}, rng);
      Td delta = Td::rand_uniform({t, e}, rng, 0.01, 0.5);
      Td B = Td::randn({t, n}, rng, 0.0, 0.5);
      Td C = Td::randn({t, n}, rng, 0.0, 0.5);
      Td a_log = Td::rand_uniform({e, n}, rng, -2.0, 0.5);
      Td d = Td::randn({e}, rng);
      Td fast = selective_scan(u, delta, B, C, a_log, d, true);
      Td ref = selective_scan(u, delta, B, C, a_log, d, false);
      for (int64_t i = 0; i < fast.numel(); ++i)
        worst = std::max(worst, std::abs(fast.data()[i] - ref.data()[i]));
    }
    char name[32];
    std::snprintf(name, sizeof name, "T=%d", t);
    r.checks.push_back({name, worst <= 1e-10, fmt_g("max |diff|", worst)});
  }
  return r;
}

VerifyReport verify_iou(int pairs, int roundtrips, uint64_t seed) {
  VerifyReport r;
  r.suite = "iou";
  Rng rng(seed);
  double worst_bev = 0.0, worst_3d = 0.0;
  for (int it = 0; it < pairs; ++it) {
    Box3 a = rand_box3(rng);
    Box3 b = rand_box3(rng);
    double inter = bev_inter_grid(a, b, 2000);
    double area_a = a.w * a.l, area_b = b.w * b.l;
    double ref_bev = inter / (area_a + area_b - inter);
    worst_bev = std::max(worst_bev, std::abs(bev_iou(a, b) - ref_bev));
    double dy = std::max(0.0, std::min(a.y, b.y) -
                                  std::max(a.y - a.h, b.y - b.h));
    double i3 = inter * dy;
    double ref_3d = i3 / (area_a * a.h + area_b * b.h - i3);
    worst_3d = std::max(worst_3d, std::abs(iou3d(a, b) - ref_3d));
  }
  r.checks.push_back(
      {"bev_iou vs grid oracle", worst_bev <= 0.01, fmt_g("max |diff|", worst_bev)});
  r.checks.push_back(
      {"iou3d vs grid oracle", worst_3d <= 0.01, fmt_g("max |diff|", worst_3d)});

  CalibP2 P = CalibP2::simple(700.0, 620.0, 190.0);
  double worst_rt = 0.0;
  for (int it = 0; it < roundtrips; ++it) {
    Anchor a;
    a.x2d = rng.uniform(100.0, 1100.0);
    a.y2d = rng.uniform(50.0, 330.0);
    a.w2d = rng.uniform(15.0, 250.0);
    a.h2d = rng.uniform(15.0, 250.0);
    a.xp = a.x2d + rng.uniform(-10.0, 10.0);
    a.yp = a.y2d + rng.uniform(-10.0, 10.0);
    a.z = rng.uniform(4.0, 60.0);
    a.sig_z = rng.uniform(0.5, 3.0);
    a.w3d = rng.uniform(0.5, 2.5);
    a.h3d = rng.uniform(0.8, 2.0);
    a.l3d = rng.uniform(0.8, 4.5);
    a.theta = rng.uniform(-kPi, kPi);
    GroundTruthObject gt;
    gt.z = rng.uniform(4.0, 70.0);
    gt.x = rng.uniform(-0.03, 0.03) * gt.z * 10.0;
    gt.y = rng.uniform(-1.0, 3.0);
    gt.h = rng.uniform(0.5, 2.2);
    gt.w = rng.uniform(0.4, 2.5);
    gt.l = rng.uniform(0.5, 5.0);
    gt.ry = rng.uniform(-kPi, kPi);
    double x1 = rng.uniform(0.0, 1100.0), y1 = rng.uniform(0.0, 300.0);
    gt.bbox = Box2{x1, y1, x1 + rng.uniform(10.0, 140.0),
                   y1 + rng.uniform(10.0, 80.0)};
    auto t = encode_targets(a, gt, P);
    Box2 b2;
    Box3 b3;
    double theta = 0.0;
    decode_box(a, t.data(), P, b2, b3, theta);
    double e = 0.0;
    e = std::max(e, std::abs(b2.x1 - gt.bbox.x1));
    e = std::max(e, std::abs(b2.y1 - gt.bbox.y1));
    e = std::max(e, std::abs(b2.x2 - gt.bbox.x2));
    e = std::max(e, std::abs(b2.y2 - gt.bbox.y2));
    e = std::max(e, std::abs(b3.x - gt.x));
    e = std::max(e, std::abs(b3.y - gt.y));
    e = std::max(e, std::abs(b3.z - gt.z));
    e = std::max(e, std::abs(b3.w - gt.w));
    e = std::max(e, std::abs(b3.h - gt.h));
    e = std::max(e, std::abs(b3.l - gt.l));
    e = std::max(e, angle_gap(b3.ry, gt.ry));
    e = std::max(e, angle_gap(theta, gt.ry - std::atan2(gt.x, gt.z)));
    worst_rt = std::max(worst_rt, e);
  }
  r.checks.push_back({"encode/decode round-trip", worst_rt < 1e-6,
                      fmt_g("max |err|", worst_rt)});
  return r;
}

namespace {

// Exhaustive AP|40: best precision at or beyond each recall target, swept
// over every prefix of the score-ranked tp/fp sequence.
double ap40_exhaustive(std::vector<std::pair<double, bool>> scored,
                       int64_t n_gt) {
  if (n_gt == 0) return 0.0;
  std::sort(scored.begin(), scored.end(),
            [](auto& a, auto& b) { return a.first > b.first; });
  double ap = 0.0;
  for (int k = 1; k <= 40; ++k) {
    double want = k / 40.0;
    double best = 0.0;
    int64_t tp = 0;
    for (size_t i = 0; i < scored.size(); ++i) {
      tp += scored[i].second ? 1 : 0;
      double recall = double(tp) / double(n_gt);
      double prec = double(tp) / double(i + 1);
      if (recall >= want) best = std::max(best, prec);
    }
    ap += best;
  }
  return ap / 40.0;
}

}  // namespace

VerifyReport verify_ap(int instances, uint64_t seed) {
  VerifyReport r;
  r.suite = "ap";
  RunConfig cfg;
  cfg.eval_iou = {0.5, 0.5, 0.5};
  DifficultyRules rules = DifficultyRules::from_config(cfg);
  Rng rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < instances; ++trial) {
    EvalFrame f;
    int ng = int(rng.uniform_int(0, 5));
    int nd = int(rng.uniform_int(0, 10));
    for (int g = 0; g < ng; ++g) {
      double x = rng.uniform(0.0, 300.0), y = rng.uniform(0.0, 100.0);
      GroundTruthObject gt;
      gt.cls = "Car";
      gt.bbox = Box2{x, y, x + rng.uniform(30.0, 80.0),
                     y + rng.uniform(45.0, 90.0)};
      f.gts.push_back(gt);
    }
    for (int d = 0; d < nd; ++d) {
      Detection det;
      det.cls = 0;
      det.score = rng.uniform(0.05, 1.0);
      double x = rng.uniform(0.0, 300.0), y = rng.uniform(0.0, 100.0);
      det.box2d = Box2{x, y, x + rng.uniform(30.0, 80.0),
                       y + rng.uniform(45.0, 90.0)};
      f.dets.push_back(det);
    }
    // replicate the greedy score-descending matching to get the tp sequence
    std::vector<size_t> order(f.dets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
      return f.dets[i].score > f.dets[j].score;
    });
    std::vector<char> used(f.gts.size(), 0);
    std::vector<std::pair<double, bool>> scored;
    for (size_t di : order) {
      double best = -1.0;
      int64_t bg = -1;
      for (size_t g = 0; g < f.gts.size(); ++g) {
        if (used[g]) continue;
        double v = iou2d(f.dets[di].box2d, f.gts[g].bbox);
        if (v >= 0.5 && v > best) {
          best = v;
          bg = int64_t(g);
        }
      }
      if (bg >= 0) used[size_t(bg)] = 1;
      scored.push_back({f.dets[di].score, bg >= 0});
    }
    double expect = ap40_exhaustive(scored, ng);
    double got = ap40({f}, cfg, 0, IouKind::k2d, 2, rules);
    worst = std::max(worst, std::abs(got - expect));
  }
  r.checks.push_back(
      {"ap40 vs exhaustive sweep", worst <= 1e-12, fmt_g("max |diff|", worst)});

  EvalFrame perfect;
  for (int i = 0; i < 6; ++i) {
    GroundTruthObject gt;
    gt.cls = "Car";
    gt.bbox = Box2{40.0 * i, 10.0, 40.0 * i + 35.0, 80.0};
    perfect.gts.push_back(gt);
    Detection det;
    det.cls = 0;
    det.score = 0.9 - 0.05 * i;
    det.box2d = gt.bbox;
    perfect.dets.push_back(det);
  }
  double ap_perfect = ap40({perfect}, cfg, 0, IouKind::k2d, 2, rules);
  r.checks.push_back({"perfect detections", ap_perfect == 1.0,
                      fmt_g("ap40", ap_perfect)});

  EvalFrame empty;
  empty.gts = perfect.gts;
  double ap_empty = ap40({empty}, cfg, 0, IouKind::k2d, 2, rules);
  r.checks.push_back({"no detections", ap_empty == 0.0, fmt_g("ap40", ap_empty)});
  return r;
}

}  // namespace monomm
