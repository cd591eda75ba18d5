#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "monomm/eval.hpp"
#include "monomm/rng.hpp"

using namespace monomm;

namespace {

GroundTruthObject gt_at(const std::string& cls, Box2 bbox, double trunc = 0,
                        int occ = 0) {
  GroundTruthObject g;
  g.cls = cls;
  g.bbox = bbox;
  g.truncation = trunc;
  g.occlusion = occ;
  g.h = 1.5;
  g.w = 1.6;
  g.l = 3.9;
  g.z = 10;
  g.y = 1.5;
  return g;
}

Detection det_at(int cls, double score, Box2 b) {
  Detection d;
  d.cls = cls;
  d.score = score;
  d.box2d = b;
  return d;
}

// Literal transcription of the metric definition, structured independently
// of the implementation: evaluate every ranking prefix, then take the best
// precision at each of the 40 recall positions.
double ap40_bruteforce(std::vector<std::pair<double, bool>> scored,
                       long n_gt) {
  if (n_gt == 0) return 0.0;
  std::sort(scored.begin(), scored.end(),
            [](auto& a, auto& b) { return a.first > b.first; });
  double ap = 0;
  for (int k = 1; k <= 40; ++k) {
    double want_recall = k / 40.0;
    double best_prec = 0;
    long tp = 0;
    for (size_t n = 0; n < scored.size(); ++n) {
      tp += scored[n].second ? 1 : 0;
      double recall = double(tp) / double(n_gt);
      double prec = double(tp) / double(n + 1);
      if (recall >= want_recall) best_prec = std::max(best_prec, prec);
    }
    ap += best_prec;
  }
  return ap / 40.0;
}

}  // namespace

TEST_CASE("difficulty bucketing follows the rule table") {
  RunConfig cfg;
  DifficultyRules r = DifficultyRules::from_config(cfg);
  CHECK(difficulty(gt_at("Car", {0, 0, 30, 50}), r) == Difficulty::kEasy);
  CHECK(difficulty(gt_at("Car", {0, 0, 30, 30}, 0.2, 1), r) ==
        Difficulty::kModerate);
  CHECK(difficulty(gt_at("Car", {0, 0, 30, 10}), r) == Difficulty::kIgnored);
  CHECK(difficulty(gt_at("Car", {0, 0, 30, 200}, 0.4, 0), r) ==
        Difficulty::kHard);
  CHECK(difficulty(gt_at("Car", {0, 0, 30, 200}, 0.0, 2), r) ==
        Difficulty::kHard);
  CHECK(difficulty(gt_at("Car", {0, 0, 30, 200}, 0.0, 3), r) ==
        Difficulty::kIgnored);
  CHECK(difficulty(gt_at("Car", {0, 0, 30, 200}, 0.6, 0), r) ==
        Difficulty::kIgnored);
  // exactly-on-boundary values are inside the bucket
  CHECK(difficulty(gt_at("Car", {0, 0, 30, 40}, 0.15, 0), r) ==
        Difficulty::kEasy);
}

TEST_CASE("ap40: perfect detection and empty fixtures") {
  RunConfig cfg;
  DifficultyRules r = DifficultyRules::from_config(cfg);
  EvalFrame f;
  f.gts = {gt_at("Car", {100, 100, 150, 150})};
  f.dets = {det_at(0, 0.9, {100, 100, 150, 150})};
  CHECK(ap40({f}, cfg, 0, IouKind::k2d, 2, r) == doctest::Approx(1.0));

  EvalFrame empty_dets;
  empty_dets.gts = f.gts;
  CHECK(ap40({empty_dets}, cfg, 0, IouKind::k2d, 2, r) == 0.0);

  // no counted gt at all -> 0 even with detections present
  EvalFrame no_gt;
  no_gt.dets = f.dets;
  CHECK(ap40({no_gt}, cfg, 0, IouKind::k2d, 2, r) == 0.0);
}

TEST_CASE("ap40: false positive ahead of the true positive halves AP") {
  RunConfig cfg;
  cfg.eval_iou = {0.7, 0.5, 0.5};
  DifficultyRules r = DifficultyRules::from_config(cfg);
  EvalFrame f;
  f.gts = {gt_at("Car", {100, 100, 150, 150})};
  f.dets = {det_at(0, 0.9, {400, 100, 450, 150}),    // FP, higher score
            det_at(0, 0.8, {100, 100, 150, 150})};   // TP
  CHECK(ap40({f}, cfg, 0, IouKind::k2d, 2, r) == doctest::Approx(0.5));
  // raising the TP's score past the FP lifts AP to 1 (monotonicity)
  f.dets[1].score = 0.95;
  CHECK(ap40({f}, cfg, 0, IouKind::k2d, 2, r) == doctest::Approx(1.0));
}

TEST_CASE("ap40: DontCare and harder-bucket gts absorb without counting") {
  RunConfig cfg;
  DifficultyRules r = DifficultyRules::from_config(cfg);
  EvalFrame f;
  f.gts = {gt_at("Car", {100, 100, 150, 150}),
           gt_at("DontCare", {300, 100, 360, 160})};
  f.gts[1].h = f.gts[1].w = f.gts[1].l = -1;  // sentinel fields
  // det fully inside the DontCare region is neither TP nor FP
  f.dets = {det_at(0, 0.95, {305, 105, 355, 155}),
            det_at(0, 0.90, {100, 100, 150, 150})};
  CHECK(ap40({f}, cfg, 0, IouKind::k2d, 2, r) == doctest::Approx(1.0));

  // heavily occluded gt is outside the Easy bucket: it does not count,
  // but a detection on it is not punished either
  EvalFrame g;
  g.gts = {gt_at("Car", {100, 100, 150, 150}),
           gt_at("Car", {300, 100, 350, 150}, 0.0, 2)};
  g.dets = {det_at(0, 0.95, {300, 100, 350, 150}),
            det_at(0, 0.90, {100, 100, 150, 150})};
  CHECK(ap40({g}, cfg, 0, IouKind::k2d, 0, r) == doctest::Approx(1.0));
  // ...while in the Hard bucket both gts count and both dets hit
  CHECK(ap40({g}, cfg, 0, IouKind::k2d, 2, r) == doctest::Approx(1.0));

  // a second det on an already-matched gt is a plain FP
  EvalFrame h;
  h.gts = {gt_at("Car", {100, 100, 150, 150})};
  h.dets = {det_at(0, 0.95, {100, 100, 150, 150}),
            det_at(0, 0.90, {101, 101, 151, 151})};
  double ap = ap40({h}, cfg, 0, IouKind::k2d, 2, r);
  CHECK(ap == doctest::Approx(1.0));  // TP ranked first; FP after full recall
}

TEST_CASE("ap40 matches the brute-force PR oracle on random instances") {
  RunConfig cfg;
  cfg.eval_iou = {0.5, 0.5, 0.5};
  DifficultyRules r = DifficultyRules::from_config(cfg);
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    EvalFrame f;
    int ng = rng.uniform_int(0, 5);
    int nd = rng.uniform_int(0, 10);
    for (int g = 0; g < ng; ++g) {
      double x = rng.uniform(0.0, 300.0), y = rng.uniform(0.0, 100.0);
      double w = rng.uniform(30.0, 80.0), hh = rng.uniform(45.0, 90.0);
      f.gts.push_back(gt_at("Car", {x, y, x + w, y + hh}));
    }
    for (int d = 0; d < nd; ++d) {
      double x = rng.uniform(0.0, 300.0), y = rng.uniform(0.0, 100.0);
      double w = rng.uniform(30.0, 80.0), hh = rng.uniform(45.0, 90.0);
      f.dets.push_back(
          det_at(0, rng.uniform(0.05, 1.0), {x, y, x + w, y + hh}));
    }
    // replicate the greedy matching literally to get the tp/fp sequence
    std::vector<size_t> order(f.dets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
      return f.dets[i].score > f.dets[j].score;
    });
    std::vector<char> used(f.gts.size(), 0);
    std::vector<std::pair<double, bool>> scored;
    for (size_t di : order) {
      double best = -1;
      long bg = -1;
      for (size_t g = 0; g < f.gts.size(); ++g) {
        if (used[g]) continue;
        double v = iou2d(f.dets[di].box2d, f.gts[g].bbox);
        if (v >= 0.5 && v > best) {
          best = v;
          bg = long(g);
        }
      }
      if (bg >= 0) used[size_t(bg)] = 1;
      scored.push_back({f.dets[di].score, bg >= 0});
    }
    double expect = ap40_bruteforce(scored, ng);
    double got = ap40({f}, cfg, 0, IouKind::k2d, 2, r);
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("ap40 pools frames at the dataset level") {
  RunConfig cfg;
  DifficultyRules r = DifficultyRules::from_config(cfg);
  // frame 1: one gt found; frame 2: one gt missed -> recall caps at 0.5
  EvalFrame f1, f2;
  f1.gts = {gt_at("Car", {100, 100, 150, 150})};
  f1.dets = {det_at(0, 0.9, {100, 100, 150, 150})};
  f2.gts = {gt_at("Car", {100, 100, 150, 150})};
  double ap = ap40({f1, f2}, cfg, 0, IouKind::k2d, 2, r);
  // 20 of 40 recall points reachable at precision 1
  CHECK(ap == doctest::Approx(0.5));
}

TEST_CASE("report emits both table and key=value forms") {
  RunConfig cfg;
  EvalFrame f;
  f.gts = {gt_at("Car", {100, 100, 150, 150})};
  Detection d = det_at(0, 0.9, {100, 100, 150, 150});
  d.box3d = f.gts[0].box3();
  f.dets = {d};
  EvalReport rep = evaluate_frames({f}, cfg);
  REQUIRE(rep.per_class.size() == 3);
  CHECK(rep.per_class[0].cls == "Car");
  CHECK(rep.per_class[0].ap3d[2] == doctest::Approx(1.0));
  CHECK(rep.per_class[0].apbev[2] == doctest::Approx(1.0));
  CHECK(rep.per_class[1].ap3d[0] == 0.0);  // no Pedestrian gts
  std::string kv = rep.key_values();
  CHECK(kv.find("ap3d_Car_hard=1.000000") != std::string::npos);
  CHECK(kv.find("apbev_Pedestrian_easy=0.000000") != std::string::npos);
  std::string txt = rep.text();
  CHECK(txt.find("Car") != std::string::npos);
  CHECK(txt.find("AP3D") != std::string::npos);
  CHECK(txt.find("hard") != std::string::npos);
}
