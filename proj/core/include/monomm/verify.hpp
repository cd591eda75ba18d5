#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace monomm {

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;  // worst error, counts — whatever justifies the verdict
};

struct VerifyReport {
  std::string suite;
  std::vector<VerifyCheck> checks;
  bool ok() const;
  std::string text() const;  // one PASS/FAIL line per check
};

// Central finite-difference audit of every differentiable op at 64-bit:
// `shapes_per_op` random small shapes each, max relative error < 1e-4.
// `inject_bug` appends a deliberately wrong backward pass that must FAIL —
// the negative control proving the harness can see a broken gradient.
VerifyReport verify_gradcheck(int shapes_per_op = 20, bool inject_bug = false,
                              uint64_t seed = 1234);

// Fast selective-scan kernel vs the naive sequential recurrence, 64-bit,
// max |diff| <= 1e-10 over T in {1,2,3,7,8,64,255,1024}, `params_per_length`
// random parameterizations each.
VerifyReport verify_scan(int params_per_length = 100, uint64_t seed = 77);

// bev_iou/iou3d vs a grid-sampling area oracle within +-0.01 on `pairs`
// random box pairs; encode/decode round-trip error < 1e-6 on `roundtrips`
// random anchor/gt pairs.
VerifyReport verify_iou(int pairs = 200, int roundtrips = 1000,
                        uint64_t seed = 5150);

// ap40 vs an exhaustive precision sweep, exact on `instances` randomized
// frames, plus the perfect (AP 1) and empty (AP 0) fixtures.
VerifyReport verify_ap(int instances = 100, uint64_t seed = 31);

}  // namespace monomm
