#pragma once

#include <array>
#include <string>
#include <vector>

#include "monomm/anchors.hpp"
#include "monomm/config.hpp"
#include "monomm/kitti.hpp"

namespace monomm {

// Buckets are ordered: a gt counted for Hard includes Easy and Moderate
// objects. kIgnored never counts but still absorbs matching detections.
enum class Difficulty { kEasy = 0, kModerate = 1, kHard = 2, kIgnored = 3 };

struct DifficultyRules {
  std::array<double, 3> min_h;   // 2D box height, pixels
  std::array<double, 3> max_tr;  // truncation
  std::array<int, 3> max_occ;    // occlusion level
  static DifficultyRules from_config(const RunConfig& cfg);
};

Difficulty difficulty(const GroundTruthObject& gt, const DifficultyRules& r);

enum class IouKind { k2d, kBev, k3d };

struct EvalFrame {
  std::vector<GroundTruthObject> gts;  // labels, DontCare included
  std::vector<Detection> dets;
};

// Average precision at 40 recall positions for one class, metric, and
// difficulty bucket. Greedy score-descending matching per frame; gts of the
// class in a harder bucket and DontCare regions absorb detections without
// counting. No counted gt anywhere -> 0.
double ap40(const std::vector<EvalFrame>& frames, const RunConfig& cfg,
            int cls_id, IouKind kind, int bucket, const DifficultyRules& r);

struct ClassAP {
  std::string cls;
  std::array<double, 3> ap3d{};   // easy, moderate, hard
  std::array<double, 3> apbev{};
};

struct EvalReport {
  std::vector<ClassAP> per_class;
  std::string text() const;        // human-readable table
  std::string key_values() const;  // machine-readable key=value lines
};

EvalReport evaluate_frames(const std::vector<EvalFrame>& frames,
                           const RunConfig& cfg);

}  // namespace monomm
