#pragma once

#include <cstdint>
#include <vector>

#include "monomm/config.hpp"
#include "monomm/geometry.hpp"
#include "monomm/kitti.hpp"

namespace monomm {

// A rendered training frame: flat-shaded cuboids standing on a ground
// plane, with exact per-pixel depth and self-consistent labels.
struct SyntheticScene {
  int h = 0, w = 0;
  std::vector<double> image;  // [3,H,W], values in [0,1]
  std::vector<double> depth;  // [H,W] meters; <= 0 marks sky (no return)
  std::vector<GroundTruthObject> objects;
  CalibP2 calib;
  uint64_t seed = 0;
};

// Deterministic per (seed, cfg). Objects are rejection-sampled so projected
// hulls overlap pairwise at IoU <= 0.3 and truncation stays <= 0.3;
// occlusion levels come from rendered visibility.
SyntheticScene synth_scene(uint64_t seed, const RunConfig& cfg);

// Horizontal mirror of image, depth, and labels (x -> -x, ry -> pi - ry).
void flip_scene_horizontal(SyntheticScene& s);

}  // namespace monomm
