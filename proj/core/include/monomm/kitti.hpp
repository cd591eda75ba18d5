#pragma once

#include <string>
#include <vector>

#include "monomm/geometry.hpp"

namespace monomm {

// One KITTI label/result line. Field order mirrors the 15-field label
// format; `score` holds the optional 16th field of result files.
struct GroundTruthObject {
  std::string cls;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  Box2 bbox;
  double h = 0.0, w = 0.0, l = 0.0;  // meters
  double x = 0.0, y = 0.0, z = 0.0;  // camera frame, meters
  double ry = 0.0;
  bool has_score = false;
  double score = 0.0;

  Box3 box3() const { return Box3{x, y, z, w, h, l, ry}; }
};

// Parses one whitespace-separated label line (15 fields, 16 with score).
// Throws std::runtime_error naming `line_no` on malformed input.
GroundTruthObject parse_kitti_label(const std::string& line, int line_no = 1);

// Parses a whole label file body; blank lines are skipped.
std::vector<GroundTruthObject> parse_kitti_label_text(const std::string& text);
std::vector<GroundTruthObject> load_kitti_labels(const std::string& path);

// Extracts the "P2:" projection matrix (12 numbers) from a calib file.
CalibP2 parse_calib_text(const std::string& text);
CalibP2 load_calib_file(const std::string& path);

// Result line: 2 decimals for geometry fields, 4 for the score. The score
// field is always emitted.
std::string format_kitti_result(const GroundTruthObject& det);
void write_kitti_results(const std::vector<GroundTruthObject>& dets,
                         const std::string& path);

}  // namespace monomm
