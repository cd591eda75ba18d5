#include "monomm/kitti.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace monomm {

namespace {

[[noreturn]] void fail_line(int line_no, const std::string& msg) {
  throw std::runtime_error("label line " + std::to_string(line_no) + ": " +
                           msg);
}

double to_num(const std::string& tok, int line_no, int field) {
  const char* s = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    fail_line(line_no,
              "field " + std::to_string(field + 1) + " is not numeric: '" +
                  tok + "'");
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

GroundTruthObject parse_kitti_label(const std::string& line, int line_no) {
  auto tok = split_ws(line);
  if (tok.size() != 15 && tok.size() != 16)
    fail_line(line_no, "expected 15 or 16 fields, got " +
                           std::to_string(tok.size()));
  GroundTruthObject o;
  o.cls = tok[0];
  o.truncation = to_num(tok[1], line_no, 1);
  o.occlusion = int(std::llround(to_num(tok[2], line_no, 2)));
  o.alpha = to_num(tok[3], line_no, 3);
  o.bbox = Box2{to_num(tok[4], line_no, 4), to_num(tok[5], line_no, 5),
                to_num(tok[6], line_no, 6), to_num(tok[7], line_no, 7)};
  o.h = to_num(tok[8], line_no, 8);
  o.w = to_num(tok[9], line_no, 9);
  o.l = to_num(tok[10], line_no, 10);
  o.x = to_num(tok[11], line_no, 11);
  o.y = to_num(tok[12], line_no, 12);
  o.z = to_num(tok[13], line_no, 13);
  o.ry = to_num(tok[14], line_no, 14);
  if (tok.size() == 16) {
    o.has_score = true;
    o.score = to_num(tok[15], line_no, 15);
  }
  return o;
}

std::vector<GroundTruthObject> parse_kitti_label_text(
    const std::string& text) {
  std::vector<GroundTruthObject> out;
  std::istringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (split_ws(line).empty()) continue;
    out.push_back(parse_kitti_label(line, line_no));
  }
  return out;
}

std::vector<GroundTruthObject> load_kitti_labels(const std::string& path) {
  return parse_kitti_label_text(read_file(path));
}

CalibP2 parse_calib_text(const std::string& text) {
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    auto tok = split_ws(line);
    if (tok.empty() || tok[0] != "P2:") continue;
    if (tok.size() != 13)
      throw std::runtime_error("calib P2 line: expected 12 values, got " +
                               std::to_string(tok.size() - 1));
    CalibP2 c;
    for (int i = 0; i < 12; ++i) {
      const std::string& t = tok[size_t(i) + 1];
      char* end = nullptr;
      c.p[size_t(i)] = std::strtod(t.c_str(), &end);
      if (end == t.c_str() || *end != '\0' || !std::isfinite(c.p[size_t(i)]))
        throw std::runtime_error("calib P2 line: bad value '" + t + "'");
    }
    if (c.p[0] <= 0)
      throw std::runtime_error("calib P2 line: focal length must be > 0");
    return c;
  }
  throw std::runtime_error("calib file has no P2: line");
}

CalibP2 load_calib_file(const std::string& path) {
  return parse_calib_text(read_file(path));
}

std::string format_kitti_result(const GroundTruthObject& det) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s %.2f %d %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f "
                "%.2f %.2f %.2f %.4f",
                det.cls.c_str(), det.truncation, det.occlusion, det.alpha,
                det.bbox.x1, det.bbox.y1, det.bbox.x2, det.bbox.y2, det.h,
                det.w, det.l, det.x, det.y, det.z, det.ry, det.score);
  return std::string(buf);
}

void write_kitti_results(const std::vector<GroundTruthObject>& dets,
                         const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const auto& d : dets) f << format_kitti_result(d) << '\n';
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace monomm
