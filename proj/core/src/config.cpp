#include "monomm/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace monomm {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad(int line_no, const std::string& msg) {
  throw std::runtime_error("config line " + std::to_string(line_no) + ": " +
                           msg);
}

int to_int(const std::string& v, int line_no) {
  size_t pos = 0;
  int r;
  try {
    r = std::stoi(v, &pos);
  } catch (const std::exception&) {
    bad(line_no, "expected integer, got '" + v + "'");
  }
  if (pos != v.size()) bad(line_no, "trailing junk in integer '" + v + "'");
  return r;
}

double to_double(const std::string& v, int line_no) {
  size_t pos = 0;
  double r;
  try {
    r = std::stod(v, &pos);
  } catch (const std::exception&) {
    bad(line_no, "expected number, got '" + v + "'");
  }
  if (pos != v.size()) bad(line_no, "trailing junk in number '" + v + "'");
  return r;
}

bool to_bool(const std::string& v, int line_no) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  bad(line_no, "expected boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<int> to_int_list(const std::string& v, int line_no) {
  std::vector<int> out;
  for (auto& s : split_list(v)) out.push_back(to_int(s, line_no));
  return out;
}

std::vector<double> to_double_list(const std::string& v, int line_no) {
  std::vector<double> out;
  for (auto& s : split_list(v)) out.push_back(to_double(s, line_no));
  return out;
}

}  // namespace

int RunConfig::class_id(const std::string& name) const {
  for (size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == name) return int(i);
  return -1;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) bad(line_no, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) bad(line_no, "empty key");
    if (val.empty()) bad(line_no, "empty value for key '" + key + "'");

    if (key == "seed") c.seed = to_int(val, line_no);
    else if (key == "precision") c.precision = to_int(val, line_no);
    else if (key == "image_h") c.image_h = to_int(val, line_no);
    else if (key == "image_w") c.image_w = to_int(val, line_no);
    else if (key == "crop_top") c.crop_top = to_int(val, line_no);
    else if (key == "flip_prob") c.flip_prob = to_double(val, line_no);
    else if (key == "bb_stem") c.bb_stem = to_int(val, line_no);
    else if (key == "bb_c4") c.bb_c4 = to_int(val, line_no);
    else if (key == "bb_c8") c.bb_c8 = to_int(val, line_no);
    else if (key == "bb_c16") c.bb_c16 = to_int(val, line_no);
    else if (key == "bb_c32") c.bb_c32 = to_int(val, line_no);
    else if (key == "enable_fmf") c.enable_fmf = to_bool(val, line_no);
    else if (key == "enable_dmb") c.enable_dmb = to_bool(val, line_no);
    else if (key == "fusion_mode") c.fusion_mode = val;
    else if (key == "fmf_cmid") c.fmf_cmid = to_int(val, line_no);
    else if (key == "fmf_cout") c.fmf_cout = to_int(val, line_no);
    else if (key == "fmf_dw_kernels") c.fmf_dw_kernels = to_int_list(val, line_no);
    else if (key == "fmf_residual_mode") c.fmf_residual_mode = val;
    else if (key == "dap_layers") c.dap_layers = to_int(val, line_no);
    else if (key == "dap_bins") c.dap_bins = to_int(val, line_no);
    else if (key == "dap_dmin") c.dap_dmin = to_double(val, line_no);
    else if (key == "dap_dmax") c.dap_dmax = to_double(val, line_no);
    else if (key == "dap_alpha") c.dap_alpha = to_double(val, line_no);
    else if (key == "dap_gamma") c.dap_gamma = to_double(val, line_no);
    else if (key == "dap_keep") c.dap_keep = to_double(val, line_no);
    else if (key == "dmb_patch_h") c.dmb_patch_h = to_int(val, line_no);
    else if (key == "dmb_patch_w") c.dmb_patch_w = to_int(val, line_no);
    else if (key == "dmb_dim") c.dmb_dim = to_int(val, line_no);
    else if (key == "dmb_inner") c.dmb_inner = to_int(val, line_no);
    else if (key == "dmb_state") c.dmb_state = to_int(val, line_no);
    else if (key == "dmb_layers") c.dmb_layers = to_int(val, line_no);
    else if (key == "dmb_dcn_kernel") c.dmb_dcn_kernel = to_int(val, line_no);
    else if (key == "dmb_dcn_mode") c.dmb_dcn_mode = val;
    else if (key == "dmb_pos_embed") c.dmb_pos_embed = val;
    else if (key == "dmb_post_norm") c.dmb_post_norm = to_bool(val, line_no);
    else if (key == "head_ch") c.head_ch = to_int(val, line_no);
    else if (key == "anchor_base") c.anchor_base = to_double(val, line_no);
    else if (key == "anchor_scales") c.anchor_scales = to_int(val, line_no);
    else if (key == "anchor_ratios") c.anchor_ratios = to_double_list(val, line_no);
    else if (key == "iou_pos") c.iou_pos = to_double(val, line_no);
    else if (key == "iou_neg") c.iou_neg = to_double(val, line_no);
    else if (key == "cls_alpha") c.cls_alpha = to_double(val, line_no);
    else if (key == "cls_gamma") c.cls_gamma = to_double(val, line_no);
    else if (key == "reg_delta") c.reg_delta = to_double(val, line_no);
    else if (key == "w_cls") c.w_cls = to_double(val, line_no);
    else if (key == "w_reg") c.w_reg = to_double(val, line_no);
    else if (key == "w_dep") c.w_dep = to_double(val, line_no);
    else if (key == "score_thr") c.score_thr = to_double(val, line_no);
    else if (key == "nms_iou") c.nms_iou = to_double(val, line_no);
    else if (key == "lr") c.lr = to_double(val, line_no);
    else if (key == "beta1") c.beta1 = to_double(val, line_no);
    else if (key == "beta2") c.beta2 = to_double(val, line_no);
    else if (key == "adam_eps") c.adam_eps = to_double(val, line_no);
    else if (key == "batch") c.batch = to_int(val, line_no);
    else if (key == "steps") c.steps = to_int(val, line_no);
    else if (key == "scenes") c.scenes = to_int(val, line_no);
    else if (key == "scene_f") c.scene_f = to_double(val, line_no);
    else if (key == "scene_objects_min") c.scene_objects_min = to_int(val, line_no);
    else if (key == "scene_objects_max") c.scene_objects_max = to_int(val, line_no);
    else if (key == "scene_zmin") c.scene_zmin = to_double(val, line_no);
    else if (key == "scene_zmax") c.scene_zmax = to_double(val, line_no);
    else if (key == "classes") c.classes = split_list(val);
    else if (key == "eval_iou") c.eval_iou = to_double_list(val, line_no);
    else if (key == "diff_easy_h") c.diff_easy_h = to_double(val, line_no);
    else if (key == "diff_easy_tr") c.diff_easy_tr = to_double(val, line_no);
    else if (key == "diff_easy_occ") c.diff_easy_occ = to_int(val, line_no);
    else if (key == "diff_mod_h") c.diff_mod_h = to_double(val, line_no);
    else if (key == "diff_mod_tr") c.diff_mod_tr = to_double(val, line_no);
    else if (key == "diff_mod_occ") c.diff_mod_occ = to_int(val, line_no);
    else if (key == "diff_hard_h") c.diff_hard_h = to_double(val, line_no);
    else if (key == "diff_hard_tr") c.diff_hard_tr = to_double(val, line_no);
    else if (key == "diff_hard_occ") c.diff_hard_occ = to_int(val, line_no);
    else bad(line_no, "unknown key '" + key + "'");
  }
  validate_config(c);
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void validate_config(const RunConfig& c) {
  auto req = [](bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error("config: " + msg);
  };
  req(c.precision == 32 || c.precision == 64, "precision must be 32 or 64");
  req(c.image_h % 32 == 0 && c.image_w % 32 == 0,
      "image extents must be divisible by 32");
  req(c.image_h > 0 && c.image_w > 0, "image extents must be positive");
  req(c.fmf_cout == 256, "fmf_cout must be 256");
  req(c.fmf_cmid > 0, "fmf_cmid must be positive");
  for (int k : c.fmf_dw_kernels)
    req(k > 0 && k % 2 == 1, "fmf_dw_kernels must be odd");
  req(c.fmf_residual_mode == "project" || c.fmf_residual_mode == "stack_only",
      "fmf_residual_mode must be project|stack_only");
  req(c.fusion_mode == "conv-sum" || c.fusion_mode == "mamba",
      "fusion_mode must be conv-sum|mamba");
  req(c.dap_bins >= 2, "dap_bins must be >= 2");
  req(c.dap_dmin < c.dap_dmax, "dap_dmin must be < dap_dmax");
  req(c.dap_layers >= 1, "dap_layers must be >= 1");
  req(c.dap_keep > 0.0 && c.dap_keep <= 1.0, "dap_keep must be in (0,1]");
  req(c.dmb_layers >= 1, "dmb_layers must be >= 1");
  req(c.dmb_patch_h >= 1 && c.dmb_patch_w >= 1, "dmb_patch must be >= 1");
  req((c.image_h / 8) % c.dmb_patch_h == 0 &&
          (c.image_w / 8) % c.dmb_patch_w == 0,
      "dmb_patch must divide the stride-8 feature extents");
  req(c.dmb_state >= 1 && c.dmb_inner >= 1 && c.dmb_dim >= 1,
      "dmb dimensions must be positive");
  req(c.dmb_dcn_mode == "1d" || c.dmb_dcn_mode == "2d",
      "dmb_dcn_mode must be 1d|2d");
  req(c.dmb_pos_embed == "learned" || c.dmb_pos_embed == "sinusoidal",
      "dmb_pos_embed must be learned|sinusoidal");
  req(c.anchor_scales >= 1, "anchor_scales must be >= 1");
  req(!c.anchor_ratios.empty(), "anchor_ratios must be non-empty");
  req(c.anchor_base > 0, "anchor_base must be positive");
  req(c.iou_neg <= c.iou_pos, "iou_neg must not exceed iou_pos");
  req(!c.classes.empty(), "classes must be non-empty");
  req(c.eval_iou.size() == c.classes.size(),
      "eval_iou needs one threshold per class");
  req(c.batch >= 1 && c.steps >= 0 && c.scenes >= 1,
      "batch/steps/scenes out of range");
  req(c.scene_objects_min >= 0 &&
          c.scene_objects_max >= c.scene_objects_min,
      "scene object count range invalid");
  req(c.scene_zmin > 0 && c.scene_zmax > c.scene_zmin,
      "scene depth range invalid");
}

}  // namespace monomm
