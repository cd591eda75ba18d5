#pragma once

#include <string>
#include <vector>

namespace monomm {

// Flat key=value run configuration. Defaults describe the full-scale model;
// the toy training config overrides sizes downward. Unknown keys are errors.
struct RunConfig {
  int seed = 0;
  int precision = 32;  // 32 or 64

  // input geometry
  int image_h = 288;
  int image_w = 1280;
  int crop_top = 0;       // pixels removed from the top before use
  double flip_prob = 0.0; // horizontal flip augmentation probability

  // backbone widths (stem, stride 4/8/16/32 stages)
  int bb_stem = 32;
  int bb_c4 = 64;
  int bb_c8 = 128;
  int bb_c16 = 256;
  int bb_c32 = 256;

  // ablation switches. fusion_mode picks what fills the enhancement slot
  // between the depth-fused map and the head when enable_dmb is set: the
  // token mixer ("mamba") or a convolutional summation stand-in ("conv-sum").
  bool enable_fmf = true;
  bool enable_dmb = true;
  std::string fusion_mode = "mamba";  // or "conv-sum"

  // multi-scale fusion
  int fmf_cmid = 256;
  int fmf_cout = 256;  // contract: must stay 256
  std::vector<int> fmf_dw_kernels = {3, 5, 7};
  std::string fmf_residual_mode = "project";  // or "stack_only"

  // depth branch
  int dap_layers = 3;
  int dap_bins = 96;
  double dap_dmin = 1.0;
  double dap_dmax = 80.0;
  double dap_alpha = 0.25;
  double dap_gamma = 2.0;
  double dap_keep = 1.0;  // fraction of depth pixels kept as supervision

  // token mixer
  int dmb_patch_h = 4;
  int dmb_patch_w = 4;
  int dmb_dim = 256;
  int dmb_inner = 512;
  int dmb_state = 16;
  int dmb_layers = 2;
  int dmb_dcn_kernel = 3;
  std::string dmb_dcn_mode = "1d";        // or "2d" (patch-grid offsets)
  std::string dmb_pos_embed = "learned";  // or "sinusoidal"
  bool dmb_post_norm = true;  // norm after the scan branch, as published

  // detection head / anchors
  int head_ch = 256;
  double anchor_base = 25.0;  // smallest anchor height in pixels
  int anchor_scales = 16;
  std::vector<double> anchor_ratios = {0.5, 1.0, 1.5};
  double iou_pos = 0.5;
  double iou_neg = 0.4;
  double cls_alpha = 0.25;
  double cls_gamma = 2.0;
  double reg_delta = 1.0;
  double w_cls = 1.0;
  double w_reg = 1.0;
  double w_dep = 1.0;
  double score_thr = 0.75;
  double nms_iou = 0.4;

  // optimizer
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch = 2;
  int steps = 500;
  int scenes = 8;

  // synthetic scenes
  double scene_f = 700.0;
  int scene_objects_min = 1;
  int scene_objects_max = 3;
  double scene_zmin = 5.0;
  double scene_zmax = 9.0;
  std::vector<std::string> classes = {"Car", "Pedestrian", "Cyclist"};

  // evaluation
  std::vector<double> eval_iou = {0.7, 0.5, 0.5};  // per class, same order
  double diff_easy_h = 40.0, diff_easy_tr = 0.15;
  int diff_easy_occ = 0;
  double diff_mod_h = 25.0, diff_mod_tr = 0.30;
  int diff_mod_occ = 1;
  double diff_hard_h = 25.0, diff_hard_tr = 0.50;
  int diff_hard_occ = 2;

  int class_id(const std::string& name) const;  // -1 if absent
};

// Throws std::runtime_error naming the offending line/key on malformed
// input, unknown keys, or out-of-range values.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
void validate_config(const RunConfig& c);

}  // namespace monomm
