#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "monomm/checkpoint.hpp"
#include "monomm/model.hpp"
#include "monomm/scene.hpp"

namespace monomm {

// Half-cosine decay from `base` to 0 across `total` steps.
inline double cosine_lr(double base, int64_t step, int64_t total) {
  constexpr double kPi = 3.14159265358979323846;
  if (total <= 0) return base;
  double t = double(step) / double(total);
  return base * 0.5 * (1.0 + std::cos(kPi * t));
}

// Adam over every parameter in a store. Parameters a backward pass never
// reached carry zero gradients and are left bit-identical.
template <typename T>
class Adam {
 public:
  Adam(ParamStore<T>& ps, const RunConfig& cfg)
      : ps_(&ps), b1_(cfg.beta1), b2_(cfg.beta2), eps_(cfg.adam_eps) {
    m_.resize(ps.size());
    v_.resize(ps.size());
    for (size_t i = 0; i < ps.size(); ++i) {
      m_[i].assign(size_t(ps.tensor(i).numel()), 0.0);
      v_[i].assign(size_t(ps.tensor(i).numel()), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    double c1 = 1.0 - std::pow(b1_, double(t_));
    double c2 = 1.0 - std::pow(b2_, double(t_));
    for (size_t i = 0; i < ps_->size(); ++i) {
      Tensor<T>& p = ps_->tensor(i);
      const std::vector<T>& g = p.grad();
      T* x = p.data();
      for (size_t j = 0; j < g.size(); ++j) {
        double gj = double(g[j]);
        m_[i][j] = b1_ * m_[i][j] + (1.0 - b1_) * gj;
        v_[i][j] = b2_ * v_[i][j] + (1.0 - b2_) * gj * gj;
        double mh = m_[i][j] / c1;
        double vh = v_[i][j] / c2;
        x[j] = T(double(x[j]) - lr * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

  int64_t steps_taken() const { return t_; }

 private:
  ParamStore<T>* ps_;
  double b1_, b2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;  // f64 moments for both precisions
};

template <typename T>
Tensor<T> scene_image_tensor(const SyntheticScene& s) {
  std::vector<T> px(s.image.size());
  for (size_t i = 0; i < px.size(); ++i) px[i] = T(s.image[i]);
  return Tensor<T>::from_data({3, s.h, s.w}, px);
}

// cfg.scenes frames with seeds drawn from one root stream, so the set is a
// pure function of cfg.seed.
inline std::vector<SyntheticScene> make_toy_scenes(const RunConfig& cfg) {
  Rng root(uint64_t(cfg.seed));
  std::vector<SyntheticScene> scenes;
  scenes.reserve(size_t(cfg.scenes));
  for (int i = 0; i < cfg.scenes; ++i)
    scenes.push_back(synth_scene(root.next_u64(), cfg));
  return scenes;
}

inline std::vector<TemplateStats> scene_anchor_stats(
    const RunConfig& cfg, const std::vector<SyntheticScene>& scenes) {
  std::vector<GroundTruthObject> all;
  for (const auto& s : scenes)
    all.insert(all.end(), s.objects.begin(), s.objects.end());
  return compute_anchor_stats(anchor_templates(cfg), all, cfg.iou_pos);
}

inline std::vector<int32_t> scene_depth_bins(const SyntheticScene& s,
                                             const RunConfig& cfg) {
  Rng rng(s.seed ^ 0x9e3779b97f4a7c15ull);  // private keep-mask stream
  return depth_bin_targets(s, 8, cfg, rng);
}

struct TrainPoint {
  int step = 0;
  double lr = 0, total = 0, cls = 0, reg = 0, dep = 0;
};

template <typename T>
struct TrainResult {
  std::vector<TrainPoint> curve;     // one point per optimizer step
  double initial_loss = 0;           // full-set mean loss before any update
  double final_loss = 0;             // full-set mean loss after the last one
  std::vector<TemplateStats> stats;  // anchor statistics the model was built with
  std::shared_ptr<Model<T>> model;
};

// Mean total loss over every scene, no graph.
template <typename T>
double full_set_loss(Model<T>& m, const std::vector<SyntheticScene>& scenes,
                     const std::vector<std::vector<int32_t>>& bins) {
  NoGradGuard ng;
  double acc = 0;
  for (size_t i = 0; i < scenes.size(); ++i) {
    auto out = m.forward(scene_image_tensor<T>(scenes[i]));
    acc += double(
        m.loss(out, scenes[i].objects, scenes[i].calib, bins[i]).total.item());
  }
  return acc / double(scenes.size());
}

// Deterministic fixed-order batching: step s trains on scenes
// (s*batch + j) mod n. Returns the trained model plus its loss history.
template <typename T>
TrainResult<T> train_toy(const RunConfig& cfg,
                         const std::vector<SyntheticScene>& scenes) {
  check(!scenes.empty(), "training needs at least one scene");
  TrainResult<T> res;
  res.stats = scene_anchor_stats(cfg, scenes);
  res.model = std::make_shared<Model<T>>(cfg, res.stats, uint64_t(cfg.seed));
  Model<T>& m = *res.model;

  std::vector<std::vector<int32_t>> bins;
  bins.reserve(scenes.size());
  for (const auto& s : scenes) bins.push_back(scene_depth_bins(s, cfg));

  res.initial_loss = full_set_loss(m, scenes, bins);
  Adam<T> opt(m.params(), cfg);
  int n = int(scenes.size());
  for (int step = 0; step < cfg.steps; ++step) {
    double lr = cosine_lr(cfg.lr, step, cfg.steps);
    m.params().zero_grads();
    std::vector<Tensor<T>> totals;
    TrainPoint pt;
    pt.step = step;
    pt.lr = lr;
    for (int j = 0; j < cfg.batch; ++j) {
      int si = (step * cfg.batch + j) % n;
      auto out = m.forward(scene_image_tensor<T>(scenes[size_t(si)]));
      LossParts<T> parts = m.loss(out, scenes[size_t(si)].objects,
                                  scenes[size_t(si)].calib, bins[size_t(si)]);
      totals.push_back(parts.total);
      pt.total += double(parts.total.item()) / cfg.batch;
      pt.cls += double(parts.cls.item()) / cfg.batch;
      pt.reg += double(parts.reg.item()) / cfg.batch;
      pt.dep += double(parts.dep.item()) / cfg.batch;
    }
    Tensor<T> batch_loss = scale(add_n(totals), T(1) / T(cfg.batch));
    batch_loss.backward();
    opt.step(lr);
    res.curve.push_back(pt);
  }
  res.final_loss =
      cfg.steps > 0 ? full_set_loss(m, scenes, bins) : res.initial_loss;
  return res;
}

template <typename T>
std::vector<Detection> infer_scene(Model<T>& m, const SyntheticScene& s) {
  NoGradGuard ng;
  auto out = m.forward(scene_image_tensor<T>(s));
  return m.decode(out, s.calib);
}

inline GroundTruthObject detection_to_label(const Detection& d,
                                            const RunConfig& cfg) {
  GroundTruthObject o;
  check(d.cls >= 0 && d.cls < int(cfg.classes.size()),
        "detection class id out of range");
  o.cls = cfg.classes[size_t(d.cls)];
  o.truncation = 0;
  o.occlusion = 0;
  o.alpha = wrap_angle(d.theta);
  o.bbox = d.box2d;
  o.h = d.box3d.h;
  o.w = d.box3d.w;
  o.l = d.box3d.l;
  o.x = d.box3d.x;
  o.y = d.box3d.y;
  o.z = d.box3d.z;
  o.ry = wrap_angle(d.box3d.ry);
  o.has_score = true;
  o.score = d.score;
  return o;
}

}  // namespace monomm
