#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "monomm/tensor.hpp"

namespace monomm {

// Named trainable leaves in insertion order. Insertion order is the
// serialization and optimizer-state order, so it must be deterministic;
// modules register parameters in a fixed sequence at construction.
template <typename T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> t) {
    check(index_.find(name) == index_.end(),
          "parameter '" + name + "' registered twice");
    index_[name] = names_.size();
    names_.push_back(name);
    tensors_.push_back(std::move(t));
    return tensors_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  const Tensor<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    check(it != index_.end(), "unknown parameter '" + name + "'");
    return tensors_[it->second];
  }
  Tensor<T>& at(const std::string& name) {
    auto it = index_.find(name);
    check(it != index_.end(), "unknown parameter '" + name + "'");
    return tensors_[it->second];
  }

  size_t size() const { return tensors_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  Tensor<T>& tensor(size_t i) { return tensors_[i]; }
  const Tensor<T>& tensor(size_t i) const { return tensors_[i]; }

  size_t count_prefix(const std::string& prefix) const {
    size_t n = 0;
    for (const auto& name : names_)
      if (name.rfind(prefix, 0) == 0) ++n;
    return n;
  }

  int64_t numel() const {
    int64_t n = 0;
    for (const auto& t : tensors_) n += t.numel();
    return n;
  }

  void zero_grads() {
    for (auto& t : tensors_) t.zero_grad();
  }

  // parameters whose grad buffer was never touched by a backward sweep
  std::vector<std::string> unreached() const {
    std::vector<std::string> out;
    for (size_t i = 0; i < tensors_.size(); ++i)
      if (tensors_[i].node()->grad.empty()) out.push_back(names_[i]);
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::unordered_map<std::string, size_t> index_;
};

// He-normal conv weight [Co, Cig, KH, KW]; fan-in = Cig*KH*KW.
template <typename T>
Tensor<T> init_conv(int co, int cig, int kh, int kw, Rng& rng) {
  double std = std::sqrt(2.0 / (double(cig) * kh * kw));
  return Tensor<T>::randn({co, cig, kh, kw}, rng, T(0), T(std), true);
}

// He-normal linear weight [Co, Ci].
template <typename T>
Tensor<T> init_linear(int co, int ci, Rng& rng) {
  double std = std::sqrt(2.0 / double(ci));
  return Tensor<T>::randn({co, ci}, rng, T(0), T(std), true);
}

template <typename T>
Tensor<T> init_zeros(const Shape& s) {
  return Tensor<T>::zeros(s, true);
}

template <typename T>
Tensor<T> init_full(const Shape& s, T v) {
  return Tensor<T>::filled(s, v, true);
}

// conv weight + zero bias pair under <name>.w / <name>.b
template <typename T>
void add_conv(ParamStore<T>& ps, const std::string& name, int co, int cig,
              int kh, int kw, Rng& rng) {
  ps.add(name + ".w", init_conv<T>(co, cig, kh, kw, rng));
  ps.add(name + ".b", init_zeros<T>({co}));
}

template <typename T>
void add_linear(ParamStore<T>& ps, const std::string& name, int co, int ci,
                Rng& rng, bool bias = true) {
  ps.add(name + ".w", init_linear<T>(co, ci, rng));
  if (bias) ps.add(name + ".b", init_zeros<T>({co}));
}

// layer-norm gain/shift pair under <name>.g / <name>.b
template <typename T>
void add_norm(ParamStore<T>& ps, const std::string& name, int c) {
  ps.add(name + ".g", init_full<T>({c}, T(1)));
  ps.add(name + ".b", init_zeros<T>({c}));
}

}  // namespace monomm
