#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "monomm/tensor.hpp"

namespace monomm {

// Compares reverse-mode gradients against central differences.
// f maps the given leaves to a scalar loss and must read only those leaves.
// Returns the max over all elements of |analytic - numeric| / max(|analytic|,
// |numeric|, 1e-8).
template <typename T>
double finite_diff_check(
    const std::function<Tensor<T>(std::vector<Tensor<T>>&)>& f,
    const std::vector<Tensor<T>>& inputs, T eps) {
  std::vector<Tensor<T>> leaves;
  leaves.reserve(inputs.size());
  for (auto& t : inputs) leaves.push_back(t.clone(true));

  Tensor<T> y = f(leaves);
  check(y.numel() == 1, "finite_diff_check: f must return a scalar");
  y.backward();
  std::vector<std::vector<T>> analytic;
  for (auto& l : leaves) analytic.push_back(l.grad());

  double max_rel = 0.0;
  NoGradGuard ng;
  for (size_t li = 0; li < leaves.size(); ++li) {
    T* d = leaves[li].data();
    for (int64_t i = 0; i < leaves[li].numel(); ++i) {
      T orig = d[i];
      d[i] = orig + eps;
      double up = double(f(leaves).item());
      d[i] = orig - eps;
      double dn = double(f(leaves).item());
      d[i] = orig;
      double num = (up - dn) / (2.0 * double(eps));
      double ana = double(analytic[li][size_t(i)]);
      double rel =
          std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

template <typename T>
double finite_diff_check(
    const std::function<Tensor<T>(std::vector<Tensor<T>>&)>& f,
    const Tensor<T>& input, T eps) {
  return finite_diff_check(f, std::vector<Tensor<T>>{input}, eps);
}

}  // namespace monomm
