#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "monomm/rng.hpp"

namespace monomm {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string r = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

inline void check(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

// Global autodiff switch. Ops record backward closures only while enabled
// and at least one input is on the graph.
struct GradMode {
  static bool& flag() {
    static thread_local bool on = true;
    return on;
  }
  static bool enabled() { return flag(); }
  static void set(bool v) { flag() = v; }
};

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(GradMode::enabled()) { GradMode::set(false); }
  ~NoGradGuard() { GradMode::set(prev); }
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool on_graph = false;  // some path from here reaches a requires_grad leaf
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
  }
};

// Shared-ownership handle over a Node. Copies alias the same storage and
// graph position; clone()/detach() make new leaves.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}

  static Tensor zeros(const Shape& s, bool requires_grad = false) {
    return filled(s, T(0), requires_grad);
  }

  static Tensor filled(const Shape& s, T v, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->shape = s;
    n->data.assign(size_t(shape_numel(s)), v);
    n->requires_grad = requires_grad;
    n->on_graph = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from_data(const Shape& s, std::vector<T> data,
                          bool requires_grad = false) {
    check(int64_t(data.size()) == shape_numel(s),
          "tensor data size " + std::to_string(data.size()) +
              " does not match shape " + shape_str(s));
    auto n = std::make_shared<Node<T>>();
    n->shape = s;
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    n->on_graph = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return filled({1}, v, requires_grad);
  }

  static Tensor randn(const Shape& s, Rng& rng, T mean = T(0), T stddev = T(1),
                      bool requires_grad = false) {
    Tensor t = zeros(s, requires_grad);
    for (auto& v : t.raw()) v = T(rng.normal(double(mean), double(stddev)));
    return t;
  }

  static Tensor rand_uniform(const Shape& s, Rng& rng, T lo, T hi,
                             bool requires_grad = false) {
    Tensor t = zeros(s, requires_grad);
    for (auto& v : t.raw()) v = T(rng.uniform(double(lo), double(hi)));
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int ndim() const { return int(n_->shape.size()); }
  int dim(int i) const { return n_->shape[size_t(i)]; }
  int64_t numel() const { return int64_t(n_->data.size()); }

  T* data() { return n_->data.data(); }
  const T* data() const { return n_->data.data(); }
  std::vector<T>& raw() { return n_->data; }
  const std::vector<T>& raw() const { return n_->data; }

  T item() const {
    check(numel() == 1, "item() on tensor of shape " + shape_str(shape()));
    return n_->data[0];
  }

  bool requires_grad() const { return n_->requires_grad; }
  bool on_graph() const { return n_->on_graph; }

  const std::vector<T>& grad() const {
    n_->ensure_grad();
    return n_->grad;
  }
  std::vector<T>& grad_ref() {
    n_->ensure_grad();
    return n_->grad;
  }
  void zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
  }

  // new leaf sharing nothing with the graph
  Tensor detach() const {
    auto n = std::make_shared<Node<T>>();
    n->shape = n_->shape;
    n->data = n_->data;
    return Tensor(std::move(n));
  }

  Tensor clone(bool requires_grad = false) const {
    Tensor t = detach();
    t.n_->requires_grad = requires_grad;
    t.n_->on_graph = requires_grad;
    return t;
  }

  std::shared_ptr<Node<T>> node() const { return n_; }

  // Reverse-mode sweep from a scalar root. Topological order is rebuilt per
  // call; closures release once the graph itself is dropped by the caller.
  void backward() {
    check(numel() == 1,
          "backward() needs a scalar root, got " + shape_str(shape()));
    n_->ensure_grad();
    n_->grad[0] = T(1);

    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    // iterative post-order DFS; reversed it gives root-first topo order
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.push_back({n_.get(), 0});
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node<T>* p = node->parents[idx].get();
        ++idx;
        if (p->on_graph && !seen.count(p)) {
          seen.insert(p);
          stack.push_back({p, 0});
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* node = *it;
      if (node->backward_fn) {
        node->ensure_grad();
        node->backward_fn(*node);
      }
    }
  }

 private:
  std::shared_ptr<Node<T>> n_;
};

// Op plumbing shared by everything in ops/conv/scan/...: allocate the output
// and decide whether this op joins the autodiff graph.
template <typename T>
inline bool track_grad(std::initializer_list<const Tensor<T>*> inputs) {
  if (!GradMode::enabled()) return false;
  for (const Tensor<T>* t : inputs)
    if (t->defined() && t->on_graph()) return true;
  return false;
}

template <typename T>
inline Tensor<T> make_output(const Shape& s) {
  auto n = std::make_shared<Node<T>>();
  n->shape = s;
  n->data.assign(size_t(shape_numel(s)), T(0));
  return Tensor<T>(std::move(n));
}

template <typename T>
inline void attach(Tensor<T>& out, std::vector<Tensor<T>> parents,
                   std::function<void(Node<T>&)> backward_fn) {
  auto n = out.node();
  n->on_graph = true;
  n->parents.reserve(parents.size());
  for (auto& p : parents) n->parents.push_back(p.node());
  n->backward_fn = std::move(backward_fn);
}

}  // namespace monomm
