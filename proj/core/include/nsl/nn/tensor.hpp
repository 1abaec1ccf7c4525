#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <unordered_set>
#include <vector>

#include "nsl/error.hpp"

namespace nsl::nn {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

// One vertex of the reverse-mode graph. Nodes are created in topological
// order, so descending id is a valid traversal order for backward.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::size_t numel() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T{0});
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.node_ = std::make_shared<Node<T>>();
    t.node_->shape = std::move(shape);
    t.node_->value.assign(shape_numel(t.node_->shape), T{0});
    t.node_->requires_grad = requires_grad;
    t.node_->id = next_id();
    return t;
  }

  static Tensor from_values(Shape shape, std::vector<T> values) {
    Tensor t = leaf(std::move(shape));
    if (values.size() != t.numel()) throw ConfigError("Tensor: value count mismatch");
    t.node_->value = std::move(values);
    return t;
  }

  // Result of an op; `backward_fn` scatters node.grad into the parents.
  static Tensor op(Shape shape, std::vector<std::shared_ptr<Node<T>>> parents,
                   std::function<void(Node<T>&)> backward_fn) {
    Tensor t = leaf(std::move(shape));
    t.node_->parents = std::move(parents);
    t.node_->backward_fn = std::move(backward_fn);
    for (const auto& p : t.node_->parents) {
      if (p->requires_grad || p->backward_fn) {
        t.node_->requires_grad = true;
        break;
      }
    }
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[i]; }
  std::size_t numel() const { return node_->value.size(); }

  std::vector<T>& value() { return node_->value; }
  const std::vector<T>& value() const { return node_->value; }
  std::vector<T>& grad() { return node_->grad; }
  const std::vector<T>& grad() const { return node_->grad; }

  bool requires_grad() const { return node_->requires_grad; }

  T item() const {
    if (numel() != 1) throw ConfigError("Tensor::item: not a scalar");
    return node_->value[0];
  }

  void zero_grad() { node_->grad.assign(node_->value.size(), T{0}); }

  std::shared_ptr<Node<T>> node() const { return node_; }

  bool all_finite() const {
    for (const T& v : node_->value) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

 private:
  static std::uint64_t next_id() {
    static std::uint64_t counter = 0;
    return ++counter;
  }

  std::shared_ptr<Node<T>> node_;
};

// Reverse-mode sweep from a scalar loss. Gradients accumulate (+=) into every
// reachable node that wants them; leaf gradients persist until zeroed by the
// caller.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) throw ConfigError("backward: loss must be scalar");

  // Collect the reachable subgraph.
  std::vector<std::shared_ptr<Node<T>>> nodes;
  std::unordered_set<const Node<T>*> seen;
  std::vector<std::shared_ptr<Node<T>>> stack{loss.node()};
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    if (!seen.insert(n.get()).second) continue;
    nodes.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p);
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a->id > b->id; });

  for (const auto& n : nodes) {
    if (n.get() == loss.node().get()) continue;
    // Interior grads start fresh each sweep; leaves keep accumulating.
    if (n->backward_fn || !n->requires_grad) {
      n->grad.assign(n->value.size(), T{0});
    } else {
      n->ensure_grad();
    }
  }
  loss.node()->grad.assign(1, T{1});

  for (const auto& n : nodes) {
    if (n->backward_fn) n->backward_fn(*n);
  }
}

// ---- Elementwise ----

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) throw ConfigError(std::string(what) + ": shape mismatch");
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  Tensor<T> out = Tensor<T>::op(a.shape(), {a.node(), b.node()}, [](Node<T>& n) {
    for (int p = 0; p < 2; ++p) {
      auto& parent = *n.parents[p];
      if (!parent.requires_grad && !parent.backward_fn) continue;
      parent.ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) parent.grad[i] += n.grad[i];
    }
  });
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.value()[i] = a.value()[i] + b.value()[i];
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  Tensor<T> out = Tensor<T>::op(a.shape(), {a.node(), b.node()}, [](Node<T>& n) {
    auto& pa = *n.parents[0];
    if (pa.requires_grad || pa.backward_fn) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    }
    auto& pb = *n.parents[1];
    if (pb.requires_grad || pb.backward_fn) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
    }
  });
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.value()[i] = a.value()[i] - b.value()[i];
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  auto an = a.node();
  auto bn = b.node();
  Tensor<T> out = Tensor<T>::op(a.shape(), {an, bn}, [an, bn](Node<T>& n) {
    if (an->requires_grad || an->backward_fn) {
      an->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * bn->value[i];
    }
    if (bn->requires_grad || bn->backward_fn) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i] * an->value[i];
    }
  });
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.value()[i] = a.value()[i] * b.value()[i];
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out = Tensor<T>::op(a.shape(), {a.node()}, [s](Node<T>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad && !p.backward_fn) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += s * n.grad[i];
  });
  for (std::size_t i = 0; i < out.numel(); ++i) out.value()[i] = s * a.value()[i];
  return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  Tensor<T> out = Tensor<T>::op(a.shape(), {a.node()}, [](Node<T>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad && !p.backward_fn) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
  });
  for (std::size_t i = 0; i < out.numel(); ++i) out.value()[i] = a.value()[i] + s;
  return out;
}

// 1 - x, for GRU gating.
template <typename T>
Tensor<T> one_minus(const Tensor<T>& a) {
  return add_scalar(scale(a, T{-1}), T{1});
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  auto an = a.node();
  Tensor<T> out = Tensor<T>::op(a.shape(), {an}, [an](Node<T>& n) {
    if (!an->requires_grad && !an->backward_fn) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (an->value[i] > T{0}) an->grad[i] += n.grad[i];
    }
  });
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.value()[i] = a.value()[i] > T{0} ? a.value()[i] : T{0};
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::op(a.shape(), {a.node()}, [](Node<T>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad && !p.backward_fn) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      p.grad[i] += n.grad[i] * n.value[i] * (T{1} - n.value[i]);
    }
  });
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.value()[i] = T{1} / (T{1} + std::exp(-a.value()[i]));
  }
  return out;
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::op(a.shape(), {a.node()}, [](Node<T>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad && !p.backward_fn) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      p.grad[i] += n.grad[i] * (T{1} - n.value[i] * n.value[i]);
    }
  });
  for (std::size_t i = 0; i < out.numel(); ++i) out.value()[i] = std::tanh(a.value()[i]);
  return out;
}

// log(1 + e^x), numerically stable; keeps predicted depths positive.
template <typename T>
Tensor<T> softplus(const Tensor<T>& a) {
  auto an = a.node();
  Tensor<T> out = Tensor<T>::op(a.shape(), {an}, [an](Node<T>& n) {
    if (!an->requires_grad && !an->backward_fn) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      an->grad[i] += n.grad[i] / (T{1} + std::exp(-an->value[i]));
    }
  });
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const T x = a.value()[i];
    out.value()[i] = x > T{20} ? x : std::log1p(std::exp(x));
  }
  return out;
}

}  // namespace nsl::nn
