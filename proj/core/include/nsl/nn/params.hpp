#pragma once

#include <map>
#include <string>

#include "nsl/nn/tensor.hpp"
#include "nsl/rng.hpp"

namespace nsl::nn {

// Named learnable leaves. Ordered by name, so iteration (serialization,
// optimizer sweeps, gradient checks) is deterministic.
template <typename T>
class ParamStore {
 public:
  Tensor<T> create(const std::string& name, Shape shape) {
    if (params_.count(name)) throw ConfigError("param already exists: " + name);
    Tensor<T> t = Tensor<T>::leaf(std::move(shape), /*requires_grad=*/true);
    params_.emplace(name, t);
    return t;
  }

  Tensor<T>& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown param: " + name);
    return it->second;
  }
  const Tensor<T>& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown param: " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::map<std::string, Tensor<T>>& all() { return params_; }
  const std::map<std::string, Tensor<T>>& all() const { return params_; }

  void zero_grads() {
    for (auto& [name, t] : params_) t.zero_grad();
  }

  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
  }

  void set_requires_grad(bool enabled) {
    for (auto& [name, t] : params_) t.node()->requires_grad = enabled;
  }

  bool all_finite() const {
    for (const auto& [name, t] : params_) {
      if (!t.all_finite()) return false;
    }
    return true;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, t] : params_) {
      Tensor<U> u = out.create(name, t.shape());
      for (std::size_t i = 0; i < t.numel(); ++i) {
        u.value()[i] = static_cast<U>(t.value()[i]);
      }
    }
    return out;
  }

 private:
  std::map<std::string, Tensor<T>> params_;
};

namespace detail {

inline std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

// He-style normal init, stream keyed by the parameter name so creation order
// never changes weights.
template <typename T>
void init_he_normal(Tensor<T>& t, int fan_in, const Rng& root, const std::string& name) {
  Rng rng = root.derive(detail::name_hash(name));
  const double stddev = std::sqrt(2.0 / std::max(1, fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t.value()[i] = static_cast<T>(stddev * rng.normal_at(i));
  }
}

template <typename T>
void fill_constant(Tensor<T>& t, T v) {
  t.value().assign(t.numel(), v);
}

// ---- Thin layer helpers: each owns only its name and dims. ----

template <typename T>
struct Conv2dLayer {
  std::string name;
  int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;

  void init(ParamStore<T>& ps, const Rng& root) const {
    Tensor<T> w = ps.create(name + ".w", {cout, cin, k, k});
    init_he_normal(w, cin * k * k, root, name + ".w");
    ps.create(name + ".b", {cout});
  }
  Tensor<T> operator()(ParamStore<T>& ps, const Tensor<T>& x) const;
};

template <typename T>
struct InstanceNormLayer {
  std::string name;
  int channels = 0;

  void init(ParamStore<T>& ps) const {
    Tensor<T> g = ps.create(name + ".g", {channels});
    fill_constant(g, T{1});
    ps.create(name + ".z", {channels});
  }
  Tensor<T> operator()(ParamStore<T>& ps, const Tensor<T>& x) const;
};

}  // namespace nsl::nn

#include "nsl/nn/ops.hpp"

namespace nsl::nn {

template <typename T>
Tensor<T> Conv2dLayer<T>::operator()(ParamStore<T>& ps, const Tensor<T>& x) const {
  return conv2d(x, ps.get(name + ".w"), ps.get(name + ".b"), stride, pad);
}

template <typename T>
Tensor<T> InstanceNormLayer<T>::operator()(ParamStore<T>& ps, const Tensor<T>& x) const {
  return instance_norm(x, ps.get(name + ".g"), ps.get(name + ".z"));
}

}  // namespace nsl::nn
