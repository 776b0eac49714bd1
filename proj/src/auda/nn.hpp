#pragma once
// Layer building blocks over the autodiff graph: a named parameter registry,
// Kaiming-style initialization, and thin conv/linear wrappers.  Layers hold
// their parameters as long-lived leaf Vars; a fresh graph is built through
// them on every forward call.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "auda/graph.hpp"
#include "auda/ops_spatial.hpp"
#include "auda/rng.hpp"

namespace auda {

template <typename T>
struct ParamStore {
  struct Entry {
    std::string name;
    Var<T> var;
  };
  std::vector<Entry> entries;

  Var<T> add(const std::string& name, Tensor<T> init) {
    for (const auto& e : entries)
      if (e.name == name)
        throw std::invalid_argument("ParamStore: duplicate name " + name);
    auto v = make_var(std::move(init), true);
    entries.push_back({name, v});
    return v;
  }

  std::size_t total_params(const std::string& prefix = "") const {
    std::size_t n = 0;
    for (const auto& e : entries)
      if (e.name.rfind(prefix, 0) == 0) n += e.var->value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries)
      if (e.var->grad.numel()) e.var->grad.fill(T(0));
  }
};

namespace init {

// He-normal scaled for leaky ReLU fan-in.
template <typename T>
Tensor<T> kaiming_conv(std::size_t cout, std::size_t cin, std::size_t kh,
                       std::size_t kw, T slope, std::uint64_t seed) {
  Tensor<T> w({cout, cin, kh, kw});
  double fan_in = static_cast<double>(cin * kh * kw);
  double stddev = std::sqrt(2.0 / ((1.0 + slope * slope) * fan_in));
  Rng rng(seed);
  for (std::size_t i = 0; i < w.numel(); ++i)
    w[i] = static_cast<T>(rng.normal(0.0, stddev));
  return w;
}

template <typename T>
Tensor<T> kaiming_linear(std::size_t dout, std::size_t din, T slope,
                         std::uint64_t seed) {
  Tensor<T> w({dout, din});
  double fan_in = static_cast<double>(din);
  double stddev = std::sqrt(2.0 / ((1.0 + slope * slope) * fan_in));
  Rng rng(seed);
  for (std::size_t i = 0; i < w.numel(); ++i)
    w[i] = static_cast<T>(rng.normal(0.0, stddev));
  return w;
}

}  // namespace init

template <typename T>
struct Conv2dLayer {
  Var<T> w, b;
  std::size_t stride = 1, pad = 1;

  Conv2dLayer() = default;
  Conv2dLayer(ParamStore<T>& store, const std::string& name, std::size_t cin,
              std::size_t cout, std::size_t k, std::size_t stride_,
              std::size_t pad_, std::uint64_t seed, T slope = T(0.2))
      : stride(stride_), pad(pad_) {
    w = store.add(name + ".w",
                  init::kaiming_conv<T>(cout, cin, k, k, slope, seed));
    b = store.add(name + ".b", Tensor<T>({cout}));
  }

  Var<T> operator()(const Var<T>& x) const {
    return conv2d(x, w, b, stride, pad);
  }
};

template <typename T>
struct LinearLayer {
  Var<T> w, b;

  LinearLayer() = default;
  LinearLayer(ParamStore<T>& store, const std::string& name, std::size_t din,
              std::size_t dout, std::uint64_t seed, T slope = T(0.2)) {
    w = store.add(name + ".w", init::kaiming_linear<T>(dout, din, slope, seed));
    b = store.add(name + ".b", Tensor<T>({dout}));
  }

  Var<T> operator()(const Var<T>& x) const { return linear(x, w, b); }
};

}  // namespace auda
