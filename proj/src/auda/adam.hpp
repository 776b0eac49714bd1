#pragma once
// Adaptive moment estimation over a ParamStore.  Moment buffers are owned
// here, parallel to the store's entry list, and serialize with checkpoints
// so a resumed run continues the exact same trajectory.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "auda/nn.hpp"

namespace auda {

template <typename T>
struct Adam {
  double lr = 0.001;
  double beta1 = 0.5, beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<Tensor<T>> m, v;

  Adam() = default;
  Adam(const ParamStore<T>& store, double lr_, double beta1_, double beta2_)
      : lr(lr_), beta1(beta1_), beta2(beta2_) {
    if (!(lr > 0)) throw std::invalid_argument("Adam: learning rate must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
      throw std::invalid_argument("Adam: betas must lie in [0,1)");
    for (const auto& e : store.entries) {
      Tensor<T> zm(e.var->value.shape()), zv(e.var->value.shape());
      zm.fill(T(0));
      zv.fill(T(0));
      m.push_back(std::move(zm));
      v.push_back(std::move(zv));
    }
  }

  void step(ParamStore<T>& store) {
    if (m.size() != store.entries.size())
      throw std::invalid_argument("Adam: moment buffers do not match store");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t p = 0; p < m.size(); ++p) {
      auto& var = *store.entries[p].var;
      if (var.grad.numel() != var.value.numel()) continue;  // untouched param
      for (std::size_t i = 0; i < var.value.numel(); ++i) {
        const double g = static_cast<double>(var.grad[i]);
        const double mi = beta1 * m[p][i] + (1.0 - beta1) * g;
        const double vi = beta2 * v[p][i] + (1.0 - beta2) * g * g;
        m[p][i] = static_cast<T>(mi);
        v[p][i] = static_cast<T>(vi);
        const double mh = mi / bc1;
        const double vh = vi / bc2;
        var.value[i] =
            static_cast<T>(var.value[i] - lr * mh / (std::sqrt(vh) + eps));
      }
    }
  }
};

}  // namespace auda
