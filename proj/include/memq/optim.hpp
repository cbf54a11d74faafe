// Copyright 2026 The memq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MEMQ_OPTIM_HPP_
#define MEMQ_OPTIM_HPP_

#include <cmath>
#include <vector>

#include "memq/param_store.hpp"

namespace memq {

/// Linear exploration schedule: eps_start at step 0 decaying to eps_end at
/// decay_steps and constant afterwards.
inline double epsilon_at(std::size_t step, double eps_start = 1.0,
                         double eps_end = 0.1,
                         std::size_t decay_steps = 1000000) {
  const double frac =
      static_cast<double>(std::min(step, decay_steps)) / decay_steps;
  return eps_start - (eps_start - eps_end) * frac;
}

/// Centered rmsprop with gradient and squared-gradient momenta plus a
/// global-norm clip applied before the accumulators see the gradients.
class RmsProp {
 public:
  RmsProp(const ParamStore& params, double momentum = 0.95,
          double sq_momentum = 0.95, double clip_norm = 20.0,
          double damping = 1e-2)
      : momentum_(momentum),
        sq_momentum_(sq_momentum),
        clip_norm_(clip_norm),
        damping_(damping) {
    for (std::size_t i = 0; i < params.count(); ++i) {
      g_avg_.emplace_back(params.entry(i).value.shape);
      sq_avg_.emplace_back(params.entry(i).value.shape);
    }
  }

  double clip_norm() const { return clip_norm_; }

  /// Applies one update from the store's grad buffers; returns the gradient
  /// norm before clipping.
  double step(ParamStore& params, double lr) {
    const double norm = params.grad_l2_norm();
    if (!std::isfinite(norm))
      throw NumericError("rmsprop: non-finite gradient norm");
    if (norm > clip_norm_ && norm > 0.0)
      params.scale_grad(clip_norm_ / norm);
    for (std::size_t i = 0; i < params.count(); ++i) {
      auto& entry = params.entry(i);
      TensorF& ga = g_avg_[i];
      TensorF& sa = sq_avg_[i];
      for (std::size_t j = 0; j < entry.value.size(); ++j) {
        const double g = entry.grad.data[j];
        ga.data[j] = momentum_ * ga.data[j] + (1.0 - momentum_) * g;
        sa.data[j] = sq_momentum_ * sa.data[j] + (1.0 - sq_momentum_) * g * g;
        const double denom =
            std::sqrt(sa.data[j] - ga.data[j] * ga.data[j] + damping_);
        entry.value.data[j] -= lr * g / denom;
        if (!std::isfinite(entry.value.data[j]))
          throw NumericError("rmsprop: non-finite parameter update in " +
                             entry.name);
      }
    }
    return norm;
  }

  const TensorF& grad_avg(std::size_t i) const { return g_avg_[i]; }
  const TensorF& sq_avg(std::size_t i) const { return sq_avg_[i]; }

 private:
  double momentum_, sq_momentum_, clip_norm_, damping_;
  std::vector<TensorF> g_avg_, sq_avg_;
};

/// theta' <- momentum * theta' + (1 - momentum) * theta
inline void soft_update(ParamStore& target, const ParamStore& online,
                        double momentum = 0.999) {
  if (target.count() != online.count())
    throw std::invalid_argument("soft_update: store layouts differ");
  for (std::size_t i = 0; i < target.count(); ++i) {
    auto& t = target.entry(i).value;
    const auto& o = online.entry(i).value;
    for (std::size_t j = 0; j < t.size(); ++j)
      t.data[j] = momentum * t.data[j] + (1.0 - momentum) * o.data[j];
  }
}

}  // namespace memq

#endif  // MEMQ_OPTIM_HPP_
