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

#ifndef MEMQ_GRAD_CHECK_HPP_
#define MEMQ_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>

#include "memq/param_store.hpp"

namespace memq {

/// Compares analytic gradients against central finite differences for every
/// parameter coordinate of a deterministic scalar function.
///
/// `loss` must evaluate the function at the store's current values without
/// side effects. The analytic gradient is read from the store's grad
/// buffers, which the caller fills (typically loss + backward) before the
/// call. Returns the maximum relative error, using
/// max(|analytic|, |numeric|, 1e-8) as the denominator.
inline double grad_check(ParamStore& params,
                         const std::function<double()>& loss,
                         double eps = 1e-5) {
  double worst = 0.0;
  for (std::size_t e = 0; e < params.count(); ++e) {
    auto& entry = params.entry(e);
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double saved = entry.value.data[i];
      entry.value.data[i] = saved + eps;
      const double up = loss();
      entry.value.data[i] = saved - eps;
      const double down = loss();
      entry.value.data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = entry.grad.data[i];
      const double denom =
          std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      worst = std::max(worst, std::fabs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace memq

#endif  // MEMQ_GRAD_CHECK_HPP_
