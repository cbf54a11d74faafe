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

#ifndef MEMQ_TESTS_SUPPORT_MINI_HPP_
#define MEMQ_TESTS_SUPPORT_MINI_HPP_

#include <vector>

#include "memq/arch.hpp"
#include "memq/rng.hpp"
#include "support/fd.hpp"

namespace memq::test {

/// Tiny profile used throughout the tests: 8x8 frames, 4/8 conv channels
/// (32-wide encoding), 16-wide context, 4-frame window, 3 memory slots.
inline ArchConfig mini_cfg(Arch v, std::size_t frames = 4,
                           std::size_t mem = 3) {
  ArchConfig c;
  c.variant = v;
  c.frames = frames;
  c.mem_size = (v == Arch::kDqn || v == Arch::kDrqn) ? 0 : mem;
  c.embed = 16;
  c.actions = 6;
  c.img = 8;
  c.conv1 = 4;
  c.conv2 = 8;
  return c;
}

inline std::vector<TensorF> random_window(const ArchConfig& c, std::size_t n,
                                          Rng& rng) {
  std::vector<TensorF> w;
  for (std::size_t i = 0; i < n; ++i)
    w.push_back(random_tensor({c.channels, c.img, c.img}, rng, 0.0, 1.0));
  return w;
}

inline std::vector<const TensorF*> ptrs(const std::vector<TensorF>& w) {
  std::vector<const TensorF*> p;
  for (const auto& t : w) p.push_back(&t);
  return p;
}

}  // namespace memq::test

#endif  // MEMQ_TESTS_SUPPORT_MINI_HPP_
