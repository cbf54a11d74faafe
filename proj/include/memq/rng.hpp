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

#ifndef MEMQ_RNG_HPP_
#define MEMQ_RNG_HPP_

#include <cstdint>
#include <string_view>

namespace memq {

/// Counter-based pseudo-random stream. Each draw hashes (key, counter),
/// so identical seeds and call sequences give identical outputs, and
/// split() derives an independent child stream from a label without
/// disturbing the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ kKeyTweak)), ctr_(0) {}

  Rng split(std::uint64_t label) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(label + kSplitTweak));
    child.ctr_ = 0;
    return child;
  }

  Rng split(std::string_view label) const { return split(fnv1a(label)); }

  std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++ctr_); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), n >= 1.
  std::uint64_t uniform_int(std::uint64_t n) {
    // 128-bit multiply keeps the bound exact without modulo bias worth
    // caring about at these ranges.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool coin() { return (next_u64() & 1) != 0; }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

 private:
  static constexpr std::uint64_t kKeyTweak = 0x8f3c9e1db76ad501ull;
  static constexpr std::uint64_t kSplitTweak = 0x5851f42d4c957f2dull;

  // splitmix64 finalizer.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t key_;
  std::uint64_t ctr_;
};

}  // namespace memq

#endif  // MEMQ_RNG_HPP_
