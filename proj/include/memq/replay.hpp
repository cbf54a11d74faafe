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

#ifndef MEMQ_REPLAY_HPP_
#define MEMQ_REPLAY_HPP_

#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "memq/rng.hpp"
#include "memq/tensor.hpp"

namespace memq {

/// Observations store one byte per channel value; the renderer already
/// snaps to the 1/255 grid, so this is lossless for rendered frames.
struct StoredObs {
  std::vector<std::uint8_t> bytes;
  std::vector<std::size_t> shape;

  static StoredObs from(const TensorF& t) {
    StoredObs o;
    o.shape = t.shape;
    o.bytes.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
      o.bytes[i] = static_cast<std::uint8_t>(
          std::lround(std::min(1.0, std::max(0.0, t.data[i])) * 255.0));
    return o;
  }

  TensorF decode() const {
    TensorF t(shape);
    for (std::size_t i = 0; i < bytes.size(); ++i)
      t.data[i] = bytes[i] / 255.0;
    return t;
  }
};

/// One finished episode: n transitions and n+1 observations (the last one
/// is the observation after the final action).
struct Episode {
  std::vector<StoredObs> frames;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;

  std::size_t length() const { return actions.size(); }
};

/// Ring of whole episodes capped by total transition count; eviction always
/// removes the oldest episode in full.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {}

  void add(Episode ep) {
    if (ep.length() == 0) return;
    if (ep.frames.size() != ep.length() + 1 ||
        ep.rewards.size() != ep.length())
      throw std::invalid_argument("episode record is inconsistent");
    total_ += ep.length();
    episodes_.push_back(std::move(ep));
    while (total_ > capacity_ && episodes_.size() > 1) {
      total_ -= episodes_.front().length();
      episodes_.pop_front();
    }
  }

  std::size_t total_transitions() const { return total_; }
  std::size_t episode_count() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Episode& episode(std::size_t i) const { return episodes_[i]; }

  bool ready(std::size_t batch) const { return total_ >= batch; }

  /// Uniform draw over (episode, transition) pairs.
  std::pair<std::size_t, std::size_t> sample_index(Rng& rng) const {
    std::size_t u = rng.uniform_int(total_);
    for (std::size_t e = 0; e < episodes_.size(); ++e) {
      if (u < episodes_[e].length()) return {e, u};
      u -= episodes_[e].length();
    }
    throw std::logic_error("replay bookkeeping out of sync");
  }

 private:
  std::deque<Episode> episodes_;
  std::size_t total_ = 0;
  std::size_t capacity_;
};

/// One training minibatch: per sample a K-frame window ending at the chosen
/// transition and the K-frame successor window, with the episode's first
/// frame repeated where the window runs past the start.
struct Batch {
  std::vector<std::vector<TensorF>> storage;           // K+1 frames/sample
  std::vector<std::vector<const TensorF*>> windows;     // K frames
  std::vector<std::vector<const TensorF*>> succ_windows;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<bool> terminal;

  std::size_t size() const { return actions.size(); }
};

struct NotReady {};  // sampling signal: keep acting, not enough data yet

inline Batch sample_batch(const ReplayMemory& replay, Rng& rng,
                          std::size_t window_len, std::size_t batch_size) {
  if (!replay.ready(batch_size)) throw NotReady{};
  Batch out;
  out.storage.resize(batch_size);
  out.windows.resize(batch_size);
  out.succ_windows.resize(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    auto [e, j] = replay.sample_index(rng);
    const Episode& ep = replay.episode(e);
    auto& frames = out.storage[b];
    frames.reserve(window_len + 1);
    // chronological frames j-K+1 .. j+1, clamped to the episode start
    for (long i = static_cast<long>(j) - static_cast<long>(window_len) + 1;
         i <= static_cast<long>(j) + 1; ++i)
      frames.push_back(ep.frames[i < 0 ? 0 : i].decode());
    for (std::size_t i = 0; i < window_len; ++i) {
      out.windows[b].push_back(&frames[i]);
      out.succ_windows[b].push_back(&frames[i + 1]);
    }
    out.actions.push_back(ep.actions[j]);
    out.rewards.push_back(ep.rewards[j]);
    out.terminal.push_back(j + 1 == ep.length());
  }
  return out;
}

}  // namespace memq

#endif  // MEMQ_REPLAY_HPP_
