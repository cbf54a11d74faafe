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

#ifndef MEMQ_ARCH_HPP_
#define MEMQ_ARCH_HPP_

#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "memq/kernels.hpp"
#include "memq/param_store.hpp"
#include "memq/rng.hpp"
#include "memq/tensor.hpp"

namespace memq {

enum class Arch { kDqn, kDrqn, kMqn, kRmqn, kFrmqn };

inline const char* arch_name(Arch a) {
  switch (a) {
    case Arch::kDqn: return "dqn";
    case Arch::kDrqn: return "drqn";
    case Arch::kMqn: return "mqn";
    case Arch::kRmqn: return "rmqn";
    case Arch::kFrmqn: return "frmqn";
  }
  return "?";
}

inline Arch arch_from_name(const std::string& s) {
  if (s == "dqn") return Arch::kDqn;
  if (s == "drqn") return Arch::kDrqn;
  if (s == "mqn") return Arch::kMqn;
  if (s == "rmqn") return Arch::kRmqn;
  if (s == "frmqn") return Arch::kFrmqn;
  throw std::invalid_argument("unknown architecture: " + s);
}

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ArchConfig {
  Arch variant = Arch::kFrmqn;
  std::size_t frames = 10;    // training input window length
  std::size_t mem_size = 9;   // memory slots (0 for dqn/drqn)
  std::size_t embed = 256;    // context width; also the Q-head hidden width
  std::size_t actions = 6;
  std::size_t img = 32;       // observation side length
  std::size_t channels = 3;   // observation channels
  std::size_t conv1 = 32;
  std::size_t conv2 = 64;

  bool is_recurrent() const {
    return variant == Arch::kDrqn || variant == Arch::kRmqn ||
           variant == Arch::kFrmqn;
  }
  bool has_memory() const {
    return variant == Arch::kMqn || variant == Arch::kRmqn ||
           variant == Arch::kFrmqn;
  }

  std::size_t conv_side() const {
    std::size_t s1 = (img + 2 - 4) / 2 + 1;
    return (s1 + 2 - 4) / 2 + 1;
  }
  /// Flattened second-conv output width.
  std::size_t enc_dim() const { return conv2 * conv_side() * conv_side(); }
  /// Width of the per-frame feature consumed by the context layer.
  std::size_t feat_dim() const {
    return has_memory() ? enc_dim() : embed;  // dqn/drqn add an fc layer
  }
  std::size_t conv_in_channels() const {
    return variant == Arch::kDqn ? channels * frames : channels;
  }
  /// LSTM input width (frmqn appends the previous retrieval separately).
  std::size_t lstm_in() const {
    return variant == Arch::kDrqn ? embed : enc_dim();
  }

  void validate() const {
    if (frames < 1) throw ConfigError("frames must be >= 1");
    if (img < 8 || img % 4 != 0)
      throw ConfigError("image side must be a multiple of 4, >= 8");
    if (has_memory()) {
      if (mem_size < 1)
        throw ConfigError("memory architectures need mem_size >= 1");
      if (frames < 2)
        throw ConfigError("memory architectures need frames >= 2");
    } else if (mem_size != 0) {
      throw ConfigError("dqn/drqn must have mem_size == 0");
    }
    if (embed < 2 || embed % 2 != 0)
      throw ConfigError("embed width must be even (half-rectified head)");
  }
};

/// One of the five Q-architectures: a parameter store laid out for the
/// configured variant. Forward passes live in the spec ops below and in
/// the batched engine.
struct AgentNet {
  ArchConfig cfg;
  ParamStore params;

  static AgentNet init(const ArchConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    AgentNet net;
    net.cfg = cfg;
    ParamStore& p = net.params;
    const std::size_t e = cfg.enc_dim();
    const std::size_t m = cfg.embed;
    const std::size_t in_c = cfg.conv_in_channels();

    p.add("conv1.w", {cfg.conv1, in_c, 4, 4});
    p.add("conv1.b", {cfg.conv1});
    p.add("conv2.w", {cfg.conv2, cfg.conv1, 4, 4});
    p.add("conv2.b", {cfg.conv2});
    if (!cfg.has_memory()) {
      p.add("fc.w", {m, e});
      p.add("fc.b", {m});
    }
    if (cfg.variant == Arch::kMqn) p.add("ctx.w", {m, e});
    if (cfg.is_recurrent()) {
      p.add("lstm.wx", {4 * m, cfg.lstm_in()});
      if (cfg.variant == Arch::kFrmqn) p.add("lstm.wo", {4 * m, m});
      p.add("lstm.uh", {4 * m, m});
      p.add("lstm.b", {4 * m});
    }
    if (cfg.has_memory()) {
      p.add("mem.key.w", {m, e});
      p.add("mem.val.w", {m, e});
    }
    p.add("head.h.w", {m, m});
    p.add("head.q.w", {cfg.actions, m});

    Rng root = Rng(seed).split("net-init");
    const std::size_t lstm_fan =
        cfg.lstm_in() + m + (cfg.variant == Arch::kFrmqn ? m : 0);
    for (std::size_t i = 0; i < p.count(); ++i) {
      auto& entry = p.entry(i);
      const std::string& n = entry.name;
      std::size_t fan = 0;
      if (n == "conv1.w") fan = in_c * 16;
      else if (n == "conv2.w") fan = cfg.conv1 * 16;
      else if (n == "fc.w" || n == "ctx.w" || n == "mem.key.w" ||
               n == "mem.val.w") fan = e;
      else if (n == "lstm.wx" || n == "lstm.wo" || n == "lstm.uh")
        fan = lstm_fan;
      else if (n == "head.h.w" || n == "head.q.w") fan = m;
      if (fan > 0) p.init_uniform(n, fan, root.split(n));
    }
    if (cfg.is_recurrent()) {
      // forget-gate bias starts at +1 so cell state carries early on
      TensorF& b = p.value("lstm.b");
      for (std::size_t j = m; j < 2 * m; ++j) b.data[j] = 1.0;
    }
    return net;
  }

};

// ---------------------------------------------------------------------------
// Spec-level operations (straight-line, single instance). These are the
// readable definitions of each stage; the batched engine must agree with
// their composition and is tested against it.

/// Per-frame encoder. For dqn the input is the channel-stacked window.
inline TensorF encode(const AgentNet& net, const TensorF& obs) {
  const ArchConfig& c = net.cfg;
  require_shape(obs, {c.conv_in_channels(), c.img, c.img}, "encode input");
  TensorF a = conv2d(obs, net.params.value("conv1.w"),
                     net.params.value("conv1.b"));
  a = relu_half(a, 0);
  TensorF b = conv2d(a, net.params.value("conv2.w"),
                     net.params.value("conv2.b"));
  b = relu_half(b, 0);
  TensorF e({c.enc_dim()}, std::move(b.data));
  if (c.has_memory()) return e;
  TensorF flat({c.enc_dim(), 1}, std::move(e.data));
  TensorF pre = matmul(net.params.value("fc.w"), flat);
  const TensorF& bias = net.params.value("fc.b");
  for (std::size_t i = 0; i < pre.size(); ++i) pre.data[i] += bias.data[i];
  pre.shape = {c.embed};
  return relu_half(pre, 0);
}

struct MemoryBlocks {
  TensorF keys;    // [m x M]
  TensorF values;  // [m x M]
  std::size_t valid = 0;  // leading columns holding real entries
};

/// Projects the window of past encodings (most recent first, zero columns
/// past `valid`) into key and value blocks.
inline MemoryBlocks memory_write(const TensorF& past, const TensorF& key_w,
                                 const TensorF& val_w, std::size_t valid) {
  MemoryBlocks b;
  b.keys = matmul(key_w, past);
  b.values = matmul(val_w, past);
  b.valid = valid;
  return b;
}

struct ReadResult {
  TensorF retrieved;  // [m]
  TensorF attention;  // [M]; entries past valid are exactly zero
};

inline ReadResult memory_read(const TensorF& context,
                              const MemoryBlocks& blocks) {
  const std::size_t m = context.size();
  const std::size_t slots = blocks.keys.shape[1];
  if (blocks.valid == 0)
    throw std::logic_error(
        "memory_read: no valid entries (memory is never empty after reset)");
  TensorF logits({blocks.valid});
  for (std::size_t j = 0; j < blocks.valid; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      s += context.data[i] * blocks.keys.at(i, j);
    logits.data[j] = s;
  }
  TensorF w = softmax(logits);
  ReadResult r{TensorF({m}), TensorF({slots})};
  for (std::size_t j = 0; j < blocks.valid; ++j) {
    r.attention.data[j] = w.data[j];
    for (std::size_t i = 0; i < m; ++i)
      r.retrieved.data[i] += w.data[j] * blocks.values.at(i, j);
  }
  return r;
}

/// Per-episode forward state for the straight-line path: the ring of past
/// encodings plus the recurrent and feedback carries.
struct AgentState {
  std::deque<TensorF> past;  // encodings, most recent first
  TensorF h, c;              // recurrent context (recurrent variants)
  TensorF retrieved_prev;    // previous retrieval (frmqn)
  std::size_t step = 0;

  static AgentState fresh(const ArchConfig& cfg) {
    AgentState s;
    if (cfg.is_recurrent()) {
      s.h = TensorF({cfg.embed});
      s.c = TensorF({cfg.embed});
    }
    if (cfg.variant == Arch::kFrmqn) s.retrieved_prev = TensorF({cfg.embed});
    return s;
  }
};

/// Builds the context vector for the current feature and advances the
/// recurrent state.
inline TensorF context(const AgentNet& net, const TensorF& feat,
                       AgentState& state) {
  const ArchConfig& c = net.cfg;
  switch (c.variant) {
    case Arch::kMqn: {
      TensorF col({feat.size(), 1}, std::vector<double>(feat.data));
      TensorF h = matmul(net.params.value("ctx.w"), col);
      h.shape = {c.embed};
      return h;
    }
    case Arch::kDrqn:
    case Arch::kRmqn: {
      if (state.h.size() != c.embed)
        throw ConfigError("context: state not initialized for variant");
      LstmParams p{&net.params.value("lstm.wx"), &net.params.value("lstm.uh"),
                   &net.params.value("lstm.b")};
      auto [h2, c2] = lstm_cell(feat, state.h, state.c, p);
      state.h = h2;
      state.c = c2;
      return state.h;
    }
    case Arch::kFrmqn: {
      if (state.h.size() != c.embed || state.retrieved_prev.size() != c.embed)
        throw ConfigError("context: state not initialized for variant");
      // pre = b + Wx*e + Wo*o_prev + Uh*h, evaluated as separate products so
      // a zero feedback block reproduces the rmqn computation exactly
      const TensorF& wx = net.params.value("lstm.wx");
      const TensorF& wo = net.params.value("lstm.wo");
      const TensorF& uh = net.params.value("lstm.uh");
      const std::size_t m = c.embed;
      TensorF pre = net.params.value("lstm.b");
      detail::gemm(false, false, 4 * m, 1, feat.size(), wx.data.data(),
                   feat.data.data(), pre.data.data(), true);
      detail::gemm(false, false, 4 * m, 1, m, wo.data.data(),
                   state.retrieved_prev.data.data(), pre.data.data(), true);
      detail::gemm(false, false, 4 * m, 1, m, uh.data.data(),
                   state.h.data.data(), pre.data.data(), true);
      TensorF h2({m}), c2({m});
      for (std::size_t j = 0; j < m; ++j) {
        const double gi = sigmoid(pre.data[j]);
        const double gf = sigmoid(pre.data[m + j]);
        const double gg = std::tanh(pre.data[2 * m + j]);
        const double go = sigmoid(pre.data[3 * m + j]);
        c2.data[j] = gf * state.c.data[j] + gi * gg;
        h2.data[j] = go * std::tanh(c2.data[j]);
      }
      state.h = h2;
      state.c = c2;
      return state.h;
    }
    case Arch::kDqn:
      throw ConfigError("context: dqn has no context stage");
  }
  throw ConfigError("context: unreachable");
}

/// Final action-value head: hidden = f(Wh*context + retrieved), with the
/// rectifier applied to the second half for memory variants and to the whole
/// vector for the baselines; q = Wq*hidden.
inline TensorF q_head(const AgentNet& net, const TensorF& ctx,
                      const TensorF& retrieved) {
  const std::size_t m = net.cfg.embed;
  TensorF col({m, 1}, std::vector<double>(ctx.data));
  TensorF pre = matmul(net.params.value("head.h.w"), col);
  pre.shape = {m};
  for (std::size_t i = 0; i < m; ++i) pre.data[i] += retrieved.data[i];
  const std::size_t split = net.cfg.has_memory() ? m / 2 : 0;
  TensorF g = relu_half(pre, split);
  TensorF gc({m, 1}, std::move(g.data));
  TensorF q = matmul(net.params.value("head.q.w"), gc);
  q.shape = {net.cfg.actions};
  return q;
}

/// One full action-value pass over a window of observations, composed from
/// the straight-line ops above. `mem_slots` may exceed the training memory
/// size for memory variants; 0 means the configured size.
///
/// Memory at step t holds the encodings of the previous frames within the
/// window (most recent first); the current frame enters through the context
/// path only.
inline TensorF q_values_reference(const AgentNet& net,
                                  std::span<const TensorF> window,
                                  std::size_t mem_slots = 0) {
  const ArchConfig& c = net.cfg;
  if (c.variant == Arch::kDqn) {
    if (window.size() != c.frames)
      throw ConfigError("dqn takes exactly the training window of " +
                        std::to_string(c.frames) + " frames, got " +
                        std::to_string(window.size()));
    TensorF stacked({c.channels * c.frames, c.img, c.img});
    std::size_t off = 0;
    for (const TensorF& f : window) {
      require_shape(f, {c.channels, c.img, c.img}, "dqn frame");
      std::copy(f.data.begin(), f.data.end(), stacked.data.begin() + off);
      off += f.size();
    }
    TensorF h = encode(net, stacked);
    return q_head(net, h, TensorF({c.embed}));
  }

  if (window.empty()) throw ConfigError("empty observation window");
  if (c.has_memory() && window.size() < 2)
    throw ConfigError("memory architectures need at least two frames");
  const std::size_t slots = c.has_memory()
                                ? (mem_slots == 0 ? c.mem_size : mem_slots)
                                : 0;
  if (c.has_memory() && slots < c.mem_size)
    throw ConfigError("memory size below the trained size");

  AgentState state = AgentState::fresh(c);
  TensorF ctx, retrieved({c.embed});
  const std::size_t e = c.enc_dim();
  for (const TensorF& obs : window) {
    TensorF feat = encode(net, obs);
    if (c.variant == Arch::kDrqn) {
      ctx = context(net, feat, state);
    } else {
      ctx = context(net, feat, state);
      const std::size_t valid = std::min(state.past.size(), slots);
      if (valid > 0) {
        TensorF past({e, slots});
        for (std::size_t j = 0; j < valid; ++j)
          for (std::size_t i = 0; i < e; ++i)
            past.at(i, j) = state.past[j].data[i];
        MemoryBlocks blocks =
            memory_write(past, net.params.value("mem.key.w"),
                         net.params.value("mem.val.w"), valid);
        ReadResult r = memory_read(ctx, blocks);
        retrieved = r.retrieved;
      } else {
        retrieved = TensorF({c.embed});
      }
      if (c.variant == Arch::kFrmqn) state.retrieved_prev = retrieved;
      state.past.push_front(feat);
      if (state.past.size() > slots) state.past.pop_back();
    }
    ++state.step;
  }
  return q_head(net, ctx,
                c.has_memory() ? retrieved : TensorF({c.embed}));
}

/// Greedy action with ties broken toward the lowest index.
inline std::size_t argmax_action(const TensorF& q) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i)
    if (q.data[i] > q.data[best]) best = i;
  return best;
}

}  // namespace memq

#endif  // MEMQ_ARCH_HPP_
