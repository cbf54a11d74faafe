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

#ifndef MEMQ_ENGINE_HPP_
#define MEMQ_ENGINE_HPP_

#include <algorithm>
#include <cmath>
#include <cstring>
#include <span>
#include <vector>

#include "memq/arch.hpp"
#include "memq/blas.hpp"
#include "memq/kernels.hpp"
#include "memq/tensor.hpp"

namespace memq {

namespace detail {

// im2col / col2im over one image whose channel planes sit `chan_stride`
// doubles apart; patch rows are `ld` doubles long, the image's block starts
// at column `col0`.
inline void im2col_at(const double* x, std::size_t chan_stride,
                      const ConvDims& d, double* cols, std::size_t ld,
                      std::size_t col0) {
  for (std::size_t c = 0; c < d.c_in; ++c) {
    const double* plane = x + c * chan_stride;
    for (std::size_t ky = 0; ky < 4; ++ky) {
      for (std::size_t kx = 0; kx < 4; ++kx) {
        double* row = cols + ((c * 4 + ky) * 4 + kx) * ld + col0;
        for (std::size_t oy = 0; oy < d.h_out; ++oy) {
          const long iy = static_cast<long>(2 * oy + ky) - 1;
          const bool y_ok = iy >= 0 && iy < static_cast<long>(d.h);
          for (std::size_t ox = 0; ox < d.w_out; ++ox) {
            const long ix = static_cast<long>(2 * ox + kx) - 1;
            row[oy * d.w_out + ox] =
                (y_ok && ix >= 0 && ix < static_cast<long>(d.w))
                    ? plane[iy * d.w + ix]
                    : 0.0;
          }
        }
      }
    }
  }
}

inline void col2im_at(const double* cols, std::size_t ld, std::size_t col0,
                      const ConvDims& d, double* dx, std::size_t chan_stride) {
  for (std::size_t c = 0; c < d.c_in; ++c) {
    double* plane = dx + c * chan_stride;
    for (std::size_t ky = 0; ky < 4; ++ky) {
      for (std::size_t kx = 0; kx < 4; ++kx) {
        const double* row = cols + ((c * 4 + ky) * 4 + kx) * ld + col0;
        for (std::size_t oy = 0; oy < d.h_out; ++oy) {
          const long iy = static_cast<long>(2 * oy + ky) - 1;
          if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
          for (std::size_t ox = 0; ox < d.w_out; ++ox) {
            const long ix = static_cast<long>(2 * ox + kx) - 1;
            if (ix < 0 || ix >= static_cast<long>(d.w)) continue;
            plane[iy * d.w + ix] += row[oy * d.w_out + ox];
          }
        }
      }
    }
  }
}

inline void add_bias_rows(double* y, const double* b, std::size_t rows,
                          std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] += b[r];
}

inline void relu_inplace(double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::max(0.0, y[i]);
}

/// relu that also reports how close the preactivations came to the kink;
/// finite-difference checks need a margin much larger than their step.
/// Exact zeros are skipped: they arise from all-zero receptive fields and
/// stay pinned at zero under small perturbations.
inline double relu_inplace_margin(double* y, std::size_t n) {
  double margin = 1e300;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] != 0.0) margin = std::min(margin, std::fabs(y[i]));
    y[i] = std::max(0.0, y[i]);
  }
  return margin;
}

// Zeroes grad entries where the forward output was clamped; forward output
// of relu is positive exactly where it passed through.
inline void relu_mask(const double* out, double* grad, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (out[i] <= 0.0) grad[i] = 0.0;
}

}  // namespace detail

/// Batched forward/backward over windows of observations for one network,
/// plus the incremental single-window path used when acting. Outputs are
/// cross-checked in the test suite against the straight-line ops in
/// arch.hpp.
class BatchEngine {
 public:
  explicit BatchEngine(AgentNet& net) : net_(&net) { net.cfg.validate(); }

  const ArchConfig& cfg() const { return net_->cfg; }

  /// Smallest |preactivation| seen at any rectifier in the last batched
  /// forward; finite-difference tests require this to dwarf their step.
  double rect_margin() const { return rect_margin_; }

  // --------------------------------------------------------------------
  // Acting path

  struct FrameCtx {
    TensorF feat;  // encoder output consumed by the context layer
    TensorF xg;    // Wx*feat (recurrent) or Wc*feat (mqn)
    TensorF key;   // memory key column
    TensorF val;   // memory value column
  };

  struct StepTrace {
    std::vector<double> attention;  // weights over valid slots, window end
    double retrieved_norm = 0.0;
  };

  /// Encodes one observation and precomputes its frame-local products.
  FrameCtx make_frame(const TensorF& obs) const {
    const ArchConfig& c = net_->cfg;
    if (c.variant == Arch::kDqn)
      throw ConfigError("make_frame: dqn consumes stacked windows");
    FrameCtx f;
    f.feat = encode_one(obs);
    const std::size_t m = c.embed;
    if (c.variant == Arch::kMqn) {
      f.xg = TensorF({m});
      detail::gemm(false, false, m, 1, f.feat.size(),
                   net_->params.value("ctx.w").data.data(),
                   f.feat.data.data(), f.xg.data.data(), false);
    } else {
      f.xg = TensorF({4 * m});
      detail::gemm(false, false, 4 * m, 1, f.feat.size(),
                   net_->params.value("lstm.wx").data.data(),
                   f.feat.data.data(), f.xg.data.data(), false);
    }
    if (c.has_memory()) {
      f.key = TensorF({m});
      f.val = TensorF({m});
      detail::gemm(false, false, m, 1, f.feat.size(),
                   net_->params.value("mem.key.w").data.data(),
                   f.feat.data.data(), f.key.data.data(), false);
      detail::gemm(false, false, m, 1, f.feat.size(),
                   net_->params.value("mem.val.w").data.data(),
                   f.feat.data.data(), f.val.data.data(), false);
    }
    return f;
  }

  /// Action values for one window given per-frame contexts in chronological
  /// order. `mem_slots` == 0 means the configured memory size.
  TensorF q_from_frames(std::span<const FrameCtx* const> frames,
                        std::size_t mem_slots = 0,
                        StepTrace* trace = nullptr) const {
    const ArchConfig& c = net_->cfg;
    if (c.variant == Arch::kDqn)
      throw ConfigError("q_from_frames: dqn consumes stacked windows");
    const std::size_t L = frames.size();
    if (L == 0) throw ConfigError("empty observation window");
    if (c.has_memory() && L < 2)
      throw ConfigError("memory architectures need at least two frames");
    const std::size_t m = c.embed;
    const std::size_t slots =
        c.has_memory() ? (mem_slots == 0 ? c.mem_size : mem_slots) : 0;
    if (c.has_memory() && slots < c.mem_size)
      throw ConfigError("memory size below the trained size");

    TensorF h({m}), cell({m}), o({m});
    if (c.variant == Arch::kMqn) {
      h = frames[L - 1]->xg;
      attend_frames(frames, L - 1, slots, h, &o, trace);
    } else {
      const TensorF& uh = net_->params.value("lstm.uh");
      const TensorF* wo =
          c.variant == Arch::kFrmqn ? &net_->params.value("lstm.wo") : nullptr;
      const TensorF& bias = net_->params.value("lstm.b");
      TensorF pre({4 * m});
      for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t j = 0; j < 4 * m; ++j)
          pre.data[j] = bias.data[j] + frames[t]->xg.data[j];
        if (wo)
          detail::gemm(false, false, 4 * m, 1, m, wo->data.data(),
                       o.data.data(), pre.data.data(), true);
        detail::gemm(false, false, 4 * m, 1, m, uh.data.data(), h.data.data(),
                     pre.data.data(), true);
        for (std::size_t j = 0; j < m; ++j) {
          const double gi = sigmoid(pre.data[j]);
          const double gf = sigmoid(pre.data[m + j]);
          const double gg = std::tanh(pre.data[2 * m + j]);
          const double go = sigmoid(pre.data[3 * m + j]);
          cell.data[j] = gf * cell.data[j] + gi * gg;
          h.data[j] = go * std::tanh(cell.data[j]);
        }
        if (c.variant == Arch::kFrmqn)
          attend_frames(frames, t, slots, h, &o, t + 1 == L ? trace : nullptr);
        else if (c.has_memory() && t + 1 == L)
          attend_frames(frames, t, slots, h, &o, trace);
      }
    }
    return head_one(h, c.has_memory() ? &o : nullptr);
  }

  /// Convenience single-window forward from raw observations.
  TensorF q_single(std::span<const TensorF* const> window,
                   std::size_t mem_slots = 0,
                   StepTrace* trace = nullptr) const {
    const ArchConfig& c = net_->cfg;
    if (c.variant == Arch::kDqn) {
      TensorF feat = encode_one(stack_window(window));
      return head_one(feat, nullptr);
    }
    std::vector<FrameCtx> fr(window.size());
    std::vector<const FrameCtx*> ptrs(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) {
      fr[i] = make_frame(*window[i]);
      ptrs[i] = &fr[i];
    }
    return q_from_frames(ptrs, mem_slots, trace);
  }

  // --------------------------------------------------------------------
  // Training path

  /// windows[b] is sample b's chronological frame list; all lists must have
  /// the training window length. Returns q as a [batch x actions] tensor.
  /// With `with_grads` set, caches are retained and backward(dq) must follow.
  TensorF forward(const std::vector<std::vector<const TensorF*>>& windows,
                  bool with_grads) {
    const ArchConfig& c = net_->cfg;
    B_ = windows.size();
    if (B_ == 0) throw ConfigError("empty batch");
    L_ = windows[0].size();
    for (const auto& w : windows)
      if (w.size() != L_) throw ConfigError("ragged batch of windows");
    if (c.variant == Arch::kDqn && L_ != c.frames)
      throw ConfigError("dqn takes exactly the training window of " +
                        std::to_string(c.frames) + " frames");
    if (c.has_memory() && L_ < 2)
      throw ConfigError("memory architectures need at least two frames");
    with_grads_ = with_grads;
    rect_margin_ = 1e300;
    N_ = c.variant == Arch::kDqn ? B_ : B_ * L_;
    m_ = c.embed;
    slots_ = c.has_memory() ? c.mem_size : 0;

    run_encoder(windows);
    q_ = TensorF({B_, c.actions});
    switch (c.variant) {
      case Arch::kDqn:
        run_head(feat_.data(), nullptr);
        break;
      case Arch::kDrqn:
      case Arch::kRmqn:
      case Arch::kFrmqn:
        run_recurrent();
        break;
      case Arch::kMqn: {
        ctx_.assign(B_ * m_, 0.0);
        const TensorF& wc = net_->params.value("ctx.w");
        detail::gemm(false, true, B_, m_, e_, enc_.data() + (L_ - 1) * e_,
                     wc.data.data(), ctx_.data(), false, L_ * e_, e_, m_);
        o_final_.assign(B_ * m_, 0.0);
        attn_final_.assign(B_ * slots_, 0.0);
        for (std::size_t b = 0; b < B_; ++b)
          attend_rows(b, L_ - 1, &ctx_[b * m_], &o_final_[b * m_],
                      &attn_final_[b * slots_]);
        run_head(ctx_.data(), o_final_.data());
        break;
      }
    }
    return q_;
  }

  /// Backpropagates dq ([batch x actions]) into the parameter grad buffers
  /// (accumulating).
  void backward(const TensorF& dq) {
    const ArchConfig& c = net_->cfg;
    if (!with_grads_) throw std::logic_error("backward without grad caches");
    require_shape(dq, {B_, c.actions}, "backward dq");
    ParamStore& P = net_->params;

    // head: q = g * Wq^T with g = relu_half(head_in * Wh^T (+ o))
    std::vector<double> dg(B_ * m_, 0.0);
    detail::gemm(true, false, c.actions, m_, B_, dq.data.data(),
                 g_hidden_.data(), P.grad("head.q.w").data.data(), true);
    detail::gemm(false, false, B_, m_, c.actions, dq.data.data(),
                 P.value("head.q.w").data.data(), dg.data(), false);
    const std::size_t split = c.has_memory() ? m_ / 2 : 0;
    for (std::size_t b = 0; b < B_; ++b)
      detail::relu_mask(&g_hidden_[b * m_ + split], &dg[b * m_ + split],
                        m_ - split);
    std::vector<double> dh_last(B_ * m_, 0.0);
    detail::gemm(false, false, B_, m_, m_, dg.data(),
                 P.value("head.h.w").data.data(), dh_last.data(), false);
    detail::gemm(true, false, m_, m_, B_, dg.data(), head_in_rows_,
                 P.grad("head.h.w").data.data(), true);

    std::vector<double> denc(N_ * e_, 0.0);
    if (c.has_memory()) {
      dkeys_.assign(N_ * m_, 0.0);
      dvals_.assign(N_ * m_, 0.0);
    }

    switch (c.variant) {
      case Arch::kDqn:
        backward_fc(dh_last.data(), denc.data());
        break;
      case Arch::kMqn: {
        std::vector<double> dctx = dh_last;
        for (std::size_t b = 0; b < B_; ++b)
          attention_backward(b, L_ - 1, &dg[b * m_], &ctx_[b * m_],
                             &attn_final_[b * slots_], &dctx[b * m_]);
        detail::gemm(true, false, m_, e_, B_, dctx.data(),
                     enc_.data() + (L_ - 1) * e_, P.grad("ctx.w").data.data(),
                     true, m_, L_ * e_, e_);
        detail::gemm(false, false, B_, e_, m_, dctx.data(),
                     P.value("ctx.w").data.data(), denc.data() + (L_ - 1) * e_,
                     true, m_, e_, L_ * e_);
        break;
      }
      case Arch::kDrqn:
      case Arch::kRmqn:
      case Arch::kFrmqn:
        backward_recurrent(dh_last, dg, denc);
        break;
    }

    if (c.has_memory()) {
      detail::gemm(true, false, m_, e_, N_, dkeys_.data(), enc_.data(),
                   P.grad("mem.key.w").data.data(), true);
      detail::gemm(false, false, N_, e_, m_, dkeys_.data(),
                   P.value("mem.key.w").data.data(), denc.data(), true);
      detail::gemm(true, false, m_, e_, N_, dvals_.data(), enc_.data(),
                   P.grad("mem.val.w").data.data(), true);
      detail::gemm(false, false, N_, e_, m_, dvals_.data(),
                   P.value("mem.val.w").data.data(), denc.data(), true);
    }

    backward_encoder(denc.data());
    with_grads_ = false;
  }

 private:
  TensorF stack_window(std::span<const TensorF* const> window) const {
    const ArchConfig& c = net_->cfg;
    if (window.size() != c.frames)
      throw ConfigError("dqn takes exactly the training window of " +
                        std::to_string(c.frames) + " frames, got " +
                        std::to_string(window.size()));
    TensorF stacked({c.channels * c.frames, c.img, c.img});
    std::size_t off = 0;
    for (const TensorF* f : window) {
      require_shape(*f, {c.channels, c.img, c.img}, "dqn frame");
      std::copy(f->data.begin(), f->data.end(), stacked.data.begin() + off);
      off += f->size();
    }
    return stacked;
  }

  TensorF encode_one(const TensorF& obs) const {
    const ArchConfig& c = net_->cfg;
    require_shape(obs, {c.conv_in_channels(), c.img, c.img}, "encode input");
    TensorF a = conv2d(obs, net_->params.value("conv1.w"),
                       net_->params.value("conv1.b"));
    detail::relu_inplace(a.data.data(), a.size());
    TensorF b2 = conv2d(a, net_->params.value("conv2.w"),
                        net_->params.value("conv2.b"));
    detail::relu_inplace(b2.data.data(), b2.size());
    TensorF e({c.enc_dim()}, std::move(b2.data));
    if (c.has_memory()) return e;
    TensorF feat = net_->params.value("fc.b");
    detail::gemm(false, false, c.embed, 1, c.enc_dim(),
                 net_->params.value("fc.w").data.data(), e.data.data(),
                 feat.data.data(), true);
    detail::relu_inplace(feat.data.data(), feat.size());
    return feat;
  }

  TensorF head_one(const TensorF& h, const TensorF* o) const {
    const ArchConfig& c = net_->cfg;
    TensorF pre({m_val()});
    detail::gemm(false, false, m_val(), 1, m_val(),
                 net_->params.value("head.h.w").data.data(), h.data.data(),
                 pre.data.data(), false);
    if (o)
      for (std::size_t i = 0; i < pre.size(); ++i) pre.data[i] += o->data[i];
    const std::size_t split = c.has_memory() ? m_val() / 2 : 0;
    for (std::size_t i = split; i < pre.size(); ++i)
      pre.data[i] = std::max(0.0, pre.data[i]);
    TensorF q({c.actions});
    detail::gemm(false, false, c.actions, 1, m_val(),
                 net_->params.value("head.q.w").data.data(), pre.data.data(),
                 q.data.data(), false);
    return q;
  }

  std::size_t m_val() const { return net_->cfg.embed; }

  void attend_frames(std::span<const FrameCtx* const> frames, std::size_t t,
                     std::size_t slots, const TensorF& h, TensorF* o,
                     StepTrace* trace) const {
    o->fill(0.0);
    const std::size_t valid = std::min(t, slots);
    if (trace) {
      trace->attention.clear();
      trace->retrieved_norm = 0.0;
    }
    if (valid == 0) return;
    const std::size_t m = h.size();
    std::vector<double> logits(valid);
    double mx = -1e300;
    for (std::size_t j = 0; j < valid; ++j) {
      const TensorF& key = frames[t - 1 - j]->key;
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += h.data[i] * key.data[i];
      logits[j] = s;
      mx = std::max(mx, s);
    }
    double denom = 0.0;
    for (double& l : logits) {
      l = std::exp(l - mx);
      denom += l;
    }
    for (std::size_t j = 0; j < valid; ++j) {
      const double p = logits[j] / denom;
      const TensorF& val = frames[t - 1 - j]->val;
      for (std::size_t i = 0; i < m; ++i) o->data[i] += p * val.data[i];
      if (trace) trace->attention.push_back(p);
    }
    if (trace) {
      double n2 = 0.0;
      for (double v : o->data) n2 += v * v;
      trace->retrieved_norm = std::sqrt(n2);
    }
  }

  // --- batched internals ---

  void run_encoder(const std::vector<std::vector<const TensorF*>>& windows) {
    const ArchConfig& c = net_->cfg;
    const std::size_t img = c.img;
    const std::size_t in_c = c.conv_in_channels();
    const std::size_t s1 = img / 2, s2 = img / 4;
    p1_ = s1 * s1;
    p2_ = s2 * s2;
    e_ = c.enc_dim();
    d1_ = ConvDims{in_c, img, img, c.conv1, s1, s1};
    d2_ = ConvDims{c.conv1, s1, s1, c.conv2, s2, s2};

    std::vector<const double*> img_ptr(N_);
    if (c.variant == Arch::kDqn) {
      stacked_.assign(N_ * in_c * img * img, 0.0);
      for (std::size_t b = 0; b < B_; ++b) {
        double* dst = stacked_.data() + b * in_c * img * img;
        for (std::size_t t = 0; t < L_; ++t) {
          const TensorF& f = *windows[b][t];
          require_shape(f, {c.channels, img, img}, "dqn frame");
          std::memcpy(dst + t * f.size(), f.data.data(),
                      f.size() * sizeof(double));
        }
        img_ptr[b] = dst;
      }
    } else {
      for (std::size_t b = 0; b < B_; ++b)
        for (std::size_t t = 0; t < L_; ++t) {
          const TensorF& f = *windows[b][t];
          require_shape(f, {c.channels, img, img}, "frame");
          img_ptr[b * L_ + t] = f.data.data();
        }
    }

    cols1_.assign(in_c * 16 * N_ * p1_, 0.0);
    for (std::size_t n = 0; n < N_; ++n)
      detail::im2col_at(img_ptr[n], img * img, d1_, cols1_.data(), N_ * p1_,
                        n * p1_);
    a1_.assign(c.conv1 * N_ * p1_, 0.0);
    detail::gemm(false, false, c.conv1, N_ * p1_, in_c * 16,
                 net_->params.value("conv1.w").data.data(), cols1_.data(),
                 a1_.data(), false);
    detail::add_bias_rows(a1_.data(),
                          net_->params.value("conv1.b").data.data(), c.conv1,
                          N_ * p1_);
    rect_margin_ = std::min(
        rect_margin_, detail::relu_inplace_margin(a1_.data(), a1_.size()));

    cols2_.assign(c.conv1 * 16 * N_ * p2_, 0.0);
    for (std::size_t n = 0; n < N_; ++n)
      detail::im2col_at(a1_.data() + n * p1_, N_ * p1_, d2_, cols2_.data(),
                        N_ * p2_, n * p2_);
    a2_.assign(c.conv2 * N_ * p2_, 0.0);
    detail::gemm(false, false, c.conv2, N_ * p2_, c.conv1 * 16,
                 net_->params.value("conv2.w").data.data(), cols2_.data(),
                 a2_.data(), false);
    detail::add_bias_rows(a2_.data(),
                          net_->params.value("conv2.b").data.data(), c.conv2,
                          N_ * p2_);
    rect_margin_ = std::min(
        rect_margin_, detail::relu_inplace_margin(a2_.data(), a2_.size()));

    enc_.assign(N_ * e_, 0.0);
    for (std::size_t n = 0; n < N_; ++n)
      for (std::size_t ch = 0; ch < c.conv2; ++ch)
        std::memcpy(&enc_[n * e_ + ch * p2_], &a2_[ch * N_ * p2_ + n * p2_],
                    p2_ * sizeof(double));

    if (!c.has_memory()) {
      feat_.assign(N_ * m_, 0.0);
      for (std::size_t n = 0; n < N_; ++n)
        std::memcpy(&feat_[n * m_], net_->params.value("fc.b").data.data(),
                    m_ * sizeof(double));
      detail::gemm(false, true, N_, m_, e_, enc_.data(),
                   net_->params.value("fc.w").data.data(), feat_.data(), true);
      rect_margin_ = std::min(rect_margin_, detail::relu_inplace_margin(
                                                feat_.data(), feat_.size()));
    } else {
      keys_.assign(N_ * m_, 0.0);
      vals_.assign(N_ * m_, 0.0);
      detail::gemm(false, true, N_, m_, e_, enc_.data(),
                   net_->params.value("mem.key.w").data.data(), keys_.data(),
                   false);
      detail::gemm(false, true, N_, m_, e_, enc_.data(),
                   net_->params.value("mem.val.w").data.data(), vals_.data(),
                   false);
    }
    if (c.is_recurrent()) {
      const double* in_rows =
          c.variant == Arch::kDrqn ? feat_.data() : enc_.data();
      const std::size_t in_w = c.variant == Arch::kDrqn ? m_ : e_;
      xg_.assign(N_ * 4 * m_, 0.0);
      detail::gemm(false, true, N_, 4 * m_, in_w, in_rows,
                   net_->params.value("lstm.wx").data.data(), xg_.data(),
                   false);
    }
  }

  void attend_rows(std::size_t b, std::size_t t, const double* h, double* o,
                   double* attn) {
    const std::size_t valid = std::min(t, slots_);
    std::fill(o, o + m_, 0.0);
    std::fill(attn, attn + slots_, 0.0);
    if (valid == 0) return;
    double mx = -1e300;
    std::vector<double> logits(valid);
    for (std::size_t j = 0; j < valid; ++j) {
      const double* key = &keys_[(b * L_ + t - 1 - j) * m_];
      double s = 0.0;
      for (std::size_t i = 0; i < m_; ++i) s += h[i] * key[i];
      logits[j] = s;
      mx = std::max(mx, s);
    }
    double denom = 0.0;
    for (double& l : logits) {
      l = std::exp(l - mx);
      denom += l;
    }
    for (std::size_t j = 0; j < valid; ++j) {
      const double p = logits[j] / denom;
      attn[j] = p;
      const double* val = &vals_[(b * L_ + t - 1 - j) * m_];
      for (std::size_t i = 0; i < m_; ++i) o[i] += p * val[i];
    }
  }

  void run_recurrent() {
    const ArchConfig& c = net_->cfg;
    const bool frmqn = c.variant == Arch::kFrmqn;
    const bool memory = c.has_memory();
    const TensorF& uh = net_->params.value("lstm.uh");
    const TensorF& bias = net_->params.value("lstm.b");
    const TensorF* wo = frmqn ? &net_->params.value("lstm.wo") : nullptr;

    h_steps_.assign(L_ + 1, std::vector<double>(B_ * m_, 0.0));
    c_steps_.assign(L_ + 1, std::vector<double>(B_ * m_, 0.0));
    if (memory) o_steps_.assign(L_ + 1, std::vector<double>(B_ * m_, 0.0));
    gi_.assign(L_, std::vector<double>(B_ * m_));
    gf_.assign(L_, std::vector<double>(B_ * m_));
    gg_.assign(L_, std::vector<double>(B_ * m_));
    go_.assign(L_, std::vector<double>(B_ * m_));
    tc_.assign(L_, std::vector<double>(B_ * m_));
    if (memory)
      attn_steps_.assign(L_, std::vector<double>(B_ * slots_, 0.0));

    std::vector<double> pre(B_ * 4 * m_);
    for (std::size_t t = 0; t < L_; ++t) {
      for (std::size_t b = 0; b < B_; ++b)
        for (std::size_t j = 0; j < 4 * m_; ++j)
          pre[b * 4 * m_ + j] = bias.data[j] + xg_[(b * L_ + t) * 4 * m_ + j];
      if (frmqn)
        detail::gemm(false, true, B_, 4 * m_, m_, o_steps_[t].data(),
                     wo->data.data(), pre.data(), true);
      detail::gemm(false, true, B_, 4 * m_, m_, h_steps_[t].data(),
                   uh.data.data(), pre.data(), true);
      for (std::size_t b = 0; b < B_; ++b) {
        const double* pb = &pre[b * 4 * m_];
        for (std::size_t j = 0; j < m_; ++j) {
          const double i_g = sigmoid(pb[j]);
          const double f_g = sigmoid(pb[m_ + j]);
          const double g_g = std::tanh(pb[2 * m_ + j]);
          const double o_g = sigmoid(pb[3 * m_ + j]);
          const double c2 = f_g * c_steps_[t][b * m_ + j] + i_g * g_g;
          const double tcv = std::tanh(c2);
          gi_[t][b * m_ + j] = i_g;
          gf_[t][b * m_ + j] = f_g;
          gg_[t][b * m_ + j] = g_g;
          go_[t][b * m_ + j] = o_g;
          tc_[t][b * m_ + j] = tcv;
          c_steps_[t + 1][b * m_ + j] = c2;
          h_steps_[t + 1][b * m_ + j] = o_g * tcv;
        }
      }
      if (memory && (frmqn || t + 1 == L_)) {
        for (std::size_t b = 0; b < B_; ++b)
          attend_rows(b, t, &h_steps_[t + 1][b * m_], &o_steps_[t + 1][b * m_],
                      &attn_steps_[t][b * slots_]);
      }
    }
    run_head(h_steps_[L_].data(), memory ? o_steps_[L_].data() : nullptr);
  }

  void run_head(const double* h_rows, const double* o_rows) {
    const ArchConfig& c = net_->cfg;
    g_hidden_.assign(B_ * m_, 0.0);
    detail::gemm(false, true, B_, m_, m_, h_rows,
                 net_->params.value("head.h.w").data.data(), g_hidden_.data(),
                 false);
    if (o_rows)
      for (std::size_t i = 0; i < B_ * m_; ++i) g_hidden_[i] += o_rows[i];
    const std::size_t split = c.has_memory() ? m_ / 2 : 0;
    for (std::size_t b = 0; b < B_; ++b)
      rect_margin_ = std::min(
          rect_margin_, detail::relu_inplace_margin(
                            &g_hidden_[b * m_ + split], m_ - split));
    detail::gemm(false, true, B_, c.actions, m_, g_hidden_.data(),
                 net_->params.value("head.q.w").data.data(), q_.data.data(),
                 false);
    head_in_rows_ = h_rows;
  }

  /// Attention backward for sample b at step t: do is the gradient at the
  /// retrieved vector, h/attn are forward caches. Accumulates into dh and
  /// into the dkeys_/dvals_ rows.
  void attention_backward(std::size_t b, std::size_t t, const double* dov,
                          const double* h, const double* attn, double* dh) {
    const std::size_t valid = std::min(t, slots_);
    if (valid == 0) return;
    std::vector<double> dp(valid);
    double pdp = 0.0;
    for (std::size_t j = 0; j < valid; ++j) {
      const std::size_t row = b * L_ + t - 1 - j;
      const double* val = &vals_[row * m_];
      double s = 0.0;
      for (std::size_t i = 0; i < m_; ++i) s += dov[i] * val[i];
      dp[j] = s;
      pdp += attn[j] * s;
      double* dval = &dvals_[row * m_];
      for (std::size_t i = 0; i < m_; ++i) dval[i] += attn[j] * dov[i];
    }
    for (std::size_t j = 0; j < valid; ++j) {
      const double dlogit = attn[j] * (dp[j] - pdp);
      const std::size_t row = b * L_ + t - 1 - j;
      const double* key = &keys_[row * m_];
      double* dkey = &dkeys_[row * m_];
      for (std::size_t i = 0; i < m_; ++i) {
        dh[i] += dlogit * key[i];
        dkey[i] += dlogit * h[i];
      }
    }
  }

  /// fc backward for dqn/drqn feature rows: dfeat [N x m] -> denc, fc grads.
  void backward_fc(const double* dfeat_in, double* denc) {
    ParamStore& P = net_->params;
    std::vector<double> dfeat(dfeat_in, dfeat_in + N_ * m_);
    detail::relu_mask(feat_.data(), dfeat.data(), N_ * m_);
    TensorF& dbfc = P.grad("fc.b");
    for (std::size_t n = 0; n < N_; ++n)
      for (std::size_t j = 0; j < m_; ++j) dbfc.data[j] += dfeat[n * m_ + j];
    detail::gemm(true, false, m_, e_, N_, dfeat.data(), enc_.data(),
                 P.grad("fc.w").data.data(), true);
    detail::gemm(false, false, N_, e_, m_, dfeat.data(),
                 P.value("fc.w").data.data(), denc, true);
  }

  void backward_recurrent(std::vector<double>& dh, std::vector<double>& dg,
                          std::vector<double>& denc) {
    const ArchConfig& c = net_->cfg;
    const bool frmqn = c.variant == Arch::kFrmqn;
    const bool memory = c.has_memory();
    ParamStore& P = net_->params;
    const TensorF& uh = P.value("lstm.uh");
    const TensorF* wo = frmqn ? &P.value("lstm.wo") : nullptr;

    std::vector<double> dc(B_ * m_, 0.0);
    std::vector<double> dpre_all(N_ * 4 * m_, 0.0);
    // gradient at each step's retrieved vector (memory variants)
    std::vector<std::vector<double>> dov;
    if (memory) {
      dov.assign(L_, std::vector<double>(B_ * m_, 0.0));
      dov[L_ - 1] = dg;  // head adds the retrieval to the hidden preact
    }

    std::vector<double> dpre(B_ * 4 * m_);
    std::vector<double> dh_next(B_ * m_);
    for (std::size_t t = L_; t-- > 0;) {
      if (memory && (frmqn || t + 1 == L_)) {
        for (std::size_t b = 0; b < B_; ++b)
          attention_backward(b, t, &dov[t][b * m_], &h_steps_[t + 1][b * m_],
                             &attn_steps_[t][b * slots_], &dh[b * m_]);
      }
      for (std::size_t b = 0; b < B_; ++b) {
        for (std::size_t j = 0; j < m_; ++j) {
          const std::size_t idx = b * m_ + j;
          const double i_g = gi_[t][idx], f_g = gf_[t][idx],
                       g_g = gg_[t][idx], o_g = go_[t][idx],
                       tcv = tc_[t][idx];
          const double dct = dc[idx] + dh[idx] * o_g * (1.0 - tcv * tcv);
          double* pb = &dpre[b * 4 * m_];
          pb[j] = dct * g_g * i_g * (1.0 - i_g);
          pb[m_ + j] = dct * c_steps_[t][idx] * f_g * (1.0 - f_g);
          pb[2 * m_ + j] = dct * i_g * (1.0 - g_g * g_g);
          pb[3 * m_ + j] = dh[idx] * tcv * o_g * (1.0 - o_g);
          dc[idx] = dct * f_g;
        }
        std::memcpy(&dpre_all[(b * L_ + t) * 4 * m_], &dpre[b * 4 * m_],
                    4 * m_ * sizeof(double));
      }
      // dh for step t-1 and feedback gradient for the previous retrieval
      detail::gemm(false, false, B_, m_, 4 * m_, dpre.data(), uh.data.data(),
                   dh_next.data(), false);
      dh.swap(dh_next);
      if (frmqn && t > 0)
        detail::gemm(false, false, B_, m_, 4 * m_, dpre.data(),
                     wo->data.data(), dov[t - 1].data(), true);
    }

    // batched parameter gradients over all (sample, step) rows
    TensorF& db = P.grad("lstm.b");
    for (std::size_t n = 0; n < N_; ++n)
      for (std::size_t j = 0; j < 4 * m_; ++j)
        db.data[j] += dpre_all[n * 4 * m_ + j];

    scratch_.assign(N_ * m_, 0.0);  // h inputs aligned with dpre rows
    for (std::size_t b = 0; b < B_; ++b)
      for (std::size_t t = 0; t < L_; ++t)
        std::memcpy(&scratch_[(b * L_ + t) * m_], &h_steps_[t][b * m_],
                    m_ * sizeof(double));
    detail::gemm(true, false, 4 * m_, m_, N_, dpre_all.data(), scratch_.data(),
                 P.grad("lstm.uh").data.data(), true);
    if (frmqn) {
      for (std::size_t b = 0; b < B_; ++b)
        for (std::size_t t = 0; t < L_; ++t)
          std::memcpy(&scratch_[(b * L_ + t) * m_], &o_steps_[t][b * m_],
                      m_ * sizeof(double));
      detail::gemm(true, false, 4 * m_, m_, N_, dpre_all.data(),
                   scratch_.data(), P.grad("lstm.wo").data.data(), true);
    }

    const bool drqn = c.variant == Arch::kDrqn;
    const double* in_rows = drqn ? feat_.data() : enc_.data();
    const std::size_t in_w = drqn ? m_ : e_;
    detail::gemm(true, false, 4 * m_, in_w, N_, dpre_all.data(), in_rows,
                 P.grad("lstm.wx").data.data(), true);
    if (drqn) {
      std::vector<double> dfeat(N_ * m_, 0.0);
      detail::gemm(false, false, N_, m_, 4 * m_, dpre_all.data(),
                   P.value("lstm.wx").data.data(), dfeat.data(), false);
      backward_fc(dfeat.data(), denc.data());
    } else {
      detail::gemm(false, false, N_, e_, 4 * m_, dpre_all.data(),
                   P.value("lstm.wx").data.data(), denc.data(), true);
    }
  }

  void backward_encoder(const double* denc) {
    const ArchConfig& c = net_->cfg;
    ParamStore& P = net_->params;
    // scatter back to conv2 layout and mask
    std::vector<double> da2(c.conv2 * N_ * p2_, 0.0);
    for (std::size_t n = 0; n < N_; ++n)
      for (std::size_t ch = 0; ch < c.conv2; ++ch)
        std::memcpy(&da2[ch * N_ * p2_ + n * p2_], &denc[n * e_ + ch * p2_],
                    p2_ * sizeof(double));
    detail::relu_mask(a2_.data(), da2.data(), da2.size());

    detail::gemm(false, true, c.conv2, c.conv1 * 16, N_ * p2_, da2.data(),
                 cols2_.data(), P.grad("conv2.w").data.data(), true);
    TensorF& db2 = P.grad("conv2.b");
    for (std::size_t ch = 0; ch < c.conv2; ++ch) {
      double s = 0.0;
      for (std::size_t i = 0; i < N_ * p2_; ++i) s += da2[ch * N_ * p2_ + i];
      db2.data[ch] += s;
    }

    std::vector<double> dcols2(c.conv1 * 16 * N_ * p2_, 0.0);
    detail::gemm(true, false, c.conv1 * 16, N_ * p2_, c.conv2,
                 P.value("conv2.w").data.data(), da2.data(), dcols2.data(),
                 false);
    std::vector<double> da1(c.conv1 * N_ * p1_, 0.0);
    for (std::size_t n = 0; n < N_; ++n)
      detail::col2im_at(dcols2.data(), N_ * p2_, n * p2_, d2_,
                        da1.data() + n * p1_, N_ * p1_);
    detail::relu_mask(a1_.data(), da1.data(), da1.size());

    detail::gemm(false, true, c.conv1, d1_.c_in * 16, N_ * p1_, da1.data(),
                 cols1_.data(), P.grad("conv1.w").data.data(), true);
    TensorF& db1 = P.grad("conv1.b");
    for (std::size_t ch = 0; ch < c.conv1; ++ch) {
      double s = 0.0;
      for (std::size_t i = 0; i < N_ * p1_; ++i) s += da1[ch * N_ * p1_ + i];
      db1.data[ch] += s;
    }
    // input gradients are never needed; observations are leaves
  }

  AgentNet* net_;
  bool with_grads_ = false;
  std::size_t B_ = 0, L_ = 0, N_ = 0, m_ = 0, slots_ = 0;
  std::size_t e_ = 0, p1_ = 0, p2_ = 0;
  ConvDims d1_{}, d2_{};

  std::vector<double> stacked_;
  std::vector<double> cols1_, cols2_, a1_, a2_;
  std::vector<double> enc_, feat_, keys_, vals_, xg_, ctx_;
  std::vector<std::vector<double>> h_steps_, c_steps_, o_steps_;
  std::vector<std::vector<double>> gi_, gf_, gg_, go_, tc_, attn_steps_;
  std::vector<double> o_final_, attn_final_, g_hidden_;
  std::vector<double> dkeys_, dvals_, scratch_;
  TensorF q_;
  const double* head_in_rows_ = nullptr;
  double rect_margin_ = 1e300;
};

}  // namespace memq

#endif  // MEMQ_ENGINE_HPP_
