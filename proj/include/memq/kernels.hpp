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

#ifndef MEMQ_KERNELS_HPP_
#define MEMQ_KERNELS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>

#include "memq/blas.hpp"
#include "memq/tensor.hpp"

namespace memq {

// ---------------------------------------------------------------------------
// matmul

inline TensorF matmul(const TensorF& a, const TensorF& b) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
    throw ShapeError("matmul: incompatible shapes " +
                     TensorF::shape_str(a.shape) + " and " +
                     TensorF::shape_str(b.shape));
  TensorF c({a.shape[0], b.shape[1]});
  detail::gemm(false, false, a.shape[0], b.shape[1], a.shape[1],
               a.data.data(), b.data.data(), c.data.data(), false);
  return c;
}

struct MatmulGrads {
  TensorF a;
  TensorF b;
};

inline MatmulGrads matmul_backward(const TensorF& grad_c, const TensorF& a,
                                   const TensorF& b) {
  if (grad_c.shape != std::vector<std::size_t>{a.shape[0], b.shape[1]})
    throw ShapeError("matmul_backward: grad shape " +
                     TensorF::shape_str(grad_c.shape) + " does not match " +
                     TensorF::shape_str({a.shape[0], b.shape[1]}));
  MatmulGrads g{TensorF(a.shape), TensorF(b.shape)};
  // dA = dC * B^T, dB = A^T * dC
  detail::gemm(false, true, a.shape[0], a.shape[1], b.shape[1],
               grad_c.data.data(), b.data.data(), g.a.data.data(), false);
  detail::gemm(true, false, a.shape[1], b.shape[1], a.shape[0], a.data.data(),
               grad_c.data.data(), g.b.data.data(), false);
  return g;
}

// ---------------------------------------------------------------------------
// conv2d, 4x4 kernel, stride 2, padding 1

struct ConvDims {
  std::size_t c_in, h, w, c_out, h_out, w_out;
};

inline ConvDims conv2d_dims(const TensorF& x, const TensorF& w) {
  if (x.shape.size() != 3)
    throw ShapeError("conv2d: input must be c x h x w, got " +
                     TensorF::shape_str(x.shape));
  if (w.shape.size() != 4 || w.shape[2] != 4 || w.shape[3] != 4)
    throw ShapeError("conv2d: weights must be c_out x c_in x 4 x 4, got " +
                     TensorF::shape_str(w.shape));
  if (w.shape[1] != x.shape[0])
    throw ShapeError("conv2d: channel mismatch between input " +
                     TensorF::shape_str(x.shape) + " and weights " +
                     TensorF::shape_str(w.shape));
  ConvDims d;
  d.c_in = x.shape[0];
  d.h = x.shape[1];
  d.w = x.shape[2];
  d.c_out = w.shape[0];
  if (d.h + 2 < 4 || d.w + 2 < 4)
    throw ShapeError("conv2d: input " + TensorF::shape_str(x.shape) +
                     " smaller than effective kernel");
  d.h_out = (d.h + 2 - 4) / 2 + 1;
  d.w_out = (d.w + 2 - 4) / 2 + 1;
  return d;
}

namespace detail {

// Writes the im2col patch matrix [c_in*16 x h_out*w_out] for one image.
inline void im2col(const double* x, const ConvDims& d, double* cols) {
  const std::size_t npix = d.h_out * d.w_out;
  for (std::size_t c = 0; c < d.c_in; ++c) {
    for (std::size_t ky = 0; ky < 4; ++ky) {
      for (std::size_t kx = 0; kx < 4; ++kx) {
        double* row = cols + ((c * 4 + ky) * 4 + kx) * npix;
        for (std::size_t oy = 0; oy < d.h_out; ++oy) {
          const long iy = static_cast<long>(2 * oy + ky) - 1;
          const bool y_ok = iy >= 0 && iy < static_cast<long>(d.h);
          for (std::size_t ox = 0; ox < d.w_out; ++ox) {
            const long ix = static_cast<long>(2 * ox + kx) - 1;
            row[oy * d.w_out + ox] =
                (y_ok && ix >= 0 && ix < static_cast<long>(d.w))
                    ? x[(c * d.h + iy) * d.w + ix]
                    : 0.0;
          }
        }
      }
    }
  }
}

// Scatters patch-matrix gradients back onto the input image (accumulating).
inline void col2im(const double* cols, const ConvDims& d, double* dx) {
  const std::size_t npix = d.h_out * d.w_out;
  for (std::size_t c = 0; c < d.c_in; ++c) {
    for (std::size_t ky = 0; ky < 4; ++ky) {
      for (std::size_t kx = 0; kx < 4; ++kx) {
        const double* row = cols + ((c * 4 + ky) * 4 + kx) * npix;
        for (std::size_t oy = 0; oy < d.h_out; ++oy) {
          const long iy = static_cast<long>(2 * oy + ky) - 1;
          if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
          for (std::size_t ox = 0; ox < d.w_out; ++ox) {
            const long ix = static_cast<long>(2 * ox + kx) - 1;
            if (ix < 0 || ix >= static_cast<long>(d.w)) continue;
            dx[(c * d.h + iy) * d.w + ix] += row[oy * d.w_out + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

inline TensorF conv2d(const TensorF& x, const TensorF& w, const TensorF& b) {
  ConvDims d = conv2d_dims(x, w);
  require_shape(b, {d.c_out}, "conv2d bias");
  const std::size_t npix = d.h_out * d.w_out;
  std::vector<double> cols(d.c_in * 16 * npix);
  detail::im2col(x.data.data(), d, cols.data());
  TensorF y({d.c_out, d.h_out, d.w_out});
  detail::gemm(false, false, d.c_out, npix, d.c_in * 16, w.data.data(),
               cols.data(), y.data.data(), false);
  for (std::size_t c = 0; c < d.c_out; ++c)
    for (std::size_t p = 0; p < npix; ++p) y.data[c * npix + p] += b.data[c];
  return y;
}

struct Conv2dGrads {
  TensorF x;
  TensorF w;
  TensorF b;
};

inline Conv2dGrads conv2d_backward(const TensorF& grad_y, const TensorF& x,
                                   const TensorF& w) {
  ConvDims d = conv2d_dims(x, w);
  require_shape(grad_y, {d.c_out, d.h_out, d.w_out}, "conv2d grad");
  const std::size_t npix = d.h_out * d.w_out;
  std::vector<double> cols(d.c_in * 16 * npix);
  detail::im2col(x.data.data(), d, cols.data());

  Conv2dGrads g{TensorF(x.shape), TensorF(w.shape), TensorF({d.c_out})};
  // dW = dY * cols^T
  detail::gemm(false, true, d.c_out, d.c_in * 16, npix, grad_y.data.data(),
               cols.data(), g.w.data.data(), false);
  // db = row sums of dY
  for (std::size_t c = 0; c < d.c_out; ++c) {
    double s = 0.0;
    for (std::size_t p = 0; p < npix; ++p) s += grad_y.data[c * npix + p];
    g.b.data[c] = s;
  }
  // dX = col2im(W^T * dY)
  std::vector<double> dcols(d.c_in * 16 * npix);
  detail::gemm(true, false, d.c_in * 16, npix, d.c_out, w.data.data(),
               grad_y.data.data(), dcols.data(), false);
  detail::col2im(dcols.data(), d, g.x.data.data());
  return g;
}

// ---------------------------------------------------------------------------
// relu_half: identity below the split index, ReLU from it on

inline TensorF relu_half(const TensorF& v, std::size_t split) {
  if (split > v.size())
    throw ShapeError("relu_half: split index past end of vector");
  TensorF out = v;
  for (std::size_t i = split; i < out.size(); ++i)
    out.data[i] = std::max(0.0, out.data[i]);
  return out;
}

inline TensorF relu_half_backward(const TensorF& grad_out, const TensorF& v,
                                  std::size_t split) {
  TensorF g = grad_out;
  for (std::size_t i = split; i < g.size(); ++i)
    if (v.data[i] <= 0.0) g.data[i] = 0.0;
  return g;
}

// ---------------------------------------------------------------------------
// softmax with max subtraction

inline TensorF softmax(const TensorF& v) {
  if (v.size() == 0) throw ShapeError("softmax: empty input");
  v.require_finite("softmax input");
  TensorF p = v;
  double mx = p.data[0];
  for (double x : p.data) mx = std::max(mx, x);
  double sum = 0.0;
  for (double& x : p.data) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : p.data) x /= sum;
  return p;
}

/// Backward given the forward output p (not the logits).
inline TensorF softmax_backward(const TensorF& grad_p, const TensorF& p) {
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    dot += grad_p.data[i] * p.data[i];
  TensorF g(p.shape);
  for (std::size_t i = 0; i < p.size(); ++i)
    g.data[i] = p.data[i] * (grad_p.data[i] - dot);
  return g;
}

// ---------------------------------------------------------------------------
// LSTM cell
//
// Parameters are kept in separate blocks so architectures can wire extra
// input slices without touching the base input weights:
//   pre = b + Wx*x + Uh*h   (gate order: input, forget, cell, output)
//   c' = f.c + i.g_cell,  h' = o.tanh(c')

struct LstmParams {
  const TensorF* wx;  // [4m x d_in]
  const TensorF* uh;  // [4m x m]
  const TensorF* b;   // [4m]
};

struct LstmCache {
  TensorF x, h_in, c_in;
  TensorF i, f, g, o;      // post-activation gates, each [m]
  TensorF c_out, tanh_c;   // [m]
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::pair<TensorF, TensorF> lstm_cell(const TensorF& x,
                                             const TensorF& h,
                                             const TensorF& c,
                                             const LstmParams& p,
                                             LstmCache* cache = nullptr) {
  const std::size_t m = h.size();
  const std::size_t d_in = x.size();
  if (p.wx->shape != std::vector<std::size_t>{4 * m, d_in} ||
      p.uh->shape != std::vector<std::size_t>{4 * m, m} ||
      p.b->shape != std::vector<std::size_t>{4 * m} || c.size() != m)
    throw ShapeError("lstm_cell: inconsistent parameter shapes for d_in=" +
                     std::to_string(d_in) + ", m=" + std::to_string(m));
  if (!h.all_finite() || !c.all_finite())
    throw NumericError("lstm_cell: non-finite state");

  TensorF pre = *p.b;
  detail::gemm(false, false, 4 * m, 1, d_in, p.wx->data.data(), x.data.data(),
               pre.data.data(), true);
  detail::gemm(false, false, 4 * m, 1, m, p.uh->data.data(), h.data.data(),
               pre.data.data(), true);

  TensorF gi({m}), gf({m}), gg({m}), go({m}), c2({m}), h2({m}), tc({m});
  for (std::size_t j = 0; j < m; ++j) {
    gi.data[j] = sigmoid(pre.data[j]);
    gf.data[j] = sigmoid(pre.data[m + j]);
    gg.data[j] = std::tanh(pre.data[2 * m + j]);
    go.data[j] = sigmoid(pre.data[3 * m + j]);
    c2.data[j] = gf.data[j] * c.data[j] + gi.data[j] * gg.data[j];
    tc.data[j] = std::tanh(c2.data[j]);
    h2.data[j] = go.data[j] * tc.data[j];
  }
  if (cache) {
    cache->x = x;
    cache->h_in = h;
    cache->c_in = c;
    cache->i = gi;
    cache->f = gf;
    cache->g = gg;
    cache->o = go;
    cache->c_out = c2;
    cache->tanh_c = tc;
  }
  return {std::move(h2), std::move(c2)};
}

struct LstmGrads {
  TensorF x, h, c;       // input-side gradients
  TensorF wx, uh, b;     // parameter gradients
};

inline LstmGrads lstm_cell_backward(const TensorF& dh2, const TensorF& dc2,
                                    const LstmCache& k, const LstmParams& p) {
  const std::size_t m = k.h_in.size();
  const std::size_t d_in = k.x.size();
  TensorF dpre({4 * m});
  TensorF dc({m});
  for (std::size_t j = 0; j < m; ++j) {
    const double i = k.i.data[j], f = k.f.data[j], g = k.g.data[j],
                 o = k.o.data[j], tc = k.tanh_c.data[j];
    const double dct = dc2.data[j] + dh2.data[j] * o * (1.0 - tc * tc);
    dpre.data[j] = dct * g * i * (1.0 - i);
    dpre.data[m + j] = dct * k.c_in.data[j] * f * (1.0 - f);
    dpre.data[2 * m + j] = dct * i * (1.0 - g * g);
    dpre.data[3 * m + j] = dh2.data[j] * tc * o * (1.0 - o);
    dc.data[j] = dct * f;
  }
  LstmGrads out{TensorF({d_in}), TensorF({m}), std::move(dc),
                TensorF(p.wx->shape), TensorF(p.uh->shape), dpre};
  // dx = Wx^T * dpre; dh = Uh^T * dpre
  detail::gemm(true, false, d_in, 1, 4 * m, p.wx->data.data(),
               dpre.data.data(), out.x.data.data(), false);
  detail::gemm(true, false, m, 1, 4 * m, p.uh->data.data(), dpre.data.data(),
               out.h.data.data(), false);
  // dWx = dpre * x^T; dUh = dpre * h^T
  detail::gemm(false, false, 4 * m, d_in, 1, dpre.data.data(), k.x.data.data(),
               out.wx.data.data(), false);
  detail::gemm(false, false, 4 * m, m, 1, dpre.data.data(), k.h_in.data.data(),
               out.uh.data.data(), false);
  return out;
}

}  // namespace memq

#endif  // MEMQ_KERNELS_HPP_
