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

#ifndef MEMQ_BLAS_HPP_
#define MEMQ_BLAS_HPP_

#include <cstddef>

#ifdef MEMQ_USE_OPENBLAS
#include <cblas.h>
extern "C" void openblas_set_num_threads(int);
#endif

namespace memq::detail {

/// Pins OpenBLAS to one thread so results are reproducible run to run.
inline void init_blas_threads() {
#ifdef MEMQ_USE_OPENBLAS
  static const bool done = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)done;
#endif
}

/// C[m x n] (+)= op(A) * op(B), row-major. Leading dimensions of 0 mean the
/// natural packed value for the stored (pre-transpose) operand. When
/// accumulate is false C is overwritten.
inline void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, const double* a, const double* b, double* c,
                 bool accumulate, std::size_t lda = 0, std::size_t ldb = 0,
                 std::size_t ldc = 0) {
  if (lda == 0) lda = trans_a ? m : k;
  if (ldb == 0) ldb = trans_b ? k : n;
  if (ldc == 0) ldc = n;
#ifdef MEMQ_USE_OPENBLAS
  init_blas_threads();
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), 1.0, a,
              static_cast<int>(lda), b, static_cast<int>(ldb),
              accumulate ? 1.0 : 0.0, c, static_cast<int>(ldc));
#else
  if (!accumulate)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a ? a[p * lda + i] : a[i * lda + p];
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j)
          c[i * ldc + j] += av * b[j * ldb + p];
      } else {
        const double* brow = &b[p * ldb];
        for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] += av * brow[j];
      }
    }
  }
#endif
}

}  // namespace memq::detail

#endif  // MEMQ_BLAS_HPP_
