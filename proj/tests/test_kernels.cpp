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

#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "memq/grad_check.hpp"
#include "memq/kernels.hpp"
#include "support/fd.hpp"

using namespace memq;
using test::fd_against;
using test::random_tensor;

TEST_CASE("matmul identity and hand arithmetic") {
  TensorF eye({2, 2}, {1, 0, 0, 1});
  TensorF b({2, 2}, {1, 2, 3, 4});
  REQUIRE(matmul(eye, b).data == b.data);

  TensorF r({1, 2}, {1, 2});
  TensorF c({2, 1}, {3, 4});
  TensorF out = matmul(r, c);
  REQUIRE(out.shape == std::vector<std::size_t>{1, 1});
  REQUIRE(out.data[0] == 11.0);

  REQUIRE_THROWS_WITH(matmul(TensorF({2, 3}), TensorF({2, 3})),
                      Catch::Matchers::ContainsSubstring("[2x3]"));
}

TEST_CASE("matmul backward matches finite differences") {
  Rng rng(101);
  TensorF a = random_tensor({4, 5}, rng);
  TensorF b = random_tensor({5, 3}, rng);
  TensorF u = random_tensor({4, 3}, rng);  // fixed projection
  auto scalar = [&]() {
    TensorF c = matmul(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += u.data[i] * c.data[i];
    return s;
  };
  MatmulGrads g = matmul_backward(u, a, b);
  REQUIRE(fd_against(a, g.a, scalar) <= 1e-6);
  REQUIRE(fd_against(b, g.b, scalar) <= 1e-6);
}

TEST_CASE("conv2d output shapes follow the stride-2 pad-1 arithmetic") {
  Rng rng(5);
  TensorF x = random_tensor({3, 32, 32}, rng);
  TensorF w = random_tensor({32, 3, 4, 4}, rng);
  TensorF b({32});
  REQUIRE(conv2d(x, w, b).shape == std::vector<std::size_t>{32, 16, 16});

  TensorF x2 = random_tensor({32, 16, 16}, rng);
  TensorF w2 = random_tensor({64, 32, 4, 4}, rng);
  REQUIRE(conv2d(x2, w2, TensorF({64})).shape ==
          std::vector<std::size_t>{64, 8, 8});

  REQUIRE_THROWS_AS(conv2d(TensorF({3, 1, 1}), w, b), ShapeError);
}

TEST_CASE("conv2d zero weights give zero output and zero input grads") {
  Rng rng(6);
  TensorF x = random_tensor({3, 8, 8}, rng);
  TensorF w({4, 3, 4, 4});
  TensorF b({4});
  TensorF y = conv2d(x, w, b);
  for (double v : y.data) REQUIRE(v == 0.0);
  TensorF gy = random_tensor(y.shape, rng);
  Conv2dGrads g = conv2d_backward(gy, x, w);
  for (double v : g.x.data) REQUIRE(v == 0.0);
}

TEST_CASE("conv2d backward matches finite differences") {
  Rng rng(7);
  TensorF x = random_tensor({2, 8, 8}, rng);
  TensorF w = random_tensor({3, 2, 4, 4}, rng);
  TensorF b = random_tensor({3}, rng);
  TensorF u = random_tensor({3, 4, 4}, rng);
  auto scalar = [&]() {
    TensorF y = conv2d(x, w, b);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += u.data[i] * y.data[i];
    return s;
  };
  Conv2dGrads g = conv2d_backward(u, x, w);
  REQUIRE(fd_against(x, g.x, scalar) <= 1e-6);
  REQUIRE(fd_against(w, g.w, scalar) <= 1e-6);
  REQUIRE(fd_against(b, g.b, scalar) <= 1e-6);
}

TEST_CASE("conv2d translation: shifted impulse shifts the response") {
  // an impulse at (y0, x0) produces the kernel slice around the matching
  // output location; shifting the impulse by the stride shifts the output
  TensorF w({1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) w.data[i] = static_cast<double>(i + 1);
  TensorF b({1});
  auto impulse = [&](std::size_t y0, std::size_t x0) {
    TensorF x({1, 16, 16});
    x.at(0, y0 * 16 + x0) = 1.0;
    return conv2d(x, w, b);
  };
  TensorF y1 = impulse(6, 6);
  TensorF y2 = impulse(8, 10);  // shift by (2, 4) input pixels = (1, 2) output
  for (std::size_t oy = 0; oy < 8; ++oy)
    for (std::size_t ox = 0; ox < 8; ++ox) {
      if (oy + 1 >= 8 || ox + 2 >= 8) continue;
      const bool interior = oy >= 1 && ox >= 1;
      if (!interior) continue;
      REQUIRE(y2.data[(oy + 1) * 8 + ox + 2] ==
              Catch::Approx(y1.data[oy * 8 + ox]).margin(1e-12));
    }
}

TEST_CASE("relu_half rectifies only past the split") {
  TensorF v({2}, {-1, -1});
  REQUIRE(relu_half(v, 1).data == std::vector<double>{-1, 0});

  TensorF v2({4}, {-2, 3, -4, 5});
  REQUIRE(relu_half(v2, 2).data == std::vector<double>{-2, 3, 0, 5});

  TensorF v3({2}, {-1, 2});
  REQUIRE(relu_half(v3, 0).data == std::vector<double>{0, 2});

  REQUIRE_THROWS_AS(relu_half(v3, 5), ShapeError);
}

TEST_CASE("relu_half backward matches finite differences") {
  Rng rng(8);
  TensorF v = random_tensor({10}, rng);
  TensorF u = random_tensor({10}, rng);
  for (std::size_t split : {0ul, 5ul, 10ul}) {
    auto scalar = [&]() {
      TensorF y = relu_half(v, split);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += u.data[i] * y.data[i];
      return s;
    };
    TensorF g = relu_half_backward(u, v, split);
    REQUIRE(fd_against(v, g, scalar) <= 1e-6);
  }
}

TEST_CASE("softmax hand values and stability") {
  TensorF s = softmax(TensorF({3}, {0, 0, 0}));
  for (double v : s.data) REQUIRE(v == Catch::Approx(1.0 / 3).margin(1e-15));

  TensorF big = softmax(TensorF({2}, {1000, 0}));
  REQUIRE(big.data[0] == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(big.data[1] == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(std::isfinite(big.data[0]));

  TensorF logs = softmax(
      TensorF({3}, {std::log(1.0), std::log(2.0), std::log(3.0)}));
  REQUIRE(logs.data[0] == Catch::Approx(1.0 / 6).margin(1e-12));
  REQUIRE(logs.data[1] == Catch::Approx(2.0 / 6).margin(1e-12));
  REQUIRE(logs.data[2] == Catch::Approx(3.0 / 6).margin(1e-12));

  REQUIRE_THROWS_AS(softmax(TensorF({2}, {1.0, std::nan("")})), NumericError);
}

TEST_CASE("softmax sums to one and stays non-negative") {
  Rng rng(9);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + rng.uniform_int(16);
    TensorF v = random_tensor({n}, rng, -50.0, 50.0);
    TensorF p = softmax(v);
    double sum = 0.0;
    for (double x : p.data) {
      REQUIRE(x >= 0.0);
      sum += x;
    }
    REQUIRE(std::fabs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("softmax backward matches finite differences") {
  Rng rng(10);
  TensorF v = random_tensor({7}, rng);
  TensorF u = random_tensor({7}, rng);
  auto scalar = [&]() {
    TensorF p = softmax(v);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += u.data[i] * p.data[i];
    return s;
  };
  TensorF p = softmax(v);
  TensorF g = softmax_backward(u, p);
  REQUIRE(fd_against(v, g, scalar) <= 1e-6);
}

TEST_CASE("lstm zero parameters and carry behavior") {
  const std::size_t m = 3, d = 2;
  TensorF wx({4 * m, d}), uh({4 * m, m}), b({4 * m});
  LstmParams p{&wx, &uh, &b};
  auto [h, c] = lstm_cell(TensorF({d}), TensorF({m}), TensorF({m}), p);
  for (double v : h.data) REQUIRE(v == 0.0);
  for (double v : c.data) REQUIRE(v == 0.0);

  // saturated forget gate carries the cell state through a zero input
  for (std::size_t j = m; j < 2 * m; ++j) b.data[j] = 50.0;
  TensorF c0({m}, {0.3, -0.7, 1.1});
  auto [h2, c2] = lstm_cell(TensorF({d}), TensorF({m}), c0, p);
  for (std::size_t j = 0; j < m; ++j)
    REQUIRE(c2.data[j] == Catch::Approx(c0.data[j]).margin(1e-9));
}

TEST_CASE("lstm backward matches finite differences") {
  Rng rng(12);
  const std::size_t d = 7, m = 5;
  TensorF wx = random_tensor({4 * m, d}, rng);
  TensorF uh = random_tensor({4 * m, m}, rng);
  TensorF b = random_tensor({4 * m}, rng);
  TensorF x = random_tensor({d}, rng);
  TensorF h0 = random_tensor({m}, rng);
  TensorF c0 = random_tensor({m}, rng);
  TensorF uh_w = random_tensor({m}, rng);
  TensorF uc_w = random_tensor({m}, rng);
  LstmParams p{&wx, &uh, &b};

  auto scalar = [&]() {
    auto [h, c] = lstm_cell(x, h0, c0, p);
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      s += uh_w.data[j] * h.data[j] + uc_w.data[j] * c.data[j];
    return s;
  };
  LstmCache cache;
  lstm_cell(x, h0, c0, p, &cache);
  LstmGrads g = lstm_cell_backward(uh_w, uc_w, cache, p);
  REQUIRE(fd_against(x, g.x, scalar) <= 1e-5);
  REQUIRE(fd_against(h0, g.h, scalar) <= 1e-5);
  REQUIRE(fd_against(c0, g.c, scalar) <= 1e-5);
  REQUIRE(fd_against(wx, g.wx, scalar) <= 1e-5);
  REQUIRE(fd_against(uh, g.uh, scalar) <= 1e-5);
  REQUIRE(fd_against(b, g.b, scalar) <= 1e-5);
}

TEST_CASE("kernels are pure: repeated calls are bit-identical") {
  Rng rng(13);
  TensorF x = random_tensor({2, 8, 8}, rng);
  TensorF w = random_tensor({3, 2, 4, 4}, rng);
  TensorF b = random_tensor({3}, rng);
  TensorF y1 = conv2d(x, w, b);
  TensorF y2 = conv2d(x, w, b);
  REQUIRE(y1.data == y2.data);

  TensorF a = random_tensor({6, 6}, rng);
  REQUIRE(matmul(a, a).data == matmul(a, a).data);
}

TEST_CASE("every kernel passes the seeded 100-instance gradient sweep") {
  Rng rng(99);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    switch (k % 4) {
      case 0: {
        const std::size_t p = 1 + rng.uniform_int(5),
                          q = 1 + rng.uniform_int(5),
                          r = 1 + rng.uniform_int(5);
        TensorF a = random_tensor({p, q}, rng);
        TensorF b = random_tensor({q, r}, rng);
        TensorF u = random_tensor({p, r}, rng);
        auto scalar = [&]() {
          TensorF c = matmul(a, b);
          double s = 0.0;
          for (std::size_t i = 0; i < c.size(); ++i)
            s += u.data[i] * c.data[i];
          return s;
        };
        MatmulGrads g = matmul_backward(u, a, b);
        worst = std::max(worst, fd_against(a, g.a, scalar));
        worst = std::max(worst, fd_against(b, g.b, scalar));
        break;
      }
      case 1: {
        TensorF x = random_tensor({2, 4, 4}, rng);
        TensorF w = random_tensor({2, 2, 4, 4}, rng);
        TensorF b = random_tensor({2}, rng);
        TensorF u = random_tensor({2, 2, 2}, rng);
        auto scalar = [&]() {
          TensorF y = conv2d(x, w, b);
          double s = 0.0;
          for (std::size_t i = 0; i < y.size(); ++i)
            s += u.data[i] * y.data[i];
          return s;
        };
        Conv2dGrads g = conv2d_backward(u, x, w);
        worst = std::max(worst, fd_against(x, g.x, scalar));
        worst = std::max(worst, fd_against(w, g.w, scalar));
        break;
      }
      case 2: {
        const std::size_t n = 2 + rng.uniform_int(8);
        TensorF v = random_tensor({n}, rng);
        TensorF u = random_tensor({n}, rng);
        auto scalar = [&]() {
          TensorF p = softmax(v);
          double s = 0.0;
          for (std::size_t i = 0; i < p.size(); ++i)
            s += u.data[i] * p.data[i];
          return s;
        };
        TensorF g = softmax_backward(u, softmax(v));
        worst = std::max(worst, fd_against(v, g, scalar));
        break;
      }
      default: {
        const std::size_t d = 1 + rng.uniform_int(6),
                          m = 1 + rng.uniform_int(6);
        TensorF wx = random_tensor({4 * m, d}, rng);
        TensorF uh = random_tensor({4 * m, m}, rng);
        TensorF b = random_tensor({4 * m}, rng);
        TensorF x = random_tensor({d}, rng);
        TensorF h0 = random_tensor({m}, rng);
        TensorF c0 = random_tensor({m}, rng);
        TensorF u = random_tensor({m}, rng);
        LstmParams p{&wx, &uh, &b};
        auto scalar = [&]() {
          auto [h, c] = lstm_cell(x, h0, c0, p);
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += u.data[j] * h.data[j];
          return s;
        };
        LstmCache cache;
        lstm_cell(x, h0, c0, p, &cache);
        LstmGrads g = lstm_cell_backward(u, TensorF({m}), cache, p);
        worst = std::max(worst, fd_against(wx, g.wx, scalar));
        worst = std::max(worst, fd_against(h0, g.h, scalar));
        break;
      }
    }
  }
  REQUIRE(worst <= 1e-4);
}

TEST_CASE("grad_check harness on library functions") {
  Rng rng(55);
  ParamStore ps;
  ps.add("a", {3, 4});
  ps.add("b", {4, 2});
  for (std::size_t i = 0; i < ps.count(); ++i)
    for (double& v : ps.entry(i).value.data) v = rng.uniform(-1, 1);

  SECTION("sum of a matrix product") {
    auto loss = [&]() {
      TensorF c = matmul(ps.value("a"), ps.value("b"));
      double s = 0.0;
      for (double v : c.data) s += v;
      return s;
    };
    ps.zero_grad();
    TensorF ones({3, 2});
    ones.fill(1.0);
    MatmulGrads g = matmul_backward(ones, ps.value("a"), ps.value("b"));
    ps.grad("a").data = g.a.data;
    ps.grad("b").data = g.b.data;
    REQUIRE(grad_check(ps, loss) <= 1e-6);
  }

  SECTION("sum of a softmax is constant, so both gradients vanish") {
    TensorF v = random_tensor({6}, rng);
    TensorF ones({6});
    ones.fill(1.0);
    TensorF g = softmax_backward(ones, softmax(v));
    for (double x : g.data) REQUIRE(std::fabs(x) <= 1e-12);
    const double eps = 1e-5;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto sum_at = [&](double delta) {
        TensorF w = v;
        w.data[i] += delta;
        TensorF p = softmax(w);
        double s = 0.0;
        for (double x : p.data) s += x;
        return s;
      };
      const double numeric = (sum_at(eps) - sum_at(-eps)) / (2 * eps);
      REQUIRE(std::fabs(numeric) <= 1e-9);
    }
  }
}
