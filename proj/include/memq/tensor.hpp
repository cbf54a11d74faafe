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

#ifndef MEMQ_TENSOR_HPP_
#define MEMQ_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace memq {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major tensor of doubles (last index fastest).
struct TensorF {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  TensorF() = default;
  explicit TensorF(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(numel(shape), 0.0);
  }
  TensorF(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel(shape))
      throw ShapeError("tensor data length does not match shape " +
                       shape_str(shape));
  }

  static std::size_t numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
  }

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }

  // 2-d accessors; row-major.
  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const {
    return data[i * shape[1] + j];
  }

  void fill(double v) { data.assign(data.size(), v); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void require_finite(const char* where) const {
    if (!all_finite())
      throw NumericError(std::string("non-finite value in ") + where);
  }
};

inline void require_shape(const TensorF& t, std::vector<std::size_t> want,
                          const char* name) {
  if (t.shape != want)
    throw ShapeError(std::string(name) + ": expected " +
                     TensorF::shape_str(want) + ", got " +
                     TensorF::shape_str(t.shape));
}

}  // namespace memq

#endif  // MEMQ_TENSOR_HPP_
