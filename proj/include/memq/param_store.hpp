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

#ifndef MEMQ_PARAM_STORE_HPP_
#define MEMQ_PARAM_STORE_HPP_

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "memq/rng.hpp"
#include "memq/tensor.hpp"

namespace memq {

/// Named parameter tensors in a fixed registration order, each paired with
/// a gradient buffer of identical shape.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    TensorF value;
    TensorF grad;
  };

  /// Registers a zero-initialized parameter; returns its index.
  std::size_t add(std::string name, std::vector<std::size_t> shape) {
    for (const auto& e : entries_)
      if (e.name == name)
        throw std::invalid_argument("duplicate parameter: " + name);
    entries_.push_back({std::move(name), TensorF(shape), TensorF(shape)});
    return entries_.size() - 1;
  }

  std::size_t count() const { return entries_.size(); }
  Entry& entry(std::size_t i) { return entries_[i]; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }

  bool has(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return true;
    return false;
  }

  TensorF& value(const std::string& name) { return find(name).value; }
  const TensorF& value(const std::string& name) const {
    return find(name).value;
  }
  TensorF& grad(const std::string& name) { return find(name).grad; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.grad.fill(0.0);
  }

  double grad_l2_norm() const {
    double s = 0.0;
    for (const auto& e : entries_)
      for (double g : e.grad.data) s += g * g;
    return std::sqrt(s);
  }

  void scale_grad(double f) {
    for (auto& e : entries_)
      for (double& g : e.grad.data) g *= f;
  }

  /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] with the given
  /// per-tensor fan-in; biases are handled separately by callers.
  void init_uniform(const std::string& name, std::size_t fan_in, Rng rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : value(name).data) v = rng.uniform(-bound, bound);
  }

  void copy_values_from(const ParamStore& other) {
    if (other.entries_.size() != entries_.size())
      throw std::invalid_argument("parameter store layout mismatch");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name != other.entries_[i].name ||
          entries_[i].value.shape != other.entries_[i].value.shape)
        throw std::invalid_argument("parameter store layout mismatch at " +
                                    entries_[i].name);
      entries_[i].value.data = other.entries_[i].value.data;
    }
  }

 private:
  Entry& find(const std::string& name) {
    for (auto& e : entries_)
      if (e.name == name) return e;
    throw std::invalid_argument("unknown parameter: " + name);
  }
  const Entry& find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e;
    throw std::invalid_argument("unknown parameter: " + name);
  }

  std::vector<Entry> entries_;
};

}  // namespace memq

#endif  // MEMQ_PARAM_STORE_HPP_
