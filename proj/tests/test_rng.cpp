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

#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "memq/rng.hpp"

using memq::Rng;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("split streams are independent of parent draws") {
  Rng parent(7);
  Rng child_before = parent.split("worker");
  parent.uniform();
  parent.uniform();
  Rng child_after = parent.split("worker");
  // splitting is a pure function of the parent key, not its position
  REQUIRE(child_before.next_u64() == child_after.next_u64());

  Rng other = parent.split("other");
  Rng worker = parent.split("worker");
  REQUIRE(other.next_u64() != worker.next_u64());
}

TEST_CASE("distinct labels give distinct streams") {
  Rng parent(1);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t label = 0; label < 1000; ++label)
    firsts.insert(parent.split(label).next_u64());
  REQUIRE(firsts.size() == 1000);
}

TEST_CASE("uniform bounds") {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) REQUIRE(r.uniform_int(7) < 7);
}

TEST_CASE("uniform_int covers its range roughly evenly") {
  Rng r(11);
  int counts[8] = {0};
  for (int i = 0; i < 80000; ++i) ++counts[r.uniform_int(8)];
  for (int c : counts) {
    REQUIRE(c > 9000);
    REQUIRE(c < 11000);
  }
}
