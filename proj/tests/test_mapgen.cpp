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

#include "memq/mapgen.hpp"

using namespace memq;

TEST_CASE("imaze generation is deterministic in the length") {
  MapSpec a = gen_imaze(5);
  MapSpec b = gen_imaze(5);
  REQUIRE(a == b);
  REQUIRE(a.width == 5);
  REQUIRE(a.height == 9);
  REQUIRE(a.at(1, 7) == Cell::kRed);
  REQUIRE(a.at(3, 7) == Cell::kBlue);
  REQUIRE(default_imaze_train_lengths() == std::vector<std::size_t>{5, 7, 9});
  REQUIRE(default_imaze_eval_lengths() ==
          std::vector<std::size_t>{4, 6, 8, 10, 15, 20, 25, 30, 35, 40});
}

TEST_CASE("pattern sets follow the 250+250 split with disjoint bases") {
  PatternSets sets = gen_pattern_matching_sets(Rng(42));
  REQUIRE(sets.train.size() == 500);
  REQUIRE(sets.unseen.size() == 500);

  auto count_identical = [](const std::vector<MapSpec>& maps) {
    std::size_t n = 0;
    for (const MapSpec& m : maps) n += pattern_rooms_identical(m);
    return n;
  };
  REQUIRE(count_identical(sets.train) == 250);
  REQUIRE(count_identical(sets.unseen) == 250);

  std::set<unsigned> train_bases(sets.train_codes.begin(),
                                 sets.train_codes.end());
  std::set<unsigned> unseen_bases(sets.unseen_codes.begin(),
                                  sets.unseen_codes.end());
  REQUIRE(train_bases.size() == 250);
  REQUIRE(unseen_bases.size() == 250);
  for (unsigned c : unseen_bases) REQUIRE_FALSE(train_bases.count(c));

  // 2^9 distinct rooms exist in total
  std::set<std::array<bool, 9>> rooms;
  for (unsigned c = 0; c < 512; ++c) rooms.insert(pattern_bits(c));
  REQUIRE(rooms.size() == 512);
}

TEST_CASE("random mazes respect size ranges and construction counts") {
  Rng gen(91);
  MazeSplitParams sp = maze_sizes(Task::kSeq, false);
  for (std::size_t size = sp.min_size; size <= sp.max_size; ++size) {
    MapSpec m = gen_random_maze(Task::kSeq, size, sp, gen);
    REQUIRE(m.width == size + 2);
    REQUIRE(m.find(Cell::kRed).size() == 1);
    REQUIRE(m.find(Cell::kBlue).size() == 1);
    REQUIRE_NOTHROW(validate_map(m));
  }
  REQUIRE_THROWS_AS(gen_random_maze(Task::kSeq, 99, sp, gen),
                    GenerationError);

  MazeSplitParams large = maze_sizes(Task::kSeq, true);
  MapSpec big = gen_random_maze(Task::kSeq, 9, large, gen);
  REQUIRE(big.max_steps == 100);
  REQUIRE(big.penalty == -0.02);
}

TEST_CASE("indicator mazes carry a fixed spawn next to the indicator") {
  Rng gen(92);
  MazeSplitParams sp = maze_sizes(Task::kSingleInd, false);
  for (int k = 0; k < 20; ++k) {
    MapSpec m = gen_random_maze(Task::kSingleInd, 6, sp, gen);
    auto spawn = m.find(Cell::kSpawn);
    auto ind = m.find(Cell::kIndicator);
    REQUIRE(spawn.size() == 1);
    REQUIRE(ind.size() == 1);
    const long dx = static_cast<long>(spawn[0].first) -
                    static_cast<long>(ind[0].first);
    const long dy = static_cast<long>(spawn[0].second) -
                    static_cast<long>(ind[0].second);
    REQUIRE(std::abs(dx) + std::abs(dy) == 1);
  }
}

TEST_CASE("families are deterministic and pairwise disjoint") {
  FamilyCounts counts{40, 40, 40};
  MazeFamily a = gen_family(Task::kSeqInd, 7, counts);
  MazeFamily b = gen_family(Task::kSeqInd, 7, counts);
  REQUIRE(a.train.size() == 40);
  REQUIRE(a.unseen.size() == 40);
  REQUIRE(a.unseen_large.size() == 40);
  for (std::size_t i = 0; i < a.train.size(); ++i)
    REQUIRE(a.train[i] == b.train[i]);

  std::set<std::string> seen;
  for (const auto* split : {&a.train, &a.unseen, &a.unseen_large})
    for (const MapSpec& m : *split)
      REQUIRE(seen.insert(serialize_map(m)).second);

  MazeFamily c = gen_family(Task::kSeqInd, 8, counts);
  bool all_same = true;
  for (std::size_t i = 0; i < counts.train; ++i)
    all_same = all_same && c.train[i] == a.train[i];
  REQUIRE_FALSE(all_same);
}

TEST_CASE("pattern family splits are grid-disjoint") {
  MazeFamily fam = gen_family(Task::kPatternMatch, 3);
  std::set<std::string> seen;
  for (const auto* split : {&fam.train, &fam.unseen})
    for (const MapSpec& m : *split)
      REQUIRE(seen.insert(serialize_map(m)).second);
}
