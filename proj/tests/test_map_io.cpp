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

#include <catch2/catch_amalgamated.hpp>

#include "memq/map_io.hpp"
#include "memq/mapgen.hpp"

using namespace memq;

TEST_CASE("serialize/parse round-trips generated maps") {
  Rng gen(23);
  for (int k = 0; k < 100; ++k) {
    MapSpec m;
    switch (k % 3) {
      case 0: m = gen_imaze(1 + gen.uniform_int(12)); break;
      case 1: {
        MazeSplitParams sp = maze_sizes(Task::kSeqInd, k % 6 == 1);
        m = gen_random_maze(Task::kSeqInd,
                            sp.min_size + gen.uniform_int(2), sp, gen);
        break;
      }
      default: {
        PatternPair p{pattern_bits(
            static_cast<unsigned>(gen.uniform_int(512))), {}, false};
        p.right = p.left;
        p.identical = true;
        m = gen_pattern_map(p);
      }
    }
    MapSpec back = parse_map(serialize_map(m));
    REQUIRE(back == m);
    REQUIRE(serialize_map(back) == serialize_map(m));
  }
}

TEST_CASE("parse rejects malformed inputs with located errors") {
  const std::string good = serialize_map(gen_imaze(3));

  SECTION("empty file") {
    REQUIRE_THROWS_AS(parse_map(""), ParseError);
  }
  SECTION("unknown glyph names the position") {
    std::string bad = good;
    bad[bad.find('.', bad.find('\n'))] = '?';
    REQUIRE_THROWS_WITH(parse_map(bad),
                        Catch::Matchers::ContainsSubstring("unknown glyph"));
  }
  SECTION("short row") {
    std::string bad = good;
    bad.erase(bad.find('\n') + 1, 1);
    REQUIRE_THROWS_WITH(parse_map(bad),
                        Catch::Matchers::ContainsSubstring("line 2"));
  }
  SECTION("missing header key") {
    std::string bad = good.substr(good.find(' ') + 1);
    REQUIRE_THROWS_AS(parse_map(bad), ParseError);
  }
  SECTION("unknown header key") {
    REQUIRE_THROWS_WITH(parse_map("task=imaze w=5 h=7 penalty=-0.04 "
                                  "max_steps=50 bogus=1\n"),
                        Catch::Matchers::ContainsSubstring("bogus"));
  }
  SECTION("sealed goal is unreachable") {
    MapSpec m = gen_imaze(3);
    m.at(2, m.height - 2) = Cell::kWall;  // wall off the bottom arm center
    REQUIRE_THROWS_WITH(parse_map(serialize_map(m)),
                        Catch::Matchers::ContainsSubstring("unreachable"));
  }
  SECTION("boundary must be wall") {
    MapSpec m = gen_imaze(3);
    m.at(0, 2) = Cell::kFloor;
    REQUIRE_THROWS_WITH(parse_map(serialize_map(m)),
                        Catch::Matchers::ContainsSubstring("boundary"));
  }
  SECTION("spawn glyph on a free-spawn task") {
    Rng gen(5);
    MazeSplitParams sp = maze_sizes(Task::kSingle, false);
    MapSpec m = gen_random_maze(Task::kSingle, 5, sp, gen);
    auto f = m.find(Cell::kFloor)[0];
    m.at(f.first, f.second) = Cell::kSpawn;
    REQUIRE_THROWS_WITH(parse_map(serialize_map(m)),
                        Catch::Matchers::ContainsSubstring("spawn"));
  }
}

TEST_CASE("header floats round-trip exactly") {
  MapSpec m = gen_imaze(2);
  m.penalty = -0.02;
  m.max_steps = 100;
  MapSpec back = parse_map(serialize_map(m));
  REQUIRE(back.penalty == -0.02);
  REQUIRE(back.max_steps == 100);

  m.penalty = -0.017453292519943295;
  REQUIRE(parse_map(serialize_map(m)).penalty == m.penalty);
}
