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
#include "memq/world.hpp"

using namespace memq;

namespace {

EpisodeState imaze_episode(std::size_t len, bool yellow, int yaw = 2) {
  EpisodeState s;
  s.map = gen_imaze(len);
  s.indicator_yellow = yellow;
  auto spawn = s.map.find(Cell::kSpawn)[0];
  s.pose = {spawn.first, spawn.second, yaw, false};
  return s;
}

}  // namespace

TEST_CASE("imaze reset uses the fixed spawn and seeded draws repeat") {
  MapSpec map = gen_imaze(5);
  Rng rng1 = Rng(7).split("episode");
  Rng rng2 = Rng(7).split("episode");
  EpisodeState a = reset(map, rng1);
  EpisodeState b = reset(map, rng2);
  REQUIRE(a.pose == b.pose);
  REQUIRE(a.indicator_yellow == b.indicator_yellow);
  REQUIRE(a.pose.x == 2);
  REQUIRE(a.pose.y == 1);
  REQUIRE_FALSE(a.pose.pitch_down);
  // indicator sits next to the spawn
  REQUIRE(map.at(1, 1) == Cell::kIndicator);
}

TEST_CASE("indicator colors are sampled evenly") {
  MapSpec map = gen_imaze(5);
  Rng rng(19);
  int yellow = 0;
  for (int i = 0; i < 10000; ++i) yellow += reset(map, rng).indicator_yellow;
  REQUIRE(yellow > 4700);
  REQUIRE(yellow < 5300);
}

TEST_CASE("single-task resets never spawn on a goal") {
  Rng gen(3);
  MazeSplitParams sp = maze_sizes(Task::kSingle, false);
  MapSpec map = gen_random_maze(Task::kSingle, 6, sp, gen);
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    EpisodeState s = reset(map, rng);
    REQUIRE_FALSE(cell_is_goal(map.at(s.pose.x, s.pose.y)));
  }
}

TEST_CASE("blocked moves keep the pose and cost the penalty") {
  EpisodeState s = imaze_episode(5, true, 0);  // facing north into the wall
  const AgentPose before = s.pose;
  StepResult r = step(s, Action::kForward);
  REQUIRE(s.pose == before);
  REQUIRE(r.reward == Catch::Approx(-0.04));
  REQUIRE_FALSE(r.done);

  // look actions never change the cell
  step(s, Action::kLookLeft);
  step(s, Action::kLookDown);
  REQUIRE(s.pose.x == before.x);
  REQUIRE(s.pose.y == before.y);
  REQUIRE(s.pose.pitch_down);
  step(s, Action::kLookUp);
  REQUIRE_FALSE(s.pose.pitch_down);
}

TEST_CASE("imaze rewards follow the indicator") {
  SECTION("yellow indicator makes red the paying goal") {
    EpisodeState s = imaze_episode(2, true, 2);  // facing south
    step(s, Action::kForward);
    step(s, Action::kForward);
    step(s, Action::kForward);   // bottom arm center
    step(s, Action::kLookRight);  // face west toward red
    StepResult r = step(s, Action::kForward);
    REQUIRE(r.reward == Catch::Approx(1.0 - 0.04));
    REQUIRE(r.done);
    REQUIRE(s.outcome == Outcome::kSuccess);
  }
  SECTION("green indicator flips it") {
    EpisodeState s = imaze_episode(2, false, 2);
    step(s, Action::kForward);
    step(s, Action::kForward);
    step(s, Action::kForward);
    step(s, Action::kLookRight);
    StepResult r = step(s, Action::kForward);
    REQUIRE(r.reward == Catch::Approx(-1.0 - 0.04));
    REQUIRE(r.done);
    REQUIRE(s.outcome == Outcome::kFail);
  }
}

TEST_CASE("sequential goals pay half then full, reverse order fails") {
  MapSpec map;
  map.task = Task::kSeqInd;
  map.width = 7;
  map.height = 3;
  map.penalty = -0.04;
  map.max_steps = 50;
  map.cells.assign(21, Cell::kWall);
  for (std::size_t x = 1; x <= 5; ++x) map.at(x, 1) = Cell::kFloor;
  map.at(1, 1) = Cell::kRed;
  map.at(5, 1) = Cell::kBlue;
  map.at(3, 1) = Cell::kSpawn;

  SECTION("green: red first then blue succeeds") {
    EpisodeState s;
    s.map = map;
    s.indicator_yellow = false;
    s.pose = {3, 1, 3, false};  // facing west
    step(s, Action::kForward);                        // x=2
    StepResult hit_red = step(s, Action::kForward);   // x=1, red
    REQUIRE(hit_red.reward == Catch::Approx(0.5 - 0.04));
    REQUIRE_FALSE(hit_red.done);
    step(s, Action::kLookRight);
    step(s, Action::kLookRight);
    for (int i = 0; i < 3; ++i) step(s, Action::kForward);
    StepResult hit_blue = step(s, Action::kForward);
    REQUIRE(hit_blue.reward == Catch::Approx(1.0 - 0.04));
    REQUIRE(hit_blue.done);
    REQUIRE(s.outcome == Outcome::kSuccess);
  }
  SECTION("green: blue first is the wrong order") {
    EpisodeState s;
    s.map = map;
    s.indicator_yellow = false;
    s.pose = {3, 1, 1, false};  // facing east
    step(s, Action::kForward);
    StepResult hit_blue = step(s, Action::kForward);
    REQUIRE(hit_blue.reward == Catch::Approx(-0.5 - 0.04));
    REQUIRE_FALSE(hit_blue.done);
    step(s, Action::kLookLeft);
    step(s, Action::kLookLeft);
    for (int i = 0; i < 3; ++i) step(s, Action::kForward);
    StepResult hit_red = step(s, Action::kForward);
    REQUIRE(hit_red.reward == Catch::Approx(-1.0 - 0.04));
    REQUIRE(hit_red.done);
    REQUIRE(s.outcome == Outcome::kFail);
  }
  SECTION("revisiting the taken first block is a plain move") {
    EpisodeState s;
    s.map = map;
    s.indicator_yellow = false;
    s.pose = {3, 1, 3, false};
    step(s, Action::kForward);
    step(s, Action::kForward);  // on red, +0.5
    step(s, Action::kLookRight);
    step(s, Action::kLookRight);
    step(s, Action::kForward);            // off red
    step(s, Action::kLookLeft);
    step(s, Action::kLookLeft);
    StepResult again = step(s, Action::kForward);  // back onto red
    REQUIRE(again.reward == Catch::Approx(-0.04));
    REQUIRE_FALSE(again.done);
  }
}

TEST_CASE("a full-length wander scores exactly the summed penalty") {
  EpisodeState s = imaze_episode(5, true, 0);
  for (int i = 0; i < 50; ++i) {
    REQUIRE_FALSE(s.done);
    step(s, i % 2 ? Action::kLookLeft : Action::kLookRight);
  }
  REQUIRE(s.done);
  REQUIRE(s.outcome == Outcome::kTimeout);
  REQUIRE(s.cumulative_reward == Catch::Approx(-2.0).margin(1e-12));
  REQUIRE_THROWS_AS(step(s, Action::kForward), std::logic_error);
}

TEST_CASE("render determinism and shape") {
  EpisodeState s = imaze_episode(5, true, 3);
  TensorF img1 = render(s);
  TensorF img2 = render(s);
  REQUIRE(img1.shape == std::vector<std::size_t>{3, 32, 32});
  REQUIRE(img1.data == img2.data);
  for (double v : img1.data) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
}

TEST_CASE("facing an adjacent wall fills every column") {
  EpisodeState s = imaze_episode(5, true, 0);  // north boundary is all wall
  TensorF img = render(s);
  const double shade = 1.0 / (1.0 + 0.15 * 0.5);
  const double want = std::round(0.5 * shade * 255.0) / 255.0;
  for (std::size_t col = 0; col < 32; ++col)
    for (std::size_t row = 0; row < 32; ++row)
      REQUIRE(img.data[row * 32 + col] == Catch::Approx(want).margin(1e-12));
}

TEST_CASE("the indicator is visible from the imaze spawn") {
  for (bool yellow : {true, false}) {
    EpisodeState s = imaze_episode(5, yellow, 3);  // facing west at it
    TensorF img = render(s);
    const Rgb want = cell_color(Cell::kIndicator, yellow);
    const double shade = 1.0 / (1.0 + 0.15 * 0.5);
    REQUIRE(img.data[16 * 32 + 16] ==
            Catch::Approx(std::round(want.r * shade * 255) / 255).margin(1e-9));
  }
}

TEST_CASE("pattern room comparison recovers the identical flag") {
  PatternPair same{pattern_bits(37), pattern_bits(37), true};
  REQUIRE(pattern_rooms_identical(gen_pattern_map(same)));
  PatternPair diff{pattern_bits(37), pattern_bits(21), false};
  REQUIRE_FALSE(pattern_rooms_identical(gen_pattern_map(diff)));
}

TEST_CASE("enough pattern cells are distinguishable from the spawn") {
  // solvability needs most of each room visible; count distinct pattern
  // cells hit by rays across the four facings from the spawn cell
  PatternPair pair{pattern_bits(0x155), pattern_bits(0x0AA), false};
  MapSpec map = gen_pattern_map(pair);
  auto spawn = map.find(Cell::kSpawn)[0];
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (int yaw = 0; yaw < 4; ++yaw) {
    const double px = spawn.first + 0.5, py = spawn.second + 0.5;
    auto [fx, fy] = yaw_delta(yaw);
    for (int col = 0; col < 32; ++col) {
      const double cam = 2.0 * (col + 0.5) / 32 - 1.0;
      RayHit hit = cast_ray(map, px, py, fx + cam * -fy, fy + cam * fx);
      Cell c = map.at(hit.x, hit.y);
      if (c == Cell::kPatternA || c == Cell::kPatternB)
        seen.insert({hit.x, hit.y});
    }
  }
  std::size_t left = 0, right = 0;
  for (auto& [x, y] : seen) (x < map.width / 2 ? ++left : ++right);
  REQUIRE(left >= 5);
  REQUIRE(right >= 5);
}

TEST_CASE("oracle policy completes every task from every spawn") {
  Rng gen(17);
  for (Task task :
       {Task::kSingle, Task::kSeq, Task::kSingleInd, Task::kSeqInd}) {
    MazeSplitParams sp = maze_sizes(task, false);
    for (int k = 0; k < 5; ++k) {
      MapSpec map = gen_random_maze(task, sp.min_size, sp, gen);
      Rng rng(100 + k);
      for (int ep = 0; ep < 20; ++ep) {
        EpisodeState s = reset(map, rng);
        REQUIRE(run_scripted_episode(s) == Outcome::kSuccess);
      }
    }
  }
  for (std::size_t len : {1ul, 5ul, 9ul, 40ul}) {
    for (bool yellow : {true, false}) {
      EpisodeState s = imaze_episode(len, yellow);
      s.map.max_steps = 100;
      REQUIRE(run_scripted_episode(s) == Outcome::kSuccess);
    }
  }
}
