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

#ifndef MEMQ_WORLD_HPP_
#define MEMQ_WORLD_HPP_

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "memq/rng.hpp"
#include "memq/tensor.hpp"

namespace memq {

enum class Cell : char {
  kWall = '#',
  kFloor = '.',
  kRed = 'R',
  kBlue = 'B',
  kIndicator = 'I',
  kSpawn = 'S',
  kPatternA = 'x',
  kPatternB = 'o',
};

inline bool cell_blocks_movement(Cell c) {
  return c == Cell::kWall || c == Cell::kIndicator || c == Cell::kPatternA ||
         c == Cell::kPatternB;
}

inline bool cell_blocks_ray(Cell c) {
  return c != Cell::kFloor && c != Cell::kSpawn;
}

inline bool cell_is_goal(Cell c) { return c == Cell::kRed || c == Cell::kBlue; }

enum class Task {
  kIMaze,
  kPatternMatch,
  kSingle,
  kSeq,
  kSingleInd,
  kSeqInd,
};

inline const char* task_name(Task t) {
  switch (t) {
    case Task::kIMaze: return "imaze";
    case Task::kPatternMatch: return "pattern";
    case Task::kSingle: return "single";
    case Task::kSeq: return "seq";
    case Task::kSingleInd: return "single_ind";
    case Task::kSeqInd: return "seq_ind";
  }
  return "?";
}

inline Task task_from_name(const std::string& s) {
  if (s == "imaze") return Task::kIMaze;
  if (s == "pattern") return Task::kPatternMatch;
  if (s == "single") return Task::kSingle;
  if (s == "seq") return Task::kSeq;
  if (s == "single_ind") return Task::kSingleInd;
  if (s == "seq_ind") return Task::kSeqInd;
  throw std::invalid_argument("unknown task: " + s);
}

/// Tasks whose episodes start from the map's fixed spawn cell; the others
/// spawn uniformly on floor cells away from goals.
inline bool task_has_fixed_spawn(Task t) {
  return t != Task::kSingle && t != Task::kSeq;
}

inline bool task_has_indicator(Task t) {
  return t == Task::kIMaze || t == Task::kSingleInd || t == Task::kSeqInd;
}

struct MapSpec {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Cell> cells;  // row-major
  Task task = Task::kSingle;
  double penalty = -0.04;
  int max_steps = 50;

  Cell at(std::size_t x, std::size_t y) const { return cells[y * width + x]; }
  Cell& at(std::size_t x, std::size_t y) { return cells[y * width + x]; }

  bool operator==(const MapSpec& o) const = default;

  std::vector<std::pair<std::size_t, std::size_t>> find(Cell c) const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x)
        if (at(x, y) == c) out.emplace_back(x, y);
    return out;
  }

  /// Interior side length (grid minus the boundary walls); used for
  /// per-size reporting. For corridor maps this is the corridor length.
  std::size_t interior_size() const {
    if (task == Task::kIMaze) return height - 4;  // vertical corridor cells
    return std::max(width, height) - 2;
  }
};

// yaw: 0=N, 1=E, 2=S, 3=W; grid x grows east, y grows south
struct AgentPose {
  std::size_t x = 0, y = 0;
  int yaw = 0;
  bool pitch_down = false;  // pitch is either 0 or -45 degrees

  bool operator==(const AgentPose&) const = default;
};

inline std::pair<int, int> yaw_delta(int yaw) {
  switch (yaw & 3) {
    case 0: return {0, -1};
    case 1: return {1, 0};
    case 2: return {0, 1};
    default: return {-1, 0};
  }
}

enum class Action : int {
  kLookLeft = 0,
  kLookRight = 1,
  kLookUp = 2,
  kLookDown = 3,
  kForward = 4,
  kBackward = 5,
};
inline constexpr std::size_t kNumActions = 6;

enum class Outcome { kOngoing, kSuccess, kFail, kTimeout };

struct EpisodeState {
  MapSpec map;
  bool indicator_yellow = false;  // sampled per episode where applicable
  AgentPose pose;
  int steps = 0;
  bool done = false;
  Outcome outcome = Outcome::kOngoing;
  double cumulative_reward = 0.0;
  // sequential-goal progress
  bool first_goal_taken = false;
  bool wrong_order = false;
};

/// The goal colors for the episode: first is the (first) correct target,
/// second is the follow-up target for sequential tasks (kFloor if none).
struct GoalRule {
  Cell first;
  Cell second;  // kFloor when the task has a single target
};

inline GoalRule goal_rule(const EpisodeState& s) {
  switch (s.map.task) {
    case Task::kIMaze:
    case Task::kSingleInd:
      return {s.indicator_yellow ? Cell::kRed : Cell::kBlue, Cell::kFloor};
    case Task::kSingle:
      return {Cell::kBlue, Cell::kFloor};
    case Task::kPatternMatch:
      throw std::logic_error("pattern goal rule needs the room comparison");
    case Task::kSeq:
      return {Cell::kRed, Cell::kBlue};
    case Task::kSeqInd:
      return s.indicator_yellow ? GoalRule{Cell::kBlue, Cell::kRed}
                                : GoalRule{Cell::kRed, Cell::kBlue};
  }
  throw std::logic_error("unreachable");
}

/// Compares the two 3x3 pattern rooms of a pattern-matching map. Rooms are
/// recovered as the two connected clusters of pattern cells and compared in
/// identical orientation.
inline bool pattern_rooms_identical(const MapSpec& map) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t y = 0; y < map.height; ++y)
    for (std::size_t x = 0; x < map.width; ++x)
      if (map.at(x, y) == Cell::kPatternA || map.at(x, y) == Cell::kPatternB)
        cells.emplace_back(x, y);
  if (cells.empty() || cells.size() % 2 != 0)
    throw std::invalid_argument("map has no paired pattern rooms");
  // split into two clusters by x gap
  std::size_t min_x = cells[0].first, max_x = cells[0].first;
  for (auto& [x, y] : cells) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
  }
  const std::size_t mid = (min_x + max_x + 1) / 2;
  std::vector<std::tuple<std::size_t, std::size_t, bool>> left, right;
  for (auto& [x, y] : cells) {
    bool a = map.at(x, y) == Cell::kPatternA;
    if (x < mid) left.emplace_back(y, x, a);
    else right.emplace_back(y, x, a);
  }
  if (left.size() != right.size()) return false;
  std::sort(left.begin(), left.end());
  std::sort(right.begin(), right.end());
  for (std::size_t i = 0; i < left.size(); ++i) {
    auto [ly, lx, la] = left[i];
    auto [ry, rx, ra] = right[i];
    auto [l0y, l0x, l0a] = left[0];
    auto [r0y, r0x, r0a] = right[0];
    if (ly - l0y != ry - r0y || lx - l0x != rx - r0x || la != ra)
      return false;
  }
  return true;
}

inline GoalRule episode_goal_rule(const EpisodeState& s) {
  if (s.map.task == Task::kPatternMatch)
    return {pattern_rooms_identical(s.map) ? Cell::kBlue : Cell::kRed,
            Cell::kFloor};
  return goal_rule(s);
}

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Starts an episode: fixed or uniform spawn depending on the task, uniform
/// initial facing, level pitch, and a fair indicator color where the task
/// has one. Draw order is fixed: spawn, yaw, indicator.
inline EpisodeState reset(const MapSpec& map, Rng& rng) {
  EpisodeState s;
  s.map = map;
  if (task_has_fixed_spawn(map.task)) {
    auto spawns = map.find(Cell::kSpawn);
    if (spawns.size() != 1)
      throw MapError("map needs exactly one spawn cell for task " +
                     std::string(task_name(map.task)));
    s.pose.x = spawns[0].first;
    s.pose.y = spawns[0].second;
  } else {
    std::vector<std::pair<std::size_t, std::size_t>> eligible;
    for (std::size_t y = 0; y < map.height; ++y)
      for (std::size_t x = 0; x < map.width; ++x) {
        Cell c = map.at(x, y);
        if ((c == Cell::kFloor || c == Cell::kSpawn) && !cell_is_goal(c))
          eligible.emplace_back(x, y);
      }
    if (eligible.empty()) throw MapError("map has no spawn-eligible cell");
    auto [x, y] = eligible[rng.uniform_int(eligible.size())];
    s.pose.x = x;
    s.pose.y = y;
  }
  s.pose.yaw = static_cast<int>(rng.uniform_int(4));
  s.pose.pitch_down = false;
  if (task_has_indicator(map.task)) s.indicator_yellow = rng.coin();
  return s;
}

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

/// Advances the episode by one action. Look actions rotate or pitch; moves
/// translate one cell unless blocked (a blocked move keeps the pose and
/// still costs the step penalty). Entering a goal block applies the task
/// reward; sequential tasks keep running after the first block.
inline StepResult step(EpisodeState& s, Action a) {
  if (s.done) throw std::logic_error("step on a terminal episode");
  double reward = s.map.penalty;
  switch (a) {
    case Action::kLookLeft: s.pose.yaw = (s.pose.yaw + 3) & 3; break;
    case Action::kLookRight: s.pose.yaw = (s.pose.yaw + 1) & 3; break;
    case Action::kLookUp: s.pose.pitch_down = false; break;
    case Action::kLookDown: s.pose.pitch_down = true; break;
    case Action::kForward:
    case Action::kBackward: {
      auto [dx, dy] = yaw_delta(s.pose.yaw);
      if (a == Action::kBackward) {
        dx = -dx;
        dy = -dy;
      }
      const long nx = static_cast<long>(s.pose.x) + dx;
      const long ny = static_cast<long>(s.pose.y) + dy;
      if (nx >= 0 && ny >= 0 && nx < static_cast<long>(s.map.width) &&
          ny < static_cast<long>(s.map.height)) {
        const Cell target = s.map.at(nx, ny);
        if (!cell_blocks_movement(target)) {
          s.pose.x = static_cast<std::size_t>(nx);
          s.pose.y = static_cast<std::size_t>(ny);
          if (cell_is_goal(target)) {
            const GoalRule rule = episode_goal_rule(s);
            if (rule.second == Cell::kFloor) {
              const bool correct = target == rule.first;
              reward += correct ? 1.0 : -1.0;
              s.done = true;
              s.outcome = correct ? Outcome::kSuccess : Outcome::kFail;
            } else {
              // sequential: half reward on the first block, full on the
              // second; reverse order flips both signs
              if (target == rule.first && !s.first_goal_taken &&
                  !s.wrong_order) {
                reward += 0.5;
                s.first_goal_taken = true;
              } else if (target == rule.second && s.first_goal_taken) {
                reward += 1.0;
                s.done = true;
                s.outcome = Outcome::kSuccess;
              } else if (target == rule.second && !s.first_goal_taken &&
                         !s.wrong_order) {
                reward += -0.5;
                s.wrong_order = true;
              } else if (target == rule.first && s.wrong_order) {
                reward += -1.0;
                s.done = true;
                s.outcome = Outcome::kFail;
              }
              // revisiting an already-entered block is a plain move
            }
          }
        }
      }
      break;
    }
  }
  ++s.steps;
  if (!s.done && s.steps >= s.map.max_steps) {
    s.done = true;
    s.outcome = Outcome::kTimeout;
  }
  s.cumulative_reward += reward;
  return {reward, s.done};
}

// ---------------------------------------------------------------------------
// Rendering: 32x32 RGB column raycaster with 90-degree horizontal FOV.

inline constexpr std::size_t kObsSide = 32;
inline constexpr double kShadeFactor = 0.15;

struct Rgb {
  double r, g, b;
};

inline Rgb cell_color(Cell c, bool indicator_yellow) {
  switch (c) {
    case Cell::kWall: return {0.50, 0.50, 0.50};
    case Cell::kRed: return {0.85, 0.10, 0.10};
    case Cell::kBlue: return {0.10, 0.20, 0.85};
    case Cell::kIndicator:
      return indicator_yellow ? Rgb{0.93, 0.85, 0.12} : Rgb{0.10, 0.78, 0.18};
    case Cell::kPatternA: return {0.92, 0.92, 0.92};
    case Cell::kPatternB: return {0.95, 0.50, 0.08};
    default: return {0.0, 0.0, 0.0};
  }
}

inline constexpr Rgb kSkyColor{0.53, 0.81, 0.92};
inline constexpr Rgb kFloorColor{0.33, 0.28, 0.24};

struct RayHit {
  std::size_t x = 0, y = 0;  // hit cell
  double perp = 0.0;         // perpendicular distance to the hit face
};

/// Casts one ray from the pose's cell center; the map boundary guarantees
/// termination.
inline RayHit cast_ray(const MapSpec& map, double px, double py, double dir_x,
                       double dir_y) {
  long cx = static_cast<long>(px);
  long cy = static_cast<long>(py);
  const double ddx = dir_x == 0.0 ? 1e30 : std::fabs(1.0 / dir_x);
  const double ddy = dir_y == 0.0 ? 1e30 : std::fabs(1.0 / dir_y);
  const long sx = dir_x < 0 ? -1 : 1;
  const long sy = dir_y < 0 ? -1 : 1;
  double side_x = (dir_x < 0 ? (px - cx) : (cx + 1.0 - px)) * ddx;
  double side_y = (dir_y < 0 ? (py - cy) : (cy + 1.0 - py)) * ddy;
  bool hit_on_x = false;
  while (true) {
    if (side_x < side_y) {
      side_x += ddx;
      cx += sx;
      hit_on_x = true;
    } else {
      side_y += ddy;
      cy += sy;
      hit_on_x = false;
    }
    if (cx < 0 || cy < 0 || cx >= static_cast<long>(map.width) ||
        cy >= static_cast<long>(map.height))
      return {0, 0, 1e30};  // only possible on malformed maps
    if (cell_blocks_ray(map.at(cx, cy))) break;
  }
  const double perp = hit_on_x ? side_x - ddx : side_y - ddy;
  return {static_cast<std::size_t>(cx), static_cast<std::size_t>(cy), perp};
}

/// First-person view of the current pose as a 3 x 32 x 32 tensor in [0,1].
/// Column color comes from the nearest ray-blocking cell; slice height is
/// 32 / perpendicular distance around the projection center (row 16 level,
/// row 32 when pitched down); remaining rows are sky above and floor below.
/// Channel values are snapped to the 1/255 grid so observations can be
/// stored compactly without changing what the network sees.
inline TensorF render(const EpisodeState& s) {
  const std::size_t W = kObsSide;
  TensorF img({3, W, W});
  const double px = s.pose.x + 0.5;
  const double py = s.pose.y + 0.5;
  auto [fx, fy] = yaw_delta(s.pose.yaw);
  const double dir_x = fx, dir_y = fy;
  const double plane_x = -dir_y;  // right-hand perpendicular, |plane| = 1
  const double plane_y = dir_x;   // = tan(FOV/2) for a 90-degree FOV
  const double center = s.pose.pitch_down ? 32.0 : 16.0;

  for (std::size_t col = 0; col < W; ++col) {
    const double cam = 2.0 * (col + 0.5) / W - 1.0;
    const RayHit hit = cast_ray(s.map, px, py, dir_x + cam * plane_x,
                                dir_y + cam * plane_y);
    const double perp = std::max(hit.perp, 1e-9);
    const Rgb base = cell_color(s.map.at(hit.x, hit.y), s.indicator_yellow);
    const double shade = 1.0 / (1.0 + kShadeFactor * perp);
    const Rgb block{base.r * shade, base.g * shade, base.b * shade};
    const double half = 0.5 * (W / perp);
    const double top = center - half;
    const double bottom = center + half;
    for (std::size_t row = 0; row < W; ++row) {
      const double rc = row + 0.5;
      const Rgb& c = rc < top ? kSkyColor : (rc >= bottom ? kFloorColor : block);
      img.data[0 * W * W + row * W + col] = c.r;
      img.data[1 * W * W + row * W + col] = c.g;
      img.data[2 * W * W + row * W + col] = c.b;
    }
  }
  for (double& v : img.data) v = std::round(v * 255.0) / 255.0;
  return img;
}

// ---------------------------------------------------------------------------
// Path oracles (breadth-first search over enterable cells)

/// Distances from `from` over cells the agent may walk through. Goal cells
/// not listed in `allowed_goals` are forbidden (stepping on one would end or
/// derail the episode). -1 marks unreachable cells.
inline std::vector<int> bfs_distances(
    const MapSpec& map, std::pair<std::size_t, std::size_t> from,
    std::vector<Cell> allowed_goals = {}) {
  auto goal_ok = [&](Cell c) {
    for (Cell a : allowed_goals)
      if (a == c) return true;
    return false;
  };
  std::vector<int> dist(map.width * map.height, -1);
  std::deque<std::pair<std::size_t, std::size_t>> queue;
  dist[from.second * map.width + from.first] = 0;
  queue.push_back(from);
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    const int d = dist[y * map.width + x];
    const long nbr[4][2] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};
    for (auto& [dx, dy] : nbr) {
      const long nx = static_cast<long>(x) + dx;
      const long ny = static_cast<long>(y) + dy;
      if (nx < 0 || ny < 0 || nx >= static_cast<long>(map.width) ||
          ny >= static_cast<long>(map.height))
        continue;
      const Cell c = map.at(nx, ny);
      if (cell_blocks_movement(c)) continue;
      if (cell_is_goal(c) && !goal_ok(c)) continue;
      if (dist[ny * map.width + nx] >= 0) continue;
      dist[ny * map.width + nx] = d + 1;
      queue.emplace_back(nx, ny);
    }
  }
  return dist;
}

/// Scripted shortest-path policy used by tests and map validation: walks to
/// the episode's current correct goal, avoiding the other goal until its
/// turn. Returns the next action.
inline Action oracle_action(const EpisodeState& s) {
  const GoalRule rule = episode_goal_rule(s);
  Cell target_cell = rule.first;
  std::vector<Cell> allowed{rule.first};
  if (rule.second != Cell::kFloor && s.first_goal_taken) {
    target_cell = rule.second;
    allowed = {rule.first, rule.second};  // the first block is spent
  }
  auto goals = s.map.find(target_cell);
  if (goals.size() != 1)
    throw MapError("oracle expects exactly one " +
                   std::string(1, static_cast<char>(target_cell)) + " block");
  auto [gx, gy] = goals[0];
  // search backwards from the goal so every cell gets its distance-to-goal
  std::vector<int> dist = bfs_distances(s.map, {gx, gy}, allowed);
  const int here = dist[s.pose.y * s.map.width + s.pose.x];
  if (here <= 0) return Action::kForward;  // unreachable or already there
  // pick the neighbor one step closer, preferring the current facing
  const int order[4] = {s.pose.yaw, (s.pose.yaw + 1) & 3, (s.pose.yaw + 3) & 3,
                        (s.pose.yaw + 2) & 3};
  for (int yaw : order) {
    auto [dx, dy] = yaw_delta(yaw);
    const long nx = static_cast<long>(s.pose.x) + dx;
    const long ny = static_cast<long>(s.pose.y) + dy;
    if (nx < 0 || ny < 0 || nx >= static_cast<long>(s.map.width) ||
        ny >= static_cast<long>(s.map.height))
      continue;
    if (dist[ny * s.map.width + nx] != here - 1) continue;
    const Cell c = s.map.at(nx, ny);
    if (cell_blocks_movement(c)) continue;
    if (yaw == s.pose.yaw) return Action::kForward;
    if (yaw == ((s.pose.yaw + 1) & 3)) return Action::kLookRight;
    return Action::kLookLeft;
  }
  return Action::kForward;
}

/// Plays an episode to completion with the scripted policy.
inline Outcome run_scripted_episode(EpisodeState& s) {
  while (!s.done) step(s, oracle_action(s));
  return s.outcome;
}

}  // namespace memq

#endif  // MEMQ_WORLD_HPP_
