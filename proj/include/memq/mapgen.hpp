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

#ifndef MEMQ_MAPGEN_HPP_
#define MEMQ_MAPGEN_HPP_

#include <array>
#include <set>
#include <string>
#include <vector>

#include "memq/map_io.hpp"
#include "memq/rng.hpp"
#include "memq/world.hpp"

namespace memq {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kWallProbability = 0.25;
inline constexpr int kMaxRejections = 1000;

// ---------------------------------------------------------------------------
// I-maze: fixed spawn and indicator in a 3-cell top arm, a vertical corridor,
// and red/blue goals at the west/east ends of the bottom arm.

inline MapSpec gen_imaze(std::size_t corridor_len) {
  if (corridor_len < 1) throw GenerationError("corridor length must be >= 1");
  MapSpec m;
  m.task = Task::kIMaze;
  m.width = 5;
  m.height = corridor_len + 4;
  m.cells.assign(m.width * m.height, Cell::kWall);
  m.at(1, 1) = Cell::kIndicator;
  m.at(2, 1) = Cell::kSpawn;
  m.at(3, 1) = Cell::kFloor;
  for (std::size_t y = 2; y < 2 + corridor_len; ++y) m.at(2, y) = Cell::kFloor;
  const std::size_t by = m.height - 2;
  m.at(1, by) = Cell::kRed;
  m.at(2, by) = Cell::kFloor;
  m.at(3, by) = Cell::kBlue;
  return m;
}

// ---------------------------------------------------------------------------
// Pattern matching: two 3x3 rooms of two-tone blocks flanking a center
// corridor, fixed spawn between them, red/blue goals on the south side.
// The spawn sits two rows south of the rooms so the oblique view exposes
// both the south face and the corridor-side face of each room.
//
//   ###########
//   #xxx...ooo#     rooms at columns 1-3 and 7-9, rows 1-3
//   #xxx...ooo#
//   #xxx...ooo#
//   #.........#
//   #....S....#
//   #R.......B#
//   ###########

struct PatternPair {
  std::array<bool, 9> left;   // row-major 3x3, true = first tone
  std::array<bool, 9> right;
  bool identical = false;
};

inline std::array<bool, 9> pattern_bits(unsigned code) {
  std::array<bool, 9> p{};
  for (std::size_t i = 0; i < 9; ++i) p[i] = (code >> i) & 1u;
  return p;
}

inline MapSpec gen_pattern_map(const PatternPair& pair) {
  if (pair.identical != (pair.left == pair.right))
    throw GenerationError("pattern pair flag does not match its grids");
  MapSpec m;
  m.task = Task::kPatternMatch;
  m.width = 11;
  m.height = 8;
  m.cells.assign(m.width * m.height, Cell::kWall);
  for (std::size_t y = 1; y <= 6; ++y)
    for (std::size_t x = 1; x <= 9; ++x) m.at(x, y) = Cell::kFloor;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      m.at(1 + c, 1 + r) =
          pair.left[r * 3 + c] ? Cell::kPatternA : Cell::kPatternB;
      m.at(7 + c, 1 + r) =
          pair.right[r * 3 + c] ? Cell::kPatternA : Cell::kPatternB;
    }
  m.at(5, 5) = Cell::kSpawn;
  m.at(1, 6) = Cell::kRed;
  m.at(9, 6) = Cell::kBlue;
  return m;
}

struct PatternSets {
  std::vector<MapSpec> train;
  std::vector<MapSpec> unseen;
  std::vector<unsigned> train_codes;   // base patterns, one per pair of maps
  std::vector<unsigned> unseen_codes;
};

/// Samples 250 base patterns for training and a disjoint 250 for evaluation
/// out of the 512 possible two-tone 3x3 rooms. Each base yields one map with
/// identical rooms and one where a randomly chosen room is replaced by a
/// fresh pattern.
inline PatternSets gen_pattern_matching_sets(Rng rng) {
  std::vector<unsigned> codes(512);
  for (unsigned i = 0; i < 512; ++i) codes[i] = i;
  for (std::size_t i = codes.size() - 1; i > 0; --i)
    std::swap(codes[i], codes[rng.uniform_int(i + 1)]);

  PatternSets out;
  std::set<std::string> taken;  // grid-level disjointness across both sets
  auto emit = [&](std::vector<MapSpec>& dst, std::vector<unsigned>& bases,
                  std::size_t offset) {
    for (std::size_t k = 0; k < 250; ++k) {
      const unsigned base = codes[offset + k];
      bases.push_back(base);
      PatternPair same{pattern_bits(base), pattern_bits(base), true};
      MapSpec same_map = gen_pattern_map(same);
      taken.insert(serialize_map(same_map));
      dst.push_back(std::move(same_map));
      for (int tries = 0;; ++tries) {
        if (tries >= kMaxRejections)
          throw GenerationError("could not generate a distinct pattern map");
        unsigned fresh = base;
        while (fresh == base)
          fresh = static_cast<unsigned>(rng.uniform_int(512));
        PatternPair diff{pattern_bits(base), pattern_bits(base), false};
        if (rng.coin())
          diff.left = pattern_bits(fresh);
        else
          diff.right = pattern_bits(fresh);
        diff.identical = false;
        MapSpec diff_map = gen_pattern_map(diff);
        if (taken.insert(serialize_map(diff_map)).second) {
          dst.push_back(std::move(diff_map));
          break;
        }
      }
    }
  };
  emit(out.train, out.train_codes, 0);
  emit(out.unseen, out.unseen_codes, 250);
  return out;
}

// ---------------------------------------------------------------------------
// Random mazes

struct MazeSplitParams {
  std::size_t min_size = 4;
  std::size_t max_size = 8;
  double penalty = -0.04;
  int max_steps = 50;
};

/// Size ranges from the per-task evaluation protocol (train/unseen share
/// sizes; the large split extends past them).
inline MazeSplitParams maze_sizes(Task task, bool large) {
  switch (task) {
    case Task::kSingle:
      return large ? MazeSplitParams{9, 14, -0.02, 100}
                   : MazeSplitParams{4, 8, -0.04, 50};
    case Task::kSeq:
      return large ? MazeSplitParams{8, 10, -0.02, 100}
                   : MazeSplitParams{5, 7, -0.04, 50};
    case Task::kSingleInd:
      return large ? MazeSplitParams{8, 10, -0.02, 100}
                   : MazeSplitParams{5, 7, -0.04, 50};
    case Task::kSeqInd:
      return large ? MazeSplitParams{7, 9, -0.02, 100}
                   : MazeSplitParams{4, 6, -0.04, 50};
    default:
      throw GenerationError("not a random-maze task");
  }
}

namespace detail {

/// One candidate maze; returns false when the layout fails a constraint.
inline bool try_random_maze(Task task, std::size_t size,
                            const MazeSplitParams& sp, Rng& rng, MapSpec* out) {
  MapSpec m;
  m.task = task;
  m.width = size + 2;
  m.height = size + 2;
  m.penalty = sp.penalty;
  m.max_steps = sp.max_steps;
  m.cells.assign(m.width * m.height, Cell::kWall);
  std::vector<std::pair<std::size_t, std::size_t>> floor;
  for (std::size_t y = 1; y <= size; ++y)
    for (std::size_t x = 1; x <= size; ++x) {
      if (rng.uniform() < kWallProbability) continue;
      m.at(x, y) = Cell::kFloor;
      floor.emplace_back(x, y);
    }
  const bool ind = task_has_indicator(task);
  const std::size_t needed = ind ? 5 : 3;  // goals + spare (+ spawn/indicator)
  if (floor.size() < needed) return false;

  auto take = [&]() {
    const std::size_t i = rng.uniform_int(floor.size());
    auto cell = floor[i];
    floor.erase(floor.begin() + i);
    return cell;
  };
  auto [rx, ry] = take();
  m.at(rx, ry) = Cell::kRed;
  auto [bx, by] = take();
  m.at(bx, by) = Cell::kBlue;
  if (ind) {
    // fixed spawn with the indicator on an adjacent floor cell
    for (int attempt = 0; attempt < 8; ++attempt) {
      const std::size_t i = rng.uniform_int(floor.size());
      auto [sx, sy] = floor[i];
      std::vector<std::pair<std::size_t, std::size_t>> nbrs;
      const long d[4][2] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};
      for (auto& [dx, dy] : d) {
        const long nx = static_cast<long>(sx) + dx;
        const long ny = static_cast<long>(sy) + dy;
        if (nx < 1 || ny < 1 || nx > static_cast<long>(size) ||
            ny > static_cast<long>(size))
          continue;
        if (m.at(nx, ny) == Cell::kFloor)
          nbrs.emplace_back(static_cast<std::size_t>(nx),
                            static_cast<std::size_t>(ny));
      }
      if (nbrs.empty()) continue;
      auto [ix, iy] = nbrs[rng.uniform_int(nbrs.size())];
      m.at(sx, sy) = Cell::kSpawn;
      m.at(ix, iy) = Cell::kIndicator;
      break;
    }
    if (m.find(Cell::kSpawn).empty()) return false;
  }

  try {
    validate_map(m);
  } catch (const ParseError&) {
    return false;
  }

  // the scripted policy must finish from every legal spawn within the
  // step budget (both indicator colors for indicator tasks)
  std::vector<std::pair<std::size_t, std::size_t>> starts;
  if (task_has_fixed_spawn(task)) {
    starts = m.find(Cell::kSpawn);
  } else {
    starts = m.find(Cell::kFloor);
  }
  for (auto& [sx, sy] : starts) {
    for (int color = 0; color < (ind ? 2 : 1); ++color) {
      EpisodeState ep;
      ep.map = m;
      ep.indicator_yellow = color == 0;
      ep.pose = {sx, sy, 0, false};
      if (run_scripted_episode(ep) != Outcome::kSuccess) return false;
    }
  }
  *out = std::move(m);
  return true;
}

}  // namespace detail

/// Random maze of the given interior size; walls drop in with probability
/// 0.25 and layouts regenerate until the task is provably completable from
/// every legal spawn.
inline MapSpec gen_random_maze(Task task, std::size_t size,
                               const MazeSplitParams& sp, Rng& rng) {
  const MazeSplitParams small = maze_sizes(task, false);
  const MazeSplitParams large = maze_sizes(task, true);
  if (size < small.min_size || size > large.max_size)
    throw GenerationError("size " + std::to_string(size) +
                          " outside the task's range");
  MapSpec m;
  for (int tries = 0; tries < kMaxRejections; ++tries)
    if (detail::try_random_maze(task, size, sp, rng, &m)) return m;
  throw GenerationError("exceeded " + std::to_string(kMaxRejections) +
                        " rejections generating a " +
                        std::string(task_name(task)) + " maze of size " +
                        std::to_string(size));
}

// ---------------------------------------------------------------------------
// Families: train / unseen / unseen-large splits with grid-level
// disjointness.

struct MazeFamily {
  Task task = Task::kSingle;
  std::uint64_t seed = 0;
  std::vector<MapSpec> train;
  std::vector<MapSpec> unseen;
  std::vector<MapSpec> unseen_large;  // empty for imaze and pattern
};

inline const std::vector<std::size_t>& default_imaze_train_lengths() {
  static const std::vector<std::size_t> v{5, 7, 9};
  return v;
}
inline const std::vector<std::size_t>& default_imaze_eval_lengths() {
  static const std::vector<std::size_t> v{4, 6, 8, 10, 15, 20, 25, 30, 35, 40};
  return v;
}

struct FamilyCounts {
  std::size_t train = 1000;
  std::size_t unseen = 1000;
  std::size_t unseen_large = 1000;
};

inline MazeFamily gen_family(Task task, std::uint64_t seed,
                             const FamilyCounts& counts = {},
                             const std::vector<std::size_t>& imaze_train =
                                 default_imaze_train_lengths(),
                             const std::vector<std::size_t>& imaze_eval =
                                 default_imaze_eval_lengths()) {
  MazeFamily fam;
  fam.task = task;
  fam.seed = seed;
  Rng root(seed);
  if (task == Task::kIMaze) {
    for (std::size_t l : imaze_train) fam.train.push_back(gen_imaze(l));
    for (std::size_t l : imaze_eval) fam.unseen.push_back(gen_imaze(l));
    return fam;
  }
  if (task == Task::kPatternMatch) {
    PatternSets sets = gen_pattern_matching_sets(root.split("patterns"));
    fam.train = std::move(sets.train);
    fam.unseen = std::move(sets.unseen);
    return fam;
  }

  std::set<std::string> taken;
  auto fill = [&](std::vector<MapSpec>& dst, std::size_t count, bool large,
                  Rng rng) {
    const MazeSplitParams sp = maze_sizes(task, large);
    for (std::size_t i = 0; i < count; ++i) {
      for (int tries = 0;; ++tries) {
        if (tries >= kMaxRejections)
          throw GenerationError("could not generate a distinct maze");
        const std::size_t size =
            sp.min_size + rng.uniform_int(sp.max_size - sp.min_size + 1);
        MapSpec m = gen_random_maze(task, size, sp, rng);
        if (taken.insert(serialize_map(m)).second) {
          dst.push_back(std::move(m));
          break;
        }
      }
    }
  };
  fill(fam.train, counts.train, false, root.split("train"));
  fill(fam.unseen, counts.unseen, false, root.split("unseen"));
  fill(fam.unseen_large, counts.unseen_large, true, root.split("unseen-l"));
  return fam;
}

}  // namespace memq

#endif  // MEMQ_MAPGEN_HPP_
