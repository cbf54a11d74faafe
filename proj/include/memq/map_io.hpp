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

#ifndef MEMQ_MAP_IO_HPP_
#define MEMQ_MAP_IO_HPP_

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "memq/world.hpp"

namespace memq {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const char* what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(std::string("bad ") + what + " value: " + std::string(s));
  return v;
}

inline long parse_long(std::string_view s, const char* what) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(std::string("bad ") + what + " value: " + std::string(s));
  return v;
}

}  // namespace detail

/// Text form: one header line
///   task=<name> w=<int> h=<int> penalty=<float> max_steps=<int>
/// followed by h rows of w glyphs. Round-trips bit-exactly.
inline std::string serialize_map(const MapSpec& map) {
  std::string out = "task=" + std::string(task_name(map.task)) +
                    " w=" + std::to_string(map.width) +
                    " h=" + std::to_string(map.height) +
                    " penalty=" + detail::format_double(map.penalty) +
                    " max_steps=" + std::to_string(map.max_steps) + "\n";
  for (std::size_t y = 0; y < map.height; ++y) {
    for (std::size_t x = 0; x < map.width; ++x)
      out.push_back(static_cast<char>(map.at(x, y)));
    out.push_back('\n');
  }
  return out;
}

/// Structural checks shared by the parser and the generators: boundary
/// walls, per-task fixed cells, and goal reachability from every legal
/// spawn cell.
inline void validate_map(const MapSpec& map) {
  if (map.width < 3 || map.height < 3)
    throw ParseError("map too small to hold a boundary wall");
  for (std::size_t x = 0; x < map.width; ++x)
    if (map.at(x, 0) != Cell::kWall || map.at(x, map.height - 1) != Cell::kWall)
      throw ParseError("outer boundary must be wall");
  for (std::size_t y = 0; y < map.height; ++y)
    if (map.at(0, y) != Cell::kWall || map.at(map.width - 1, y) != Cell::kWall)
      throw ParseError("outer boundary must be wall");

  const auto spawns = map.find(Cell::kSpawn);
  if (task_has_fixed_spawn(map.task)) {
    if (spawns.size() != 1)
      throw ParseError("task " + std::string(task_name(map.task)) +
                       " needs exactly one spawn cell");
  } else if (!spawns.empty()) {
    throw ParseError("task " + std::string(task_name(map.task)) +
                     " spawns anywhere; unexpected spawn glyph");
  }
  const auto reds = map.find(Cell::kRed);
  const auto blues = map.find(Cell::kBlue);
  if (reds.size() != 1 || blues.size() != 1)
    throw ParseError("map needs exactly one red and one blue block");
  const auto indicators = map.find(Cell::kIndicator);
  if (task_has_indicator(map.task) != (indicators.size() == 1))
    throw ParseError(task_has_indicator(map.task)
                         ? "task needs exactly one indicator"
                         : "unexpected indicator for this task");
  const auto pattern_a = map.find(Cell::kPatternA);
  const auto pattern_b = map.find(Cell::kPatternB);
  if ((map.task == Task::kPatternMatch) !=
      (pattern_a.size() + pattern_b.size() == 18))
    throw ParseError(map.task == Task::kPatternMatch
                         ? "pattern task needs two 3x3 pattern rooms"
                         : "unexpected pattern glyphs for this task");

  // Every legal spawn must reach every goal without stepping on the other
  // goal first.
  std::vector<std::pair<std::size_t, std::size_t>> spawn_cells;
  if (task_has_fixed_spawn(map.task)) {
    spawn_cells = spawns;
  } else {
    for (std::size_t y = 0; y < map.height; ++y)
      for (std::size_t x = 0; x < map.width; ++x)
        if (map.at(x, y) == Cell::kFloor) spawn_cells.emplace_back(x, y);
    if (spawn_cells.empty()) throw ParseError("map has no spawn-eligible cell");
  }
  for (Cell goal : {Cell::kRed, Cell::kBlue}) {
    const auto g = map.find(goal)[0];
    std::vector<int> dist = bfs_distances(map, g, {goal});
    for (auto& [sx, sy] : spawn_cells)
      if (dist[sy * map.width + sx] < 0)
        throw ParseError("unreachable goal block");
  }
}

inline MapSpec parse_map(std::string_view text) {
  if (text.empty()) throw ParseError("empty map file");
  const std::size_t nl = text.find('\n');
  if (nl == std::string_view::npos)
    throw ParseError("line 1: missing grid after header");
  std::string_view header = text.substr(0, nl);

  MapSpec map;
  long w = -1, h = -1;
  bool seen[5] = {false, false, false, false, false};
  std::size_t pos = 0;
  while (pos < header.size()) {
    std::size_t end = header.find(' ', pos);
    if (end == std::string_view::npos) end = header.size();
    std::string_view tok = header.substr(pos, end - pos);
    pos = end + 1;
    if (tok.empty()) continue;
    const std::size_t eq = tok.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("line 1: malformed header token '" + std::string(tok) +
                       "'");
    std::string_view key = tok.substr(0, eq);
    std::string_view val = tok.substr(eq + 1);
    if (key == "task") {
      map.task = task_from_name(std::string(val));
      seen[0] = true;
    } else if (key == "w") {
      w = detail::parse_long(val, "w");
      seen[1] = true;
    } else if (key == "h") {
      h = detail::parse_long(val, "h");
      seen[2] = true;
    } else if (key == "penalty") {
      map.penalty = detail::parse_double(val, "penalty");
      seen[3] = true;
    } else if (key == "max_steps") {
      map.max_steps = static_cast<int>(detail::parse_long(val, "max_steps"));
      seen[4] = true;
    } else {
      throw ParseError("line 1: unknown header key '" + std::string(key) +
                       "'");
    }
  }
  for (bool s : seen)
    if (!s) throw ParseError("line 1: incomplete header");
  if (w < 3 || h < 3) throw ParseError("line 1: degenerate grid size");
  map.width = static_cast<std::size_t>(w);
  map.height = static_cast<std::size_t>(h);
  map.cells.assign(map.width * map.height, Cell::kWall);

  std::size_t line_start = nl + 1;
  for (std::size_t y = 0; y < map.height; ++y) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    std::string_view row = text.substr(line_start, line_end - line_start);
    if (row.size() != map.width)
      throw ParseError("line " + std::to_string(y + 2) + ": expected " +
                       std::to_string(map.width) + " glyphs, got " +
                       std::to_string(row.size()));
    for (std::size_t x = 0; x < map.width; ++x) {
      const char g = row[x];
      switch (g) {
        case '#': case '.': case 'R': case 'B': case 'I': case 'S':
        case 'x': case 'o':
          map.at(x, y) = static_cast<Cell>(g);
          break;
        default:
          throw ParseError("line " + std::to_string(y + 2) + ", column " +
                           std::to_string(x + 1) + ": unknown glyph '" +
                           std::string(1, g) + "'");
      }
    }
    line_start = line_end + 1;
  }
  if (line_start < text.size()) {
    std::string_view rest = text.substr(line_start);
    if (rest.find_first_not_of(" \n") != std::string_view::npos)
      throw ParseError("trailing content after grid");
  }
  validate_map(map);
  return map;
}

inline MapSpec load_map_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open map file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_map(ss.str());
}

inline void save_map_file(const MapSpec& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write map file: " + path);
  out << serialize_map(map);
}

}  // namespace memq

#endif  // MEMQ_MAP_IO_HPP_
