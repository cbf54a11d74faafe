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

#ifndef MEMQ_CONFIG_HPP_
#define MEMQ_CONFIG_HPP_

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "memq/arch.hpp"
#include "memq/world.hpp"

namespace memq {

/// Everything a training run needs. Values default to the published
/// protocol; per-task window, memory, replay, and learning-rate defaults
/// resolve when `finalize()` runs.
struct TrainConfig {
  Task task = Task::kIMaze;
  Arch arch = Arch::kFrmqn;
  std::uint64_t seed = 1;
  std::string map_dir;
  std::string out_dir;

  std::size_t total_steps = 1000000;
  std::size_t epoch_steps = 10000;
  std::size_t frames = 0;        // 0: task default (12 imaze, 10 others)
  std::size_t mem_size = 0;      // 0: frames - 1 for memory variants
  std::size_t conv1 = 32;
  std::size_t conv2 = 64;
  std::size_t embed = 256;
  std::size_t batch = 32;
  double gamma = 0.99;
  double eps_start = 1.0;
  double eps_end = 0.1;
  std::size_t eps_steps = 1000000;
  std::size_t update_every = 4;
  double lr = 0.0;               // 0: per-task/arch published value
  double rmsprop_momentum = 0.95;
  double rmsprop_sq_momentum = 0.95;
  double grad_clip = 20.0;
  double target_momentum = 0.999;
  std::size_t replay_capacity = 0;  // 0: 5e4 imaze/pattern, 1e6 mazes
  std::size_t eval_episodes = 50;
  double eval_eps = 0.05;
  double stop_train_success = 0.0;  // 0: run the full budget

  /// Published learning rates by task and architecture.
  static double default_lr(Task task, Arch arch) {
    static const double table[6][5] = {
        // dqn      drqn    mqn      rmqn     frmqn
        {0.00025, 0.0005, 0.0005, 0.0005, 0.0005},    // imaze
        {0.00025, 0.001, 0.0005, 0.0005, 0.0005},     // pattern
        {0.0001, 0.00025, 0.0001, 0.00025, 0.00025},  // single
        {0.00025, 0.0005, 0.00025, 0.00025, 0.00025}, // seq
        {0.0001, 0.0005, 0.00025, 0.0005, 0.00025},   // single_ind
        {0.00025, 0.001, 0.00025, 0.00025, 0.0005},   // seq_ind
    };
    return table[static_cast<int>(task)][static_cast<int>(arch)];
  }

  void finalize() {
    if (frames == 0) frames = task == Task::kIMaze ? 12 : 10;
    const bool memory = arch == Arch::kMqn || arch == Arch::kRmqn ||
                        arch == Arch::kFrmqn;
    if (mem_size == 0 && memory) mem_size = frames - 1;
    if (!memory) mem_size = 0;
    if (lr == 0.0) lr = default_lr(task, arch);
    if (replay_capacity == 0)
      replay_capacity =
          (task == Task::kIMaze || task == Task::kPatternMatch) ? 50000
                                                                : 1000000;
  }

  ArchConfig arch_config() const {
    ArchConfig a;
    a.variant = arch;
    a.frames = frames;
    a.mem_size = mem_size;
    a.embed = embed;
    a.actions = kNumActions;
    a.img = 32;
    a.channels = 3;
    a.conv1 = conv1;
    a.conv2 = conv2;
    return a;
  }

  void set(const std::string& key, const std::string& value);
};

class ConfigParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::size_t to_size(const std::string& v, const std::string& key) {
  std::size_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigParseError("bad integer for " + key + ": " + v);
  return out;
}

inline double to_double(const std::string& v, const std::string& key) {
  double out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigParseError("bad number for " + key + ": " + v);
  return out;
}

}  // namespace detail

inline void TrainConfig::set(const std::string& key,
                             const std::string& value) {
  if (key == "task") task = task_from_name(value);
  else if (key == "arch") arch = arch_from_name(value);
  else if (key == "seed") seed = detail::to_size(value, key);
  else if (key == "map_dir") map_dir = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "total_steps") total_steps = detail::to_size(value, key);
  else if (key == "epoch_steps") epoch_steps = detail::to_size(value, key);
  else if (key == "frames") frames = detail::to_size(value, key);
  else if (key == "mem_size") mem_size = detail::to_size(value, key);
  else if (key == "conv1") conv1 = detail::to_size(value, key);
  else if (key == "conv2") conv2 = detail::to_size(value, key);
  else if (key == "embed") embed = detail::to_size(value, key);
  else if (key == "batch") batch = detail::to_size(value, key);
  else if (key == "gamma") gamma = detail::to_double(value, key);
  else if (key == "eps_start") eps_start = detail::to_double(value, key);
  else if (key == "eps_end") eps_end = detail::to_double(value, key);
  else if (key == "eps_steps") eps_steps = detail::to_size(value, key);
  else if (key == "update_every") update_every = detail::to_size(value, key);
  else if (key == "lr") lr = detail::to_double(value, key);
  else if (key == "rmsprop_momentum")
    rmsprop_momentum = detail::to_double(value, key);
  else if (key == "rmsprop_sq_momentum")
    rmsprop_sq_momentum = detail::to_double(value, key);
  else if (key == "grad_clip") grad_clip = detail::to_double(value, key);
  else if (key == "target_momentum")
    target_momentum = detail::to_double(value, key);
  else if (key == "replay_capacity")
    replay_capacity = detail::to_size(value, key);
  else if (key == "eval_episodes") eval_episodes = detail::to_size(value, key);
  else if (key == "eval_eps") eval_eps = detail::to_double(value, key);
  else if (key == "stop_train_success")
    stop_train_success = detail::to_double(value, key);
  else
    throw ConfigParseError("unknown config key: " + key);
}

/// Flat `key = value` file; '#' starts a comment.
inline TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw ConfigParseError("line " + std::to_string(lineno) +
                               ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace memq

#endif  // MEMQ_CONFIG_HPP_
