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

#ifndef MEMQ_CHECKPOINT_HPP_
#define MEMQ_CHECKPOINT_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "memq/arch.hpp"
#include "memq/world.hpp"

namespace memq {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'M', 'Q', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  Task task = Task::kIMaze;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

namespace detail {

inline nlohmann::json arch_to_json(const ArchConfig& c) {
  return nlohmann::json{
      {"variant", arch_name(c.variant)}, {"frames", c.frames},
      {"mem_size", c.mem_size},          {"embed", c.embed},
      {"actions", c.actions},            {"img", c.img},
      {"channels", c.channels},          {"conv1", c.conv1},
      {"conv2", c.conv2}};
}

inline ArchConfig arch_from_json(const nlohmann::json& j) {
  ArchConfig c;
  c.variant = arch_from_name(j.at("variant").get<std::string>());
  c.frames = j.at("frames").get<std::size_t>();
  c.mem_size = j.at("mem_size").get<std::size_t>();
  c.embed = j.at("embed").get<std::size_t>();
  c.actions = j.at("actions").get<std::size_t>();
  c.img = j.at("img").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.conv1 = j.at("conv1").get<std::size_t>();
  c.conv2 = j.at("conv2").get<std::size_t>();
  return c;
}

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

/// Binary layout: 4-byte magic, u32 format version, u32 manifest length,
/// manifest JSON (arch config, task, seed, step, parameter name/shape list),
/// then the parameters as little-endian float32 in manifest order.
inline std::string serialize_checkpoint(const AgentNet& net,
                                        const CheckpointMeta& meta) {
  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["arch"] = detail::arch_to_json(net.cfg);
  manifest["task"] = task_name(meta.task);
  manifest["seed"] = meta.seed;
  manifest["step"] = meta.step;
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < net.params.count(); ++i) {
    const auto& e = net.params.entry(i);
    params.push_back({{"name", e.name}, {"shape", e.value.shape}});
  }
  manifest["params"] = std::move(params);
  const std::string mtext = manifest.dump();

  std::string out(kCheckpointMagic, 4);
  detail::put_u32_le(out, kCheckpointVersion);
  detail::put_u32_le(out, static_cast<std::uint32_t>(mtext.size()));
  out += mtext;
  for (std::size_t i = 0; i < net.params.count(); ++i) {
    for (double v : net.params.entry(i).value.data) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      detail::put_u32_le(out, bits);
    }
  }
  return out;
}

struct LoadedCheckpoint {
  AgentNet net;
  CheckpointMeta meta;
};

/// Parses a checkpoint; when `expect` is given the stored architecture must
/// match it exactly.
inline LoadedCheckpoint parse_checkpoint(const std::string& bytes,
                                         const ArchConfig* expect = nullptr) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw CheckpointError("not a checkpoint file");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t version = detail::get_u32_le(p + 4);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  const std::uint32_t mlen = detail::get_u32_le(p + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(mlen))
    throw CheckpointError("truncated checkpoint manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(12, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint manifest: ") +
                          e.what());
  }

  LoadedCheckpoint out;
  ArchConfig cfg = detail::arch_from_json(manifest.at("arch"));
  if (expect) {
    const nlohmann::json a = detail::arch_to_json(cfg);
    const nlohmann::json b = detail::arch_to_json(*expect);
    if (a != b)
      throw CheckpointError(
          "checkpoint architecture does not match the requested config");
  }
  out.net = AgentNet::init(cfg, 0);
  out.meta.task = task_from_name(manifest.at("task").get<std::string>());
  out.meta.seed = manifest.at("seed").get<std::uint64_t>();
  out.meta.step = manifest.at("step").get<std::uint64_t>();

  const auto& plist = manifest.at("params");
  if (plist.size() != out.net.params.count())
    throw CheckpointError("checkpoint parameter list does not match");
  std::size_t expected_floats = 0;
  for (std::size_t i = 0; i < plist.size(); ++i) {
    const auto& e = out.net.params.entry(i);
    if (plist[i].at("name").get<std::string>() != e.name ||
        plist[i].at("shape").get<std::vector<std::size_t>>() != e.value.shape)
      throw CheckpointError("shape mismatch for parameter " + e.name);
    expected_floats += e.value.size();
  }
  const std::size_t payload = bytes.size() - 12 - mlen;
  if (payload != expected_floats * 4)
    throw CheckpointError("payload length: expected " +
                          std::to_string(expected_floats * 4) + " bytes, got " +
                          std::to_string(payload));

  const unsigned char* f = p + 12 + mlen;
  for (std::size_t i = 0; i < out.net.params.count(); ++i) {
    for (double& v : out.net.params.entry(i).value.data) {
      const std::uint32_t bits = detail::get_u32_le(f);
      float fv;
      std::memcpy(&fv, &bits, 4);
      v = fv;
      f += 4;
    }
  }
  return out;
}

inline void save_checkpoint(const AgentNet& net, const CheckpointMeta& meta,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  const std::string bytes = serialize_checkpoint(net, meta);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline LoadedCheckpoint load_checkpoint(const std::string& path,
                                        const ArchConfig* expect = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), expect);
}

}  // namespace memq

#endif  // MEMQ_CHECKPOINT_HPP_
