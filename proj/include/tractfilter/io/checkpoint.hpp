#pragma once

// Parameter checkpoint (.ckpt)
//   "TFCK" | u32 version = 1 | u32 metadata length | metadata JSON
//   (holds "network": the architecture, plus whatever the writer adds)
//   | u32 tensor count
//   per tensor: u32 name length | name | u8 kind (0 param, 1 buffer)
//               | u64 value count | f32 values

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tractfilter/errors.hpp"
#include "tractfilter/io/binary.hpp"
#include "tractfilter/io/config.hpp"
#include "tractfilter/nn/star_network.hpp"

namespace tractfilter::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  std::uint8_t kind = 0;
  std::vector<float> values;
  bool operator==(const CheckpointTensor&) const = default;
};

struct Checkpoint {
  std::string config_json;
  std::vector<CheckpointTensor> tensors;
  bool operator==(const Checkpoint&) const = default;

  nn::StarNetworkConfig network_config() const {
    return metadata().at("network").get<nn::StarNetworkConfig>();
  }

  json metadata() const { return json::parse(config_json); }
};

inline Checkpoint snapshot(nn::StarNetwork<float>& net, json metadata = json::object()) {
  Checkpoint c;
  metadata["network"] = net.config();
  c.config_json = metadata.dump();
  for (auto* p : net.params()) c.tensors.push_back({p->name, 0, p->value});
  for (auto* b : net.buffers()) c.tensors.push_back({b->name, 1, b->value});
  return c;
}

/// Copy checkpoint values into `net`, which must have the same layout.
inline void restore(const Checkpoint& c, nn::StarNetwork<float>& net) {
  std::unordered_map<std::string, const CheckpointTensor*> by_name;
  for (const auto& t : c.tensors) by_name.emplace(t.name, &t);
  auto take = [&](const std::string& name, std::uint8_t kind, std::vector<float>& dst) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor '" + name + "'");
    if (it->second->kind != kind || it->second->values.size() != dst.size())
      throw FormatError("checkpoint tensor '" + name + "' does not match the network");
    dst = it->second->values;
  };
  for (auto* p : net.params()) take(p->name, 0, p->value);
  for (auto* b : net.buffers()) take(b->name, 1, b->value);
  if (by_name.size() != net.params().size() + net.buffers().size())
    throw FormatError("checkpoint holds tensors the network does not have");
}

inline std::vector<char> encode_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.magic("TFCK");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.config_json.size()));
  w.raw(c.config_json);
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.raw(t.name);
    w.u8(t.kind);
    w.u64(t.values.size());
    for (float v : t.values) w.f32(v);
  }
  return w.bytes();
}

inline Checkpoint decode_checkpoint(std::vector<char> bytes, const std::string& source = "<memory>") {
  ByteReader r(std::move(bytes), source);
  r.expect_magic("TFCK");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError(source + ": unsupported checkpoint version " + std::to_string(version), r.offset() - 4);
  Checkpoint c;
  c.config_json = r.raw(r.u32());
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.raw(r.u32());
    t.kind = r.u8();
    if (t.kind > 1) throw FormatError(source + ": unknown tensor kind", r.offset() - 1);
    const auto n = r.u64();
    r.need(n * 4, "tensor '" + t.name + "'");
    t.values.resize(n);
    for (auto& v : t.values) v = r.f32();
    c.tensors.push_back(std::move(t));
  }
  r.expect_end();
  return c;
}

inline void write_checkpoint(const std::string& path, const Checkpoint& c) { write_file(path, encode_checkpoint(c)); }
inline Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path), path); }

}  // namespace tractfilter::io
