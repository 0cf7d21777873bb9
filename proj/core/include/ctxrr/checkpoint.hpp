#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ctxrr/tensor.hpp"

namespace ctxrr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Named parameter tensors plus string metadata. Layout on disk (all integers
// little-endian):
//
//   "CTXRRCKP"                       8-byte magic
//   u32 version
//   u32 meta_count, then meta_count x { u32 len, key bytes, u32 len, value bytes }
//   u32 entry_count, then entry_count x {
//       u32 len, name bytes, u32 rank, u64 dims[rank], f64 values[prod(dims)] }
//
// Metadata is written in key order, entries in insertion order, so a
// save/load/save cycle reproduces the file byte for byte.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> entries;

  void add(std::string name, const Tensor& t);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ctxrr
