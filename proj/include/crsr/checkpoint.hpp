#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "crsr/networks.hpp"

namespace crsr {

inline constexpr uint32_t kCheckpointVersion = 1;

/// One named group of arrays, e.g. the parameters of one network.
struct CheckpointSection {
  std::string name;
  NamedTensors arrays;
};

/// In-memory image of a checkpoint file.
///
/// On disk (all integers little-endian):
///   "CRSRCKPT"  u32 version  u64 config fingerprint
///   u64 metadata length, metadata bytes (UTF-8 JSON)
///   u32 section count, then per section:
///     u32 name length, name, u32 array count, then per array:
///       u32 name length, name, u32 rank, i64 dims[rank], f32 data[prod(dims)]
///   u64 FNV-1a 64 of every preceding byte
struct CheckpointFile {
  uint32_t version = kCheckpointVersion;
  uint64_t fingerprint = 0;
  std::string metadata;
  std::vector<CheckpointSection> sections;

  const CheckpointSection* find(std::string_view name) const;
};

/// Throws IoError if the file cannot be written.
void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file);

/// Throws IoError on unreadable, truncated or corrupted files and StateError
/// on a version mismatch.
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

}  // namespace crsr
