#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "crsr/imaging.hpp"

namespace crsr {

struct ToyFaceOptions {
  int identities = 4;
  int per_identity = 8;
  /// Fixes what each identity looks like.
  uint64_t identity_seed = 1;
  /// Fixes pose, lighting, expression and background of each sample.
  uint64_t variation_seed = 1;
};

/// Procedurally rendered 64x64 cartoon faces with identity labels.
struct ToyFaceSet {
  ImageBatch images;  // AUX_HR
  std::vector<int> identities;
};

/// Samples are ordered identity-major: image i has identity i / per_identity.
ToyFaceSet make_toy_faces(const ToyFaceOptions& options);

/// Writes NNNN.png files plus labels.txt ("NNNN.png <identity>" per line).
void write_toy_faces(const ToyFaceSet& set, const std::filesystem::path& dir);

/// Reads labels.txt written by write_toy_faces; returns the identity of every
/// name in `names`, in order. Throws ConfigError on unknown names.
std::vector<int> read_labels(const std::filesystem::path& labels_file,
                             const std::vector<std::string>& names);

}  // namespace crsr
