#pragma once

#include "prime/features.hpp"
#include "prime/hierarchy.hpp"
#include "prime/nn.hpp"
#include "prime/prime_net.hpp"
#include "prime/training.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace prime {

inline constexpr int kFormatVersion = 1;

// Where a hierarchy came from, so it can be rebuilt bit-for-bit.
struct HierarchySource {
  std::string pdb_path;
  std::string mesh_path;
  std::uint64_t seed = 0;
  int face_cap = 1024;
  int atom_cap = 2048;
  int knn_k = 8;
};

struct HierarchyFile {
  std::string id;
  HierarchySource source;
  Hierarchy hierarchy;
  std::string sse;  // one label character per residue
  std::optional<std::array<Matrix, kLevels>> features;
};

// JSON with "format_version": 1. Only the surface adjacency and the
// partitions are stored; coarser graphs and normalisations are recomputed.
std::string hierarchy_to_json(const HierarchyFile& file);
HierarchyFile hierarchy_from_json(std::string_view text);
void write_hierarchy_file(const std::filesystem::path& path, const HierarchyFile& file);
HierarchyFile read_hierarchy_file(const std::filesystem::path& path);

// Rebuilds the coarse graphs and normalised adjacencies from level 0 and
// the partitions.
void complete_hierarchy(Hierarchy& h);

// Named tensors plus string metadata.
struct Checkpoint {
  std::string kind;
  std::map<std::string, std::string> meta;
  ParamStore params;
};

std::string checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(std::string_view text);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint encoder_checkpoint(const InvariantEncoder& encoder);
InvariantEncoder encoder_from_checkpoint(const Checkpoint& c);

Checkpoint model_checkpoint(const PrimeModel& model, const TrainConfig& config);
struct LoadedModel {
  PrimeModel model;
  TrainConfig config;
};
LoadedModel model_from_checkpoint(const Checkpoint& c);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace prime
