#pragma once

#include "prime/sse_assign.hpp"
#include "prime/structure_io.hpp"
#include "prime/surface_graph.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace prime {

inline constexpr int kLevels = 5;

enum class Level : int { Surface = 0, Atom = 1, Residue = 2, Sse = 3, Protein = 4 };

std::string_view level_name(int level);
int level_from_name(std::string_view name);  // throws ConfigError

// Binary fine -> coarse assignment; row i of the matrix has its single one
// in column assign[i].
struct PartitionMatrix {
  int fine_count = 0;
  int coarse_count = 0;
  std::vector<int> assign;

  std::size_t nnz() const { return assign.size(); }
  std::vector<int> coarse_sizes() const;  // column sums
  Matrix to_dense() const;

  bool operator==(const PartitionMatrix&) const = default;
};

void validate(const PartitionMatrix& pi);

struct LevelGraph {
  int level = 0;
  SparseAdjacency adjacency;
  SparseAdjacency normalized;

  int node_count() const { return adjacency.n; }
  bool operator==(const LevelGraph&) const = default;
};

struct Hierarchy {
  std::array<LevelGraph, kLevels> graphs;
  std::array<PartitionMatrix, kLevels - 1> partitions;  // partitions[l-1] maps level l-1 -> l

  std::array<int, kLevels> node_counts() const;
  const PartitionMatrix& partition_into(int coarse_level) const {
    return partitions[static_cast<std::size_t>(coarse_level - 1)];
  }

  bool operator==(const Hierarchy&) const = default;
};

void validate(const Hierarchy& h);

PartitionMatrix assign_face_to_atom(std::span<const FaceGeometry> faces, const ProteinStructure& structure);
PartitionMatrix assign_atom_to_residue(const ProteinStructure& structure);
PartitionMatrix assign_residue_to_sse(std::span<const SseSegment> segments, int residue_count);
PartitionMatrix assign_sse_to_protein(int sse_count);

// A_coarse = P^T A_fine P, computed in O(nnz + coarse) without densifying.
SparseAdjacency coarsen(const SparseAdjacency& a_fine, const PartitionMatrix& pi);

// D^{-1/2} A D^{-1/2}; zero-degree rows keep a unit scaling factor.
SparseAdjacency sym_normalize(const SparseAdjacency& a);

struct HierarchyOptions {
  std::uint64_t seed = 0;
  int face_cap = 1024;
  int atom_cap = 2048;
  int knn_k = 8;
  SseOptions sse;
};

// Everything derived while building a hierarchy; features are computed from
// the capped mesh and subsampled atoms kept here.
struct ProteinGraph {
  std::string id;
  Hierarchy hierarchy;
  SurfaceMesh mesh;                 // after the face cap
  std::vector<FaceGeometry> faces;  // of `mesh`
  ProteinStructure structure;       // full structure (residue features, SSE)
  ProteinStructure atoms;           // after the atom cap; residues may be empty
  std::vector<SseLabel> labels;
  std::vector<SseSegment> segments;
};

// Keeps every backbone atom when the cap allows and fills the remainder with a
// seeded uniform sample of side-chain atoms. Atom order is preserved.
ProteinStructure subsample_atoms(const ProteinStructure& structure, int cap, std::uint64_t seed);

ProteinGraph build_hierarchy(const ProteinStructure& structure, const SurfaceMesh& mesh,
                             const HierarchyOptions& options = {});

}  // namespace prime
