#pragma once

#include "prime/kdtree.hpp"
#include "prime/structure_io.hpp"
#include "prime/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace prime {

struct FaceGeometry {
  Vec3 centroid = Vec3::Zero();
  double area = 0.0;
  Vec3 sorted_edge_lengths = Vec3::Zero();  // ascending
};

struct SparseEntry {
  int row = 0;
  int col = 0;
  double weight = 0.0;

  bool operator==(const SparseEntry&) const = default;
};

// Square sparse matrix in coordinate form. Entries are unique per (row, col)
// and kept sorted row-major.
struct SparseAdjacency {
  int n = 0;
  std::vector<SparseEntry> entries;

  std::size_t nnz() const { return entries.size(); }
  double total_weight() const;
  bool is_symmetric() const;
  Matrix to_dense() const;
  static SparseAdjacency from_dense(const Matrix& dense);

  bool operator==(const SparseAdjacency&) const = default;
};

// Sorts entries row-major and merges duplicates by summation.
void canonicalize(SparseAdjacency& a);

std::vector<FaceGeometry> face_geometry(const SurfaceMesh& mesh);

// Caps the face count by seeded uniform subsampling and prunes vertices no
// face references. Meshes already under the cap are returned unchanged.
SurfaceMesh cap_faces(const SurfaceMesh& mesh, int cap, std::uint64_t seed);

// Squared distance rounded to 30 significant bits. Distances with equal keys
// are ties and go to the lower index, so neighbour choice does not hinge on
// last-bit rounding of the coordinates.
double distance_tie_key(double d2);

// The k nearest points to `query` (excluding index `exclude`) ordered by
// (distance_tie_key, index).
std::vector<int> knn_indices(const KdTree& tree, const Vec3& query, int k, int exclude = -1);

// Exact k-nearest-neighbour graph, symmetrised by union, unit weights.
SparseAdjacency knn_graph(std::span<const Vec3> points, int k = 8);

}  // namespace prime
