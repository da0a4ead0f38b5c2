#include "prime/hierarchy.hpp"

#include "prime/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace prime {

namespace {
constexpr std::array<std::string_view, kLevels> kLevelNames = {"surface", "atom", "residue", "sse", "protein"};
}

std::string_view level_name(int level) { return kLevelNames.at(static_cast<std::size_t>(level)); }

int level_from_name(std::string_view name) {
  for (int l = 0; l < kLevels; ++l) {
    if (kLevelNames[static_cast<std::size_t>(l)] == name) return l;
  }
  throw Error(ErrorCode::ConfigError, "unknown level '" + std::string(name) + "'");
}

std::vector<int> PartitionMatrix::coarse_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(coarse_count), 0);
  for (int c : assign) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

Matrix PartitionMatrix::to_dense() const {
  Matrix d = Matrix::Zero(fine_count, coarse_count);
  for (int i = 0; i < fine_count; ++i) d(i, assign[static_cast<std::size_t>(i)]) = 1.0;
  return d;
}

void validate(const PartitionMatrix& pi) {
  if (static_cast<int>(pi.assign.size()) != pi.fine_count) {
    throw Error(ErrorCode::ShapeMismatch, "partition has " + std::to_string(pi.assign.size()) +
                                              " assignments for " + std::to_string(pi.fine_count) + " fine nodes");
  }
  for (int c : pi.assign) {
    if (c < 0 || c >= pi.coarse_count) throw Error(ErrorCode::IndexOutOfRange, "partition target out of range");
  }
}

std::array<int, kLevels> Hierarchy::node_counts() const {
  std::array<int, kLevels> counts{};
  for (int l = 0; l < kLevels; ++l) counts[static_cast<std::size_t>(l)] = graphs[static_cast<std::size_t>(l)].node_count();
  return counts;
}

void validate(const Hierarchy& h) {
  for (int l = 1; l < kLevels; ++l) {
    const auto& pi = h.partition_into(l);
    validate(pi);
    if (pi.fine_count != h.graphs[static_cast<std::size_t>(l - 1)].node_count() ||
        pi.coarse_count != h.graphs[static_cast<std::size_t>(l)].node_count()) {
      throw Error(ErrorCode::ShapeMismatch, "partition into level " + std::to_string(l) + " disagrees with graph sizes");
    }
  }
  if (h.graphs[4].node_count() != 1) throw Error(ErrorCode::ShapeMismatch, "protein level must have one node");
}

PartitionMatrix assign_face_to_atom(std::span<const FaceGeometry> faces, const ProteinStructure& structure) {
  if (structure.atoms.empty()) throw Error(ErrorCode::NoAtoms, "no heavy atoms to assign faces to");
  std::vector<Vec3> coords;
  coords.reserve(structure.atoms.size());
  for (const auto& a : structure.atoms) coords.push_back(a.coords);
  const KdTree tree(coords);

  PartitionMatrix pi;
  pi.fine_count = static_cast<int>(faces.size());
  pi.coarse_count = static_cast<int>(coords.size());
  pi.assign.reserve(faces.size());
  for (const auto& f : faces) pi.assign.push_back(knn_indices(tree, f.centroid, 1)[0]);
  return pi;
}

PartitionMatrix assign_atom_to_residue(const ProteinStructure& structure) {
  PartitionMatrix pi;
  pi.fine_count = static_cast<int>(structure.atoms.size());
  pi.coarse_count = static_cast<int>(structure.residues.size());
  pi.assign.reserve(structure.atoms.size());
  for (const auto& a : structure.atoms) pi.assign.push_back(a.residue_index);
  validate(pi);
  return pi;
}

PartitionMatrix assign_residue_to_sse(std::span<const SseSegment> segments, int residue_count) {
  PartitionMatrix pi;
  pi.fine_count = residue_count;
  pi.coarse_count = static_cast<int>(segments.size());
  pi.assign.assign(static_cast<std::size_t>(residue_count), -1);
  int expected = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (seg.start != expected || seg.end < seg.start || seg.end >= residue_count) {
      throw Error(ErrorCode::BadSegmentation, "segment " + std::to_string(s) + " [" + std::to_string(seg.start) +
                                                  ", " + std::to_string(seg.end) + "] leaves a gap or overlap");
    }
    for (int r = seg.start; r <= seg.end; ++r) pi.assign[static_cast<std::size_t>(r)] = static_cast<int>(s);
    expected = seg.end + 1;
  }
  if (expected != residue_count) throw Error(ErrorCode::BadSegmentation, "segments do not cover every residue");
  return pi;
}

PartitionMatrix assign_sse_to_protein(int sse_count) {
  if (sse_count < 1) throw Error(ErrorCode::BadSegmentation, "need at least one SSE");
  return PartitionMatrix{sse_count, 1, std::vector<int>(static_cast<std::size_t>(sse_count), 0)};
}

SparseAdjacency coarsen(const SparseAdjacency& a_fine, const PartitionMatrix& pi) {
  if (a_fine.n != pi.fine_count || static_cast<int>(pi.assign.size()) != pi.fine_count) {
    throw Error(ErrorCode::ShapeMismatch, "adjacency has " + std::to_string(a_fine.n) + " nodes, partition expects " +
                                              std::to_string(pi.fine_count));
  }
  const int nc = pi.coarse_count;

  // Bucket fine entries by coarse row, then accumulate each row into a
  // dense scratch line.
  std::vector<int> row_start(static_cast<std::size_t>(nc) + 1, 0);
  for (const auto& e : a_fine.entries) ++row_start[static_cast<std::size_t>(pi.assign[static_cast<std::size_t>(e.row)]) + 1];
  std::partial_sum(row_start.begin(), row_start.end(), row_start.begin());
  std::vector<std::pair<int, double>> bucket(a_fine.entries.size());
  std::vector<int> fill(row_start.begin(), row_start.end() - 1);
  for (const auto& e : a_fine.entries) {
    const int r = pi.assign[static_cast<std::size_t>(e.row)];
    bucket[static_cast<std::size_t>(fill[static_cast<std::size_t>(r)]++)] = {pi.assign[static_cast<std::size_t>(e.col)], e.weight};
  }

  SparseAdjacency out;
  out.n = nc;
  std::vector<double> scratch(static_cast<std::size_t>(nc), 0.0);
  std::vector<char> seen(static_cast<std::size_t>(nc), 0);
  std::vector<int> touched;
  for (int r = 0; r < nc; ++r) {
    touched.clear();
    for (int k = row_start[static_cast<std::size_t>(r)]; k < row_start[static_cast<std::size_t>(r) + 1]; ++k) {
      const auto [c, w] = bucket[static_cast<std::size_t>(k)];
      if (!seen[static_cast<std::size_t>(c)]) {
        seen[static_cast<std::size_t>(c)] = 1;
        touched.push_back(c);
      }
      scratch[static_cast<std::size_t>(c)] += w;
    }
    std::sort(touched.begin(), touched.end());
    for (int c : touched) {
      out.entries.push_back({r, c, scratch[static_cast<std::size_t>(c)]});
      scratch[static_cast<std::size_t>(c)] = 0.0;
      seen[static_cast<std::size_t>(c)] = 0;
    }
  }
  return out;
}

SparseAdjacency sym_normalize(const SparseAdjacency& a) {
  std::vector<double> degree(static_cast<std::size_t>(a.n), 0.0);
  for (const auto& e : a.entries) {
    if (e.weight < 0.0) throw Error(ErrorCode::NegativeWeight, "negative weight at (" + std::to_string(e.row) + ", " +
                                                                   std::to_string(e.col) + ")");
    degree[static_cast<std::size_t>(e.row)] += e.weight;
  }
  std::vector<double> scale(degree.size());
  for (std::size_t i = 0; i < degree.size(); ++i) scale[i] = degree[i] > 0.0 ? 1.0 / std::sqrt(degree[i]) : 1.0;

  SparseAdjacency out = a;
  for (auto& e : out.entries) {
    e.weight = e.weight * scale[static_cast<std::size_t>(e.row)] * scale[static_cast<std::size_t>(e.col)];
  }
  return out;
}

ProteinStructure subsample_atoms(const ProteinStructure& structure, int cap, std::uint64_t seed) {
  if (static_cast<int>(structure.atoms.size()) <= cap) return structure;

  std::vector<int> backbone, side;
  for (int i = 0; i < static_cast<int>(structure.atoms.size()); ++i) {
    (structure.atoms[static_cast<std::size_t>(i)].is_backbone ? backbone : side).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<int> keep;
  if (static_cast<int>(backbone.size()) >= cap) {
    std::shuffle(backbone.begin(), backbone.end(), rng);
    keep.assign(backbone.begin(), backbone.begin() + cap);
  } else {
    std::shuffle(side.begin(), side.end(), rng);
    keep = backbone;
    keep.insert(keep.end(), side.begin(), side.begin() + (cap - static_cast<int>(backbone.size())));
  }
  std::sort(keep.begin(), keep.end());

  ProteinStructure out;
  out.id = structure.id;
  out.residues = structure.residues;
  out.atoms.reserve(keep.size());
  for (int i : keep) out.atoms.push_back(structure.atoms[static_cast<std::size_t>(i)]);
  reindex_backbone(out);
  return out;
}

ProteinGraph build_hierarchy(const ProteinStructure& structure, const SurfaceMesh& mesh, const HierarchyOptions& options) {
  if (structure.atoms.empty()) throw Error(ErrorCode::NoAtoms, structure.id + ": no heavy atoms");
  ProteinGraph g;
  g.id = structure.id;
  g.structure = structure;

  // SSE assignment sees the full structure, before any atom subsampling.
  g.labels = assign_sse(structure, options.sse);
  g.segments = segment_sse(g.labels);

  g.mesh = cap_faces(mesh, options.face_cap, options.seed);
  g.faces = face_geometry(g.mesh);
  g.atoms = subsample_atoms(structure, options.atom_cap, options.seed ^ 0xa0761d6478bd642fULL);

  std::vector<Vec3> centroids;
  centroids.reserve(g.faces.size());
  for (const auto& f : g.faces) centroids.push_back(f.centroid);

  Hierarchy& h = g.hierarchy;
  h.graphs[0].adjacency = knn_graph(centroids, options.knn_k);
  h.partitions[0] = assign_face_to_atom(g.faces, g.atoms);
  h.partitions[1] = assign_atom_to_residue(g.atoms);
  h.partitions[2] = assign_residue_to_sse(g.segments, static_cast<int>(structure.residues.size()));
  h.partitions[3] = assign_sse_to_protein(static_cast<int>(g.segments.size()));
  for (int l = 1; l < kLevels; ++l) {
    h.graphs[static_cast<std::size_t>(l)].adjacency =
        coarsen(h.graphs[static_cast<std::size_t>(l - 1)].adjacency, h.partition_into(l));
  }
  for (int l = 0; l < kLevels; ++l) {
    auto& lg = h.graphs[static_cast<std::size_t>(l)];
    lg.level = l;
    lg.normalized = sym_normalize(lg.adjacency);
  }
  validate(h);
  return g;
}

}  // namespace prime
