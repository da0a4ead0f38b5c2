#pragma once

#include "prime/dataset.hpp"
#include "prime/hierarchy.hpp"
#include "prime/io.hpp"
#include "prime/synthetic.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>
#include <string>

namespace prime::testkit {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(PRIME_FIXTURE_DIR) / name; }

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("prime_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Symmetric adjacency with small positive integer weights.
inline SparseAdjacency random_adjacency(std::mt19937_64& rng, int n, double density, bool self_loops) {
  std::bernoulli_distribution edge(density);
  std::uniform_int_distribution<int> weight(1, 3);
  Matrix dense = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = self_loops ? i : i + 1; j < n; ++j) {
      if (!edge(rng)) continue;
      const double w = weight(rng);
      dense(i, j) = w;
      dense(j, i) = w;
    }
  }
  return SparseAdjacency::from_dense(dense);
}

// Surjective random assignment of fine nodes to coarse nodes.
inline PartitionMatrix random_partition(std::mt19937_64& rng, int fine, int coarse) {
  std::vector<int> order(static_cast<std::size_t>(fine));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> pick(0, coarse - 1);
  PartitionMatrix pi{fine, coarse, std::vector<int>(static_cast<std::size_t>(fine))};
  for (int i = 0; i < fine; ++i) {
    pi.assign[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i < coarse ? i : pick(rng);
  }
  return pi;
}

inline Hierarchy hierarchy_from(SparseAdjacency a0, std::array<PartitionMatrix, kLevels - 1> parts) {
  Hierarchy h;
  h.graphs[0].adjacency = std::move(a0);
  h.partitions = std::move(parts);
  complete_hierarchy(h);
  return h;
}

// Level sizes shrink geometrically from `fine` down to one protein node.
inline Hierarchy random_hierarchy(std::mt19937_64& rng, int fine, double density = 0.05) {
  std::array<int, kLevels> n{};
  n[0] = fine;
  for (int l = 1; l < kLevels - 1; ++l) {
    std::uniform_int_distribution<int> size(std::max(1, n[static_cast<std::size_t>(l - 1)] / 4),
                                            std::max(1, n[static_cast<std::size_t>(l - 1)] * 3 / 4));
    n[static_cast<std::size_t>(l)] = size(rng);
  }
  n[4] = 1;
  std::array<PartitionMatrix, kLevels - 1> parts;
  for (int l = 1; l < kLevels; ++l) {
    parts[static_cast<std::size_t>(l - 1)] =
        random_partition(rng, n[static_cast<std::size_t>(l - 1)], n[static_cast<std::size_t>(l)]);
  }
  return hierarchy_from(random_adjacency(rng, fine, density, false), std::move(parts));
}

// 10 surface nodes on a ring with two chords, then 6 atoms, 4 residues,
// 2 SSEs and the protein.
inline Hierarchy toy_hierarchy() {
  Matrix a = Matrix::Zero(10, 10);
  for (int i = 0; i < 10; ++i) {
    a(i, (i + 1) % 10) = 1.0;
    a((i + 1) % 10, i) = 1.0;
  }
  a(0, 5) = a(5, 0) = 1.0;
  a(2, 7) = a(7, 2) = 1.0;
  return hierarchy_from(SparseAdjacency::from_dense(a), {PartitionMatrix{10, 6, {0, 0, 1, 1, 2, 2, 3, 4, 5, 5}},
                                                         PartitionMatrix{6, 4, {0, 0, 1, 2, 3, 3}},
                                                         PartitionMatrix{4, 2, {0, 0, 1, 1}},
                                                         PartitionMatrix{2, 1, {0, 0}}});
}

inline std::array<Matrix, kLevels> random_features(const Hierarchy& h, const std::array<int, kLevels>& dims,
                                                   std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<Matrix, kLevels> f;
  for (int l = 0; l < kLevels; ++l) {
    Matrix m(h.graphs[static_cast<std::size_t>(l)].node_count(), dims[static_cast<std::size_t>(l)]);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    f[static_cast<std::size_t>(l)] = std::move(m);
  }
  return f;
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Dense 0/1 partition matrix built from the assignment alone.
inline Matrix dense_partition(const PartitionMatrix& pi) {
  Matrix p = Matrix::Zero(pi.fine_count, pi.coarse_count);
  for (int i = 0; i < pi.fine_count; ++i) p(i, pi.assign[static_cast<std::size_t>(i)]) = 1.0;
  return p;
}

}  // namespace prime::testkit
