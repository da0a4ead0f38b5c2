#include "prime/surface_graph.hpp"

#include "prime/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace prime {

double SparseAdjacency::total_weight() const {
  double sum = 0.0;
  for (const auto& e : entries) sum += e.weight;
  return sum;
}

bool SparseAdjacency::is_symmetric() const {
  const auto row_major = [](const SparseEntry& a, const SparseEntry& b) {
    return a.row < b.row || (a.row == b.row && a.col < b.col);
  };
  for (const auto& e : entries) {
    const SparseEntry t{e.col, e.row, 0.0};
    const auto jt = std::lower_bound(entries.begin(), entries.end(), t, row_major);
    if (jt == entries.end() || jt->row != e.col || jt->col != e.row || jt->weight != e.weight) return false;
  }
  return true;
}

Matrix SparseAdjacency::to_dense() const {
  Matrix d = Matrix::Zero(n, n);
  for (const auto& e : entries) d(e.row, e.col) += e.weight;
  return d;
}

SparseAdjacency SparseAdjacency::from_dense(const Matrix& dense) {
  SparseAdjacency a;
  a.n = static_cast<int>(dense.rows());
  for (int i = 0; i < dense.rows(); ++i) {
    for (int j = 0; j < dense.cols(); ++j) {
      if (dense(i, j) != 0.0) a.entries.push_back({i, j, dense(i, j)});
    }
  }
  return a;
}

void canonicalize(SparseAdjacency& a) {
  auto& e = a.entries;
  std::sort(e.begin(), e.end(), [](const SparseEntry& x, const SparseEntry& y) {
    return x.row < y.row || (x.row == y.row && x.col < y.col);
  });
  std::size_t out = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (out > 0 && e[out - 1].row == e[i].row && e[out - 1].col == e[i].col) {
      e[out - 1].weight += e[i].weight;
    } else {
      e[out++] = e[i];
    }
  }
  e.resize(out);
}

std::vector<FaceGeometry> face_geometry(const SurfaceMesh& mesh) {
  std::vector<FaceGeometry> out;
  out.reserve(mesh.faces.size());
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
    FaceGeometry g;
    g.centroid = (a + b + c) / 3.0;
    g.area = triangle_area(a, b, c);
    std::array<double, 3> edges{(b - a).norm(), (c - b).norm(), (a - c).norm()};
    std::sort(edges.begin(), edges.end());
    g.sorted_edge_lengths = Vec3(edges[0], edges[1], edges[2]);
    out.push_back(g);
  }
  return out;
}

SurfaceMesh cap_faces(const SurfaceMesh& mesh, int cap, std::uint64_t seed) {
  if (cap < 4) throw Error(ErrorCode::ShapeMismatch, "face cap must be at least 4");
  if (mesh.faces.size() <= static_cast<std::size_t>(cap)) return mesh;

  std::vector<int> order(mesh.faces.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(cap));
  std::sort(order.begin(), order.end());

  SurfaceMesh out;
  std::vector<int> remap(mesh.vertices.size(), -1);
  out.faces.reserve(order.size());
  for (int fi : order) {
    std::array<int, 3> f = mesh.faces[static_cast<std::size_t>(fi)];
    for (int& v : f) {
      int& m = remap[static_cast<std::size_t>(v)];
      if (m < 0) {
        m = static_cast<int>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[static_cast<std::size_t>(v)]);
      }
      v = m;
    }
    out.faces.push_back(f);
  }
  return out;
}

double distance_tie_key(double d2) {
  if (d2 <= 0.0) return 0.0;
  int e = 0;
  const double m = std::frexp(d2, &e);
  return std::ldexp(std::round(std::ldexp(m, 30)), e - 30);
}

std::vector<int> knn_indices(const KdTree& tree, const Vec3& query, int k, int exclude) {
  const int available = static_cast<int>(tree.size()) - (exclude >= 0 ? 1 : 0);
  k = std::min(k, available);
  if (k <= 0) return {};
  int m = std::min(k + 8, available);
  std::vector<std::pair<double, int>> cand;
  for (;;) {
    cand = tree.knn(query, m, exclude);
    if (m == available || distance_tie_key(cand.back().first) > distance_tie_key(cand[static_cast<std::size_t>(k - 1)].first)) {
      break;
    }
    m = std::min(2 * m, available);
  }
  for (auto& c : cand) c.first = distance_tie_key(c.first);
  std::sort(cand.begin(), cand.end());
  std::vector<int> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = cand[static_cast<std::size_t>(i)].second;
  return out;
}

SparseAdjacency knn_graph(std::span<const Vec3> points, int k) {
  const int n = static_cast<int>(points.size());
  if (n < 2) throw Error(ErrorCode::TooFewPoints, "kNN graph needs at least 2 points, got " + std::to_string(n));
  if (k < 1) throw Error(ErrorCode::ShapeMismatch, "k must be positive");
  const int kk = std::min(k, n - 1);

  KdTree tree(points);
  SparseAdjacency a;
  a.n = n;
  a.entries.reserve(static_cast<std::size_t>(2 * n * kk));
  for (int i = 0; i < n; ++i) {
    for (int j : knn_indices(tree, points[static_cast<std::size_t>(i)], kk, i)) {
      a.entries.push_back({i, j, 1.0});
      a.entries.push_back({j, i, 1.0});
    }
  }
  canonicalize(a);
  for (auto& e : a.entries) e.weight = 1.0;  // union, not multiplicity
  return a;
}

}  // namespace prime
