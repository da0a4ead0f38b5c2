#include "prime/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <utility>

namespace prime {

double bond_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 u = a - b;
  const Vec3 v = c - b;
  return std::atan2(u.cross(v).norm(), u.dot(v));
}

double dihedral(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 b0 = a - b;
  const Vec3 b1 = c - b;
  const Vec3 b2 = d - c;
  const Vec3 b1n = b1.normalized();
  const Vec3 v = b0 - b0.dot(b1n) * b1n;
  const Vec3 w = b2 - b2.dot(b1n) * b1n;
  const double x = v.dot(w);
  const double y = b1n.cross(v).dot(w);
  return std::atan2(y, x);
}

Vec3 place_atom(const Vec3& a, const Vec3& b, const Vec3& c, double length, double angle, double torsion) {
  const Vec3 bc = (c - b).normalized();
  const Vec3 n = (b - a).cross(bc).normalized();
  const Vec3 m = n.cross(bc);
  const Vec3 local(-length * std::cos(angle), length * std::sin(angle) * std::cos(torsion),
                   length * std::sin(angle) * std::sin(torsion));
  return c + bc * local.x() + m * local.y() + n * local.z();
}

RigidMotion RigidMotion::random(std::uint64_t seed, double max_translation) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-max_translation, max_translation);
  Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
  q.normalize();
  RigidMotion m;
  m.rotation = q.toRotationMatrix();
  m.translation = Vec3(uniform(rng), uniform(rng), uniform(rng));
  return m;
}

void apply(const RigidMotion& motion, ProteinStructure& structure) {
  for (auto& a : structure.atoms) a.coords = motion.apply(a.coords);
}

void apply(const RigidMotion& motion, SurfaceMesh& mesh) {
  for (auto& v : mesh.vertices) v = motion.apply(v);
}

namespace {

struct HullFace {
  std::array<int, 3> v;
  Vec3 normal;
  double offset;
  bool alive = true;
};

}  // namespace

std::vector<std::array<int, 3>> convex_hull(std::span<const Vec3> points) {
  const int n = static_cast<int>(points.size());
  if (n < 4) throw Error(ErrorCode::TooFewPoints, "convex hull needs at least 4 points");

  double scale = 0.0;
  for (const auto& p : points) scale = std::max(scale, (p - points[0]).norm());
  const double eps = 1e-10 * std::max(scale, 1.0);

  // Initial simplex from extreme points.
  int i0 = 0, i1 = -1, i2 = -1, i3 = -1;
  double best = -1.0;
  for (int i = 1; i < n; ++i) {
    const double d = (points[i] - points[i0]).squaredNorm();
    if (d > best) best = d, i1 = i;
  }
  best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = (points[i] - points[i0]).cross(points[i] - points[i1]).squaredNorm();
    if (d > best) best = d, i2 = i;
  }
  const Vec3 base_normal = (points[i1] - points[i0]).cross(points[i2] - points[i0]);
  best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = std::abs(base_normal.dot(points[i] - points[i0]));
    if (d > best) best = d, i3 = i;
  }
  if (base_normal.norm() <= eps * eps || best <= eps * base_normal.norm()) {
    throw Error(ErrorCode::TooFewPoints, "points are coplanar; no hull volume");
  }

  const Vec3 interior = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
  std::vector<HullFace> faces;
  std::map<std::pair<int, int>, int> edge_owner;  // directed edge -> face

  auto add_face = [&](int a, int b, int c) {
    HullFace f;
    f.v = {a, b, c};
    f.normal = (points[b] - points[a]).cross(points[c] - points[a]);
    f.normal.normalize();
    f.offset = f.normal.dot(points[a]);
    if (f.normal.dot(interior) - f.offset > 0) {
      std::swap(f.v[1], f.v[2]);
      f.normal = -f.normal;
      f.offset = -f.offset;
    }
    const int id = static_cast<int>(faces.size());
    faces.push_back(f);
    for (int k = 0; k < 3; ++k) edge_owner[{f.v[k], f.v[(k + 1) % 3]}] = id;
  };

  add_face(i0, i1, i2);
  add_face(i0, i1, i3);
  add_face(i0, i2, i3);
  add_face(i1, i2, i3);

  std::vector<int> visible;
  for (int p = 0; p < n; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    visible.clear();
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
      if (faces[f].alive && faces[f].normal.dot(points[p]) - faces[f].offset > eps) visible.push_back(f);
    }
    if (visible.empty()) continue;

    std::vector<std::pair<int, int>> horizon;
    for (int f : visible) faces[f].alive = false;
    for (int f : visible) {
      const auto& v = faces[f].v;
      for (int k = 0; k < 3; ++k) {
        const int a = v[k], b = v[(k + 1) % 3];
        const auto twin = edge_owner.find({b, a});
        if (twin != edge_owner.end() && faces[twin->second].alive) horizon.emplace_back(a, b);
      }
    }
    for (int f : visible) {
      const auto& v = faces[f].v;
      for (int k = 0; k < 3; ++k) edge_owner.erase({v[k], v[(k + 1) % 3]});
    }
    for (const auto& [a, b] : horizon) {
      HullFace f;
      f.v = {a, b, p};
      f.normal = (points[b] - points[a]).cross(points[p] - points[a]).normalized();
      f.offset = f.normal.dot(points[a]);
      const int id = static_cast<int>(faces.size());
      faces.push_back(f);
      edge_owner[{a, b}] = id;
      edge_owner[{b, p}] = id;
      edge_owner[{p, a}] = id;
    }
  }

  std::vector<std::array<int, 3>> out;
  for (const auto& f : faces) {
    if (f.alive) out.push_back(f.v);
  }
  return out;
}

}  // namespace prime
