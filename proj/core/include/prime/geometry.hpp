#pragma once

#include "prime/structure_io.hpp"
#include "prime/types.hpp"

#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace prime {

// Angle at b formed by a-b-c, radians in [0, pi].
double bond_angle(const Vec3& a, const Vec3& b, const Vec3& c);

// IUPAC dihedral a-b-c-d, radians in (-pi, pi].
double dihedral(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

// Natural-extension reference frame placement: returns d such that
// |cd| = length, angle(b,c,d) = angle and dihedral(a,b,c,d) = torsion.
Vec3 place_atom(const Vec3& a, const Vec3& b, const Vec3& c, double length, double angle, double torsion);

struct RigidMotion {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  static RigidMotion random(std::uint64_t seed, double max_translation = 50.0);
};

void apply(const RigidMotion& motion, ProteinStructure& structure);
void apply(const RigidMotion& motion, SurfaceMesh& mesh);

// Incremental 3D convex hull. Returns outward-oriented triangles indexing
// into `points`. Throws TooFewPoints when the points span no volume.
std::vector<std::array<int, 3>> convex_hull(std::span<const Vec3> points);

}  // namespace prime
