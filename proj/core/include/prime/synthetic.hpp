#pragma once

#include "prime/structure_io.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace prime {

enum class SegmentKind { Helix, Strand, Coil, Extended };

struct SegmentPlan {
  SegmentKind kind;
  int length;
};

struct SyntheticProtein {
  ProteinStructure structure;
  SurfaceMesh mesh;
  std::vector<SegmentPlan> plan;
};

// Ideal backbone geometry used by the generator.
namespace ideal {
inline constexpr double kBondNCa = 1.458;
inline constexpr double kBondCaC = 1.525;
inline constexpr double kBondCN = 1.329;
inline constexpr double kBondCO = 1.231;
inline constexpr double kAngleNCaC = 111.2;
inline constexpr double kAngleCaCN = 116.2;
inline constexpr double kAngleCNCa = 121.7;
inline constexpr double kAngleCaCO = 120.5;
inline constexpr double kHelixPhi = -57.0, kHelixPsi = -47.0;
inline constexpr double kStrandPhi = -119.0, kStrandPsi = 113.0;
}  // namespace ideal

// Random mix of helix, strand and coil segments (each >= 4 residues when
// the chain allows it). Deterministic in seed.
SyntheticProtein gen_synthetic(std::uint64_t seed, int residues);

// Same generator driven by an explicit segment plan.
SyntheticProtein gen_synthetic(std::uint64_t seed, std::span<const SegmentPlan> plan);

// Convex hull of atom positions pushed outward from the centroid.
SurfaceMesh hull_mesh(const ProteinStructure& structure, std::uint64_t seed, double inflate = 1.6);

// Triangulated convex hull of `points` random points on a sphere; yields
// exactly 2*points - 4 faces.
SurfaceMesh sphere_mesh(std::uint64_t seed, int points, double radius);

}  // namespace prime
