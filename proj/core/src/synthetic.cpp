#include "prime/synthetic.hpp"

#include "prime/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <utility>

namespace prime {
namespace {

constexpr double deg(double d) { return d * std::numbers::pi / 180.0; }

struct SideAtom {
  const char* name;
  Element element;
};

// Up to three stub atoms per residue type.
std::vector<SideAtom> side_chain_stub(AminoAcid aa) {
  switch (aa) {
    case AminoAcid::GLY: return {};
    case AminoAcid::ALA: return {{"CB", Element::C}};
    case AminoAcid::SER: return {{"CB", Element::C}, {"OG", Element::O}};
    case AminoAcid::CYS: return {{"CB", Element::C}, {"SG", Element::S}};
    case AminoAcid::THR: return {{"CB", Element::C}, {"OG1", Element::O}, {"CG2", Element::C}};
    case AminoAcid::VAL: return {{"CB", Element::C}, {"CG1", Element::C}, {"CG2", Element::C}};
    case AminoAcid::MET: return {{"CB", Element::C}, {"CG", Element::C}, {"SD", Element::S}};
    case AminoAcid::ASP:
    case AminoAcid::ASN: return {{"CB", Element::C}, {"CG", Element::C}, {"OD1", Element::O}};
    case AminoAcid::LYS:
    case AminoAcid::ARG: return {{"CB", Element::C}, {"CG", Element::C}, {"CD", Element::C}};
    default: return {{"CB", Element::C}, {"CG", Element::C}, {"CD1", Element::C}};
  }
}

std::pair<double, double> dihedrals_for(SegmentKind kind, std::mt19937_64& rng) {
  switch (kind) {
    case SegmentKind::Helix: return {deg(ideal::kHelixPhi), deg(ideal::kHelixPsi)};
    case SegmentKind::Strand: return {deg(ideal::kStrandPhi), deg(ideal::kStrandPsi)};
    case SegmentKind::Extended: return {deg(180.0), deg(180.0)};
    case SegmentKind::Coil: {
      std::uniform_real_distribution<double> phi(-160.0, -60.0);
      std::uniform_real_distribution<double> psi(60.0, 170.0);
      return {deg(phi(rng)), deg(psi(rng))};
    }
  }
  return {0.0, 0.0};
}

ProteinStructure build_backbone(std::span<const SegmentPlan> plan, std::mt19937_64& rng) {
  std::vector<SegmentKind> kinds;
  for (const auto& seg : plan) kinds.insert(kinds.end(), static_cast<std::size_t>(seg.length), seg.kind);
  const std::size_t n = kinds.size();

  std::vector<double> phi(n), psi(n);
  for (std::size_t i = 0; i < n; ++i) std::tie(phi[i], psi[i]) = dihedrals_for(kinds[i], rng);

  std::vector<Vec3> N(n), CA(n), C(n);
  N[0] = Vec3::Zero();
  CA[0] = Vec3(ideal::kBondNCa, 0.0, 0.0);
  const double a = deg(ideal::kAngleNCaC);
  C[0] = CA[0] + ideal::kBondCaC * Vec3(-std::cos(a), std::sin(a), 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    N[i + 1] = place_atom(N[i], CA[i], C[i], ideal::kBondCN, deg(ideal::kAngleCaCN), psi[i]);
    CA[i + 1] = place_atom(CA[i], C[i], N[i + 1], ideal::kBondNCa, deg(ideal::kAngleCNCa), std::numbers::pi);
    C[i + 1] = place_atom(C[i], N[i + 1], CA[i + 1], ideal::kBondCaC, deg(ideal::kAngleNCaC), phi[i + 1]);
  }

  std::uniform_int_distribution<int> pick_aa(0, kAminoAcids - 1);
  std::normal_distribution<double> jitter(0.0, 0.1);
  std::uniform_real_distribution<double> torsion(-std::numbers::pi, std::numbers::pi);

  ProteinStructure s;
  int serial = 1;
  auto add_atom = [&](int res, const std::string& name, Element e, const Vec3& x) {
    AtomRecord atom;
    atom.serial = serial++;
    atom.element = e;
    atom.atom_name = name;
    atom.residue_index = res;
    atom.chain_id = 'A';
    atom.coords = x;
    atom.is_backbone = is_backbone_name(name);
    s.atoms.push_back(std::move(atom));
  };

  for (std::size_t i = 0; i < n; ++i) {
    AminoAcid aa = static_cast<AminoAcid>(pick_aa(rng));
    // Proline cannot donate a backbone H-bond; keep it out of regular segments.
    while (aa == AminoAcid::PRO && kinds[i] != SegmentKind::Coil) aa = static_cast<AminoAcid>(pick_aa(rng));

    Residue r;
    r.index = static_cast<int>(i);
    r.aa = aa;
    r.name = std::string(three_letter_code(aa));
    r.seq_num = static_cast<int>(i) + 1;
    r.chain_id = 'A';
    s.residues.push_back(r);

    const int ri = static_cast<int>(i);
    // Carbonyl O sits trans to the next N about the CA-C bond.
    const Vec3 next_n = i + 1 < n ? N[i + 1]
                                  : place_atom(N[i], CA[i], C[i], ideal::kBondCN, deg(ideal::kAngleCaCN), psi[i]);
    const Vec3 O = place_atom(next_n, CA[i], C[i], ideal::kBondCO, deg(ideal::kAngleCaCO), std::numbers::pi);
    add_atom(ri, "N", Element::N, N[i]);
    add_atom(ri, "CA", Element::C, CA[i]);
    add_atom(ri, "C", Element::C, C[i]);
    add_atom(ri, "O", Element::O, O);

    Vec3 prev2 = N[i], prev1 = CA[i];
    Vec3 cur = place_atom(C[i], N[i], CA[i], 1.53, deg(110.5), deg(-122.5));
    bool first = true;
    for (const auto& side : side_chain_stub(aa)) {
      if (!first) {
        const Vec3 next = place_atom(prev2, prev1, cur, 1.52, deg(113.0), torsion(rng));
        prev2 = prev1;
        prev1 = cur;
        cur = next;
      }
      first = false;
      const Vec3 jittered = cur + Vec3(jitter(rng), jitter(rng), jitter(rng));
      add_atom(ri, side.name, side.element, jittered);
    }
  }
  reindex_backbone(s);
  return s;
}

std::vector<SegmentPlan> random_plan(int residues, std::mt19937_64& rng) {
  std::vector<SegmentPlan> plan;
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<int> len(4, 10);
  int remaining = residues;
  while (remaining > 0) {
    int l = std::min(len(rng), remaining);
    if (remaining - l < 4) l = remaining;
    SegmentKind k = static_cast<SegmentKind>(kind(rng));
    if (!plan.empty() && plan.back().kind == k) k = static_cast<SegmentKind>((static_cast<int>(k) + 1) % 3);
    plan.push_back({k, l});
    remaining -= l;
  }
  return plan;
}

SurfaceMesh mesh_from_hull(std::vector<Vec3> points) {
  const auto tris = convex_hull(points);
  std::vector<int> remap(points.size(), -1);
  SurfaceMesh mesh;
  for (const auto& t : tris) {
    std::array<int, 3> f{};
    for (int k = 0; k < 3; ++k) {
      int& m = remap[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])];
      if (m < 0) {
        m = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(points[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])]);
      }
      f[static_cast<std::size_t>(k)] = m;
    }
    mesh.faces.push_back(f);
  }
  return mesh;
}

}  // namespace

SurfaceMesh hull_mesh(const ProteinStructure& structure, std::uint64_t seed, double inflate) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> jitter(0.0, 1e-3);
  const Vec3 center = structure.centroid();
  std::vector<Vec3> points;
  points.reserve(structure.atoms.size());
  for (const auto& a : structure.atoms) {
    Vec3 dir = a.coords - center;
    const double len = dir.norm();
    dir = len > 1e-9 ? Vec3(dir / len) : Vec3(1.0, 0.0, 0.0);
    points.push_back(a.coords + inflate * dir + Vec3(jitter(rng), jitter(rng), jitter(rng)));
  }
  return mesh_from_hull(std::move(points));
}

SyntheticProtein gen_synthetic(std::uint64_t seed, std::span<const SegmentPlan> plan) {
  std::mt19937_64 rng(seed);
  SyntheticProtein out;
  out.plan.assign(plan.begin(), plan.end());
  out.structure = build_backbone(plan, rng);
  out.structure.id = "synthetic_" + std::to_string(seed);
  out.mesh = hull_mesh(out.structure, seed);
  return out;
}

SyntheticProtein gen_synthetic(std::uint64_t seed, int residues) {
  if (residues < 3) throw Error(ErrorCode::TooFewPoints, "synthetic proteins need at least 3 residues");
  std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 1);
  const auto plan = random_plan(residues, rng);
  return gen_synthetic(seed, std::span<const SegmentPlan>(plan));
}

SurfaceMesh sphere_mesh(std::uint64_t seed, int points, double radius) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    Vec3 v(normal(rng), normal(rng), normal(rng));
    pts.push_back(radius * v.normalized());
  }
  return mesh_from_hull(std::move(pts));
}

}  // namespace prime
