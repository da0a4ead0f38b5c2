#pragma once

#include "prime/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prime {

enum class Element : std::uint8_t { C, N, O, S, P, Other };
inline constexpr int kElementClasses = 6;

enum class AminoAcid : std::uint8_t {
  ALA, ARG, ASN, ASP, CYS, GLN, GLU, GLY, HIS, ILE,
  LEU, LYS, MET, PHE, PRO, SER, THR, TRP, TYR, VAL,
  Unknown,
};
inline constexpr int kAminoAcids = 20;

AminoAcid amino_acid_from_code(std::string_view three_letter);
std::string_view three_letter_code(AminoAcid aa);
char one_letter_code(AminoAcid aa);

struct AtomRecord {
  int serial = 0;
  Element element = Element::Other;
  std::string atom_name;
  int residue_index = 0;
  char chain_id = ' ';
  Vec3 coords = Vec3::Zero();
  bool is_backbone = false;
};

struct Residue {
  int index = 0;
  AminoAcid aa = AminoAcid::Unknown;
  std::string name;  // three-letter residue name as read
  int seq_num = 0;   // author numbering, kept for round-tripping
  char insertion_code = ' ';
  char chain_id = ' ';
  std::optional<int> n_idx, ca_idx, c_idx, o_idx;

  bool has_full_backbone() const { return n_idx && ca_idx && c_idx && o_idx; }
};

struct ProteinStructure {
  std::string id;
  std::vector<AtomRecord> atoms;
  std::vector<Residue> residues;

  std::size_t residue_count() const { return residues.size(); }
  std::string sequence() const;  // one-letter codes, 'X' for unknown
  Vec3 centroid() const;
};

struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

struct MeshParseResult {
  SurfaceMesh mesh;
  std::size_t dropped_degenerate = 0;
};

bool is_backbone_name(std::string_view atom_name);

// Parses fixed-column PDB text. Only ATOM records of the first MODEL are
// honoured; hydrogens, HETATM and alternate locations other than the first
// are skipped. Residues are densified to 0-based indices in file order.
ProteinStructure parse_pdb(std::string_view text, std::string id = "protein");
std::string write_pdb(const ProteinStructure& structure);

// OFF triangle meshes. Degenerate faces are dropped and counted.
MeshParseResult parse_mesh(std::string_view text);
std::string write_off(const SurfaceMesh& mesh);

// Throws Error if a type invariant is violated.
void validate(const ProteinStructure& structure);
void validate(const SurfaceMesh& mesh);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

// Rebuilds the per-residue backbone indices from atom names; used after any
// operation that reorders or drops atoms.
void reindex_backbone(ProteinStructure& structure);

ProteinStructure read_pdb_file(const std::string& path);
MeshParseResult read_mesh_file(const std::string& path);

}  // namespace prime
