#include "testkit.hpp"

#include "prime/structure_io.hpp"
#include "prime/synthetic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace prime;

namespace {

ProteinStructure tiny() { return read_pdb_file(testkit::fixture("tiny_peptide.pdb").string()); }

std::string atom_line(int serial, const char* name, const char* res, int seq, double x, double y, double z,
                      const char* element) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "ATOM  %5d %-4s %3s A%4d    %8.3f%8.3f%8.3f  1.00  0.00          %2s", serial, name, res,
                seq, x, y, z, element);
  return buf;
}

}  // namespace

TEST(Pdb, ParsesFixtureFirstModelHeavyAtoms) {
  const ProteinStructure s = tiny();
  EXPECT_EQ(s.residue_count(), 5u);
  EXPECT_EQ(s.atoms.size(), 34u);
  EXPECT_EQ(s.sequence(), "SMQFD");
  for (const auto& r : s.residues) EXPECT_TRUE(r.has_full_backbone());
  for (const auto& a : s.atoms) EXPECT_NE(a.atom_name, "HA");
}

TEST(Pdb, KeepsFirstAlternateLocation) {
  const ProteinStructure s = tiny();
  int cb = 0;
  for (const auto& a : s.atoms) {
    if (a.residue_index == 1 && a.atom_name == "CB") {
      ++cb;
      EXPECT_DOUBLE_EQ(a.coords.x(), 3.928);
    }
  }
  EXPECT_EQ(cb, 1);
}

TEST(Pdb, BackboneFlagsAndElements) {
  const ProteinStructure s = tiny();
  for (const auto& a : s.atoms) EXPECT_EQ(a.is_backbone, is_backbone_name(a.atom_name)) << a.atom_name;
  EXPECT_EQ(s.atoms[0].element, Element::N);
  EXPECT_EQ(s.atoms[1].element, Element::C);
  EXPECT_TRUE(is_backbone_name("CA"));
  EXPECT_FALSE(is_backbone_name("CB"));
}

TEST(Pdb, WriteParseRoundTrip) {
  const SyntheticProtein p = gen_synthetic(11, 12);
  const ProteinStructure back = parse_pdb(write_pdb(p.structure), "x");
  ASSERT_EQ(back.atoms.size(), p.structure.atoms.size());
  ASSERT_EQ(back.residue_count(), p.structure.residue_count());
  EXPECT_EQ(back.sequence(), p.structure.sequence());
  for (std::size_t i = 0; i < back.atoms.size(); ++i) {
    EXPECT_LT((back.atoms[i].coords - p.structure.atoms[i].coords).norm(), 1e-3);
    EXPECT_EQ(back.atoms[i].atom_name, p.structure.atoms[i].atom_name);
  }
}

TEST(Pdb, EmptyInputIsAnError) {
  try {
    parse_pdb("REMARK nothing here\nEND\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyStructure);
  }
}

TEST(Pdb, MalformedCoordinateIsAnError) {
  std::string line = atom_line(1, "N", "ALA", 1, 0, 0, 0, "N");
  line.replace(32, 4, "x.yz");
  try {
    parse_pdb(line + "\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRecord);
  }
}

TEST(Pdb, UnknownResidueMapsToX) {
  const std::string text = atom_line(1, "N", "ALA", 1, 0, 0, 0, "N") + "\n" + atom_line(2, "CA", "ZZZ", 2, 1, 0, 0, "C") + "\n";
  const ProteinStructure s = parse_pdb(text);
  EXPECT_EQ(s.sequence(), "AX");
  EXPECT_EQ(s.residues[1].aa, AminoAcid::Unknown);
}

TEST(Pdb, AminoAcidCodes) {
  EXPECT_EQ(amino_acid_from_code("TRP"), AminoAcid::TRP);
  EXPECT_EQ(one_letter_code(AminoAcid::TRP), 'W');
  EXPECT_EQ(three_letter_code(AminoAcid::GLY), "GLY");
  EXPECT_EQ(amino_acid_from_code("HOH"), AminoAcid::Unknown);
}

TEST(Pdb, FuzzedInputEitherParsesOrThrowsError) {
  const std::string base = write_pdb(gen_synthetic(3, 6).structure);
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> pos(0, base.size() - 1);
  std::uniform_int_distribution<int> byte(32, 126);
  for (int trial = 0; trial < 300; ++trial) {
    std::string text = base;
    for (int k = 0; k < 1 + trial % 8; ++k) text[pos(rng)] = static_cast<char>(byte(rng));
    if (trial % 5 == 0) text.resize(pos(rng));
    try {
      const ProteinStructure s = parse_pdb(text);
      validate(s);
    } catch (const Error&) {
    }
  }
}

TEST(Mesh, ParsesIcosahedron) {
  const MeshParseResult r = read_mesh_file(testkit::fixture("icosahedron.off").string());
  EXPECT_EQ(r.mesh.vertices.size(), 12u);
  EXPECT_EQ(r.mesh.faces.size(), 20u);
  EXPECT_EQ(r.dropped_degenerate, 0u);
  for (const auto& f : r.mesh.faces) {
    const double a = triangle_area(r.mesh.vertices[f[0]], r.mesh.vertices[f[1]], r.mesh.vertices[f[2]]);
    EXPECT_NEAR(a, std::sqrt(3.0), 1e-12);
  }
}

TEST(Mesh, DropsDegenerateFaces) {
  const MeshParseResult r = parse_mesh("OFF\n4 3 0\n0 0 0\n1 0 0\n0 1 0\n2 0 0\n3 0 1 2\n3 0 0 1\n3 0 1 3\n");
  EXPECT_EQ(r.mesh.faces.size(), 1u);
  EXPECT_EQ(r.dropped_degenerate, 2u);
}

TEST(Mesh, RejectsBadHeaderAndIndices) {
  auto code = [](std::string_view text) {
    try {
      parse_mesh(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::FormatError;
  };
  EXPECT_EQ(code("PLY\n3 1 0\n"), ErrorCode::MalformedHeader);
  EXPECT_EQ(code("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n"), ErrorCode::IndexOutOfRange);
}

TEST(Mesh, WriteParseRoundTrip) {
  const SurfaceMesh m = sphere_mesh(5, 40, 10.0);
  EXPECT_EQ(m.faces.size(), 76u);
  const MeshParseResult back = parse_mesh(write_off(m));
  ASSERT_EQ(back.mesh.faces, m.faces);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) EXPECT_LT((back.mesh.vertices[i] - m.vertices[i]).norm(), 1e-9);
}

TEST(Mesh, FuzzedInputEitherParsesOrThrowsError) {
  const std::string base = write_off(sphere_mesh(2, 12, 3.0));
  std::mt19937_64 rng(98);
  std::uniform_int_distribution<std::size_t> pos(0, base.size() - 1);
  const std::string alphabet = "0123456789 -.\neE#";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  for (int trial = 0; trial < 300; ++trial) {
    std::string text = base;
    for (int k = 0; k < 1 + trial % 6; ++k) text[pos(rng)] = alphabet[pick(rng)];
    try {
      validate(parse_mesh(text).mesh);
    } catch (const Error&) {
    }
  }
}
