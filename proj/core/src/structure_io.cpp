#include "prime/structure_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace prime {
namespace {

constexpr std::array<std::string_view, kAminoAcids> kThreeLetter = {
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
    "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL"};
constexpr std::string_view kOneLetter = "ARNDCQEGHILKMFPSTWYV";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// 1-based inclusive PDB column range, clipped to the line length.
std::string_view columns(std::string_view line, std::size_t first, std::size_t last) {
  if (line.size() < first) return {};
  return line.substr(first - 1, std::min(last, line.size()) - first + 1);
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  field = trim(field);
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + why);
}

Element classify_element(std::string_view symbol) {
  if (symbol == "C") return Element::C;
  if (symbol == "N") return Element::N;
  if (symbol == "O") return Element::O;
  if (symbol == "S") return Element::S;
  if (symbol == "P") return Element::P;
  return Element::Other;
}

std::string_view element_symbol(Element e) {
  switch (e) {
    case Element::C: return "C";
    case Element::N: return "N";
    case Element::O: return "O";
    case Element::S: return "S";
    case Element::P: return "P";
    case Element::Other: return "X";
  }
  return "X";
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

AminoAcid amino_acid_from_code(std::string_view three_letter) {
  const std::string code = upper(trim(three_letter));
  for (std::size_t i = 0; i < kThreeLetter.size(); ++i) {
    if (kThreeLetter[i] == code) return static_cast<AminoAcid>(i);
  }
  return AminoAcid::Unknown;
}

std::string_view three_letter_code(AminoAcid aa) {
  if (aa == AminoAcid::Unknown) return "UNK";
  return kThreeLetter[static_cast<std::size_t>(aa)];
}

char one_letter_code(AminoAcid aa) {
  if (aa == AminoAcid::Unknown) return 'X';
  return kOneLetter[static_cast<std::size_t>(aa)];
}

bool is_backbone_name(std::string_view atom_name) {
  return atom_name == "N" || atom_name == "CA" || atom_name == "C" || atom_name == "O";
}

std::string ProteinStructure::sequence() const {
  std::string seq;
  seq.reserve(residues.size());
  for (const auto& r : residues) seq.push_back(one_letter_code(r.aa));
  return seq;
}

Vec3 ProteinStructure::centroid() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& a : atoms) sum += a.coords;
  return atoms.empty() ? sum : Vec3(sum / static_cast<double>(atoms.size()));
}

void reindex_backbone(ProteinStructure& structure) {
  for (auto& r : structure.residues) r.n_idx = r.ca_idx = r.c_idx = r.o_idx = std::nullopt;
  for (std::size_t i = 0; i < structure.atoms.size(); ++i) {
    const auto& a = structure.atoms[i];
    auto& r = structure.residues.at(static_cast<std::size_t>(a.residue_index));
    const int idx = static_cast<int>(i);
    if (a.atom_name == "N" && !r.n_idx) r.n_idx = idx;
    if (a.atom_name == "CA" && !r.ca_idx) r.ca_idx = idx;
    if (a.atom_name == "C" && !r.c_idx) r.c_idx = idx;
    if (a.atom_name == "O" && !r.o_idx) r.o_idx = idx;
  }
}

ProteinStructure parse_pdb(std::string_view text, std::string id) {
  ProteinStructure out;
  out.id = std::move(id);

  struct ResidueKey {
    char chain;
    int seq;
    char icode;
    bool operator==(const ResidueKey&) const = default;
  };
  std::optional<ResidueKey> current;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const std::string_view record = columns(line, 1, 6);
    if (record.starts_with("ENDMDL")) break;
    if (record != "ATOM  " && trim(record) != "ATOM") continue;

    if (line.size() < 54) malformed(line_no, "ATOM record shorter than 54 columns");

    AtomRecord atom;
    if (!parse_number(columns(line, 7, 11), atom.serial)) malformed(line_no, "bad serial number");
    atom.atom_name = std::string(trim(columns(line, 13, 16)));
    if (atom.atom_name.empty()) malformed(line_no, "empty atom name");

    const char altloc = line[16];
    if (altloc != ' ' && altloc != 'A' && altloc != '1') continue;

    const std::string_view res_name = trim(columns(line, 18, 20));
    atom.chain_id = line[21];
    int seq = 0;
    if (!parse_number(columns(line, 23, 26), seq)) malformed(line_no, "bad residue sequence number");
    const char icode = line.size() >= 27 ? line[26] : ' ';

    double x = 0, y = 0, z = 0;
    if (!parse_number(columns(line, 31, 38), x) || !parse_number(columns(line, 39, 46), y) ||
        !parse_number(columns(line, 47, 54), z)) {
      malformed(line_no, "unparseable coordinates");
    }
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      malformed(line_no, "non-finite coordinates");
    }
    atom.coords = Vec3(x, y, z);

    std::string symbol = upper(trim(columns(line, 77, 78)));
    if (symbol.empty()) {
      auto it = std::find_if(atom.atom_name.begin(), atom.atom_name.end(),
                             [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
      if (it == atom.atom_name.end()) malformed(line_no, "cannot infer element");
      symbol = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(*it))));
    }
    if (symbol == "H" || symbol == "D") continue;
    atom.element = classify_element(symbol);
    atom.is_backbone = is_backbone_name(atom.atom_name);

    const ResidueKey key{atom.chain_id, seq, icode};
    if (!current || !(*current == key)) {
      Residue r;
      r.index = static_cast<int>(out.residues.size());
      r.name = std::string(res_name);
      r.aa = amino_acid_from_code(res_name);
      r.seq_num = seq;
      r.insertion_code = icode;
      r.chain_id = atom.chain_id;
      out.residues.push_back(std::move(r));
      current = key;
    }
    atom.residue_index = static_cast<int>(out.residues.size()) - 1;
    out.atoms.push_back(std::move(atom));
  }

  if (out.atoms.empty()) throw Error(ErrorCode::EmptyStructure, "no heavy-atom ATOM records");
  reindex_backbone(out);
  return out;
}

std::string write_pdb(const ProteinStructure& structure) {
  std::string out;
  char buf[96];
  for (const auto& a : structure.atoms) {
    const Residue& r = structure.residues.at(static_cast<std::size_t>(a.residue_index));
    std::string name = a.atom_name;
    if (name.size() < 4) name = " " + name;
    const std::string res_name = r.name.empty() ? std::string(three_letter_code(r.aa)) : r.name;
    std::snprintf(buf, sizeof(buf), "ATOM  %5d %-4.4s %3.3s %c%4d%c   %8.3f%8.3f%8.3f%6.2f%6.2f          %2.2s\n",
                  a.serial % 100000, name.c_str(), res_name.c_str(), a.chain_id, r.seq_num,
                  r.insertion_code, a.coords.x(), a.coords.y(), a.coords.z(), 1.0, 0.0,
                  std::string(element_symbol(a.element)).c_str());
    out += buf;
  }
  out += "END\n";
  return out;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

namespace {

bool degenerate_face(const SurfaceMesh& mesh, const std::array<int, 3>& f) {
  if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) return true;
  const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
  const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
  const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
  const double area = triangle_area(a, b, c);
  const double scale = std::max({(b - a).squaredNorm(), (c - b).squaredNorm(), (a - c).squaredNorm()});
  return !(area > 1e-12 * scale) || !std::isfinite(area);
}

}  // namespace

MeshParseResult parse_mesh(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string token;

  // Tokenise while skipping '#' comments.
  auto next = [&](std::string& tok) -> bool {
    while (in >> tok) {
      if (tok.front() == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return true;
    }
    return false;
  };

  if (!next(token) || token != "OFF") throw Error(ErrorCode::MalformedHeader, "missing OFF header token");

  auto read_count = [&](const char* what) -> long long {
    std::string tok;
    long long v = 0;
    if (!next(tok) || !parse_number(tok, v) || v < 0) {
      throw Error(ErrorCode::MalformedHeader, std::string("bad ") + what + " count");
    }
    return v;
  };
  const long long nv = read_count("vertex");
  const long long nf = read_count("face");
  read_count("edge");
  // The header cannot promise more elements than the text could hold.
  if (static_cast<std::size_t>(nv) > text.size() || static_cast<std::size_t>(nf) > text.size()) {
    throw Error(ErrorCode::MalformedHeader, "counts exceed input size");
  }

  MeshParseResult result;
  auto& mesh = result.mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nv));
  for (long long i = 0; i < nv; ++i) {
    Vec3 v;
    for (int k = 0; k < 3; ++k) {
      std::string tok;
      double x = 0;
      if (!next(tok) || !parse_number(tok, x) || !std::isfinite(x)) {
        throw Error(ErrorCode::MalformedRecord, "vertex " + std::to_string(i) + ": bad coordinate");
      }
      v[k] = x;
    }
    mesh.vertices.push_back(v);
  }
  for (long long i = 0; i < nf; ++i) {
    std::string tok;
    int arity = 0;
    if (!next(tok) || !parse_number(tok, arity) || arity != 3) {
      throw Error(ErrorCode::MalformedRecord, "face " + std::to_string(i) + ": expected a triangle");
    }
    std::array<int, 3> f{};
    for (int k = 0; k < 3; ++k) {
      long long idx = 0;
      if (!next(tok) || !parse_number(tok, idx)) {
        throw Error(ErrorCode::MalformedRecord, "face " + std::to_string(i) + ": bad vertex index");
      }
      if (idx < 0 || idx >= nv) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "face " + std::to_string(i) + " refers to vertex " + std::to_string(idx));
      }
      f[static_cast<std::size_t>(k)] = static_cast<int>(idx);
    }
    if (degenerate_face(mesh, f)) {
      ++result.dropped_degenerate;
      continue;
    }
    mesh.faces.push_back(f);
  }
  return result;
}

std::string write_off(const SurfaceMesh& mesh) {
  std::string out = "OFF\n" + std::to_string(mesh.vertices.size()) + " " +
                    std::to_string(mesh.faces.size()) + " 0\n";
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out += buf;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(buf, sizeof(buf), "3 %d %d %d\n", f[0], f[1], f[2]);
    out += buf;
  }
  return out;
}

void validate(const ProteinStructure& s) {
  if (s.atoms.empty()) throw Error(ErrorCode::EmptyStructure, s.id + ": no atoms");
  std::vector<int> owned(s.residues.size(), 0);
  for (const auto& a : s.atoms) {
    if (!a.coords.allFinite()) throw Error(ErrorCode::MalformedRecord, s.id + ": non-finite coordinates");
    if (a.residue_index < 0 || static_cast<std::size_t>(a.residue_index) >= s.residues.size()) {
      throw Error(ErrorCode::IndexOutOfRange, s.id + ": atom residue index out of range");
    }
    if (a.is_backbone != is_backbone_name(a.atom_name)) {
      throw Error(ErrorCode::MalformedRecord, s.id + ": backbone flag disagrees with atom name");
    }
    ++owned[static_cast<std::size_t>(a.residue_index)];
  }
  for (std::size_t r = 0; r < s.residues.size(); ++r) {
    const Residue& res = s.residues[r];
    if (res.index != static_cast<int>(r)) throw Error(ErrorCode::MalformedRecord, s.id + ": residue index not dense");
    if (owned[r] == 0) throw Error(ErrorCode::EmptyStructure, s.id + ": residue owns no atoms");
    for (const auto& idx : {res.n_idx, res.ca_idx, res.c_idx, res.o_idx}) {
      if (idx && s.atoms.at(static_cast<std::size_t>(*idx)).residue_index != static_cast<int>(r)) {
        throw Error(ErrorCode::MalformedRecord, s.id + ": backbone index points into another residue");
      }
    }
  }
}

void validate(const SurfaceMesh& mesh) {
  for (const auto& v : mesh.vertices) {
    if (!v.allFinite()) throw Error(ErrorCode::MalformedRecord, "non-finite mesh vertex");
  }
  const int nv = static_cast<int>(mesh.vertices.size());
  for (const auto& f : mesh.faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= nv) throw Error(ErrorCode::IndexOutOfRange, "face vertex index out of range");
    }
    if (degenerate_face(mesh, f)) throw Error(ErrorCode::MalformedRecord, "degenerate face");
  }
}

namespace {
std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FormatError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string stem(const std::string& path) {
  const auto slash = path.find_last_of('/');
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}
}  // namespace

ProteinStructure read_pdb_file(const std::string& path) { return parse_pdb(slurp(path), stem(path)); }

MeshParseResult read_mesh_file(const std::string& path) { return parse_mesh(slurp(path)); }

}  // namespace prime
