#include "prime/features.hpp"

#include "prime/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace prime {

void validate(const FeatureMatrix& f) {
  if (f.level < 0 || f.level >= kLevels) throw Error(ErrorCode::IndexOutOfRange, "feature level out of range");
  if (f.data.cols() != kFeatureDims[static_cast<std::size_t>(f.level)]) {
    throw Error(ErrorCode::DimensionMismatch, std::string(level_name(f.level)) + " features have " +
                                                  std::to_string(f.data.cols()) + " columns, expected " +
                                                  std::to_string(kFeatureDims[static_cast<std::size_t>(f.level)]));
  }
  if (!f.data.allFinite()) throw Error(ErrorCode::DimensionMismatch, "non-finite feature value");
}

Matrix atom_encoder_inputs(const ProteinStructure& structure) {
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(structure.atoms.size()), kAtomInputDim);
  for (std::size_t i = 0; i < structure.atoms.size(); ++i) {
    const auto& a = structure.atoms[i];
    x(static_cast<Eigen::Index>(i), static_cast<int>(a.element)) = 1.0;
    x(static_cast<Eigen::Index>(i), kElementClasses) = a.is_backbone ? 1.0 : 0.0;
  }
  return x;
}

Matrix surface_encoder_inputs(std::span<const FaceGeometry> faces) {
  Matrix x(static_cast<Eigen::Index>(faces.size()), kSurfaceInputDim);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = faces[i].area;
    x.block(r, 1, 1, 3) = faces[i].sorted_edge_lengths.transpose();
  }
  return x;
}

namespace {

Matrix run_encoder(const InvariantEncoder& encoder, const Matrix& inputs, std::span<const Vec3> points, int knn_k) {
  // A single node has no neighbours.
  const SparseAdjacency graph =
      points.size() < 2 ? SparseAdjacency{static_cast<int>(points.size()), {}} : knn_graph(points, knn_k);
  const EncoderGraph eg = EncoderGraph::from_adjacency(graph);
  ad::NoGradGuard no_grad;
  return encoder.forward(inputs, coords_matrix(points), eg).value();
}

}  // namespace

FeatureMatrix surface_features(std::span<const FaceGeometry> faces, const ProteinStructure& structure,
                               const InvariantEncoder& encoder, int knn_k) {
  if (encoder.config().input_dim != kSurfaceInputDim || encoder.config().hidden != kFeatureDims[0] - 2) {
    throw Error(ErrorCode::ShapeMismatch, "surface encoder must map " + std::to_string(kSurfaceInputDim) + " -> " +
                                              std::to_string(kFeatureDims[0] - 2));
  }
  if (structure.atoms.empty()) throw Error(ErrorCode::NoAtoms, "surface features need heavy atoms");
  const Vec3 center = structure.centroid();
  std::vector<Vec3> centroids;
  centroids.reserve(faces.size());
  for (const auto& f : faces) centroids.push_back(f.centroid);

  FeatureMatrix out{0, Matrix(static_cast<Eigen::Index>(faces.size()), kFeatureDims[0])};
  for (std::size_t i = 0; i < faces.size(); ++i) {
    out.data(static_cast<Eigen::Index>(i), 0) = faces[i].area;
    out.data(static_cast<Eigen::Index>(i), 1) = (faces[i].centroid - center).norm();
  }
  out.data.rightCols(kFeatureDims[0] - 2) = run_encoder(encoder, surface_encoder_inputs(faces), centroids, knn_k);
  return out;
}

FeatureMatrix atom_features(const ProteinStructure& structure, const InvariantEncoder& encoder, int knn_k) {
  if (encoder.config().input_dim != kAtomInputDim || encoder.config().hidden != kFeatureDims[1]) {
    throw Error(ErrorCode::ShapeMismatch, "atom encoder must map " + std::to_string(kAtomInputDim) + " -> " +
                                              std::to_string(kFeatureDims[1]));
  }
  std::vector<Vec3> coords;
  coords.reserve(structure.atoms.size());
  for (const auto& a : structure.atoms) coords.push_back(a.coords);
  return {1, run_encoder(encoder, atom_encoder_inputs(structure), coords, knn_k)};
}

FeatureMatrix residue_features(const ProteinStructure& structure) {
  const int n = static_cast<int>(structure.residues.size());
  FeatureMatrix out{2, Matrix::Zero(n, kFeatureDims[2])};
  const std::vector<bool> breaks = chain_breaks(structure);
  auto pos = [&](const std::optional<int>& idx) { return structure.atoms[static_cast<std::size_t>(*idx)].coords; };

  for (int i = 0; i < n; ++i) {
    const Residue& r = structure.residues[static_cast<std::size_t>(i)];
    if (r.aa != AminoAcid::Unknown) out.data(i, static_cast<int>(r.aa)) = 1.0;
    if (r.n_idx && r.ca_idx && r.c_idx) out.data(i, 20) = bond_angle(pos(r.n_idx), pos(r.ca_idx), pos(r.c_idx));

    const bool has_prev = i > 0 && !breaks[static_cast<std::size_t>(i - 1)];
    const bool has_next = i + 1 < n && !breaks[static_cast<std::size_t>(i)];
    if (has_prev && has_next) {
      const Residue& p = structure.residues[static_cast<std::size_t>(i - 1)];
      const Residue& q = structure.residues[static_cast<std::size_t>(i + 1)];
      if (p.ca_idx && r.ca_idx && q.ca_idx) {
        out.data(i, 21) = std::numbers::pi - bond_angle(pos(p.ca_idx), pos(r.ca_idx), pos(q.ca_idx));
      }
    }
    if (has_prev) {
      const Residue& p = structure.residues[static_cast<std::size_t>(i - 1)];
      if (p.c_idx && r.n_idx && r.ca_idx && r.c_idx) {
        out.data(i, 22) = dihedral(pos(p.c_idx), pos(r.n_idx), pos(r.ca_idx), pos(r.c_idx));
      }
    }
  }
  return out;
}

FeatureMatrix sse_features(std::span<const SseSegment> segments, int residue_count) {
  FeatureMatrix out{3, Matrix::Zero(static_cast<Eigen::Index>(segments.size()), kFeatureDims[3])};
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto r = static_cast<Eigen::Index>(s);
    out.data(r, static_cast<int>(segments[s].label)) = 1.0;
    out.data(r, 3) = static_cast<double>(segments[s].length()) / residue_count;
  }
  return out;
}

namespace {

std::uint64_t splitmix_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<double> stub_embedding(std::string_view sequence, int dim) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : sequence) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (auto& x : v) x = 2.0 * (static_cast<double>(splitmix_next(h) >> 11) * 0x1.0p-53) - 1.0;
  return v;
}

EmbeddingSource EmbeddingSource::from_text(std::string_view text) {
  EmbeddingSource src;
  src.kind = Kind::File;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string id;
    fields >> id;
    std::vector<double> values;
    std::string tok;
    while (fields >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::MalformedRecord, "embedding line " + std::to_string(line_no) + ": bad value '" + tok + "'");
      }
      values.push_back(v);
    }
    if (static_cast<int>(values.size()) != kFeatureDims[4]) {
      throw Error(ErrorCode::DimensionMismatch, "embedding line " + std::to_string(line_no) + " for '" + id + "' has " +
                                                    std::to_string(values.size()) + " values, expected " +
                                                    std::to_string(kFeatureDims[4]));
    }
    src.table[id] = std::move(values);
  }
  return src;
}

EmbeddingSource EmbeddingSource::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FormatError, "cannot open embedding file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

FeatureMatrix protein_embedding(const ProteinStructure& structure, const EmbeddingSource& source) {
  FeatureMatrix out{4, Matrix(1, kFeatureDims[4])};
  std::vector<double> values;
  if (source.kind == EmbeddingSource::Kind::Stub) {
    values = stub_embedding(structure.sequence());
  } else {
    const auto it = source.table.find(structure.id);
    if (it == source.table.end()) throw Error(ErrorCode::MissingEmbedding, "no embedding for '" + structure.id + "'");
    values = it->second;
  }
  if (static_cast<int>(values.size()) != kFeatureDims[4]) {
    throw Error(ErrorCode::DimensionMismatch, "embedding has " + std::to_string(values.size()) + " values");
  }
  for (int i = 0; i < kFeatureDims[4]; ++i) out.data(0, i) = values[static_cast<std::size_t>(i)];
  return out;
}

std::string format_embedding_line(const std::string& id, std::span<const double> values) {
  std::string line = id;
  char buf[32];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, " %.17g", v);
    line += buf;
  }
  return line;
}

std::array<FeatureMatrix, kLevels> featurize(const ProteinGraph& graph, const Encoders& encoders,
                                             const EmbeddingSource& source, int knn_k) {
  std::array<FeatureMatrix, kLevels> out{
      surface_features(graph.faces, graph.structure, encoders.surface, knn_k),
      atom_features(graph.atoms, encoders.atom, knn_k),
      residue_features(graph.structure),
      sse_features(graph.segments, static_cast<int>(graph.structure.residues.size())),
      protein_embedding(graph.structure, source),
  };
  for (const auto& f : out) validate(f);
  return out;
}

}  // namespace prime
