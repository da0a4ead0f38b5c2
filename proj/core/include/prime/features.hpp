#pragma once

#include "prime/encoder.hpp"
#include "prime/hierarchy.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>

namespace prime {

inline constexpr std::array<int, kLevels> kFeatureDims = {130, 128, 23, 4, 1280};
inline constexpr int kAtomInputDim = 7;
inline constexpr int kSurfaceInputDim = 4;

struct FeatureMatrix {
  int level = 0;
  Matrix data;
};

void validate(const FeatureMatrix& f);

// Encoder inputs: element one-hot (C, N, O, S, P, other) and backbone flag.
Matrix atom_encoder_inputs(const ProteinStructure& structure);
// Encoder inputs: area and the three sorted edge lengths.
Matrix surface_encoder_inputs(std::span<const FaceGeometry> faces);

// Columns: area, distance of the face centroid to the heavy-atom mean, then
// the encoder embedding over the face-centroid kNN graph.
FeatureMatrix surface_features(std::span<const FaceGeometry> faces, const ProteinStructure& structure,
                               const InvariantEncoder& encoder, int knn_k = 8);
FeatureMatrix atom_features(const ProteinStructure& structure, const InvariantEncoder& encoder, int knn_k = 8);
// Amino-acid one-hot, N-CA-C angle, CA curvature, phi (radians).
FeatureMatrix residue_features(const ProteinStructure& structure);
// H/E/L one-hot and segment length over residue count.
FeatureMatrix sse_features(std::span<const SseSegment> segments, int residue_count);

struct EmbeddingSource {
  enum class Kind { File, Stub };
  Kind kind = Kind::Stub;
  std::map<std::string, std::vector<double>> table;  // File mode

  static EmbeddingSource stub() { return {}; }
  static EmbeddingSource from_file(const std::filesystem::path& path);
  static EmbeddingSource from_text(std::string_view text);
};

// Stub mode: a 64-bit FNV-1a hash of the one-letter sequence seeds a
// SplitMix64 stream; value i is 2 * u_i - 1 with u_i the top 53 bits of the
// i-th output scaled to [0, 1).
std::vector<double> stub_embedding(std::string_view sequence, int dim = kFeatureDims[4]);
FeatureMatrix protein_embedding(const ProteinStructure& structure, const EmbeddingSource& source);

std::string format_embedding_line(const std::string& id, std::span<const double> values);

struct Encoders {
  InvariantEncoder surface;
  InvariantEncoder atom;
};

std::array<FeatureMatrix, kLevels> featurize(const ProteinGraph& graph, const Encoders& encoders,
                                             const EmbeddingSource& source, int knn_k = 8);

}  // namespace prime
