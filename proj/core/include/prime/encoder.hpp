#pragma once

#include "prime/nn.hpp"
#include "prime/surface_graph.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace prime {

// Directed edge list of a graph plus the scatter operator that sums edge
// messages into their source node.
struct EncoderGraph {
  int nodes = 0;
  std::vector<int> src;
  std::vector<int> dst;
  std::shared_ptr<const ad::SparseOperator> scatter;  // nodes x edges

  static EncoderGraph from_adjacency(const SparseAdjacency& a);
  std::size_t edge_count() const { return src.size(); }
};

struct EncoderConfig {
  int input_dim = 7;
  int hidden = 128;
  int depth = 3;
  // Coordinates are divided by this length before distances are formed.
  double length_scale = 4.0;
};

// Scalar-message network in the EGNN family. Per layer:
//   m_ij = phi_e(h_i, h_j, |x_i - x_j|^2, a_ij),  m_i = sum_j m_ij,
//   h_i <- h_i + phi_h(h_i, m_i)
// with a_ij the Euclidean distance. Coordinates enter only through pairwise
// distances, so the output is invariant to rigid motions.
class InvariantEncoder {
 public:
  InvariantEncoder() = default;
  InvariantEncoder(EncoderConfig config, std::uint64_t seed);

  // node_inputs: n x input_dim, coords: n x 3.
  ad::Tensor forward(const Matrix& node_inputs, const Matrix& coords, const EncoderGraph& graph) const;

  const EncoderConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Rebuilds the encoder around a stored parameter set.
  static InvariantEncoder from_params(EncoderConfig config, ParamStore params);

 private:
  struct LayerRefs {
    Linear edge_self, edge_other, edge_geom, edge_out, node_hidden, node_out;
  };
  void bind();

  EncoderConfig config_;
  ParamStore params_;
  Linear embed_;
  std::vector<LayerRefs> layers_;
};

// Three-layer SiLU perceptron hidden -> hidden -> hidden -> 3.
class DecoderHead {
 public:
  DecoderHead() = default;
  DecoderHead(int input_dim, int hidden, std::uint64_t seed);

  ad::Tensor forward(const ad::Tensor& z) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  ParamStore params_;
  Linear l1_, l2_, l3_;
};

Matrix coords_matrix(std::span<const Vec3> points);

}  // namespace prime
