#include "prime/encoder.hpp"

#include <cmath>

namespace prime {

EncoderGraph EncoderGraph::from_adjacency(const SparseAdjacency& a) {
  EncoderGraph g;
  g.nodes = a.n;
  std::vector<int> edge_ids;
  std::vector<double> ones;
  for (const auto& e : a.entries) {
    if (e.row == e.col) continue;
    edge_ids.push_back(static_cast<int>(g.src.size()));
    g.src.push_back(e.row);
    g.dst.push_back(e.col);
    ones.push_back(1.0);
  }
  g.scatter = ad::SparseOperator::from_triplets(a.n, static_cast<int>(g.src.size()), g.src, edge_ids, ones);
  return g;
}

Matrix coords_matrix(std::span<const Vec3> points) {
  Matrix m(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return m;
}

InvariantEncoder::InvariantEncoder(EncoderConfig config, std::uint64_t seed) : config_(config) {
  if (config.input_dim < 1 || config.hidden < 1 || config.depth < 0) {
    throw Error(ErrorCode::ConfigError, "encoder dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  const int h = config.hidden;
  make_linear(params_, "embed", config.input_dim, h, true, rng);
  for (int l = 0; l < config.depth; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    make_linear(params_, p + "edge_self", h, h, true, rng);
    make_linear(params_, p + "edge_other", h, h, false, rng);
    make_linear(params_, p + "edge_geom", 2, h, false, rng);
    make_linear(params_, p + "edge_out", h, h, true, rng);
    make_linear(params_, p + "node_hidden", 2 * h, h, true, rng);
    make_linear(params_, p + "node_out", h, h, true, rng);
  }
  bind();
}

InvariantEncoder InvariantEncoder::from_params(EncoderConfig config, ParamStore params) {
  InvariantEncoder enc;
  enc.config_ = config;
  enc.params_ = std::move(params);
  enc.bind();
  return enc;
}

void InvariantEncoder::bind() {
  embed_ = find_linear(params_, "embed");
  if (embed_.weight.rows() != config_.input_dim || embed_.weight.cols() != config_.hidden) {
    throw Error(ErrorCode::ShapeMismatch, "encoder embedding is " + embed_.weight.shape_string());
  }
  layers_.clear();
  for (int l = 0; l < config_.depth; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    layers_.push_back({find_linear(params_, p + "edge_self"), find_linear(params_, p + "edge_other"),
                       find_linear(params_, p + "edge_geom"), find_linear(params_, p + "edge_out"),
                       find_linear(params_, p + "node_hidden"), find_linear(params_, p + "node_out")});
  }
}

ad::Tensor InvariantEncoder::forward(const Matrix& node_inputs, const Matrix& coords, const EncoderGraph& graph) const {
  const Eigen::Index n = node_inputs.rows();
  if (node_inputs.cols() != config_.input_dim || coords.rows() != n || coords.cols() != 3 || graph.nodes != n) {
    throw Error(ErrorCode::ShapeMismatch,
                "encoder inputs [" + std::to_string(n) + " x " + std::to_string(node_inputs.cols()) + "], coords [" +
                    std::to_string(coords.rows()) + " x " + std::to_string(coords.cols()) + "], graph of " +
                    std::to_string(graph.nodes) + " nodes, expected width " + std::to_string(config_.input_dim));
  }

  // Invariant edge inputs: squared distance and distance.
  const double inv = 1.0 / config_.length_scale;
  Matrix geom(static_cast<Eigen::Index>(graph.edge_count()), 2);
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    const double d2 = (coords.row(graph.src[e]) - coords.row(graph.dst[e])).squaredNorm() * inv * inv;
    geom(static_cast<Eigen::Index>(e), 0) = d2;
    geom(static_cast<Eigen::Index>(e), 1) = std::sqrt(d2);
  }
  const ad::Tensor geom_t = ad::Tensor::constant(std::move(geom));

  ad::Tensor h = embed_(ad::Tensor::constant(node_inputs));
  for (const auto& layer : layers_) {
    // phi_e's first linear map splits over [h_i | h_j | geometry], so the
    // node-wise products are formed once and gathered per edge.
    const ad::Tensor self_part = ad::row_select(layer.edge_self(h), graph.src);
    const ad::Tensor other_part = ad::row_select(layer.edge_other(h), graph.dst);
    ad::Tensor m = ad::add(ad::add(self_part, other_part), layer.edge_geom(geom_t));
    m = ad::silu(layer.edge_out(ad::silu(m)));
    const ad::Tensor agg = ad::sparse_dense_matmul(graph.scatter, m);
    const std::vector<ad::Tensor> cat{h, agg};
    const ad::Tensor upd = layer.node_out(ad::silu(layer.node_hidden(ad::concat(cat, 1))));
    h = ad::add(h, upd);
  }
  return h;
}

DecoderHead::DecoderHead(int input_dim, int hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  l1_ = make_linear(params_, "dec1", input_dim, hidden, true, rng);
  l2_ = make_linear(params_, "dec2", hidden, hidden, true, rng);
  l3_ = make_linear(params_, "dec3", hidden, 3, true, rng);
}

ad::Tensor DecoderHead::forward(const ad::Tensor& z) const { return l3_(ad::silu(l2_(ad::silu(l1_(z))))); }

}  // namespace prime
