#include "prime/prime_net.hpp"

#include <cmath>
#include <random>

namespace prime {

namespace {

constexpr std::array<std::string_view, 3> kTaskNames = {"multiclass", "multilabel", "node_binary"};
constexpr std::array<std::string_view, 2> kReadoutNames = {"fixed", "cross_attention"};

std::string lvl(int l) { return std::to_string(l); }

std::string layer_prefix(int layer) { return "L" + std::to_string(layer) + "."; }

}  // namespace

std::string_view task_kind_name(TaskKind kind) { return kTaskNames.at(static_cast<std::size_t>(kind)); }

TaskKind task_kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kTaskNames.size(); ++i) {
    if (kTaskNames[i] == name) return static_cast<TaskKind>(i);
  }
  throw Error(ErrorCode::ConfigError, "unknown task_kind '" + std::string(name) + "'");
}

std::string_view readout_kind_name(ReadoutKind kind) { return kReadoutNames.at(static_cast<std::size_t>(kind)); }

ReadoutKind readout_kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kReadoutNames.size(); ++i) {
    if (kReadoutNames[i] == name) return static_cast<ReadoutKind>(i);
  }
  throw Error(ErrorCode::ConfigError, "unknown readout '" + std::string(name) + "'");
}

void validate(const PrimeConfig& c) {
  if (c.hidden < 1 || c.layers < 0 || c.head_hidden < 1 || c.outputs < 1) {
    throw Error(ErrorCode::ConfigError, "model sizes must be positive");
  }
  if (c.dropout < 0.0 || c.dropout >= 1.0) throw Error(ErrorCode::ConfigError, "dropout must be in [0, 1)");
  if (c.readout_level < 0 || c.readout_level >= kLevels) throw Error(ErrorCode::ConfigError, "readout level out of range");
  if (c.readout == ReadoutKind::Fixed && !c.active[static_cast<std::size_t>(c.readout_level)]) {
    throw Error(ErrorCode::ConfigError, "readout level " + std::string(level_name(c.readout_level)) + " is ablated");
  }
  if (c.task == TaskKind::NodeBinary) {
    if (c.readout != ReadoutKind::Fixed) throw Error(ErrorCode::ConfigError, "node tasks need a fixed readout");
    if (c.outputs != 1) throw Error(ErrorCode::ConfigError, "node tasks have exactly one output");
  }
  bool any = false;
  for (bool a : c.active) any = any || a;
  if (!any) throw Error(ErrorCode::ConfigError, "every level is ablated");
}

std::size_t expected_parameter_count(const PrimeConfig& c) {
  const std::size_t d = static_cast<std::size_t>(c.hidden);
  auto linear = [](std::size_t in, std::size_t out, bool bias) { return in * out + (bias ? out : 0); };
  auto norm = [](std::size_t w) { return 2 * w; };
  std::size_t n = 0;
  for (int dim : c.input_dims) n += linear(static_cast<std::size_t>(dim), d, false) + norm(d);
  const std::size_t intra = norm(d) + linear(d, d, true) + linear(d, d, false) + norm(d) + linear(d, 4 * d, true) +
                            linear(4 * d, d, true);
  const std::size_t transition = linear(d, d, false) + linear(2 * d, d, true) + linear(d, d, false) + norm(d);
  n += static_cast<std::size_t>(c.layers) * (kLevels * intra + 2 * (kLevels - 1) * transition);
  const std::size_t hh = static_cast<std::size_t>(c.head_hidden);
  n += linear(d, hh, true) + linear(hh, hh, true) + linear(hh, static_cast<std::size_t>(c.outputs), true);
  if (c.readout == ReadoutKind::CrossAttention) n += d + 2 * linear(d, d, false);
  return n;
}

PreparedGraph prepare_graph(const Hierarchy& hierarchy, std::array<Matrix, kLevels> features, std::string id) {
  validate(hierarchy);
  PreparedGraph g;
  g.id = std::move(id);
  g.counts = hierarchy.node_counts();
  for (int l = 0; l < kLevels; ++l) {
    const auto& lg = hierarchy.graphs[static_cast<std::size_t>(l)];
    g.adjacency[static_cast<std::size_t>(l)] = ad::SparseOperator::from_adjacency(lg.normalized);
    if (features[static_cast<std::size_t>(l)].rows() != lg.node_count()) {
      throw Error(ErrorCode::ShapeMismatch, std::string(level_name(l)) + " features have " +
                                                std::to_string(features[static_cast<std::size_t>(l)].rows()) +
                                                " rows for " + std::to_string(lg.node_count()) + " nodes");
    }
  }
  for (int l = 1; l < kLevels; ++l) {
    g.aggregate[static_cast<std::size_t>(l - 1)] = ad::SparseOperator::aggregate(hierarchy.partition_into(l));
    g.broadcast[static_cast<std::size_t>(l - 1)] = ad::SparseOperator::broadcast(hierarchy.partition_into(l));
  }
  g.surface_nnz = hierarchy.graphs[0].adjacency.nnz();
  g.features = std::move(features);
  return g;
}

ad::Tensor gated_fusion(const FusionParams& p, const ad::Tensor& z, const ad::Tensor& c, double dropout,
                        ForwardContext& ctx) {
  if (z.rows() != c.rows() || z.cols() != c.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "gated_fusion: z " + z.shape_string() + " vs c " + c.shape_string());
  }
  const std::vector<ad::Tensor> zc{z, c};
  const ad::Tensor g = ad::sigmoid(p.gate(ad::concat(zc, 1)));
  const ad::Tensor u = ad::dropout(p.update(c), dropout, ctx.train, ctx.next_key());
  return p.norm(ad::add(z, ad::elementwise_mul(g, u)));
}

PrimeModel::PrimeModel(PrimeConfig config, std::uint64_t seed) : config_(config) {
  validate(config_);
  std::mt19937_64 rng(seed);
  const int d = config_.hidden;
  for (int l = 0; l < kLevels; ++l) {
    make_linear(params_, "in." + lvl(l), config_.input_dims[static_cast<std::size_t>(l)], d, false, rng);
    make_layer_norm(params_, "in." + lvl(l) + ".ln", d);
  }
  for (int n = 0; n < config_.layers; ++n) {
    const std::string p = layer_prefix(n);
    for (int l = 0; l < kLevels; ++l) {
      const std::string q = p + "intra." + lvl(l) + ".";
      make_layer_norm(params_, q + "ln1", d);
      make_linear(params_, q + "self", d, d, true, rng);
      make_linear(params_, q + "neigh", d, d, false, rng);
      make_layer_norm(params_, q + "ln2", d);
      make_linear(params_, q + "ffn_in", d, 4 * d, true, rng);
      make_linear(params_, q + "ffn_out", 4 * d, d, true, rng);
    }
    for (const char* dir : {"up.", "down."}) {
      for (int l = 1; l < kLevels; ++l) {
        const std::string q = p + dir + lvl(l) + ".";
        make_linear(params_, q + "proj", d, d, false, rng);
        make_linear(params_, q + "gate", 2 * d, d, true, rng);
        make_linear(params_, q + "update", d, d, false, rng);
        make_layer_norm(params_, q + "ln", d);
      }
    }
  }
  if (config_.readout == ReadoutKind::CrossAttention) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
    Matrix q(1, d);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = normal(rng);
    params_.add("attn.query", std::move(q));
    make_linear(params_, "attn.key", d, d, false, rng);
    make_linear(params_, "attn.value", d, d, false, rng);
  }
  make_linear(params_, "head.fc1", d, config_.head_hidden, true, rng);
  make_linear(params_, "head.fc2", config_.head_hidden, config_.head_hidden, true, rng);
  make_linear(params_, "head.fc3", config_.head_hidden, config_.outputs, true, rng);
}

PrimeModel PrimeModel::from_params(PrimeConfig config, ParamStore params) {
  validate(config);
  PrimeModel m;
  m.config_ = config;
  m.params_ = std::move(params);
  if (m.params_.scalar_count() != expected_parameter_count(config)) {
    throw Error(ErrorCode::ShapeMismatch, "parameter set has " + std::to_string(m.params_.scalar_count()) +
                                              " scalars, configuration implies " +
                                              std::to_string(expected_parameter_count(config)));
  }
  return m;
}

FusionParams PrimeModel::fusion(int layer, int level, bool upward) const {
  const std::string q = layer_prefix(layer) + (upward ? "up." : "down.") + lvl(level) + ".";
  return {find_linear(params_, q + "gate"), find_linear(params_, q + "update"), find_layer_norm(params_, q + "ln")};
}

IntraParams PrimeModel::intra(int layer, int level) const {
  const std::string q = layer_prefix(layer) + "intra." + lvl(level) + ".";
  return {find_layer_norm(params_, q + "ln1"), find_linear(params_, q + "self"),   find_linear(params_, q + "neigh"),
          find_layer_norm(params_, q + "ln2"), find_linear(params_, q + "ffn_in"), find_linear(params_, q + "ffn_out")};
}

LevelStates PrimeModel::input_project(std::span<const ad::Tensor> features, ForwardContext&) const {
  if (features.size() != kLevels) throw Error(ErrorCode::DimensionMismatch, "expected five feature matrices");
  LevelStates h;
  for (int l = 0; l < kLevels; ++l) {
    if (!config_.active[static_cast<std::size_t>(l)]) continue;
    const ad::Tensor& z = features[static_cast<std::size_t>(l)];
    if (z.cols() != config_.input_dims[static_cast<std::size_t>(l)]) {
      throw Error(ErrorCode::DimensionMismatch, std::string(level_name(l)) + " features are " + z.shape_string() +
                                                    ", expected width " +
                                                    std::to_string(config_.input_dims[static_cast<std::size_t>(l)]));
    }
    const Linear w = find_linear(params_, "in." + lvl(l));
    const LayerNormParams ln = find_layer_norm(params_, "in." + lvl(l) + ".ln");
    h[static_cast<std::size_t>(l)] = ad::relu(ln(w(z)));
  }
  return h;
}

ad::Tensor PrimeModel::intra_level(int layer, int level, const ad::Tensor& h,
                                   const std::shared_ptr<const ad::SparseOperator>& a, ForwardContext& ctx) const {
  if (a->rows != h.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "intra_level: adjacency of " + std::to_string(a->rows) + " nodes vs " +
                                              h.shape_string());
  }
  const IntraParams p = intra(layer, level);
  const ad::Tensor x = p.norm1(h);
  const ad::Tensor conv = ad::add(p.self(x), p.neigh(ad::sparse_dense_matmul(a, x)));
  const ad::Tensor h1 = ad::add(h, ad::dropout(conv, config_.dropout, ctx.train, ctx.next_key()));
  const ad::Tensor f = p.ffn_out(ad::gelu(p.ffn_in(p.norm2(h1))));
  return ad::add(h1, ad::dropout(f, config_.dropout, ctx.train, ctx.next_key()));
}

void PrimeModel::bottom_up(int layer, LevelStates& states, const PreparedGraph& graph, ForwardContext& ctx) const {
  for (int l = 1; l < kLevels; ++l) {
    if (!config_.active[static_cast<std::size_t>(l)] || !config_.active[static_cast<std::size_t>(l - 1)]) continue;
    const Linear proj = find_linear(params_, layer_prefix(layer) + "up." + lvl(l) + ".proj");
    const ad::Tensor pooled =
        ad::sparse_dense_matmul(graph.aggregate[static_cast<std::size_t>(l - 1)], states[static_cast<std::size_t>(l - 1)]);
    states[static_cast<std::size_t>(l)] =
        gated_fusion(fusion(layer, l, true), states[static_cast<std::size_t>(l)], proj(pooled), config_.dropout, ctx);
  }
}

void PrimeModel::top_down(int layer, LevelStates& states, const PreparedGraph& graph, ForwardContext& ctx) const {
  for (int l = kLevels - 1; l >= 1; --l) {
    if (!config_.active[static_cast<std::size_t>(l)] || !config_.active[static_cast<std::size_t>(l - 1)]) continue;
    const Linear proj = find_linear(params_, layer_prefix(layer) + "down." + lvl(l) + ".proj");
    const ad::Tensor spread =
        ad::sparse_dense_matmul(graph.broadcast[static_cast<std::size_t>(l - 1)], states[static_cast<std::size_t>(l)]);
    states[static_cast<std::size_t>(l - 1)] = gated_fusion(fusion(layer, l, false), states[static_cast<std::size_t>(l - 1)],
                                                           proj(spread), config_.dropout, ctx);
  }
}

LevelStates PrimeModel::forward(const PreparedGraph& graph, ForwardContext& ctx) const {
  std::array<ad::Tensor, kLevels> z;
  for (int l = 0; l < kLevels; ++l) {
    z[static_cast<std::size_t>(l)] = ad::Tensor::constant(graph.features[static_cast<std::size_t>(l)]);
  }
  return forward(graph, z, ctx);
}

LevelStates PrimeModel::forward(const PreparedGraph& graph, std::span<const ad::Tensor> features,
                                ForwardContext& ctx) const {
  LevelStates h = input_project(features, ctx);
  for (int n = 0; n < config_.layers; ++n) {
    const LevelStates prev = h;
    for (int l = 0; l < kLevels; ++l) {
      if (!config_.active[static_cast<std::size_t>(l)]) continue;
      h[static_cast<std::size_t>(l)] =
          intra_level(n, l, h[static_cast<std::size_t>(l)], graph.adjacency[static_cast<std::size_t>(l)], ctx);
    }
    bottom_up(n, h, graph, ctx);
    top_down(n, h, graph, ctx);
    for (int l = 0; l < kLevels; ++l) {
      if (!config_.active[static_cast<std::size_t>(l)]) continue;
      h[static_cast<std::size_t>(l)] = ad::add(h[static_cast<std::size_t>(l)], prev[static_cast<std::size_t>(l)]);
    }
  }
  return h;
}

ad::Tensor PrimeModel::head(const ad::Tensor& x, ForwardContext& ctx) const {
  const Linear fc1 = find_linear(params_, "head.fc1");
  const Linear fc2 = find_linear(params_, "head.fc2");
  const Linear fc3 = find_linear(params_, "head.fc3");
  ad::Tensor y = ad::dropout(ad::relu(fc1(x)), config_.dropout, ctx.train, ctx.next_key());
  y = ad::dropout(ad::relu(fc2(y)), config_.dropout, ctx.train, ctx.next_key());
  return fc3(y);
}

Prediction PrimeModel::readout(const LevelStates& states, ForwardContext& ctx) const {
  Prediction out;
  if (config_.readout == ReadoutKind::Fixed) {
    const ad::Tensor& h = states[static_cast<std::size_t>(config_.readout_level)];
    if (!h.defined() || h.rows() == 0) {
      throw Error(ErrorCode::EmptyLevel, "readout level " + std::string(level_name(config_.readout_level)) +
                                             " has no nodes");
    }
    out.logits = config_.task == TaskKind::NodeBinary ? head(h, ctx) : head(ad::mean(h, 0), ctx);
    return out;
  }

  std::vector<ad::Tensor> pooled;
  std::vector<int> levels;
  for (int l = 0; l < kLevels; ++l) {
    if (!config_.active[static_cast<std::size_t>(l)]) continue;
    const ad::Tensor& h = states[static_cast<std::size_t>(l)];
    if (!h.defined() || h.rows() == 0) {
      throw Error(ErrorCode::EmptyLevel, "level " + std::string(level_name(l)) + " has no nodes");
    }
    pooled.push_back(ad::mean(h, 0));
    levels.push_back(l);
  }
  const ad::Tensor p = ad::concat(pooled, 0);
  const ad::Tensor k = find_linear(params_, "attn.key")(p);
  const ad::Tensor v = find_linear(params_, "attn.value")(p);
  const ad::Tensor q = params_.get("attn.query");
  const ad::Tensor scores = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(config_.hidden)));
  const ad::Tensor w = ad::softmax(scores, 1);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    out.attention[static_cast<std::size_t>(levels[i])] = w.value()(0, static_cast<Eigen::Index>(i));
  }
  out.logits = head(ad::matmul(w, v), ctx);
  return out;
}

Prediction PrimeModel::predict(const PreparedGraph& graph, ForwardContext& ctx) const {
  return readout(forward(graph, ctx), ctx);
}

}  // namespace prime
