#pragma once

#include "prime/features.hpp"
#include "prime/hierarchy.hpp"
#include "prime/nn.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace prime {

enum class TaskKind { Multiclass, Multilabel, NodeBinary };
enum class ReadoutKind { Fixed, CrossAttention };

std::string_view task_kind_name(TaskKind kind);
TaskKind task_kind_from_name(std::string_view name);  // throws ConfigError
std::string_view readout_kind_name(ReadoutKind kind);
ReadoutKind readout_kind_from_name(std::string_view name);

struct PrimeConfig {
  int hidden = 128;
  int layers = 3;
  double dropout = 0.3;
  int head_hidden = 128;
  std::array<int, kLevels> input_dims = kFeatureDims;
  TaskKind task = TaskKind::Multiclass;
  int outputs = 2;  // classes, labels, or 1 for node tasks
  ReadoutKind readout = ReadoutKind::Fixed;
  int readout_level = static_cast<int>(Level::Residue);
  std::array<bool, kLevels> active = {true, true, true, true, true};
};

void validate(const PrimeConfig& config);

// Scalar parameter count implied by the configuration, walked shape by shape.
std::size_t expected_parameter_count(const PrimeConfig& config);

// Sparse operators and features of one protein, ready for the network.
struct PreparedGraph {
  std::string id;
  std::array<int, kLevels> counts{};
  std::array<std::shared_ptr<const ad::SparseOperator>, kLevels> adjacency;        // normalised
  std::array<std::shared_ptr<const ad::SparseOperator>, kLevels - 1> aggregate;    // P^T, coarse x fine
  std::array<std::shared_ptr<const ad::SparseOperator>, kLevels - 1> broadcast;    // P, fine x coarse
  std::array<Matrix, kLevels> features;
  std::size_t surface_nnz = 0;
};

PreparedGraph prepare_graph(const Hierarchy& hierarchy, std::array<Matrix, kLevels> features, std::string id = {});

using LevelStates = std::array<ad::Tensor, kLevels>;  // undefined at ablated levels

// Carries the dropout stream. Every dropout call site draws the next site id,
// so the mask for (seed, site, step) is reproducible.
struct ForwardContext {
  bool train = false;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t site = 0;

  ad::DropoutKey next_key() { return {seed, site++, step}; }
};

struct FusionParams {
  Linear gate;    // 2d -> d, with bias
  Linear update;  // d -> d, no bias
  LayerNormParams norm;
};

// g = sigmoid(W_g [z | c] + b), u = Dropout(W_u c), z <- LayerNorm(z + g * u).
ad::Tensor gated_fusion(const FusionParams& params, const ad::Tensor& z, const ad::Tensor& c, double dropout,
                        ForwardContext& ctx);

struct IntraParams {
  LayerNormParams norm1;
  Linear self;   // with bias
  Linear neigh;  // no bias
  LayerNormParams norm2;
  Linear ffn_in;   // d -> 4d
  Linear ffn_out;  // 4d -> d
};

struct Prediction {
  ad::Tensor logits;               // 1 x outputs for graph tasks, n x 1 for node tasks
  std::array<double, kLevels> attention{};  // cross-attention weights, zero otherwise
};

class PrimeModel {
 public:
  PrimeModel() = default;
  PrimeModel(PrimeConfig config, std::uint64_t seed);
  static PrimeModel from_params(PrimeConfig config, ParamStore params);

  const PrimeConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  PrimeModel clone() const { return from_params(config_, params_.clone()); }

  FusionParams fusion(int layer, int level, bool upward) const;
  IntraParams intra(int layer, int level) const;

  LevelStates input_project(std::span<const ad::Tensor> features, ForwardContext& ctx) const;
  ad::Tensor intra_level(int layer, int level, const ad::Tensor& h, const std::shared_ptr<const ad::SparseOperator>& a,
                         ForwardContext& ctx) const;
  void bottom_up(int layer, LevelStates& states, const PreparedGraph& graph, ForwardContext& ctx) const;
  void top_down(int layer, LevelStates& states, const PreparedGraph& graph, ForwardContext& ctx) const;

  LevelStates forward(const PreparedGraph& graph, ForwardContext& ctx) const;
  // Same, with caller-supplied feature tensors (e.g. to differentiate w.r.t. them).
  LevelStates forward(const PreparedGraph& graph, std::span<const ad::Tensor> features, ForwardContext& ctx) const;

  Prediction readout(const LevelStates& states, ForwardContext& ctx) const;
  Prediction predict(const PreparedGraph& graph, ForwardContext& ctx) const;

 private:
  ad::Tensor head(const ad::Tensor& x, ForwardContext& ctx) const;

  PrimeConfig config_;
  ParamStore params_;
};

}  // namespace prime
