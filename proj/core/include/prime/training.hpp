#pragma once

#include "prime/metrics.hpp"
#include "prime/optim.hpp"
#include "prime/prime_net.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prime {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int batch_size = 32;
  int max_epochs = 100;
  int early_stop_patience = 10;
  int warmup_epochs = 3;
  double plateau_factor = 0.6;
  int plateau_patience = 5;
  double clip_norm = 5.0;
  int hidden = 128;
  int layers = 3;
  double dropout = 0.3;
  int head_hidden = 128;
  std::uint64_t seed = 0;
  TaskKind task_kind = TaskKind::Multiclass;
  int num_outputs = 4;
  ReadoutKind readout = ReadoutKind::Fixed;
  int readout_level = static_cast<int>(Level::Residue);
  std::array<bool, kLevels> active = {true, true, true, true, true};
  // Evaluate the training split after every epoch and stop once it reaches
  // target_train_metric, when set.
  bool track_train_metric = false;
  std::optional<double> target_train_metric;

  // Hierarchy construction.
  int face_cap = 1024;
  int atom_cap = 2048;
  int knn_k = 8;

  // Encoder pretraining.
  int pretrain_epochs = 30;
  int pretrain_batch_size = 4;
  double pretrain_lr = 1e-3;
  int pretrain_count = 200;
};

// Sets one key from its text value; throws ConfigError naming the key.
void apply_setting(TrainConfig& config, std::string_view key, std::string_view value);
// Flat "key = value" lines; '#' starts a comment. Unknown keys are errors.
TrainConfig parse_train_config(std::string_view text);
TrainConfig load_train_config(const std::string& path);
std::string format_train_config(const TrainConfig& config);
void validate(const TrainConfig& config);
std::vector<std::string> config_keys();

PrimeConfig model_config(const TrainConfig& config);

struct Sample {
  PreparedGraph graph;
  int label = -1;               // multiclass
  std::vector<double> targets;  // multilabel: one per output; node tasks: one per readout-level node
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double lr = 0.0;
  double val_metric = 0.0;
  std::optional<double> train_metric;
};

struct TrainResult {
  PrimeModel model;  // best-validation checkpoint
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_metric = 0.0;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

// Loss of a batch for the configured task, given one prediction per sample.
ad::Tensor task_loss(TaskKind kind, std::span<const ad::Tensor> logits, std::span<const Sample* const> samples);

TrainResult train(const TrainConfig& config, std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const EpochObserver& observer = {});

// Eval-mode outputs for every sample, concatenated in sample order.
struct PredictionSet {
  Matrix outputs;  // logits (multiclass), probabilities (multilabel, node)
  std::vector<int> labels;
  Matrix label_matrix;
  std::vector<std::array<double, kLevels>> attention;
};

PredictionSet predict_all(const PrimeModel& model, std::span<const Sample> samples);
Metrics evaluate(const PrimeModel& model, std::span<const Sample> samples);
// The headline metric for the model's task kind.
double task_metric(const PrimeModel& model, std::span<const Sample> samples);

}  // namespace prime
