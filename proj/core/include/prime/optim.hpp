#pragma once

#include "prime/tensor.hpp"

#include <optional>
#include <span>
#include <vector>

namespace prime {

struct AdamWOptions {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// AdamW with decoupled weight decay and bias-corrected moments. With
// weight_decay = 0 this is plain Adam.
class AdamW {
 public:
  AdamW(std::vector<ad::Tensor> params, AdamWOptions options);

  // Throws MissingGrad if any parameter has no gradient populated.
  void step();
  void zero_grad();

  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  long step_count() const { return steps_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  std::vector<ad::Tensor> params_;
  AdamWOptions options_;
  std::vector<Matrix> m_, v_;
  long steps_ = 0;
};

// Global L2 norm over all gradients; rescales them to max_norm when above.
// Returns the norm before clipping.
double clip_grad_norm(std::span<ad::Tensor> params, double max_norm);
double grad_norm(std::span<const ad::Tensor> params);

enum class MetricMode { Maximize, Minimize };

// Per-epoch learning-rate schedule. `current()` is the rate for the epoch
// about to run; `step(epoch, metric)` is called once that epoch finished and
// returns the rate for the next one.
class LrSchedule {
 public:
  enum class Kind { WarmupPlateau, Cosine };

  struct WarmupPlateauOptions {
    double base_lr = 1e-3;
    int warmup_epochs = 3;
    double start_fraction = 0.01;
    double factor = 0.6;
    int patience = 5;
    double threshold = 1e-6;
    MetricMode mode = MetricMode::Maximize;
  };

  static LrSchedule warmup_plateau(WarmupPlateauOptions options);
  static LrSchedule warmup_plateau(double base_lr) { return warmup_plateau(WarmupPlateauOptions{.base_lr = base_lr}); }
  static LrSchedule cosine(double base_lr, int total_epochs);

  Kind kind() const { return kind_; }
  double current() const { return lr_; }
  double step(int epoch, std::optional<double> val_metric = std::nullopt);

 private:
  double warmup_lr(int epoch) const;

  Kind kind_ = Kind::WarmupPlateau;
  WarmupPlateauOptions wp_;
  int total_epochs_ = 1;
  double lr_ = 0.0;
  double plateau_lr_ = 0.0;
  std::optional<double> best_;
  int bad_epochs_ = 0;
};

}  // namespace prime
