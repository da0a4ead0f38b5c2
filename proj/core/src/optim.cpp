#include "prime/optim.hpp"

#include <cmath>
#include <numbers>

namespace prime {

AdamW::AdamW(std::vector<ad::Tensor> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void AdamW::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) {
      throw Error(ErrorCode::MissingGrad, "parameter " + std::to_string(i) + " " + params_[i].shape_string() +
                                              " has no gradient");
    }
  }
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Matrix& w = params_[i].mutable_value();
    const Matrix& g = params_[i].grad();
    if (options_.weight_decay != 0.0) w *= 1.0 - options_.lr * options_.weight_decay;
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    w.array() -= options_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + options_.eps);
  }
}

double grad_norm(std::span<const ad::Tensor> params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.has_grad()) sq += p.grad().squaredNorm();
  }
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<ad::Tensor> params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& p : params) {
      if (p.has_grad()) p.mutable_grad() *= factor;
    }
  }
  return norm;
}

LrSchedule LrSchedule::warmup_plateau(WarmupPlateauOptions options) {
  LrSchedule s;
  s.kind_ = Kind::WarmupPlateau;
  s.wp_ = options;
  s.plateau_lr_ = options.base_lr;
  s.lr_ = s.warmup_lr(0);
  return s;
}

LrSchedule LrSchedule::cosine(double base_lr, int total_epochs) {
  LrSchedule s;
  s.kind_ = Kind::Cosine;
  s.wp_.base_lr = base_lr;
  s.total_epochs_ = std::max(total_epochs, 1);
  s.lr_ = base_lr;
  return s;
}

double LrSchedule::warmup_lr(int epoch) const {
  if (wp_.warmup_epochs <= 0 || epoch >= wp_.warmup_epochs) return plateau_lr_;
  const double f = wp_.start_fraction;
  return wp_.base_lr * (f + (1.0 - f) * static_cast<double>(epoch) / wp_.warmup_epochs);
}

double LrSchedule::step(int epoch, std::optional<double> val_metric) {
  if (kind_ == Kind::Cosine) {
    const int next = epoch + 1;
    lr_ = wp_.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * next / total_epochs_));
    return lr_;
  }
  // The plateau rule only watches post-warmup epochs.
  if (epoch >= wp_.warmup_epochs && val_metric) {
    const double m = *val_metric;
    const bool improved = !best_ || (wp_.mode == MetricMode::Maximize ? m > *best_ + wp_.threshold
                                                                      : m < *best_ - wp_.threshold);
    if (improved) {
      best_ = m;
      bad_epochs_ = 0;
    } else if (++bad_epochs_ >= wp_.patience) {
      plateau_lr_ *= wp_.factor;
      bad_epochs_ = 0;
    }
  }
  lr_ = warmup_lr(epoch + 1);
  return lr_;
}

}  // namespace prime
