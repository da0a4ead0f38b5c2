#pragma once

#include "prime/types.hpp"

#include <optional>
#include <span>

namespace prime {

// Fraction of rows whose argmax (lowest index on ties) equals the label.
double compute_accuracy(const Matrix& logits, std::span<const int> labels);

// Protein-centric F_max over thresholds 0.01 .. 1.00. A protein counts as
// predicted at threshold t when any score >= t; precision is averaged over
// predicted proteins, recall over all proteins.
double compute_fmax(const Matrix& scores, const Matrix& labels);

// P(score_pos > score_neg) + 0.5 P(equal), by ranking with tie averaging.
double compute_roc_auc(std::span<const double> scores, std::span<const int> labels);

struct Metrics {
  std::optional<double> accuracy;
  std::optional<double> f_max;
  std::optional<double> roc_auc;
};

}  // namespace prime
