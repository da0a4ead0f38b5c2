#include "prime/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace prime {

double compute_accuracy(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows() != static_cast<Eigen::Index>(labels.size()) || logits.rows() == 0 || logits.cols() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "accuracy: " + std::to_string(labels.size()) + " labels for [" +
                                              std::to_string(logits.rows()) + " x " + std::to_string(logits.cols()) + "]");
  }
  int correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    if (best == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

double compute_fmax(const Matrix& scores, const Matrix& labels) {
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols() || scores.rows() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "fmax: scores and labels differ in shape");
  }
  const Eigen::Index n = scores.rows();
  std::vector<double> positives(static_cast<std::size_t>(n));
  bool any = false;
  for (Eigen::Index r = 0; r < n; ++r) {
    positives[static_cast<std::size_t>(r)] = labels.row(r).sum();
    any = any || positives[static_cast<std::size_t>(r)] > 0;
  }
  if (!any) throw Error(ErrorCode::NoPositives, "no protein has a positive label");

  double best = 0.0;
  for (int t = 1; t <= 100; ++t) {
    const double tau = t / 100.0;
    double precision_sum = 0.0, recall_sum = 0.0;
    int predicted = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      double tp = 0.0, pp = 0.0;
      for (Eigen::Index c = 0; c < scores.cols(); ++c) {
        if (scores(r, c) >= tau) {
          pp += 1.0;
          if (labels(r, c) > 0.5) tp += 1.0;
        }
      }
      if (pp > 0) {
        ++predicted;
        precision_sum += tp / pp;
      }
      if (positives[static_cast<std::size_t>(r)] > 0) recall_sum += tp / positives[static_cast<std::size_t>(r)];
    }
    if (predicted == 0) continue;
    const double p = precision_sum / predicted;
    const double rc = recall_sum / static_cast<double>(n);
    if (p + rc > 0) best = std::max(best, 2.0 * p * rc / (p + rc));
  }
  return best;
}

double compute_roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos = 0, neg = 0, rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        pos += 1;
        rank_sum += avg_rank;
      } else {
        neg += 1;
      }
    }
    i = j;
  }
  if (pos == 0 || neg == 0) throw Error(ErrorCode::OneClassOnly, "roc_auc needs both classes");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

}  // namespace prime
