#pragma once

#include "prime/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace prime {

struct SparseAdjacency;
struct PartitionMatrix;

namespace ad {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
};

// A 2-D differentiable array (scalars are 1x1). Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);
  static Tensor scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

  bool defined() const { return node_ != nullptr; }
  int rows() const { return static_cast<int>(node_->value.rows()); }
  int cols() const { return static_cast<int>(node_->value.cols()); }
  std::string shape_string() const;

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size() && node_->grad.size() > 0; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  void zero_grad() { node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols()); }
  void clear_grad() { node_->grad.resize(0, 0); }

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Compressed sparse rows, with its transpose kept for the backward pass.
struct SparseOperator {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr, col_idx;
  std::vector<double> values;
  std::vector<int> t_row_ptr, t_col_idx;
  std::vector<double> t_values;

  static std::shared_ptr<const SparseOperator> from_adjacency(const SparseAdjacency& a);
  // P (fine x coarse) and P^T (coarse x fine).
  static std::shared_ptr<const SparseOperator> broadcast(const PartitionMatrix& pi);
  static std::shared_ptr<const SparseOperator> aggregate(const PartitionMatrix& pi);
  static std::shared_ptr<const SparseOperator> from_triplets(int rows, int cols, std::span<const int> r,
                                                             std::span<const int> c, std::span<const double> v);
  Matrix to_dense() const;
};

void backward(const Tensor& loss);

// ---- operations -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor sparse_dense_matmul(const std::shared_ptr<const SparseOperator>& s, const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);  // b may be a 1 x cols row, broadcast over rows
Tensor sub(const Tensor& a, const Tensor& b);
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor concat(std::span<const Tensor> parts, int axis = 1);
Tensor row_select(const Tensor& a, std::span<const int> rows);
Tensor mean(const Tensor& a, int axis);
Tensor mean(const Tensor& a);  // over all elements, 1x1
Tensor sum(const Tensor& a);   // 1x1
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation
Tensor silu(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor softmax(const Tensor& a, int axis);
Tensor transpose(const Tensor& a);

struct DropoutKey {
  std::uint64_t seed = 0;
  std::uint64_t layer = 0;
  std::uint64_t step = 0;
};

// Inverted dropout; identity when !train or p == 0.
Tensor dropout(const Tensor& a, double p, bool train, const DropoutKey& key);

// Mean over rows of -log softmax(logits)[label].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);
// Mean over elements of max(x,0) - x t + log(1 + exp(-|x|)).
Tensor bce_with_logits(const Tensor& logits, const Matrix& targets);

// Uniform [0,1) value for element `index` of the stream named by `key`.
double counter_uniform(const DropoutKey& key, std::uint64_t index);

}  // namespace ad
}  // namespace prime
