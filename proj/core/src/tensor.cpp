#include "prime/tensor.hpp"

#include "prime/hierarchy.hpp"
#include "prime/surface_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace prime::ad {
namespace {

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
}

void accumulate(Node& n, const Matrix& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Tensor make_result(Matrix value, const std::vector<Tensor>& inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->leaf = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) {
      if (t.requires_grad()) node->requires_grad = true;
    }
  }
  if (node->requires_grad) {
    for (const auto& t : inputs) node->inputs.push_back(t.node());
    node->backward_fn = std::move(fn);
  }
  return Tensor(std::move(node));
}

Matrix csr_times(int rows, const std::vector<int>& ptr, const std::vector<int>& col, const std::vector<double>& val,
                 const Matrix& x) {
  Matrix out = Matrix::Zero(rows, x.cols());
  for (int r = 0; r < rows; ++r) {
    for (int k = ptr[static_cast<std::size_t>(r)]; k < ptr[static_cast<std::size_t>(r) + 1]; ++k) {
      out.row(r) += val[static_cast<std::size_t>(k)] * x.row(col[static_cast<std::size_t>(k)]);
    }
  }
  return out;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

std::string Tensor::shape_string() const {
  if (!node_) return "[undefined]";
  return "[" + std::to_string(rows()) + " x " + std::to_string(cols()) + "]";
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw Error(ErrorCode::ShapeMismatch, "item() on " + shape_string());
  return node_->value(0, 0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- SparseOperator -----------------------------------------------------------

std::shared_ptr<const SparseOperator> SparseOperator::from_triplets(int rows, int cols, std::span<const int> r,
                                                                    std::span<const int> c,
                                                                    std::span<const double> v) {
  auto op = std::make_shared<SparseOperator>();
  op->rows = rows;
  op->cols = cols;
  auto build = [](int n_rows, std::span<const int> rr, std::span<const int> cc, std::span<const double> vv,
                  std::vector<int>& ptr, std::vector<int>& col, std::vector<double>& val) {
    ptr.assign(static_cast<std::size_t>(n_rows) + 1, 0);
    for (int x : rr) ++ptr[static_cast<std::size_t>(x) + 1];
    for (std::size_t i = 1; i < ptr.size(); ++i) ptr[i] += ptr[i - 1];
    col.assign(rr.size(), 0);
    val.assign(rr.size(), 0.0);
    std::vector<int> fill(ptr.begin(), ptr.end() - 1);
    // Stable fill keeps the input order within a row.
    for (std::size_t k = 0; k < rr.size(); ++k) {
      const int pos = fill[static_cast<std::size_t>(rr[k])]++;
      col[static_cast<std::size_t>(pos)] = cc[k];
      val[static_cast<std::size_t>(pos)] = vv[k];
    }
  };
  build(rows, r, c, v, op->row_ptr, op->col_idx, op->values);
  build(cols, c, r, v, op->t_row_ptr, op->t_col_idx, op->t_values);
  return op;
}

std::shared_ptr<const SparseOperator> SparseOperator::from_adjacency(const SparseAdjacency& a) {
  std::vector<int> r, c;
  std::vector<double> v;
  r.reserve(a.entries.size());
  c.reserve(a.entries.size());
  v.reserve(a.entries.size());
  for (const auto& e : a.entries) {
    r.push_back(e.row);
    c.push_back(e.col);
    v.push_back(e.weight);
  }
  return from_triplets(a.n, a.n, r, c, v);
}

std::shared_ptr<const SparseOperator> SparseOperator::broadcast(const PartitionMatrix& pi) {
  std::vector<int> r(pi.assign.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = static_cast<int>(i);
  const std::vector<double> ones(pi.assign.size(), 1.0);
  return from_triplets(pi.fine_count, pi.coarse_count, r, pi.assign, ones);
}

std::shared_ptr<const SparseOperator> SparseOperator::aggregate(const PartitionMatrix& pi) {
  std::vector<int> c(pi.assign.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<int>(i);
  const std::vector<double> ones(pi.assign.size(), 1.0);
  return from_triplets(pi.coarse_count, pi.fine_count, pi.assign, c, ones);
}

Matrix SparseOperator::to_dense() const {
  Matrix d = Matrix::Zero(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int k = row_ptr[static_cast<std::size_t>(r)]; k < row_ptr[static_cast<std::size_t>(r) + 1]; ++k) {
      d(r, col_idx[static_cast<std::size_t>(k)]) += values[static_cast<std::size_t>(k)];
    }
  }
  return d;
}

// ---- backward -----------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw Error(ErrorCode::NonScalarLoss, "backward() needs a 1x1 loss, got " + loss.shape_string());
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS: each node is emitted once, after its inputs.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->leaf) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  }
  accumulate(*loss.node(), Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

// ---- operations -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  return make_result(a.value() * b.value(), {a, b}, [](Node& n) {
    Node& x = *n.inputs[0];
    Node& y = *n.inputs[1];
    if (x.requires_grad) accumulate(x, n.grad * y.value.transpose());
    if (y.requires_grad) accumulate(y, x.value.transpose() * n.grad);
  });
}

Tensor sparse_dense_matmul(const std::shared_ptr<const SparseOperator>& s, const Tensor& x) {
  if (s->cols != x.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "sparse_dense_matmul: [" + std::to_string(s->rows) + " x " +
                                              std::to_string(s->cols) + "] vs " + x.shape_string());
  }
  Matrix out = csr_times(s->rows, s->row_ptr, s->col_idx, s->values, x.value());
  return make_result(std::move(out), {x}, [s](Node& n) {
    Node& in = *n.inputs[0];
    accumulate(in, csr_times(s->cols, s->t_row_ptr, s->t_col_idx, s->t_values, n.grad));
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    return make_result(a.value() + b.value(), {a, b}, [](Node& n) {
      accumulate(*n.inputs[0], n.grad);
      accumulate(*n.inputs[1], n.grad);
    });
  }
  if (b.rows() == 1 && b.cols() == a.cols()) {
    Matrix out = a.value().rowwise() + b.value().row(0);
    return make_result(std::move(out), {a, b}, [](Node& n) {
      accumulate(*n.inputs[0], n.grad);
      if (n.inputs[1]->requires_grad) accumulate(*n.inputs[1], n.grad.colwise().sum());
    });
  }
  shape_error("add", a, b);
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("elementwise_mul", a, b);
  return make_result(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    Node& x = *n.inputs[0];
    Node& y = *n.inputs[1];
    if (x.requires_grad) accumulate(x, n.grad.cwiseProduct(y.value));
    if (y.requires_grad) accumulate(y, n.grad.cwiseProduct(x.value));
  });
}

Tensor scale(const Tensor& a, double s) {
  return make_result(a.value() * s, {a}, [s](Node& n) { accumulate(*n.inputs[0], n.grad * s); });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat of nothing");
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  int rows = 0, cols = 0;
  if (axis == 1) {
    rows = parts[0].rows();
    for (const auto& p : parts) {
      if (p.rows() != rows) shape_error("concat", parts[0], p);
      cols += p.cols();
    }
  } else {
    cols = parts[0].cols();
    for (const auto& p : parts) {
      if (p.cols() != cols) shape_error("concat", parts[0], p);
      rows += p.rows();
    }
  }
  Matrix out(rows, cols);
  int offset = 0;
  for (const auto& p : parts) {
    if (axis == 1) {
      out.middleCols(offset, p.cols()) = p.value();
      offset += p.cols();
    } else {
      out.middleRows(offset, p.rows()) = p.value();
      offset += p.rows();
    }
  }
  return make_result(std::move(out), inputs, [axis](Node& n) {
    int off = 0;
    for (auto& in : n.inputs) {
      if (axis == 1) {
        const auto c = static_cast<int>(in->value.cols());
        if (in->requires_grad) accumulate(*in, n.grad.middleCols(off, c));
        off += c;
      } else {
        const auto r = static_cast<int>(in->value.rows());
        if (in->requires_grad) accumulate(*in, n.grad.middleRows(off, r));
        off += r;
      }
    }
  });
}

Tensor row_select(const Tensor& a, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) {
      throw Error(ErrorCode::IndexOutOfRange, "row_select index " + std::to_string(rows[i]) + " for " + a.shape_string());
    }
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return make_result(std::move(out), {a}, [idx = std::move(idx)](Node& n) {
    Node& in = *n.inputs[0];
    Matrix g = Matrix::Zero(in.value.rows(), in.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    accumulate(in, g);
  });
}

Tensor mean(const Tensor& a, int axis) {
  if (axis == 0) {
    if (a.rows() == 0) throw Error(ErrorCode::ShapeMismatch, "mean over zero rows");
    const double inv = 1.0 / a.rows();
    Matrix out = a.value().colwise().sum() * inv;
    return make_result(std::move(out), {a}, [inv](Node& n) {
      Node& in = *n.inputs[0];
      accumulate(in, n.grad.replicate(in.value.rows(), 1) * inv);
    });
  }
  if (a.cols() == 0) throw Error(ErrorCode::ShapeMismatch, "mean over zero columns");
  const double inv = 1.0 / a.cols();
  Matrix out = a.value().rowwise().sum() * inv;
  return make_result(std::move(out), {a}, [inv](Node& n) {
    Node& in = *n.inputs[0];
    accumulate(in, n.grad.replicate(1, in.value.cols()) * inv);
  });
}

Tensor mean(const Tensor& a) {
  if (a.value().size() == 0) throw Error(ErrorCode::ShapeMismatch, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Tensor sum(const Tensor& a) {
  return make_result(Matrix::Constant(1, 1, a.value().sum()), {a}, [](Node& n) {
    Node& in = *n.inputs[0];
    accumulate(in, Matrix::Constant(in.value.rows(), in.value.cols(), n.grad(0, 0)));
  });
}

Tensor sigmoid(const Tensor& a) {
  Matrix y = a.value().unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return make_result(y, {a}, [y](Node& n) {
    accumulate(*n.inputs[0], n.grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Tensor relu(const Tensor& a) {
  Matrix y = a.value().cwiseMax(0.0);
  return make_result(std::move(y), {a}, [](Node& n) {
    Node& in = *n.inputs[0];
    accumulate(in, n.grad.cwiseProduct(in.value.unaryExpr([](double x) { return x > 0 ? 1.0 : 0.0; })));
  });
}

Tensor gelu(const Tensor& a) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double c = 0.044715;
  Matrix y = a.value().unaryExpr([](double x) { return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x))); });
  return make_result(std::move(y), {a}, [](Node& n) {
    Node& in = *n.inputs[0];
    Matrix d = in.value.unaryExpr([](double x) {
      const double u = k * (x + c * x * x * x);
      const double t = std::tanh(u);
      return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * c * x * x);
    });
    accumulate(in, n.grad.cwiseProduct(d));
  });
}

Tensor silu(const Tensor& a) {
  Matrix s = a.value().unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  Matrix y = a.value().cwiseProduct(s);
  return make_result(std::move(y), {a}, [s](Node& n) {
    Node& in = *n.inputs[0];
    Matrix d = (s.array() * (1.0 + in.value.array() * (1.0 - s.array()))).matrix();
    accumulate(in, n.grad.cwiseProduct(d));
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const int c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c) shape_error("layer_norm gamma", x, gamma);
  if (beta.rows() != 1 || beta.cols() != c) shape_error("layer_norm beta", x, beta);
  const Matrix& v = x.value();
  Matrix xhat(v.rows(), c);
  Eigen::VectorXd inv_std(v.rows());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double mu = v.row(r).mean();
    const double var = (v.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (v.row(r).array() - mu) * inv_std[r];
  }
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  y.rowwise() += beta.value().row(0);
  return make_result(std::move(y), {x, gamma, beta}, [xhat, inv_std](Node& n) {
    Node& in = *n.inputs[0];
    Node& g = *n.inputs[1];
    Node& b = *n.inputs[2];
    if (g.requires_grad) accumulate(g, n.grad.cwiseProduct(xhat).colwise().sum());
    if (b.requires_grad) accumulate(b, n.grad.colwise().sum());
    if (in.requires_grad) {
      const Matrix dxhat = (n.grad.array().rowwise() * g.value.row(0).array()).matrix();
      Matrix dx(dxhat.rows(), dxhat.cols());
      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
        dx.row(r) = inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
      accumulate(in, dx);
    }
  });
}

Tensor softmax(const Tensor& a, int axis) {
  Matrix y = axis == 1 ? a.value() : Matrix(a.value().transpose());
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  if (axis != 1) y.transposeInPlace();
  return make_result(y, {a}, [y, axis](Node& n) {
    Matrix prod = n.grad.cwiseProduct(y);
    Matrix d;
    if (axis == 1) {
      const Eigen::VectorXd s = prod.rowwise().sum();
      d = prod - (y.array().colwise() * s.array()).matrix();
    } else {
      const Eigen::RowVectorXd s = prod.colwise().sum();
      d = prod - (y.array().rowwise() * s.array()).matrix();
    }
    accumulate(*n.inputs[0], d);
  });
}

Tensor transpose(const Tensor& a) {
  return make_result(a.value().transpose(), {a}, [](Node& n) { accumulate(*n.inputs[0], n.grad.transpose()); });
}

double counter_uniform(const DropoutKey& key, std::uint64_t index) {
  std::uint64_t h = splitmix(key.seed);
  h = splitmix(h ^ key.layer);
  h = splitmix(h ^ key.step);
  h = splitmix(h ^ index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

Tensor dropout(const Tensor& a, double p, bool train, const DropoutKey& key) {
  if (!train || p <= 0.0) return a;
  if (p >= 1.0) throw Error(ErrorCode::ConfigError, "dropout probability must be < 1");
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = counter_uniform(key, static_cast<std::uint64_t>(i)) >= p ? keep_scale : 0.0;
  }
  return make_result(a.value().cwiseProduct(mask), {a}, [mask](Node& n) {
    accumulate(*n.inputs[0], n.grad.cwiseProduct(mask));
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const int n = logits.rows();
  const int c = logits.cols();
  if (static_cast<int>(labels.size()) != n) {
    throw Error(ErrorCode::ShapeMismatch, "cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                              logits.shape_string());
  }
  Matrix prob(n, c);
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= c) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(y) + " with " +
                                                                     std::to_string(c) + " classes");
    const double m = logits.value().row(r).maxCoeff();
    prob.row(r) = (logits.value().row(r).array() - m).exp();
    const double z = prob.row(r).sum();
    prob.row(r) /= z;
    loss += (m + std::log(z)) - logits.value()(r, y);
  }
  std::vector<int> ys(labels.begin(), labels.end());
  return make_result(Matrix::Constant(1, 1, loss / n), {logits}, [prob, ys](Node& node) {
    Matrix g = prob;
    for (std::size_t r = 0; r < ys.size(); ++r) g(static_cast<Eigen::Index>(r), ys[r]) -= 1.0;
    g *= node.grad(0, 0) / static_cast<double>(ys.size());
    accumulate(*node.inputs[0], g);
  });
}

Tensor bce_with_logits(const Tensor& logits, const Matrix& targets) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "bce_with_logits: targets [" + std::to_string(targets.rows()) + " x " +
                                              std::to_string(targets.cols()) + "] vs " + logits.shape_string());
  }
  const Matrix& x = logits.value();
  const double count = static_cast<double>(x.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    loss += std::max(v, 0.0) - v * targets.data()[i] + std::log1p(std::exp(-std::abs(v)));
  }
  return make_result(Matrix::Constant(1, 1, loss / count), {logits}, [targets, count](Node& node) {
    Node& in = *node.inputs[0];
    Matrix g = in.value.unaryExpr([](double v) {
      return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
    g -= targets;
    g *= node.grad(0, 0) / count;
    accumulate(in, g);
  });
}

}  // namespace prime::ad
