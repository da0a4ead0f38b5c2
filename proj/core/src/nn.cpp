#include "prime/nn.hpp"

#include <cmath>

namespace prime {

ad::Tensor ParamStore::add(const std::string& name, Matrix init) {
  if (index_.contains(name)) throw Error(ErrorCode::ConfigError, "duplicate parameter '" + name + "'");
  index_.emplace(name, tensors_.size());
  names_.push_back(name);
  tensors_.push_back(ad::Tensor::parameter(std::move(init)));
  return tensors_.back();
}

ad::Tensor ParamStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::FormatError, "no parameter named '" + name + "'");
  return tensors_[it->second];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value().size());
  return n;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (std::size_t i = 0; i < tensors_.size(); ++i) out.add(names_[i], tensors_[i].value());
  return out;
}

void ParamStore::assign_from(const ParamStore& other) {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const ad::Tensor src = other.get(names_[i]);
    if (src.rows() != tensors_[i].rows() || src.cols() != tensors_[i].cols()) {
      throw Error(ErrorCode::ShapeMismatch, "parameter '" + names_[i] + "': " + tensors_[i].shape_string() + " vs " +
                                                src.shape_string());
    }
    tensors_[i].mutable_value() = src.value();
  }
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

ad::Tensor Linear::operator()(const ad::Tensor& x) const {
  ad::Tensor y = ad::matmul(x, weight);
  return bias.defined() ? ad::add(y, bias) : y;
}

ad::Tensor LayerNormParams::operator()(const ad::Tensor& x) const { return ad::layer_norm(x, gamma, beta); }

Linear make_linear(ParamStore& store, const std::string& name, int in, int out, bool bias, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  Linear lin;
  lin.weight = store.add(name + ".w", std::move(w));
  if (bias) {
    Matrix b(1, out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
    lin.bias = store.add(name + ".b", std::move(b));
  }
  return lin;
}

Linear find_linear(const ParamStore& store, const std::string& name) {
  Linear lin;
  lin.weight = store.get(name + ".w");
  if (store.contains(name + ".b")) lin.bias = store.get(name + ".b");
  return lin;
}

LayerNormParams make_layer_norm(ParamStore& store, const std::string& name, int width) {
  return {store.add(name + ".gamma", Matrix::Ones(1, width)), store.add(name + ".beta", Matrix::Zero(1, width))};
}

LayerNormParams find_layer_norm(const ParamStore& store, const std::string& name) {
  return {store.get(name + ".gamma"), store.get(name + ".beta")};
}

}  // namespace prime
