#pragma once

#include "prime/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace prime {

// Ordered collection of named trainable tensors.
class ParamStore {
 public:
  ad::Tensor add(const std::string& name, Matrix init);
  ad::Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<ad::Tensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

  // Deep copy; the copy's tensors are new leaves.
  ParamStore clone() const;
  // Values must match by name and shape.
  void assign_from(const ParamStore& other);
  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Linear {
  ad::Tensor weight;  // in x out
  ad::Tensor bias;    // 1 x out, undefined when bias-free

  ad::Tensor operator()(const ad::Tensor& x) const;
};

struct LayerNormParams {
  ad::Tensor gamma;
  ad::Tensor beta;

  ad::Tensor operator()(const ad::Tensor& x) const;
};

// Weights and biases drawn from U(-1/sqrt(in), 1/sqrt(in)).
Linear make_linear(ParamStore& store, const std::string& name, int in, int out, bool bias, std::mt19937_64& rng);
Linear find_linear(const ParamStore& store, const std::string& name);
LayerNormParams make_layer_norm(ParamStore& store, const std::string& name, int width);
LayerNormParams find_layer_norm(const ParamStore& store, const std::string& name);

}  // namespace prime
