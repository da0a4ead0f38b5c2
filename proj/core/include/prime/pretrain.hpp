#pragma once

#include "prime/encoder.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace prime {

// One protein prepared for denoising: clean coordinates, encoder inputs and
// the kNN graph over the clean coordinates.
struct DenoiseSample {
  Matrix coords;       // n x 3
  Matrix node_inputs;  // n x d_in
  SparseAdjacency graph;
  EncoderGraph encoder_graph;
};

DenoiseSample make_denoise_sample(Matrix coords, Matrix node_inputs, int knn_k = 8);
// Heavy atoms of a structure, centred on their mean.
DenoiseSample atom_denoise_sample(const ProteinStructure& structure, int knn_k = 8);
// Face centroids of a mesh, centred on their mean.
DenoiseSample surface_denoise_sample(std::span<const FaceGeometry> faces, int knn_k = 8);

struct DenoiseBatch {
  Matrix clean_coords;
  Matrix noisy_coords;
  double sigma = 0.0;
  const SparseAdjacency* graph = nullptr;
  const EncoderGraph* encoder_graph = nullptr;
  const Matrix* node_inputs = nullptr;
};

// noisy = clean + sigma * N(0, 1) per coordinate.
DenoiseBatch corrupt(const DenoiseSample& sample, double sigma, std::uint64_t seed);

struct DenoiseLoss {
  ad::Tensor total;
  double denoise = 0.0;
  double smooth = 0.0;
};

// denoise = mean over n*3 entries of (decoder(z) - (clean - noisy))^2,
// smooth = mean over directed graph edges of |z_i - z_j|^2,
// total = denoise + 0.01 * smooth, with z = encoder(noisy).
DenoiseLoss denoise_loss(const InvariantEncoder& encoder, const DecoderHead& decoder, const DenoiseBatch& batch);

inline constexpr double kSmoothWeight = 0.01;

struct PretrainConfig {
  int epochs = 30;
  int batch_size = 4;
  double lr = 1e-3;
  double clip_norm = 1.0;
  double sigma_min = 0.1;
  double sigma_max = 0.5;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  EncoderConfig encoder;
};

struct PretrainEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct PretrainResult {
  InvariantEncoder encoder;  // best-validation checkpoint
  double initial_val_loss = 0.0;
  double best_val_loss = 0.0;
  int best_epoch = -1;  // -1 when no epoch improved on the initialization
  std::vector<PretrainEpoch> history;
};

// Validation loss with noise fixed by `seed`, averaged over samples.
double validation_loss(const InvariantEncoder& encoder, const DecoderHead& decoder, std::span<const DenoiseSample> data,
                       std::span<const std::size_t> indices, double sigma_min, double sigma_max, std::uint64_t seed);

using PretrainObserver = std::function<void(const PretrainEpoch&)>;

// Adam (no decay), cosine annealing to zero, gradient clipping and a 90/10
// split; returns the encoder with the lowest validation loss.
PretrainResult pretrain_encoder(const PretrainConfig& config, std::span<const DenoiseSample> data,
                                const PretrainObserver& observer = {});

}  // namespace prime
