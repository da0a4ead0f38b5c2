#include "prime/pretrain.hpp"

#include "prime/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace prime {

DenoiseSample make_denoise_sample(Matrix coords, Matrix node_inputs, int knn_k) {
  if (coords.rows() != node_inputs.rows() || coords.cols() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "coords [" + std::to_string(coords.rows()) + " x " +
                                              std::to_string(coords.cols()) + "] vs inputs with " +
                                              std::to_string(node_inputs.rows()) + " rows");
  }
  std::vector<Vec3> points(static_cast<std::size_t>(coords.rows()));
  for (Eigen::Index i = 0; i < coords.rows(); ++i) points[static_cast<std::size_t>(i)] = coords.row(i).transpose();
  DenoiseSample s;
  s.graph = knn_graph(points, knn_k);
  s.encoder_graph = EncoderGraph::from_adjacency(s.graph);
  s.coords = std::move(coords);
  s.node_inputs = std::move(node_inputs);
  return s;
}

namespace {

Matrix centred(std::span<const Vec3> points) {
  Matrix m = coords_matrix(points);
  if (m.rows() > 0) m.rowwise() -= m.colwise().mean();
  return m;
}

}  // namespace

DenoiseSample atom_denoise_sample(const ProteinStructure& structure, int knn_k) {
  std::vector<Vec3> points;
  points.reserve(structure.atoms.size());
  for (const auto& a : structure.atoms) points.push_back(a.coords);
  Matrix inputs = Matrix::Zero(static_cast<Eigen::Index>(points.size()), 7);
  for (std::size_t i = 0; i < structure.atoms.size(); ++i) {
    inputs(static_cast<Eigen::Index>(i), static_cast<int>(structure.atoms[i].element)) = 1.0;
    inputs(static_cast<Eigen::Index>(i), kElementClasses) = structure.atoms[i].is_backbone ? 1.0 : 0.0;
  }
  return make_denoise_sample(centred(points), std::move(inputs), knn_k);
}

DenoiseSample surface_denoise_sample(std::span<const FaceGeometry> faces, int knn_k) {
  std::vector<Vec3> points;
  points.reserve(faces.size());
  Matrix inputs(static_cast<Eigen::Index>(faces.size()), 4);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    points.push_back(faces[i].centroid);
    inputs(static_cast<Eigen::Index>(i), 0) = faces[i].area;
    inputs.block(static_cast<Eigen::Index>(i), 1, 1, 3) = faces[i].sorted_edge_lengths.transpose();
  }
  return make_denoise_sample(centred(points), std::move(inputs), knn_k);
}

DenoiseBatch corrupt(const DenoiseSample& sample, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenoiseBatch b;
  b.clean_coords = sample.coords;
  b.noisy_coords = sample.coords;
  for (Eigen::Index i = 0; i < b.noisy_coords.size(); ++i) b.noisy_coords.data()[i] += sigma * normal(rng);
  b.sigma = sigma;
  b.graph = &sample.graph;
  b.encoder_graph = &sample.encoder_graph;
  b.node_inputs = &sample.node_inputs;
  return b;
}

DenoiseLoss denoise_loss(const InvariantEncoder& encoder, const DecoderHead& decoder, const DenoiseBatch& batch) {
  if (batch.clean_coords.rows() != batch.noisy_coords.rows() || batch.clean_coords.cols() != 3 ||
      batch.noisy_coords.cols() != 3 || batch.node_inputs == nullptr || batch.encoder_graph == nullptr ||
      batch.node_inputs->rows() != batch.clean_coords.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "inconsistent denoising batch");
  }
  const ad::Tensor z = encoder.forward(*batch.node_inputs, batch.noisy_coords, *batch.encoder_graph);
  const ad::Tensor pred = decoder.forward(z);
  const ad::Tensor target = ad::Tensor::constant(batch.clean_coords - batch.noisy_coords);
  const ad::Tensor diff = ad::sub(pred, target);
  const ad::Tensor denoise = ad::mean(ad::elementwise_mul(diff, diff));

  const EncoderGraph& g = *batch.encoder_graph;
  ad::Tensor smooth = ad::Tensor::scalar(0.0);
  if (g.edge_count() > 0) {
    const ad::Tensor dz = ad::sub(ad::row_select(z, g.src), ad::row_select(z, g.dst));
    smooth = ad::scale(ad::sum(ad::elementwise_mul(dz, dz)), 1.0 / static_cast<double>(g.edge_count()));
  }
  DenoiseLoss out;
  out.denoise = denoise.item();
  out.smooth = smooth.item();
  out.total = ad::add(denoise, ad::scale(smooth, kSmoothWeight));
  return out;
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<ad::Tensor> joint_params(const InvariantEncoder& e, const DecoderHead& d) {
  std::vector<ad::Tensor> all = e.params().tensors();
  all.insert(all.end(), d.params().tensors().begin(), d.params().tensors().end());
  return all;
}

}  // namespace

double validation_loss(const InvariantEncoder& encoder, const DecoderHead& decoder, std::span<const DenoiseSample> data,
                       std::span<const std::size_t> indices, double sigma_min, double sigma_max, std::uint64_t seed) {
  if (indices.empty()) return 0.0;
  ad::NoGradGuard no_grad;
  double total = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    std::mt19937_64 rng(mix(seed, k));
    const double sigma = std::uniform_real_distribution<double>(sigma_min, sigma_max)(rng);
    const DenoiseBatch b = corrupt(data[indices[k]], sigma, rng());
    total += denoise_loss(encoder, decoder, b).total.item();
  }
  return total / static_cast<double>(indices.size());
}

PretrainResult pretrain_encoder(const PretrainConfig& config, std::span<const DenoiseSample> data,
                                const PretrainObserver& observer) {
  if (data.size() < 10) {
    throw Error(ErrorCode::ConfigError, "pretraining needs at least 10 proteins, got " + std::to_string(data.size()));
  }
  if (config.batch_size < 1 || config.epochs < 0) throw Error(ErrorCode::ConfigError, "bad pretraining schedule");
  for (const auto& s : data) {
    if (s.node_inputs.cols() != config.encoder.input_dim) {
      throw Error(ErrorCode::ShapeMismatch, "sample inputs have " + std::to_string(s.node_inputs.cols()) +
                                                " columns, encoder expects " + std::to_string(config.encoder.input_dim));
    }
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.val_fraction * static_cast<double>(data.size()))));
  const std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  InvariantEncoder encoder(config.encoder, mix(config.seed, 1));
  DecoderHead decoder(config.encoder.hidden, config.encoder.hidden, mix(config.seed, 2));
  std::vector<ad::Tensor> params = joint_params(encoder, decoder);
  AdamW opt(params, AdamWOptions{.lr = config.lr, .weight_decay = 0.0});
  LrSchedule schedule = LrSchedule::cosine(config.lr, config.epochs);
  const std::uint64_t val_seed = mix(config.seed, 3);

  PretrainResult result;
  result.initial_val_loss =
      validation_loss(encoder, decoder, data, val, config.sigma_min, config.sigma_max, val_seed);
  result.best_val_loss = result.initial_val_loss;
  ParamStore best = encoder.params().clone();

  std::uniform_real_distribution<double> sigma_dist(config.sigma_min, config.sigma_max);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(train.size(), start + static_cast<std::size_t>(config.batch_size));
      const double sigma = sigma_dist(rng);
      opt.zero_grad();
      ad::Tensor batch_loss;
      for (std::size_t k = start; k < end; ++k) {
        const DenoiseBatch b = corrupt(data[train[k]], sigma, rng());
        ad::Tensor l = denoise_loss(encoder, decoder, b).total;
        batch_loss = batch_loss.defined() ? ad::add(batch_loss, l) : l;
      }
      batch_loss = ad::scale(batch_loss, 1.0 / static_cast<double>(end - start));
      const double value = batch_loss.item();
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::Divergence, "pretraining loss became " + std::to_string(value) + " in epoch " +
                                               std::to_string(epoch) + " at lr " + std::to_string(opt.lr()));
      }
      loss_sum += value * static_cast<double>(end - start);
      ad::backward(batch_loss);
      clip_grad_norm(params, config.clip_norm);
      opt.step();
    }

    PretrainEpoch rec;
    rec.epoch = epoch;
    rec.lr = opt.lr();
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.val_loss = validation_loss(encoder, decoder, data, val, config.sigma_min, config.sigma_max, val_seed);
    if (!std::isfinite(rec.val_loss)) throw Error(ErrorCode::Divergence, "validation loss is not finite");
    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      best = encoder.params().clone();
    }
    result.history.push_back(rec);
    if (observer) observer(rec);
    opt.set_lr(schedule.step(epoch));
  }

  result.encoder = InvariantEncoder::from_params(config.encoder, std::move(best));
  return result;
}

}  // namespace prime
