// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include "testkit.hpp"

#include "prime/dataset.hpp"
#include "prime/features.hpp"
#include "prime/geometry.hpp"
#include "prime/io.hpp"
#include "prime/metrics.hpp"
#include "prime/optim.hpp"
#include "prime/pretrain.hpp"
#include "prime/prime_net.hpp"
#include "prime/sse_assign.hpp"
#include "prime/training.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace prime;
namespace tk = prime::testkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_rel(const Matrix& got, const Matrix& want) {
  const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-300);
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

Matrix oracle_normalize(const Matrix& a) {
  Eigen::VectorXd s(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double d = a.row(i).sum();
    s[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 1.0;
  }
  return s.asDiagonal() * a * s.asDiagonal();
}

PreparedGraph featurized_graph(const ProteinGraph& g, const Encoders& enc) {
  const auto f = featurize(g, enc, EmbeddingSource::stub());
  std::array<Matrix, kLevels> m;
  for (int l = 0; l < kLevels; ++l) m[static_cast<std::size_t>(l)] = f[static_cast<std::size_t>(l)].data;
  return prepare_graph(g.hierarchy, std::move(m), g.id);
}

Encoders random_encoders(std::uint64_t seed) {
  return {InvariantEncoder(EncoderConfig{.input_dim = kSurfaceInputDim, .hidden = kFeatureDims[0] - 2}, seed),
          InvariantEncoder(EncoderConfig{.input_dim = kAtomInputDim, .hidden = kFeatureDims[1]}, seed + 1)};
}

// ---------------------------------------------------------------------------

Outcome coarsening_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(2, 500);
  int mismatches = 0, compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Hierarchy h = tk::random_hierarchy(rng, size(rng), 0.04);
    Matrix a = h.graphs[0].adjacency.to_dense();
    for (int l = 1; l < kLevels; ++l) {
      const Matrix p = tk::dense_partition(h.partition_into(l));
      a = p.transpose() * a * p;
      const SparseAdjacency got = coarsen(h.graphs[static_cast<std::size_t>(l - 1)].adjacency, h.partition_into(l));
      ++compared;
      if (!(got == SparseAdjacency::from_dense(a)) || !(h.graphs[static_cast<std::size_t>(l)].adjacency == got)) {
        ++mismatches;
      }
    }
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 10.0,
          std::to_string(compared) + " coarsenings over 100 hierarchies, " + std::to_string(mismatches) +
              " mismatches, " + fmt("%.2f s", t)};
}

std::vector<Hierarchy> protein_hierarchies(int count, int residues) {
  std::vector<Hierarchy> out;
  for (int i = 0; i < count; ++i) {
    const SyntheticProtein p = gen_synthetic(500 + static_cast<std::uint64_t>(i), residues + 3 * i);
    out.push_back(build_hierarchy(p.structure, p.mesh).hierarchy);
  }
  return out;
}

Outcome partition_invariants() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> size(2, 500);
  std::vector<Hierarchy> hs = protein_hierarchies(5, 30);
  for (int i = 0; i < 100; ++i) hs.push_back(tk::random_hierarchy(rng, size(rng)));
  int bad_rows = 0, bad_nnz = 0, bad_mass = 0;
  for (const auto& h : hs) {
    const double mass = h.graphs[0].adjacency.total_weight();
    for (int l = 1; l < kLevels; ++l) {
      const PartitionMatrix& pi = h.partition_into(l);
      const Matrix p = pi.to_dense();
      if ((p.rowwise().sum().array() != 1.0).any()) ++bad_rows;
      const auto nonzero = (p.array() != 0.0).count();
      if (nonzero != pi.fine_count || static_cast<int>(pi.nnz()) != h.graphs[static_cast<std::size_t>(l - 1)].node_count()) {
        ++bad_nnz;
      }
      if (h.graphs[static_cast<std::size_t>(l)].adjacency.total_weight() != mass) ++bad_mass;
    }
  }
  return {bad_rows + bad_nnz + bad_mass == 0,
          std::to_string(hs.size() * 4) + " partitions; row-sum violations " + std::to_string(bad_rows) +
              ", nnz violations " + std::to_string(bad_nnz) + ", mass violations " + std::to_string(bad_mass)};
}

Outcome spectral_bound() {
  std::vector<SparseAdjacency> mats;
  for (const auto& h : protein_hierarchies(4, 20)) {
    for (const auto& g : h.graphs) mats.push_back(g.normalized);
  }
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> size(5, 300);
  while (mats.size() < 60) {
    const Hierarchy h = tk::random_hierarchy(rng, size(rng), 0.08);
    for (const auto& g : h.graphs) mats.push_back(g.normalized);
  }
  double worst = 0.0;
  int checked = 0;
  for (const auto& m : mats) {
    if (m.n > 300) continue;
    const Matrix dense = m.to_dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(dense), Eigen::EigenvaluesOnly);
    worst = std::max(worst, es.eigenvalues().cwiseAbs().maxCoeff());
    ++checked;
  }
  return {checked >= 50 && worst <= 1.0 + 1e-9,
          std::to_string(checked) + " matrices, max |lambda| = " + fmt("%.15f", worst)};
}

Outcome se3_invariance() {
  const auto t0 = std::chrono::steady_clock::now();
  const Encoders enc = random_encoders(41);
  PrimeConfig cfg;
  cfg.outputs = 4;
  cfg.readout = ReadoutKind::CrossAttention;
  const PrimeModel model(cfg, 42);
  double worst = 0.0;
  int runs = 0;
  for (int p = 0; p < 5; ++p) {
    const SyntheticProtein base = gen_synthetic(600 + static_cast<std::uint64_t>(p), 24 + 4 * p);
    ad::NoGradGuard no_grad;
    ForwardContext ctx;
    const Matrix ref = model.predict(featurized_graph(build_hierarchy(base.structure, base.mesh), enc), ctx).logits.value();
    for (int m = 0; m < 20; ++m) {
      SyntheticProtein moved = base;
      const RigidMotion motion = RigidMotion::random(1000 * static_cast<std::uint64_t>(p) + static_cast<std::uint64_t>(m));
      apply(motion, moved.structure);
      apply(motion, moved.mesh);
      ForwardContext c2;
      const Matrix got =
          model.predict(featurized_graph(build_hierarchy(moved.structure, moved.mesh), enc), c2).logits.value();
      worst = std::max(worst, max_rel(got, ref));
      ++runs;
    }
  }
  const double t = seconds_since(t0);
  return {worst < 1e-9 && t < 60.0, std::to_string(runs) + " rigid motions, max relative change " + fmt("%.3e", worst) +
                                        fmt(", %.1f s", t)};
}

// Five-point central differences over every parameter scalar.
double gradient_check(PrimeModel& model, const std::function<ad::Tensor()>& loss_fn, std::size_t& scalars) {
  model.params().zero_grad();
  ad::backward(loss_fn());
  std::vector<Matrix> analytic;
  for (const auto& t : model.params().tensors()) analytic.push_back(t.grad());
  const double h = 1e-4;
  double worst = 0.0;
  scalars = 0;
  ad::NoGradGuard no_grad;
  for (std::size_t k = 0; k < model.params().size(); ++k) {
    ad::Tensor p = model.params().tensors()[k];
    for (Eigen::Index i = 0; i < p.value().size(); ++i) {
      const double orig = p.value().data()[i];
      auto at = [&](double offset) {
        p.mutable_value().data()[i] = orig + offset;
        return loss_fn().item();
      };
      const double numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
      p.mutable_value().data()[i] = orig;
      const double a = analytic[k].data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-7});
      worst = std::max(worst, std::abs(a - numeric) / denom);
      ++scalars;
    }
  }
  return worst;
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const Hierarchy toy = tk::toy_hierarchy();
  std::mt19937_64 rng(505);
  const PreparedGraph g = prepare_graph(toy, tk::random_features(toy, kFeatureDims, rng));

  PrimeConfig attn;
  attn.hidden = 6;
  attn.head_hidden = 5;
  attn.layers = 2;
  attn.outputs = 3;
  attn.readout = ReadoutKind::CrossAttention;
  PrimeModel m1(attn, 7);
  std::size_t n1 = 0;
  const double e1 = gradient_check(
      m1,
      [&] {
        ForwardContext ctx;
        const int label[] = {2};
        return ad::cross_entropy(m1.predict(g, ctx).logits, label);
      },
      n1);

  PrimeConfig fixed = attn;
  fixed.readout = ReadoutKind::Fixed;
  fixed.readout_level = static_cast<int>(Level::Sse);
  fixed.task = TaskKind::Multilabel;
  PrimeModel m2(fixed, 8);
  const Matrix targets = (Matrix(1, 3) << 1.0, 0.0, 1.0).finished();
  std::size_t n2 = 0;
  const double e2 = gradient_check(
      m2,
      [&] {
        ForwardContext ctx;
        return ad::bce_with_logits(m2.predict(g, ctx).logits, targets);
      },
      n2);
  const double t = seconds_since(t0);
  const double worst = std::max(e1, e2);
  return {worst < 1e-4 && t < 300.0, std::to_string(n1 + n2) + " parameter scalars over two readouts, max relative error " +
                                         fmt("%.3e", worst) + fmt(", %.1f s", t)};
}

// Straight-line dense evaluation of the network from its named parameters.
struct DenseNet {
  const ParamStore& p;
  const PrimeConfig& c;

  Matrix w(const std::string& n) const { return p.get(n + ".w").value(); }
  Matrix lin(const Matrix& x, const std::string& n) const {
    Matrix y = x * w(n);
    if (p.contains(n + ".b")) y.rowwise() += p.get(n + ".b").value().row(0);
    return y;
  }
  Matrix ln(const Matrix& x, const std::string& n) const {
    const Matrix g = p.get(n + ".gamma").value(), b = p.get(n + ".beta").value();
    Matrix y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double mu = x.row(r).mean();
      double var = 0.0;
      for (Eigen::Index j = 0; j < x.cols(); ++j) var += (x(r, j) - mu) * (x(r, j) - mu);
      var /= static_cast<double>(x.cols());
      for (Eigen::Index j = 0; j < x.cols(); ++j) y(r, j) = (x(r, j) - mu) / std::sqrt(var + 1e-5) * g(0, j) + b(0, j);
    }
    return y;
  }
  static Matrix relu(Matrix x) { return x.cwiseMax(0.0); }
  static Matrix gelu(Matrix x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      x.data()[i] = 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
    }
    return x;
  }
  static Matrix sigmoid(Matrix x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
    return x;
  }
  Matrix fuse(const Matrix& z, const Matrix& ctx, const std::string& q) const {
    Matrix zc(z.rows(), z.cols() + ctx.cols());
    zc << z, ctx;
    const Matrix g = sigmoid(lin(zc, q + "gate"));
    return ln(z + g.cwiseProduct(lin(ctx, q + "update")), q + "ln");
  }

  std::array<Matrix, kLevels> states(const std::array<Matrix, kLevels>& adj_hat, const std::array<Matrix, kLevels - 1>& pis,
                                     const std::array<Matrix, kLevels>& z) const {
    std::array<Matrix, kLevels> h;
    for (int l = 0; l < kLevels; ++l) h[l] = relu(ln(z[l] * w("in." + std::to_string(l)), "in." + std::to_string(l) + ".ln"));
    for (int n = 0; n < c.layers; ++n) {
      const std::string L = "L" + std::to_string(n) + ".";
      const auto prev = h;
      for (int l = 0; l < kLevels; ++l) {
        const std::string q = L + "intra." + std::to_string(l) + ".";
        const Matrix x = ln(h[l], q + "ln1");
        const Matrix h1 = h[l] + lin(x, q + "self") + (adj_hat[l] * x) * w(q + "neigh");
        h[l] = h1 + lin(gelu(lin(ln(h1, q + "ln2"), q + "ffn_in")), q + "ffn_out");
      }
      for (int l = 1; l < kLevels; ++l) {
        const std::string q = L + "up." + std::to_string(l) + ".";
        h[l] = fuse(h[l], (pis[l - 1].transpose() * h[l - 1]) * w(q + "proj"), q);
      }
      for (int l = kLevels - 1; l >= 1; --l) {
        const std::string q = L + "down." + std::to_string(l) + ".";
        h[l - 1] = fuse(h[l - 1], (pis[l - 1] * h[l]) * w(q + "proj"), q);
      }
      for (int l = 0; l < kLevels; ++l) h[l] += prev[l];
    }
    return h;
  }

  Matrix head(const Matrix& x) const { return lin(relu(lin(relu(lin(x, "head.fc1")), "head.fc2")), "head.fc3"); }

  Matrix logits(const std::array<Matrix, kLevels>& h) const {
    if (c.readout == ReadoutKind::Fixed) return head(h[c.readout_level].colwise().mean());
    Matrix pooled(kLevels, c.hidden);
    for (int l = 0; l < kLevels; ++l) pooled.row(l) = h[l].colwise().mean();
    const Matrix k = pooled * w("attn.key"), v = pooled * w("attn.value");
    Matrix s = p.get("attn.query").value() * k.transpose() / std::sqrt(static_cast<double>(c.hidden));
    s = (s.array() - s.maxCoeff()).exp().matrix();
    s /= s.sum();
    return head(s * v);
  }
};

Outcome algorithm_fidelity() {
  const Hierarchy toy = tk::toy_hierarchy();
  std::array<Matrix, kLevels> adj_hat;
  std::array<Matrix, kLevels - 1> pis;
  Matrix a = toy.graphs[0].adjacency.to_dense();
  adj_hat[0] = oracle_normalize(a);
  for (int l = 1; l < kLevels; ++l) {
    pis[l - 1] = tk::dense_partition(toy.partition_into(l));
    a = pis[l - 1].transpose() * a * pis[l - 1];
    adj_hat[l] = oracle_normalize(a);
  }
  std::mt19937_64 rng(606);
  const auto z = tk::random_features(toy, kFeatureDims, rng);
  const PreparedGraph g = prepare_graph(toy, z);

  double worst = 0.0;
  for (ReadoutKind r : {ReadoutKind::Fixed, ReadoutKind::CrossAttention}) {
    PrimeConfig cfg;
    cfg.hidden = 16;
    cfg.head_hidden = 12;
    cfg.layers = 1;
    cfg.outputs = 3;
    cfg.readout = r;
    const PrimeModel model(cfg, 9);
    ad::NoGradGuard no_grad;
    ForwardContext ctx;
    const LevelStates got = model.forward(g, ctx);
    const DenseNet net{model.params(), cfg};
    const auto want = net.states(adj_hat, pis, z);
    for (int l = 0; l < kLevels; ++l) worst = std::max(worst, (got[l].value() - want[l]).cwiseAbs().maxCoeff());
    const Matrix logits = model.readout(got, ctx).logits.value();
    worst = std::max(worst, (logits - net.logits(want)).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-10, "fixed and cross-attention readouts, max abs difference " + fmt("%.3e", worst)};
}

Outcome gated_fusion_formula() {
  std::mt19937_64 rng(707);
  const int d = 9, n = 7;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    ParamStore store;
    FusionParams fp{make_linear(store, "gate", 2 * d, d, true, rng), make_linear(store, "update", d, d, false, rng),
                    make_layer_norm(store, "ln", d)};
    store.get("ln.gamma").mutable_value() = tk::random_matrix(rng, 1, d);
    store.get("ln.beta").mutable_value() = tk::random_matrix(rng, 1, d);
    const Matrix z = tk::random_matrix(rng, n, d), c = tk::random_matrix(rng, n, d);
    ForwardContext ctx;
    const Matrix got = gated_fusion(fp, ad::Tensor::constant(z), ad::Tensor::constant(c), 0.3, ctx).value();
    const DenseNet net{store, PrimeConfig{}};
    worst = std::max(worst, (got - net.fuse(z, c, "")).cwiseAbs().maxCoeff());
  }

  // Zero gate weights and bias: the gate is exactly one half.
  ParamStore store;
  FusionParams fp{make_linear(store, "gate", 2 * d, d, true, rng), make_linear(store, "update", d, d, false, rng),
                  make_layer_norm(store, "ln", d)};
  store.get("gate.w").mutable_value().setZero();
  store.get("gate.b").mutable_value().setZero();
  const Matrix z = tk::random_matrix(rng, n, d), c = tk::random_matrix(rng, n, d);
  const std::vector<ad::Tensor> zc{ad::Tensor::constant(z), ad::Tensor::constant(c)};
  const Matrix gate = ad::sigmoid(fp.gate(ad::concat(zc, 1))).value();
  const bool half = (gate.array() == 0.5).all();
  ForwardContext ctx;
  const Matrix got = gated_fusion(fp, zc[0], zc[1], 0.0, ctx).value();
  const DenseNet net{store, PrimeConfig{}};
  const Matrix half_update = z + 0.5 * (c * store.get("update.w").value());
  const double half_err = (got - net.ln(half_update, "ln")).cwiseAbs().maxCoeff();
  return {worst < 1e-12 && half && half_err < 1e-12,
          "20 random trials max error " + fmt("%.3e", worst) + (half ? "; W_g=0 gives g=0.5 exactly" : "; gate != 0.5") +
              fmt(" (fusion error %.1e)", half_err)};
}

Outcome optimization_recipe() {
  const double eta = 1e-3;
  // Direct schedule trace against hand-derived values.
  LrSchedule s = LrSchedule::warmup_plateau(eta);
  const std::vector<double> metrics = {0.1, 0.2, 0.3, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.7, 0.7, 0.7, 0.7, 0.7, 0.7, 0.7};
  std::vector<double> want = {0.01 * eta, (0.01 + 0.99 / 3.0) * eta, (0.01 + 0.99 * 2.0 / 3.0) * eta};
  for (int e = 3; e <= 8; ++e) want.push_back(eta);
  for (int e = 9; e <= 14; ++e) want.push_back(eta * 0.6);
  want.push_back(eta * 0.6 * 0.6);
  double trace_err = 0.0;
  for (std::size_t e = 0; e < want.size(); ++e) {
    trace_err = std::max(trace_err, std::abs(s.current() - want[e]) / want[e]);
    if (e < metrics.size()) s.step(static_cast<int>(e), metrics[e]);
  }

  // The training loop's recorded trace against an independent replay of its
  // validation metrics.
  const fs::path dir = tk::scratch_dir("acceptance_lr");
  write_synthetic_dataset(dir, {.seed = 3, .count = 10, .task = TaskKind::Multiclass});
  TrainConfig c;
  c.hidden = 8;
  c.head_hidden = 8;
  c.layers = 1;
  c.batch_size = 4;
  c.max_epochs = 16;
  c.early_stop_patience = 100;
  const Encoders enc = random_encoders(5);
  std::vector<Sample> samples;
  for (const auto& e : read_manifest(dir)) {
    HierarchyFile f = build_entry(dir, e, c);
    attach_features(f, dir, enc, EmbeddingSource::stub());
    samples.push_back(make_sample(f, e, c));
  }
  const std::span<const Sample> all(samples);
  const TrainResult r = train(c, all.subspan(0, 7), all.subspan(7, 3));
  double replay_err = 0.0;
  double lr = 0.01 * c.lr, plateau = c.lr;
  std::optional<double> best;
  int bad = 0;
  for (const auto& rec : r.history) {
    replay_err = std::max(replay_err, std::abs(rec.lr - lr) / lr);
    const int e = rec.epoch;
    if (e >= 3) {
      if (!best || rec.val_metric > *best + 1e-6) {
        best = rec.val_metric;
        bad = 0;
      } else if (++bad >= 5) {
        plateau *= 0.6;
        bad = 0;
      }
    }
    lr = e + 1 < 3 ? c.lr * (0.01 + 0.99 * (e + 1) / 3.0) : plateau;
  }
  fs::remove_all(dir);

  // Clipping.
  std::mt19937_64 rng(808);
  std::vector<ad::Tensor> params;
  for (int i = 0; i < 6; ++i) {
    params.push_back(ad::Tensor::parameter(tk::random_matrix(rng, 3 + i, 4)));
    params.back().mutable_grad() = tk::random_matrix(rng, 3 + i, 4, 4.0);
  }
  const double before = clip_grad_norm(params, 5.0);
  double sq = 0.0;
  for (const auto& p : params) sq += p.grad().squaredNorm();
  const double after = std::sqrt(sq);

  const bool ok = trace_err < 1e-15 && replay_err < 1e-15 && r.history.size() == 16 && before > 5.0 &&
                  std::abs(after - 5.0) <= 1e-12;
  return {ok, "schedule trace error " + fmt("%.1e", trace_err) + ", training replay error " + fmt("%.1e", replay_err) +
                  " over " + std::to_string(r.history.size()) + " epochs, clip " + fmt("%.3f -> %.15f", before, after)};
}

Outcome denoising_pretraining() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<DenoiseSample> data;
  for (int i = 0; i < 50; ++i) {
    const SyntheticProtein p = gen_synthetic(900 + static_cast<std::uint64_t>(i), 16 + i % 9);
    data.push_back(atom_denoise_sample(p.structure));
  }
  PretrainConfig pc;
  pc.seed = 77;
  const PretrainResult r = pretrain_encoder(pc, data);
  const double first = r.history.front().val_loss;
  const bool decreased = r.best_epoch > 0 && r.best_val_loss < first && first < r.initial_val_loss;

  // Loss formula against a direct evaluation.
  const DecoderHead dec(pc.encoder.hidden, pc.encoder.hidden, 78);
  const DenoiseBatch b = corrupt(data[3], 0.3, 79);
  const DenoiseLoss got = denoise_loss(r.encoder, dec, b);
  const Matrix z = r.encoder.forward(*b.node_inputs, b.noisy_coords, *b.encoder_graph).value();
  const Matrix pred = dec.forward(ad::Tensor::constant(z)).value();
  const Matrix target = b.clean_coords - b.noisy_coords;
  const double denoise = (pred - target).squaredNorm() / static_cast<double>(target.size());
  double smooth = 0.0;
  int edges = 0;
  for (const auto& e : b.graph->entries) {
    if (e.row == e.col) continue;
    smooth += (z.row(e.row) - z.row(e.col)).squaredNorm();
    ++edges;
  }
  smooth /= edges;
  const double total = denoise + 0.01 * smooth;
  const double formula_err = std::abs(got.total.item() - total) / total;

  // Invariance of the trained encoder.
  const RigidMotion motion = RigidMotion::random(80);
  Matrix moved = data[5].coords;
  for (Eigen::Index i = 0; i < moved.rows(); ++i) moved.row(i) = motion.apply(moved.row(i).transpose()).transpose();
  const Matrix z0 = r.encoder.forward(data[5].node_inputs, data[5].coords, data[5].encoder_graph).value();
  const Matrix z1 = r.encoder.forward(data[5].node_inputs, moved, data[5].encoder_graph).value();
  const double inv = max_rel(z1, z0);
  const double t = seconds_since(t0);
  return {decreased && formula_err < 1e-12 && inv < 1e-9,
          "val loss init " + fmt("%.4f, epoch 0 %.4f", r.initial_val_loss, first) +
              fmt(", best %.4f at epoch ", r.best_val_loss) + std::to_string(r.best_epoch) +
              fmt("; formula error %.1e", formula_err) + fmt(", invariance %.1e", inv) + fmt(", %.0f s", t)};
}

Outcome overfit_capacity() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = tk::scratch_dir("acceptance_overfit");
  write_synthetic_dataset(dir, {.seed = 1, .count = 20, .task = TaskKind::Multiclass});
  TrainConfig c;
  c.batch_size = 4;
  c.max_epochs = 200;
  c.early_stop_patience = 1000;
  c.target_train_metric = 1.0;
  const Encoders enc = random_encoders(12);
  std::vector<Sample> samples;
  for (const auto& e : read_manifest(dir)) {
    HierarchyFile f = build_entry(dir, e, c);
    attach_features(f, dir, enc, EmbeddingSource::stub());
    samples.push_back(make_sample(f, e, c));
  }
  fs::remove_all(dir);

  const TrainResult full = train(c, samples, samples);
  const double full_acc = *full.history.back().train_metric;
  const int full_epochs = static_cast<int>(full.history.size());

  TrainConfig ablated = c;
  ablated.active[static_cast<std::size_t>(Level::Sse)] = false;
  ablated.max_epochs = 30;
  const TrainResult ab = train(ablated, samples, samples);
  double ab_best = 0.0;
  for (const auto& e : ab.history) ab_best = std::max(ab_best, *e.train_metric);
  const double t = seconds_since(t0);
  return {full_acc == 1.0 && ab_best < full_acc && t < 600.0,
          "full model train accuracy " + fmt("%.3f", full_acc) + " after " + std::to_string(full_epochs) +
              " epochs; without sse best " + fmt("%.3f", ab_best) + " in " + std::to_string(ab.history.size()) +
              fmt(" epochs; %.0f s", t)};
}

Outcome complexity_scaling() {
  const SyntheticProtein p = gen_synthetic(1100, 20);
  HierarchyOptions opt;
  opt.face_cap = 4096;
  PrimeConfig cfg;
  cfg.outputs = 4;
  const PrimeModel model(cfg, 11);
  std::mt19937_64 rng(1111);
  std::vector<double> x, y;
  std::string pts;
  for (int faces = 256; faces <= 4096; faces *= 2) {
    SurfaceMesh mesh = sphere_mesh(1200 + static_cast<std::uint64_t>(faces), faces / 2 + 2, 18.0);
    const Vec3 centre = p.structure.centroid();
    for (auto& v : mesh.vertices) v += centre;
    const ProteinGraph g = build_hierarchy(p.structure, mesh, opt);
    const PreparedGraph pg = prepare_graph(g.hierarchy, tk::random_features(g.hierarchy, kFeatureDims, rng));
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      ad::NoGradGuard no_grad;
      ForwardContext ctx;
      const auto t0 = std::chrono::steady_clock::now();
      const Prediction out = model.predict(pg, ctx);
      best = std::min(best, seconds_since(t0));
    }
    x.push_back(static_cast<double>(pg.surface_nnz));
    y.push_back(best);
    pts += " " + std::to_string(pg.surface_nnz) + ":" + fmt("%.1fms", 1e3 * best);
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);
  return {r2 > 0.95, "R^2 = " + fmt("%.4f", r2) + " (nnz:time" + pts + ")"};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(1212);
  double worst_acc = 0.0, worst_f = 0.0, worst_auc = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 30)(rng);
    const int k = std::uniform_int_distribution<int>(2, 6)(rng);
    std::uniform_int_distribution<int> small(-2, 2), cls(0, k - 1);
    Matrix logits(n, k);
    std::vector<int> labels(static_cast<std::size_t>(n));
    int correct = 0;
    for (int r = 0; r < n; ++r) {
      for (int j = 0; j < k; ++j) logits(r, j) = small(rng);
      labels[static_cast<std::size_t>(r)] = cls(rng);
      const double top = logits.row(r).maxCoeff();
      int arg = 0;
      while (logits(r, arg) != top) ++arg;
      correct += arg == labels[static_cast<std::size_t>(r)];
    }
    worst_acc = std::max(worst_acc, std::abs(compute_accuracy(logits, labels) - static_cast<double>(correct) / n));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 15)(rng);
    const int k = std::uniform_int_distribution<int>(1, 8)(rng);
    Matrix scores(n, k), labels = Matrix::Zero(n, k);
    std::uniform_int_distribution<int> grid(0, 100);
    std::uniform_real_distribution<double> real(0.0, 1.0);
    std::bernoulli_distribution pos(0.35), on_grid(0.5);
    for (int r = 0; r < n; ++r) {
      for (int j = 0; j < k; ++j) {
        scores(r, j) = on_grid(rng) ? grid(rng) / 100.0 : real(rng);
        labels(r, j) = pos(rng) ? 1.0 : 0.0;
      }
    }
    if (labels.sum() == 0) labels(0, 0) = 1.0;
    double best = 0.0;
    for (int t = 1; t <= 100; ++t) {
      const double tau = t / 100.0;
      std::vector<double> precisions, recalls;
      for (int r = 0; r < n; ++r) {
        std::set<int> predicted, truth;
        for (int j = 0; j < k; ++j) {
          if (scores(r, j) >= tau) predicted.insert(j);
          if (labels(r, j) == 1.0) truth.insert(j);
        }
        int hit = 0;
        for (int j : predicted) hit += static_cast<int>(truth.count(j));
        if (!predicted.empty()) precisions.push_back(static_cast<double>(hit) / static_cast<double>(predicted.size()));
        recalls.push_back(truth.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(truth.size()));
      }
      if (precisions.empty()) continue;
      const double pr = std::accumulate(precisions.begin(), precisions.end(), 0.0) / static_cast<double>(precisions.size());
      const double rc = std::accumulate(recalls.begin(), recalls.end(), 0.0) / static_cast<double>(recalls.size());
      if (pr + rc > 0) best = std::max(best, 2 * pr * rc / (pr + rc));
    }
    worst_f = std::max(worst_f, std::abs(compute_fmax(scores, labels) - best));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 60)(rng);
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> lab(static_cast<std::size_t>(n));
    std::uniform_int_distribution<int> grid(0, 9);
    std::bernoulli_distribution coin(0.4);
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = grid(rng) * 0.1;
      lab[static_cast<std::size_t>(i)] = coin(rng) ? 1 : 0;
    }
    lab[0] = 1;
    lab[1] = 0;
    double wins = 0, pairs = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (lab[static_cast<std::size_t>(i)] != 1 || lab[static_cast<std::size_t>(j)] != 0) continue;
        pairs += 1;
        if (s[static_cast<std::size_t>(i)] > s[static_cast<std::size_t>(j)]) wins += 1;
        else if (s[static_cast<std::size_t>(i)] == s[static_cast<std::size_t>(j)]) wins += 0.5;
      }
    }
    worst_auc = std::max(worst_auc, std::abs(compute_roc_auc(s, lab) - wins / pairs));
  }
  return {worst_acc <= 1e-12 && worst_f <= 1e-12 && worst_auc <= 1e-12,
          "max deviation accuracy " + fmt("%.1e", worst_acc) + ", F_max " + fmt("%.1e", worst_f) + ", ROC-AUC " +
              fmt("%.1e", worst_auc)};
}

Outcome dssp_lite() {
  const std::vector<SegmentPlan> helix = {{SegmentKind::Helix, 20}};
  const SyntheticProtein h = gen_synthetic(1300, helix);
  const auto hl = assign_sse(h.structure);
  int interior_h = 0;
  for (int i = 2; i <= 17; ++i) interior_h += hl[static_cast<std::size_t>(i)] == SseLabel::H;

  const std::vector<SegmentPlan> ext = {{SegmentKind::Extended, 20}};
  const auto el = assign_sse(gen_synthetic(1301, ext).structure);
  int ext_l = 0;
  for (SseLabel l : el) ext_l += l == SseLabel::L;

  int bad_segmentations = 0;
  for (int i = 0; i < 30; ++i) {
    const SyntheticProtein p = gen_synthetic(1400 + static_cast<std::uint64_t>(i), 20 + 3 * i);
    const auto labels = assign_sse(p.structure);
    const auto segs = segment_sse(labels);
    int next = 0;
    bool ok = !segs.empty();
    for (std::size_t s = 0; s < segs.size() && ok; ++s) {
      ok = segs[s].start == next && segs[s].end >= segs[s].start &&
           (s == 0 || segs[s].label != segs[s - 1].label);
      for (int r = segs[s].start; ok && r <= segs[s].end; ++r) ok = labels[static_cast<std::size_t>(r)] == segs[s].label;
      next = segs[s].end + 1;
    }
    ok = ok && next == static_cast<int>(labels.size());
    bad_segmentations += !ok;
  }
  return {interior_h == 16 && ext_l == 20 && bad_segmentations == 0,
          "helix interior " + std::to_string(interior_h) + "/16 H, extended " + std::to_string(ext_l) +
              "/20 L, segmentation failures " + std::to_string(bad_segmentations) + "/30"};
}

Outcome cross_attention_readout() {
  const Encoders enc = random_encoders(1500);
  PrimeConfig cfg;
  cfg.outputs = 4;
  cfg.readout = ReadoutKind::CrossAttention;
  PrimeModel model(cfg, 15);
  double worst_sum = 0.0;
  bool in_range = true;
  for (int i = 0; i < 5; ++i) {
    const SyntheticProtein p = gen_synthetic(1510 + static_cast<std::uint64_t>(i), 24);
    ForwardContext ctx;
    ad::NoGradGuard no_grad;
    const Prediction out = model.predict(featurized_graph(build_hierarchy(p.structure, p.mesh), enc), ctx);
    double s = 0.0;
    for (double w : out.attention) {
      s += w;
      in_range = in_range && w > 0.0 && w < 1.0;
    }
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }

  PrimeModel equal = model.clone();
  equal.params().get("attn.key.w").mutable_value().setZero();
  const SyntheticProtein p = gen_synthetic(1520, 24);
  ForwardContext ctx;
  const Prediction eq = equal.predict(featurized_graph(build_hierarchy(p.structure, p.mesh), enc), ctx);
  double eq_err = 0.0;
  for (double w : eq.attention) eq_err = std::max(eq_err, std::abs(w - 0.2));

  // Report file through the command-line tool.
  const fs::path dir = tk::scratch_dir("acceptance_attn");
  TrainConfig tc;
  tc.readout = ReadoutKind::CrossAttention;
  write_synthetic_dataset(dir, {.seed = 4, .count = 6, .task = TaskKind::Multiclass});
  const auto entries = read_manifest(dir);
  for (const auto& e : entries) {
    HierarchyFile f = build_entry(dir, e, tc);
    attach_features(f, dir, enc, EmbeddingSource::stub());
    write_hierarchy_file(hierarchy_path(dir, e.id), f);
  }
  write_checkpoint(dir / "model.json", model_checkpoint(PrimeModel(model_config(tc), 16), tc));
  const std::string cmd = std::string("\"") + PRIME_CLI_PATH + "\" report-attn --data \"" + dir.string() +
                          "\" --checkpoint \"" + (dir / "model.json").string() + "\" --out \"" + (dir / "report").string() +
                          "\" 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  int rows = 0;
  bool rows_ok = rc == 0;
  std::ifstream in(dir / "report" / "attention.tsv");
  std::string line;
  std::getline(in, line);
  rows_ok = rows_ok && line == "id\tsurface\tatom\tresidue\tsse\tprotein";
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string id;
    ss >> id;
    double w = 0.0, s = 0.0;
    int cols = 0;
    while (ss >> w) {
      s += w;
      ++cols;
    }
    rows_ok = rows_ok && cols == 5 && std::abs(s - 1.0) < 1e-12 && id == entries[static_cast<std::size_t>(rows)].id;
    ++rows;
  }
  rows_ok = rows_ok && rows == static_cast<int>(entries.size());
  fs::remove_all(dir);
  return {worst_sum < 1e-12 && in_range && eq_err <= 1e-12 && rows_ok,
          "sum error " + fmt("%.1e", worst_sum) + ", equal-key deviation " + fmt("%.1e", eq_err) + ", report rows " +
              std::to_string(rows) + "/" + std::to_string(entries.size()) + (rows_ok ? " valid" : " invalid")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"coarsening oracle equivalence", coarsening_oracle},
      {"partition invariants", partition_invariants},
      {"normalization spectral bound", spectral_bound},
      {"rigid-motion invariance end to end", se3_invariance},
      {"gradient correctness", gradient_correctness},
      {"forward pass fidelity", algorithm_fidelity},
      {"gated fusion formula", gated_fusion_formula},
      {"optimization recipe", optimization_recipe},
      {"denoising pretraining", denoising_pretraining},
      {"overfit capacity and sse ablation", overfit_capacity},
      {"complexity scaling", complexity_scaling},
      {"metric oracles", metric_oracles},
      {"secondary structure assignment", dssp_lite},
      {"cross-attention readout", cross_attention_readout},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
