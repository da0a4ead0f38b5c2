#include "prime/dataset.hpp"
#include "prime/features.hpp"
#include "prime/io.hpp"
#include "prime/pretrain.hpp"
#include "prime/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace prime;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string level;
  std::vector<std::string> ablate;
};

TrainConfig resolve_config(const CommonFlags& f) {
  TrainConfig c = f.config.empty() ? TrainConfig{} : load_train_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.level.empty()) apply_setting(c, "readout_level", f.level);
  if (!f.ablate.empty()) {
    std::string joined;
    for (const auto& a : f.ablate) joined += (joined.empty() ? "" : ",") + a;
    apply_setting(c, "ablate", joined);
  }
  validate(c);
  return c;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void log(const std::string& msg) { std::cerr << msg << "\n"; }

std::string metrics_header(TaskKind kind) {
  switch (kind) {
    case TaskKind::Multiclass: return "split\tcount\taccuracy\n";
    case TaskKind::Multilabel: return "split\tcount\tf_max\n";
    case TaskKind::NodeBinary: return "split\tcount\troc_auc\n";
  }
  return {};
}

std::string metrics_row(const std::string& split, std::size_t count, const Metrics& m) {
  const double v = m.accuracy ? *m.accuracy : m.f_max ? *m.f_max : *m.roc_auc;
  return split + "\t" + std::to_string(count) + "\t" + fmt(v) + "\n";
}

std::string metrics_table(const PrimeModel& model, const std::map<std::string, std::vector<Sample>>& splits) {
  std::string text = metrics_header(model.config().task);
  for (const char* name : {"train", "val", "test"}) {
    const auto it = splits.find(name);
    if (it == splits.end() || it->second.empty()) continue;
    text += metrics_row(name, it->second.size(), evaluate(model, it->second));
  }
  return text;
}

Encoders load_encoders(const std::string& surface_path, const std::string& atom_path, std::uint64_t seed) {
  Encoders e{InvariantEncoder(EncoderConfig{.input_dim = kSurfaceInputDim, .hidden = kFeatureDims[0] - 2}, seed ^ 0x51ULL),
             InvariantEncoder(EncoderConfig{.input_dim = kAtomInputDim, .hidden = kFeatureDims[1]}, seed ^ 0xa7ULL)};
  if (!surface_path.empty()) e.surface = encoder_from_checkpoint(read_checkpoint(surface_path));
  if (!atom_path.empty()) e.atom = encoder_from_checkpoint(read_checkpoint(atom_path));
  return e;
}

int run_gen_synthetic(const CommonFlags& f, int count, const std::string& task) {
  const TrainConfig c = resolve_config(f);
  SyntheticDatasetOptions o;
  o.seed = c.seed;
  o.count = count;
  o.task = task_kind_from_name(task);
  const auto entries = write_synthetic_dataset(f.out, o);
  log("wrote " + std::to_string(entries.size()) + " proteins to " + f.out);
  return 0;
}

int run_build(const CommonFlags& f, const std::string& data, const std::string& pdb, const std::string& mesh) {
  const TrainConfig c = resolve_config(f);
  if (!pdb.empty() || !mesh.empty()) {
    if (pdb.empty() || mesh.empty() || f.out.empty()) {
      throw Error(ErrorCode::ConfigError, "single-protein build needs --pdb, --mesh and --out");
    }
    const fs::path p = fs::absolute(pdb);
    const DatasetEntry e{p.stem().string(), "train", "", p.filename().string(), fs::absolute(mesh).string()};
    const HierarchyFile h = build_entry(p.parent_path(), e, c);
    write_hierarchy_file(f.out, h);
    log("wrote " + f.out);
    return 0;
  }
  if (data.empty()) throw Error(ErrorCode::ConfigError, "build needs --data DIR or --pdb/--mesh");
  const auto entries = read_manifest(data);
  for (const auto& e : entries) write_hierarchy_file(hierarchy_path(data, e.id), build_entry(data, e, c));
  log("built " + std::to_string(entries.size()) + " hierarchies under " + (fs::path(data) / kHierarchyDir).string());
  return 0;
}

int run_featurize(const CommonFlags& f, const std::string& data, const std::string& surface_enc,
                  const std::string& atom_enc, const std::string& embeddings) {
  const TrainConfig c = resolve_config(f);
  const Encoders enc = load_encoders(surface_enc, atom_enc, c.seed);
  const EmbeddingSource source = embeddings.empty() ? EmbeddingSource::stub() : EmbeddingSource::from_file(embeddings);
  const auto entries = read_manifest(data);
  for (const auto& e : entries) {
    const fs::path path = hierarchy_path(data, e.id);
    HierarchyFile h = read_hierarchy_file(path);
    attach_features(h, data, enc, source);
    write_hierarchy_file(path, h);
  }
  log("featurized " + std::to_string(entries.size()) + " proteins");
  return 0;
}

int run_pretrain(const CommonFlags& f, const std::string& kind, const std::string& data) {
  const TrainConfig c = resolve_config(f);
  if (f.out.empty()) throw Error(ErrorCode::ConfigError, "pretrain-encoder needs --out FILE");
  const bool atom = kind == "atom";
  if (!atom && kind != "surface") throw Error(ErrorCode::ConfigError, "--kind must be atom or surface");

  std::vector<DenoiseSample> samples;
  auto add = [&](const ProteinStructure& s, const SurfaceMesh& mesh) {
    if (atom) {
      samples.push_back(atom_denoise_sample(subsample_atoms(s, c.atom_cap, c.seed), c.knn_k));
    } else {
      samples.push_back(surface_denoise_sample(face_geometry(cap_faces(mesh, c.face_cap, c.seed)), c.knn_k));
    }
  };
  if (!data.empty()) {
    for (const auto& e : read_manifest(data)) {
      add(parse_pdb(read_text_file(fs::path(data) / e.pdb), e.id), parse_mesh(read_text_file(fs::path(data) / e.mesh)).mesh);
    }
  } else {
    for (int i = 0; i < c.pretrain_count; ++i) {
      const SyntheticProtein p = gen_synthetic(c.seed * 7919ULL + static_cast<std::uint64_t>(i), 20 + i % 21);
      add(p.structure, p.mesh);
    }
  }

  PretrainConfig pc;
  pc.epochs = c.pretrain_epochs;
  pc.batch_size = c.pretrain_batch_size;
  pc.lr = c.pretrain_lr;
  pc.seed = c.seed;
  pc.encoder = atom ? EncoderConfig{.input_dim = kAtomInputDim, .hidden = kFeatureDims[1]}
                    : EncoderConfig{.input_dim = kSurfaceInputDim, .hidden = kFeatureDims[0] - 2};
  const PretrainResult r = pretrain_encoder(pc, samples, [](const PretrainEpoch& e) {
    log("epoch " + std::to_string(e.epoch) + " train " + fmt(e.train_loss) + " val " + fmt(e.val_loss));
  });
  write_checkpoint(f.out, encoder_checkpoint(r.encoder));
  log("initial val " + fmt(r.initial_val_loss) + ", best val " + fmt(r.best_val_loss) + "; wrote " + f.out);
  return 0;
}

int run_train(const CommonFlags& f, const std::string& data) {
  const TrainConfig c = resolve_config(f);
  if (f.out.empty()) throw Error(ErrorCode::ConfigError, "train needs --out DIR");
  auto splits = load_samples(data, c);
  const fs::path out(f.out);
  const TrainResult r = train(c, splits["train"], splits["val"], [](const EpochRecord& e) {
    log("epoch " + std::to_string(e.epoch) + " loss " + fmt(e.train_loss) + " lr " + fmt(e.lr) + " val " +
        fmt(e.val_metric));
  });
  std::string history = "epoch\ttrain_loss\tlr\tval_metric\ttrain_metric\n";
  for (const auto& e : r.history) {
    history += std::to_string(e.epoch) + "\t" + fmt(e.train_loss) + "\t" + fmt(e.lr) + "\t" + fmt(e.val_metric) + "\t" +
               (e.train_metric ? fmt(*e.train_metric) : "NA") + "\n";
  }
  write_text_file(out / "history.tsv", history);
  write_checkpoint(out / "model.json", model_checkpoint(r.model, c));
  write_text_file(out / "metrics.tsv", metrics_table(r.model, splits));
  log("best epoch " + std::to_string(r.best_epoch) + "; wrote " + (out / "model.json").string());
  return 0;
}

int run_eval(const CommonFlags& f, const std::string& data, const std::string& checkpoint) {
  if (f.out.empty()) throw Error(ErrorCode::ConfigError, "eval needs --out DIR");
  const LoadedModel m = model_from_checkpoint(read_checkpoint(checkpoint));
  const auto splits = load_samples(data, m.config);
  write_text_file(fs::path(f.out) / "metrics.tsv", metrics_table(m.model, splits));
  log("wrote " + (fs::path(f.out) / "metrics.tsv").string());
  return 0;
}

int run_report_attn(const CommonFlags& f, const std::string& data, const std::string& checkpoint) {
  if (f.out.empty()) throw Error(ErrorCode::ConfigError, "report-attn needs --out DIR");
  const LoadedModel m = model_from_checkpoint(read_checkpoint(checkpoint));
  if (m.config.readout != ReadoutKind::CrossAttention) {
    throw Error(ErrorCode::ConfigError, "checkpoint was not trained with readout = cross_attention");
  }
  std::string text = "id";
  for (int l = 0; l < kLevels; ++l) text += "\t" + std::string(level_name(l));
  text += "\n";
  const auto entries = read_manifest(data);
  for (const auto& e : entries) {
    const Sample s = make_sample(read_hierarchy_file(hierarchy_path(data, e.id)), e, m.config);
    ad::NoGradGuard no_grad;
    ForwardContext ctx;
    const Prediction p = m.model.predict(s.graph, ctx);
    text += e.id;
    for (double w : p.attention) text += "\t" + fmt(w);
    text += "\n";
  }
  write_text_file(fs::path(f.out) / "attention.tsv", text);
  log("wrote " + (fs::path(f.out) / "attention.tsv").string());
  return 0;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool readout_flags) {
  cmd->add_option("--config", f.config, "Flat key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Seed overriding the configuration");
  cmd->add_option("--out", f.out, "Output path");
  if (readout_flags) {
    cmd->add_option("--level", f.level, "Readout level override")
        ->check(CLI::IsMember({"surface", "atom", "residue", "sse", "protein"}));
    cmd->add_option("--ablate", f.ablate, "Level to remove (repeatable)")
        ->check(CLI::IsMember({"surface", "atom", "residue", "sse", "protein"}));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical protein graph network"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string data, pdb, mesh, checkpoint, kind = "atom", task = "multiclass", surface_enc, atom_enc, embeddings;
  int count = 20;

  auto* gen = app.add_subcommand("gen-synthetic", "Write a seeded synthetic dataset");
  add_common(gen, flags, false);
  gen->add_option("--count", count, "Number of proteins")->check(CLI::PositiveNumber);
  gen->add_option("--task", task, "Label kind")->check(CLI::IsMember({"multiclass", "multilabel", "node_binary"}));

  auto* build = app.add_subcommand("build", "Build hierarchy files from PDB and mesh inputs");
  add_common(build, flags, false);
  build->add_option("--data", data, "Dataset directory with manifest.tsv");
  build->add_option("--pdb", pdb, "Single PDB file")->check(CLI::ExistingFile);
  build->add_option("--mesh", mesh, "Single OFF mesh file")->check(CLI::ExistingFile);

  auto* feat = app.add_subcommand("featurize", "Attach node features to every hierarchy in a dataset");
  add_common(feat, flags, false);
  feat->add_option("--data", data, "Dataset directory")->required();
  feat->add_option("--surface-encoder", surface_enc, "Surface encoder checkpoint")->check(CLI::ExistingFile);
  feat->add_option("--atom-encoder", atom_enc, "Atom encoder checkpoint")->check(CLI::ExistingFile);
  feat->add_option("--embeddings", embeddings, "Protein embedding sidecar file")->check(CLI::ExistingFile);

  auto* pre = app.add_subcommand("pretrain-encoder", "Denoising pretraining of an invariant encoder");
  add_common(pre, flags, false);
  pre->add_option("--kind", kind, "Encoder kind")->check(CLI::IsMember({"atom", "surface"}));
  pre->add_option("--data", data, "Dataset directory (default: synthetic corpus)");

  auto* tr = app.add_subcommand("train", "Train a model");
  add_common(tr, flags, true);
  tr->add_option("--data", data, "Featurized dataset directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(ev, flags, false);
  ev->add_option("--data", data, "Featurized dataset directory")->required();
  ev->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("report-attn", "Write per-protein cross-attention weights");
  add_common(rep, flags, false);
  rep->add_option("--data", data, "Featurized dataset directory")->required();
  rep->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      if (flags.out.empty()) throw Error(ErrorCode::ConfigError, "gen-synthetic needs --out DIR");
      return run_gen_synthetic(flags, count, task);
    }
    if (build->parsed()) return run_build(flags, data, pdb, mesh);
    if (feat->parsed()) return run_featurize(flags, data, surface_enc, atom_enc, embeddings);
    if (pre->parsed()) return run_pretrain(flags, kind, data);
    if (tr->parsed()) return run_train(flags, data);
    if (ev->parsed()) return run_eval(flags, data, checkpoint);
    if (rep->parsed()) return run_report_attn(flags, data, checkpoint);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
