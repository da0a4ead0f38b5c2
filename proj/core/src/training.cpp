#include "prime/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace prime {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const std::string& why) {
  throw Error(ErrorCode::ConfigError, "config key '" + std::string(key) + "': " + why + " (got '" + std::string(value) + "')");
}

double parse_double(std::string_view key, std::string_view value) {
  const std::string v(value);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, value, "expected a number");
  }
  if (used != v.size() || !std::isfinite(out)) bad_value(key, value, "expected a number");
  return out;
}

long long parse_int(std::string_view key, std::string_view value) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "expected an integer");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "expected true or false");
}

int positive_int(std::string_view key, std::string_view value, int minimum = 1) {
  const long long v = parse_int(key, value);
  if (v < minimum || v > std::numeric_limits<int>::max()) {
    bad_value(key, value, "expected an integer >= " + std::to_string(minimum));
  }
  return static_cast<int>(v);
}

double positive_double(std::string_view key, std::string_view value, bool allow_zero = false) {
  const double v = parse_double(key, value);
  if (v < 0.0 || (!allow_zero && v == 0.0)) bad_value(key, value, allow_zero ? "expected >= 0" : "expected > 0");
  return v;
}

const std::vector<std::string> kKeys = {
    "lr",          "weight_decay",       "batch_size",          "max_epochs",          "early_stop_patience",
    "warmup_epochs", "plateau_factor",   "plateau_patience",    "clip_norm",           "hidden",
    "layers",      "dropout",            "head_hidden",         "seed",                "task_kind",
    "num_outputs", "readout",            "readout_level",       "ablate",              "track_train_metric",
    "target_train_metric", "face_cap",   "atom_cap",            "knn_k",               "pretrain_epochs",
    "pretrain_batch_size", "pretrain_lr", "pretrain_count",
};

}  // namespace

std::vector<std::string> config_keys() { return kKeys; }

void apply_setting(TrainConfig& c, std::string_view key, std::string_view value) {
  try {
    if (key == "lr") c.lr = positive_double(key, value);
    else if (key == "weight_decay") c.weight_decay = positive_double(key, value, true);
    else if (key == "batch_size") c.batch_size = positive_int(key, value);
    else if (key == "max_epochs") c.max_epochs = positive_int(key, value, 0);
    else if (key == "early_stop_patience") c.early_stop_patience = positive_int(key, value);
    else if (key == "warmup_epochs") c.warmup_epochs = positive_int(key, value, 0);
    else if (key == "plateau_factor") {
      c.plateau_factor = positive_double(key, value);
      if (c.plateau_factor >= 1.0) bad_value(key, value, "expected a factor in (0, 1)");
    } else if (key == "plateau_patience") c.plateau_patience = positive_int(key, value);
    else if (key == "clip_norm") c.clip_norm = positive_double(key, value);
    else if (key == "hidden") c.hidden = positive_int(key, value);
    else if (key == "layers") c.layers = positive_int(key, value, 0);
    else if (key == "dropout") {
      c.dropout = positive_double(key, value, true);
      if (c.dropout >= 1.0) bad_value(key, value, "expected a probability in [0, 1)");
    } else if (key == "head_hidden") c.head_hidden = positive_int(key, value);
    else if (key == "seed") {
      const long long v = parse_int(key, value);
      if (v < 0) bad_value(key, value, "expected a non-negative integer");
      c.seed = static_cast<std::uint64_t>(v);
    } else if (key == "task_kind") c.task_kind = task_kind_from_name(value);
    else if (key == "num_outputs") c.num_outputs = positive_int(key, value);
    else if (key == "readout") c.readout = readout_kind_from_name(value);
    else if (key == "readout_level") c.readout_level = level_from_name(value);
    else if (key == "ablate") {
      c.active = {true, true, true, true, true};
      std::stringstream ss{std::string(value)};
      std::string item;
      while (std::getline(ss, item, ',')) {
        const std::string name = trim(item);
        if (!name.empty()) c.active[static_cast<std::size_t>(level_from_name(name))] = false;
      }
    } else if (key == "track_train_metric") c.track_train_metric = parse_bool(key, value);
    else if (key == "target_train_metric") {
      if (value == "none") c.target_train_metric.reset();
      else c.target_train_metric = parse_double(key, value);
    } else if (key == "face_cap") c.face_cap = positive_int(key, value, 4);
    else if (key == "atom_cap") c.atom_cap = positive_int(key, value);
    else if (key == "knn_k") c.knn_k = positive_int(key, value);
    else if (key == "pretrain_epochs") c.pretrain_epochs = positive_int(key, value, 0);
    else if (key == "pretrain_batch_size") c.pretrain_batch_size = positive_int(key, value);
    else if (key == "pretrain_lr") c.pretrain_lr = positive_double(key, value);
    else if (key == "pretrain_count") c.pretrain_count = positive_int(key, value, 10);
    else throw Error(ErrorCode::ConfigError, "unknown config key '" + std::string(key) + "'");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ConfigError) throw;
    std::string msg = e.what();
    if (msg.find("'" + std::string(key) + "'") != std::string::npos) throw;
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    throw Error(ErrorCode::ConfigError, "config key '" + std::string(key) + "': " + msg);
  }
}

TrainConfig parse_train_config(std::string_view text) {
  TrainConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::ConfigError, "config line " + std::to_string(line_no) + ": empty key");
    apply_setting(c, key, value);
  }
  validate(c);
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  std::string ablate;
  for (int l = 0; l < kLevels; ++l) {
    if (!c.active[static_cast<std::size_t>(l)]) ablate += (ablate.empty() ? "" : ",") + std::string(level_name(l));
  }
  out << "lr = " << c.lr << "\nweight_decay = " << c.weight_decay << "\nbatch_size = " << c.batch_size
      << "\nmax_epochs = " << c.max_epochs << "\nearly_stop_patience = " << c.early_stop_patience
      << "\nwarmup_epochs = " << c.warmup_epochs << "\nplateau_factor = " << c.plateau_factor
      << "\nplateau_patience = " << c.plateau_patience << "\nclip_norm = " << c.clip_norm << "\nhidden = " << c.hidden
      << "\nlayers = " << c.layers << "\ndropout = " << c.dropout << "\nhead_hidden = " << c.head_hidden
      << "\nseed = " << c.seed << "\ntask_kind = " << task_kind_name(c.task_kind) << "\nnum_outputs = " << c.num_outputs
      << "\nreadout = " << readout_kind_name(c.readout) << "\nreadout_level = " << level_name(c.readout_level)
      << "\nablate = " << ablate << "\ntrack_train_metric = " << (c.track_train_metric ? "true" : "false")
      << "\ntarget_train_metric = ";
  if (c.target_train_metric) out << *c.target_train_metric;
  else out << "none";
  out << "\nface_cap = " << c.face_cap << "\natom_cap = " << c.atom_cap << "\nknn_k = " << c.knn_k
      << "\npretrain_epochs = " << c.pretrain_epochs << "\npretrain_batch_size = " << c.pretrain_batch_size
      << "\npretrain_lr = " << c.pretrain_lr << "\npretrain_count = " << c.pretrain_count << "\n";
  return out.str();
}

void validate(const TrainConfig& c) { validate(model_config(c)); }

PrimeConfig model_config(const TrainConfig& c) {
  PrimeConfig m;
  m.hidden = c.hidden;
  m.layers = c.layers;
  m.dropout = c.dropout;
  m.head_hidden = c.head_hidden;
  m.task = c.task_kind;
  m.outputs = c.task_kind == TaskKind::NodeBinary ? 1 : c.num_outputs;
  m.readout = c.readout;
  m.readout_level = c.readout_level;
  m.active = c.active;
  return m;
}

ad::Tensor task_loss(TaskKind kind, std::span<const ad::Tensor> logits, std::span<const Sample* const> samples) {
  if (logits.size() != samples.size() || logits.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "task_loss: " + std::to_string(logits.size()) + " predictions for " +
                                              std::to_string(samples.size()) + " samples");
  }
  const ad::Tensor all = ad::concat(logits, 0);
  if (kind == TaskKind::Multiclass) {
    std::vector<int> labels;
    for (const Sample* s : samples) labels.push_back(s->label);
    return ad::cross_entropy(all, labels);
  }
  Matrix targets(all.rows(), all.cols());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& t = samples[i]->targets;
    if (static_cast<Eigen::Index>(t.size()) != logits[i].rows() * logits[i].cols()) {
      throw Error(ErrorCode::ShapeMismatch, "sample '" + samples[i]->graph.id + "' has " + std::to_string(t.size()) +
                                                " targets for outputs " + logits[i].shape_string());
    }
    for (Eigen::Index r = 0; r < logits[i].rows(); ++r, ++row) {
      for (Eigen::Index c = 0; c < all.cols(); ++c) {
        targets(row, c) = t[static_cast<std::size_t>(r * all.cols() + c)];
      }
    }
  }
  return ad::bce_with_logits(all, targets);
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double sample_weight(TaskKind kind, const Sample& s, std::size_t batch, std::size_t batch_nodes) {
  if (kind == TaskKind::NodeBinary) return static_cast<double>(s.targets.size()) / static_cast<double>(batch_nodes);
  return 1.0 / static_cast<double>(batch);
}

}  // namespace

TrainResult train(const TrainConfig& config, std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const EpochObserver& observer) {
  validate(config);
  const PrimeConfig mc = model_config(config);
  PrimeModel model(mc, mix(config.seed, 11));
  TrainResult result;
  result.model = model.clone();
  result.best_val_metric = -std::numeric_limits<double>::infinity();
  if (config.max_epochs == 0) return result;
  if (train_set.empty() || val_set.empty()) throw Error(ErrorCode::ConfigError, "training needs non-empty splits");

  std::vector<ad::Tensor> params = model.params().tensors();
  AdamW opt(params, AdamWOptions{.lr = config.lr, .weight_decay = config.weight_decay});
  LrSchedule schedule = LrSchedule::warmup_plateau(LrSchedule::WarmupPlateauOptions{
      .base_lr = config.lr,
      .warmup_epochs = config.warmup_epochs,
      .factor = config.plateau_factor,
      .patience = config.plateau_patience,
  });
  opt.set_lr(schedule.current());

  std::mt19937_64 rng(mix(config.seed, 12));
  const std::uint64_t dropout_seed = mix(config.seed, 13);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::size_t batch_nodes = 0;
      for (std::size_t k = start; k < end; ++k) batch_nodes += train_set[order[k]].targets.size();

      opt.zero_grad();
      ForwardContext ctx{.train = true, .seed = dropout_seed, .step = step++};
      double batch_loss = 0.0;
      // One graph per protein; gradients accumulate across the batch.
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = train_set[order[k]];
        const ad::Tensor logits = model.predict(s.graph, ctx).logits;
        const Sample* one[] = {&s};
        const ad::Tensor l = task_loss(config.task_kind, std::span<const ad::Tensor>(&logits, 1), one);
        const double w = sample_weight(config.task_kind, s, end - start, batch_nodes);
        const ad::Tensor weighted = ad::scale(l, w);
        batch_loss += weighted.item();
        ad::backward(weighted);
      }
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::Divergence, "training loss became " + std::to_string(batch_loss) + " in epoch " +
                                               std::to_string(epoch) + " at lr " + std::to_string(opt.lr()));
      }
      loss_sum += batch_loss * static_cast<double>(end - start);
      clip_grad_norm(params, config.clip_norm);
      opt.step();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = opt.lr();
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_metric = task_metric(model, val_set);
    if (config.track_train_metric || config.target_train_metric) rec.train_metric = task_metric(model, train_set);
    result.history.push_back(rec);
    if (observer) observer(rec);

    if (rec.val_metric > result.best_val_metric) {
      result.best_val_metric = rec.val_metric;
      result.best_epoch = epoch;
      result.model = model.clone();
    }
    if (epoch - result.best_epoch >= config.early_stop_patience) break;
    if (config.target_train_metric && rec.train_metric && *rec.train_metric >= *config.target_train_metric) break;
    opt.set_lr(schedule.step(epoch, rec.val_metric));
  }
  return result;
}

PredictionSet predict_all(const PrimeModel& model, std::span<const Sample> samples) {
  ad::NoGradGuard no_grad;
  const PrimeConfig& c = model.config();
  PredictionSet out;
  std::vector<Matrix> rows;
  std::size_t total = 0;
  for (const auto& s : samples) {
    ForwardContext ctx;
    const Prediction p = model.predict(s.graph, ctx);
    Matrix v = p.logits.value();
    if (c.task != TaskKind::Multiclass) {
      v = v.unaryExpr([](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
    }
    total += static_cast<std::size_t>(v.rows());
    rows.push_back(std::move(v));
    out.attention.push_back(p.attention);
  }
  const Eigen::Index cols = rows.empty() ? c.outputs : rows.front().cols();
  out.outputs.resize(static_cast<Eigen::Index>(total), cols);
  out.label_matrix = Matrix::Zero(static_cast<Eigen::Index>(total), cols);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.outputs.middleRows(r, rows[i].rows()) = rows[i];
    const Sample& s = samples[i];
    if (c.task == TaskKind::Multiclass) {
      out.labels.push_back(s.label);
    } else {
      if (static_cast<Eigen::Index>(s.targets.size()) != rows[i].size()) {
        throw Error(ErrorCode::ShapeMismatch, "sample '" + s.graph.id + "' has " + std::to_string(s.targets.size()) +
                                                  " targets for " + std::to_string(rows[i].size()) + " outputs");
      }
      for (Eigen::Index k = 0; k < rows[i].size(); ++k) {
        out.label_matrix(r + k / cols, k % cols) = s.targets[static_cast<std::size_t>(k)];
        if (c.task == TaskKind::NodeBinary) out.labels.push_back(s.targets[static_cast<std::size_t>(k)] > 0.5 ? 1 : 0);
      }
    }
    r += rows[i].rows();
  }
  return out;
}

Metrics evaluate(const PrimeModel& model, std::span<const Sample> samples) {
  const PredictionSet p = predict_all(model, samples);
  Metrics m;
  switch (model.config().task) {
    case TaskKind::Multiclass: m.accuracy = compute_accuracy(p.outputs, p.labels); break;
    case TaskKind::Multilabel: m.f_max = compute_fmax(p.outputs, p.label_matrix); break;
    case TaskKind::NodeBinary: {
      const std::vector<double> scores(p.outputs.data(), p.outputs.data() + p.outputs.size());
      m.roc_auc = compute_roc_auc(scores, p.labels);
      break;
    }
  }
  return m;
}

double task_metric(const PrimeModel& model, std::span<const Sample> samples) {
  const Metrics m = evaluate(model, samples);
  if (m.accuracy) return *m.accuracy;
  if (m.f_max) return *m.f_max;
  return *m.roc_auc;
}

}  // namespace prime
