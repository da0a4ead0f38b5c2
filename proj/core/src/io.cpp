#include "prime/io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace prime {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error(ErrorCode::FormatError, "matrix payload has " + std::to_string(data.size()) + " values for [" +
                                            std::to_string(rows) + " x " + std::to_string(cols) + "]");
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

void check_version(const json& j) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != kFormatVersion) {
    throw Error(ErrorCode::FormatError, "unsupported or missing format_version");
  }
}

template <typename F>
auto wrap_json(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("malformed file: ") + e.what());
  }
}

}  // namespace

void complete_hierarchy(Hierarchy& h) {
  for (int l = 1; l < kLevels; ++l) {
    h.graphs[static_cast<std::size_t>(l)].adjacency =
        coarsen(h.graphs[static_cast<std::size_t>(l - 1)].adjacency, h.partition_into(l));
  }
  for (int l = 0; l < kLevels; ++l) {
    auto& g = h.graphs[static_cast<std::size_t>(l)];
    g.level = l;
    g.normalized = sym_normalize(g.adjacency);
  }
  validate(h);
}

std::string hierarchy_to_json(const HierarchyFile& f) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "hierarchy";
  j["id"] = f.id;
  j["source"] = {{"pdb", f.source.pdb_path},           {"mesh", f.source.mesh_path},
                 {"seed", f.source.seed},              {"face_cap", f.source.face_cap},
                 {"atom_cap", f.source.atom_cap},      {"knn_k", f.source.knn_k}};
  const auto counts = f.hierarchy.node_counts();
  j["node_counts"] = std::vector<int>(counts.begin(), counts.end());
  const auto& a0 = f.hierarchy.graphs[0].adjacency;
  std::vector<int> rows, cols;
  std::vector<double> weights;
  for (const auto& e : a0.entries) {
    rows.push_back(e.row);
    cols.push_back(e.col);
    weights.push_back(e.weight);
  }
  j["surface_adjacency"] = {{"n", a0.n}, {"rows", rows}, {"cols", cols}, {"weights", weights}};
  json parts = json::array();
  for (const auto& p : f.hierarchy.partitions) {
    parts.push_back({{"fine", p.fine_count}, {"coarse", p.coarse_count}, {"assign", p.assign}});
  }
  j["partitions"] = parts;
  j["sse"] = f.sse;
  if (f.features) {
    json feats = json::array();
    for (const auto& m : *f.features) feats.push_back(matrix_to_json(m));
    j["features"] = feats;
  }
  return j.dump();
}

HierarchyFile hierarchy_from_json(std::string_view text) {
  return wrap_json([&] {
    const json j = json::parse(text);
    check_version(j);
    HierarchyFile f;
    f.id = j.at("id").get<std::string>();
    const json& s = j.at("source");
    f.source.pdb_path = s.at("pdb").get<std::string>();
    f.source.mesh_path = s.at("mesh").get<std::string>();
    f.source.seed = s.at("seed").get<std::uint64_t>();
    f.source.face_cap = s.at("face_cap").get<int>();
    f.source.atom_cap = s.at("atom_cap").get<int>();
    f.source.knn_k = s.at("knn_k").get<int>();

    const json& a = j.at("surface_adjacency");
    auto& a0 = f.hierarchy.graphs[0].adjacency;
    a0.n = a.at("n").get<int>();
    const auto rows = a.at("rows").get<std::vector<int>>();
    const auto cols = a.at("cols").get<std::vector<int>>();
    const auto weights = a.at("weights").get<std::vector<double>>();
    if (rows.size() != cols.size() || rows.size() != weights.size()) {
      throw Error(ErrorCode::FormatError, "surface adjacency arrays differ in length");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] < 0 || rows[i] >= a0.n || cols[i] < 0 || cols[i] >= a0.n) {
        throw Error(ErrorCode::IndexOutOfRange, "surface adjacency entry out of range");
      }
      a0.entries.push_back({rows[i], cols[i], weights[i]});
    }
    canonicalize(a0);
    const json& parts = j.at("partitions");
    if (parts.size() != kLevels - 1) throw Error(ErrorCode::FormatError, "expected four partitions");
    for (std::size_t i = 0; i < parts.size(); ++i) {
      auto& p = f.hierarchy.partitions[i];
      p.fine_count = parts[i].at("fine").get<int>();
      p.coarse_count = parts[i].at("coarse").get<int>();
      p.assign = parts[i].at("assign").get<std::vector<int>>();
      validate(p);
    }
    complete_hierarchy(f.hierarchy);
    f.sse = j.value("sse", std::string{});
    if (j.contains("features")) {
      const json& feats = j.at("features");
      if (feats.size() != kLevels) throw Error(ErrorCode::FormatError, "expected five feature matrices");
      std::array<Matrix, kLevels> fm;
      for (int l = 0; l < kLevels; ++l) {
        fm[static_cast<std::size_t>(l)] = matrix_from_json(feats[static_cast<std::size_t>(l)]);
        validate(FeatureMatrix{l, fm[static_cast<std::size_t>(l)]});
        if (fm[static_cast<std::size_t>(l)].rows() != f.hierarchy.graphs[static_cast<std::size_t>(l)].node_count()) {
          throw Error(ErrorCode::ShapeMismatch, "feature rows disagree with node count at level " + std::to_string(l));
        }
      }
      f.features = std::move(fm);
    }
    return f;
  });
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FormatError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FormatError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::FormatError, "failed writing " + path.string());
}

void write_hierarchy_file(const std::filesystem::path& path, const HierarchyFile& file) {
  write_text_file(path, hierarchy_to_json(file));
}

HierarchyFile read_hierarchy_file(const std::filesystem::path& path) { return hierarchy_from_json(read_text_file(path)); }

std::string checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = c.kind;
  j["meta"] = c.meta;
  json tensors = json::array();
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    json t = matrix_to_json(c.params.tensors()[i].value());
    t["name"] = c.params.names()[i];
    tensors.push_back(std::move(t));
  }
  j["tensors"] = tensors;
  return j.dump();
}

Checkpoint checkpoint_from_json(std::string_view text) {
  return wrap_json([&] {
    const json j = json::parse(text);
    check_version(j);
    Checkpoint c;
    c.kind = j.at("kind").get<std::string>();
    c.meta = j.at("meta").get<std::map<std::string, std::string>>();
    for (const auto& t : j.at("tensors")) c.params.add(t.at("name").get<std::string>(), matrix_from_json(t));
    return c;
  });
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) { write_text_file(path, checkpoint_to_json(c)); }

Checkpoint read_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_text_file(path)); }

Checkpoint encoder_checkpoint(const InvariantEncoder& encoder) {
  Checkpoint c;
  c.kind = "encoder";
  const auto& cfg = encoder.config();
  std::ostringstream scale;
  scale.precision(17);
  scale << cfg.length_scale;
  c.meta = {{"input_dim", std::to_string(cfg.input_dim)},
            {"hidden", std::to_string(cfg.hidden)},
            {"depth", std::to_string(cfg.depth)},
            {"length_scale", scale.str()}};
  c.params = encoder.params().clone();
  return c;
}

InvariantEncoder encoder_from_checkpoint(const Checkpoint& c) {
  if (c.kind != "encoder") throw Error(ErrorCode::FormatError, "checkpoint is a '" + c.kind + "', not an encoder");
  try {
    EncoderConfig cfg;
    cfg.input_dim = std::stoi(c.meta.at("input_dim"));
    cfg.hidden = std::stoi(c.meta.at("hidden"));
    cfg.depth = std::stoi(c.meta.at("depth"));
    cfg.length_scale = std::stod(c.meta.at("length_scale"));
    return InvariantEncoder::from_params(cfg, c.params.clone());
  } catch (const std::out_of_range&) {
    throw Error(ErrorCode::FormatError, "encoder checkpoint is missing metadata");
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::FormatError, "encoder checkpoint has malformed metadata");
  }
}

Checkpoint model_checkpoint(const PrimeModel& model, const TrainConfig& config) {
  Checkpoint c;
  c.kind = "prime_model";
  c.meta = {{"config", format_train_config(config)}};
  c.params = model.params().clone();
  return c;
}

LoadedModel model_from_checkpoint(const Checkpoint& c) {
  if (c.kind != "prime_model") throw Error(ErrorCode::FormatError, "checkpoint is a '" + c.kind + "', not a model");
  const auto it = c.meta.find("config");
  if (it == c.meta.end()) throw Error(ErrorCode::FormatError, "model checkpoint has no config");
  LoadedModel out;
  out.config = parse_train_config(it->second);
  out.model = PrimeModel::from_params(model_config(out.config), c.params.clone());
  return out;
}

}  // namespace prime
