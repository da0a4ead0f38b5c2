#include "prime/dataset.hpp"

#include <cstdio>
#include <sstream>

namespace prime {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == '\t') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dir) {
  const std::string text = read_text_file(dir / kManifestName);
  std::istringstream in(text);
  std::string line;
  std::vector<DatasetEntry> out;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    if (line_no == 1 && !f.empty() && f[0] == "id") continue;
    if (f.size() != 5) {
      throw Error(ErrorCode::FormatError, "manifest line " + std::to_string(line_no) + ": expected 5 tab-separated fields");
    }
    out.push_back({f[0], f[1], f[2], f[3], f[4]});
  }
  return out;
}

void write_manifest(const std::filesystem::path& dir, const std::vector<DatasetEntry>& entries) {
  std::string text = "id\tsplit\tlabel\tpdb\tmesh\n";
  for (const auto& e : entries) text += e.id + "\t" + e.split + "\t" + e.label + "\t" + e.pdb + "\t" + e.mesh + "\n";
  write_text_file(dir / kManifestName, text);
}

std::filesystem::path hierarchy_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / kHierarchyDir / (id + ".json");
}

std::vector<SegmentPlan> helix_count_plan(int helices, int helix_residues, int coil_residues) {
  if (helices < 1 || helix_residues % helices != 0 || coil_residues < 4 * (helices + 1)) {
    throw Error(ErrorCode::ConfigError, "cannot spread " + std::to_string(helix_residues) + " helix residues over " +
                                            std::to_string(helices) + " helices");
  }
  const int loops = helices + 1;
  const int base = coil_residues / loops;
  const int extra = coil_residues % loops;
  std::vector<SegmentPlan> plan;
  for (int i = 0; i < loops; ++i) {
    plan.push_back({SegmentKind::Coil, base + (i < extra ? 1 : 0)});
    if (i < helices) plan.push_back({SegmentKind::Helix, helix_residues / helices});
  }
  return plan;
}

std::vector<DatasetEntry> write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticDatasetOptions& o) {
  if (o.count < 1) throw Error(ErrorCode::ConfigError, "synthetic dataset needs at least one protein");
  std::filesystem::create_directories(dir / "structures");
  std::vector<DatasetEntry> entries;
  for (int i = 0; i < o.count; ++i) {
    const std::uint64_t seed = o.seed * 1000003ULL + static_cast<std::uint64_t>(i);
    SyntheticProtein p;
    std::string label;
    if (o.task == TaskKind::Multiclass) {
      const int cls = i % 4;
      const auto plan = helix_count_plan(cls + 1);
      p = gen_synthetic(seed, plan);
      label = std::to_string(cls);
    } else {
      p = gen_synthetic(seed, 30 + (i % 5) * 4);
      if (o.task == TaskKind::Multilabel) {
        for (SegmentKind k : {SegmentKind::Helix, SegmentKind::Strand, SegmentKind::Coil}) {
          bool has = false;
          for (const auto& s : p.plan) has = has || s.kind == k;
          if (has) label += (label.empty() ? "" : ",") + std::to_string(static_cast<int>(k));
        }
      } else {
        for (const auto& s : p.plan) label += std::string(static_cast<std::size_t>(s.length), s.kind == SegmentKind::Helix ? '1' : '0');
      }
    }
    char name[32];
    std::snprintf(name, sizeof name, "syn%04d", i);
    const std::string id = name;
    p.structure.id = id;
    const std::string pdb = "structures/" + id + ".pdb";
    const std::string mesh = "structures/" + id + ".off";
    write_text_file(dir / pdb, write_pdb(p.structure));
    write_text_file(dir / mesh, write_off(p.mesh));
    const int slot = i % 10;
    entries.push_back({id, slot == 8 ? "val" : slot == 9 ? "test" : "train", label, pdb, mesh});
  }
  write_manifest(dir, entries);
  return entries;
}

HierarchyFile build_entry(const std::filesystem::path& dir, const DatasetEntry& e, const TrainConfig& config) {
  ProteinStructure s = parse_pdb(read_text_file(dir / e.pdb), e.id);
  const MeshParseResult mesh = parse_mesh(read_text_file(dir / e.mesh));
  HierarchyOptions opt;
  opt.seed = config.seed;
  opt.face_cap = config.face_cap;
  opt.atom_cap = config.atom_cap;
  opt.knn_k = config.knn_k;
  const ProteinGraph g = build_hierarchy(s, mesh.mesh, opt);
  HierarchyFile f;
  f.id = e.id;
  f.source = {e.pdb, e.mesh, config.seed, config.face_cap, config.atom_cap, config.knn_k};
  f.hierarchy = g.hierarchy;
  for (SseLabel l : g.labels) f.sse += to_char(l);
  return f;
}

void attach_features(HierarchyFile& f, const std::filesystem::path& dir, const Encoders& encoders,
                     const EmbeddingSource& source) {
  ProteinStructure s = parse_pdb(read_text_file(dir / f.source.pdb_path), f.id);
  const MeshParseResult mesh = parse_mesh(read_text_file(dir / f.source.mesh_path));
  HierarchyOptions opt;
  opt.seed = f.source.seed;
  opt.face_cap = f.source.face_cap;
  opt.atom_cap = f.source.atom_cap;
  opt.knn_k = f.source.knn_k;
  const ProteinGraph g = build_hierarchy(s, mesh.mesh, opt);
  if (!(g.hierarchy == f.hierarchy)) {
    throw Error(ErrorCode::FormatError, "hierarchy for '" + f.id + "' no longer matches its sources");
  }
  const auto feats = featurize(g, encoders, source, opt.knn_k);
  std::array<Matrix, kLevels> m;
  for (int l = 0; l < kLevels; ++l) m[static_cast<std::size_t>(l)] = feats[static_cast<std::size_t>(l)].data;
  f.features = std::move(m);
}

Sample make_sample(const HierarchyFile& f, const DatasetEntry& e, const TrainConfig& config) {
  if (!f.features) throw Error(ErrorCode::FormatError, "'" + f.id + "' has no features; run featurize first");
  Sample s;
  s.graph = prepare_graph(f.hierarchy, *f.features, f.id);
  const std::string where = "label of '" + e.id + "'";
  switch (config.task_kind) {
    case TaskKind::Multiclass: {
      try {
        std::size_t used = 0;
        s.label = std::stoi(e.label, &used);
        if (used != e.label.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(ErrorCode::FormatError, where + " is not a class index: '" + e.label + "'");
      }
      if (s.label < 0 || s.label >= config.num_outputs) {
        throw Error(ErrorCode::LabelOutOfRange, where + " is " + e.label + " with " + std::to_string(config.num_outputs) +
                                                    " classes");
      }
      break;
    }
    case TaskKind::Multilabel: {
      s.targets.assign(static_cast<std::size_t>(config.num_outputs), 0.0);
      std::stringstream ss(e.label);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        int idx = -1;
        try {
          idx = std::stoi(item);
        } catch (const std::exception&) {
          throw Error(ErrorCode::FormatError, where + " has a bad index '" + item + "'");
        }
        if (idx < 0 || idx >= config.num_outputs) throw Error(ErrorCode::LabelOutOfRange, where + " index " + item);
        s.targets[static_cast<std::size_t>(idx)] = 1.0;
      }
      break;
    }
    case TaskKind::NodeBinary: {
      const int n = s.graph.counts[static_cast<std::size_t>(config.readout_level)];
      if (static_cast<int>(e.label.size()) != n) {
        throw Error(ErrorCode::ShapeMismatch, where + " has " + std::to_string(e.label.size()) + " node labels for " +
                                                  std::to_string(n) + " nodes");
      }
      for (char ch : e.label) {
        if (ch != '0' && ch != '1') throw Error(ErrorCode::FormatError, where + " must be a 0/1 string");
        s.targets.push_back(ch == '1' ? 1.0 : 0.0);
      }
      break;
    }
  }
  return s;
}

std::map<std::string, std::vector<Sample>> load_samples(const std::filesystem::path& dir, const TrainConfig& config) {
  std::map<std::string, std::vector<Sample>> out;
  for (const auto& e : read_manifest(dir)) {
    const HierarchyFile f = read_hierarchy_file(hierarchy_path(dir, e.id));
    out[e.split].push_back(make_sample(f, e, config));
  }
  return out;
}

}  // namespace prime
