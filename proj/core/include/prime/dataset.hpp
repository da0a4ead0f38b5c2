#pragma once

#include "prime/io.hpp"
#include "prime/synthetic.hpp"
#include "prime/training.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace prime {

// One row of manifest.tsv. Paths are relative to the dataset directory.
// Label text by task kind: multiclass "3"; multilabel "0,2" (positive
// indices, may be empty); node_binary one '0'/'1' per readout-level node.
struct DatasetEntry {
  std::string id;
  std::string split;  // train, val or test
  std::string label;
  std::string pdb;
  std::string mesh;
};

inline constexpr const char* kManifestName = "manifest.tsv";
inline constexpr const char* kHierarchyDir = "hierarchy";

std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dataset_dir);
void write_manifest(const std::filesystem::path& dataset_dir, const std::vector<DatasetEntry>& entries);
std::filesystem::path hierarchy_path(const std::filesystem::path& dataset_dir, const std::string& id);

// Segment plan with `helices` equal helices sharing helix_residues and
// coil_residues spread over the helices' flanking loops.
std::vector<SegmentPlan> helix_count_plan(int helices, int helix_residues = 24, int coil_residues = 20);

struct SyntheticDatasetOptions {
  std::uint64_t seed = 0;
  int count = 20;
  TaskKind task = TaskKind::Multiclass;
};

// multiclass: class c has c+1 helices (four classes); multilabel: which of
// helix, strand, coil segments the plan contains; node_binary: residue lies
// in a planned helix.
std::vector<DatasetEntry> write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticDatasetOptions& options);

HierarchyFile build_entry(const std::filesystem::path& dataset_dir, const DatasetEntry& entry, const TrainConfig& config);
void attach_features(HierarchyFile& file, const std::filesystem::path& dataset_dir, const Encoders& encoders,
                     const EmbeddingSource& source);

Sample make_sample(const HierarchyFile& file, const DatasetEntry& entry, const TrainConfig& config);
std::map<std::string, std::vector<Sample>> load_samples(const std::filesystem::path& dataset_dir, const TrainConfig& config);

}  // namespace prime
