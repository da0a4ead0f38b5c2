#include "prime/features.hpp"
#include "prime/hierarchy.hpp"
#include "prime/prime_net.hpp"
#include "prime/surface_graph.hpp"
#include "prime/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace prime;

namespace {

// Sphere mesh with `faces` triangles around a 60-residue synthetic protein.
ProteinGraph graph_with_faces(int faces) {
  const SyntheticProtein p = gen_synthetic(1, 60);
  SurfaceMesh mesh = sphere_mesh(2, faces / 2 + 2, 18.0);
  for (auto& v : mesh.vertices) v += p.structure.centroid();
  HierarchyOptions options;
  options.face_cap = 4096;
  return build_hierarchy(p.structure, mesh, options);
}

PreparedGraph prepared(const ProteinGraph& g) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::array<Matrix, kLevels> features;
  for (int l = 0; l < kLevels; ++l) {
    Matrix m(g.hierarchy.graphs[static_cast<std::size_t>(l)].node_count(), kFeatureDims[static_cast<std::size_t>(l)]);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    features[static_cast<std::size_t>(l)] = std::move(m);
  }
  return prepare_graph(g.hierarchy, std::move(features), "bench");
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const PreparedGraph graph = prepared(graph_with_faces(static_cast<int>(state.range(0))));
  PrimeConfig config;
  config.outputs = 4;
  const PrimeModel model(config, 0);
  for (auto _ : state) {
    ad::NoGradGuard guard;
    ForwardContext ctx;
    benchmark::DoNotOptimize(model.predict(graph, ctx).logits.value().data());
  }
  state.counters["surface_nnz"] = static_cast<double>(graph.surface_nnz);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Forward)->RangeMultiplier(2)->Range(256, 4096)->Unit(benchmark::kMillisecond)->Complexity(benchmark::oN);

static void BM_KnnGraph(benchmark::State& state) {
  const SurfaceMesh mesh = sphere_mesh(5, static_cast<int>(state.range(0)) / 2 + 2, 20.0);
  std::vector<Vec3> centroids;
  for (const auto& f : face_geometry(mesh)) centroids.push_back(f.centroid);
  for (auto _ : state) benchmark::DoNotOptimize(knn_graph(centroids, 8).entries.data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KnnGraph)->RangeMultiplier(2)->Range(256, 4096)->Unit(benchmark::kMicrosecond)->Complexity(benchmark::oNLogN);

static void BM_BuildHierarchy(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(graph_with_faces(static_cast<int>(state.range(0))).hierarchy.graphs[0].adjacency.n);
}
BENCHMARK(BM_BuildHierarchy)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
