#include <benchmark/benchmark.h>

#include "vrdiff/eval.hpp"
#include "vrdiff/fixtures.hpp"
#include "vrdiff/model.hpp"

namespace {

using namespace vrdiff;

Config bench_config() {
  Config config;
  config.epochs = 1;
  config.embedding_dim = 16;
  config.features.dim = 16;
  config.features.class_sep = 3.0;
  return config;
}

void BM_SemanticGraphBuild(benchmark::State& state) {
  CliqueCorpusSpec spec;
  spec.categories = static_cast<int>(state.range(0));
  spec.cliques = 6;
  spec.holdout = 0.0;
  const int members = spec.categories / spec.cliques;
  spec.train_images = spec.predicates * members * members;  // covers the grid
  spec.test_images = 10;
  const RelationCorpus corpus = generate_clique_corpus(spec);
  EmbeddingTable table;
  table.dimension = 16;
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_semantic_graph(
        corpus,
        [&table](const std::string& n) { return category_vector(table, n, 0); },
        3));
  }
}
BENCHMARK(BM_SemanticGraphBuild)->Arg(24)->Arg(48)->Arg(96);

void BM_TrainEpoch(benchmark::State& state) {
  CliqueCorpusSpec spec;
  spec.train_images = static_cast<int>(state.range(0));
  spec.test_images = 4;
  const RelationCorpus corpus = generate_clique_corpus(spec);
  const Config config = bench_config();
  const FeatureProvider features =
      FeatureProvider::synthetic(config.features, corpus);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        train(corpus, config, EmbeddingTable{}, features).loss_history);
  }
}
BENCHMARK(BM_TrainEpoch)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_RankImage(benchmark::State& state) {
  CliqueCorpusSpec spec;
  spec.pairs_per_image = static_cast<int>(state.range(0));
  spec.train_images = 120;
  spec.test_images = 4;
  const RelationCorpus corpus = generate_clique_corpus(spec);
  Config config = bench_config();
  const FeatureProvider features =
      FeatureProvider::synthetic(config.features, corpus);
  const ModelState model =
      train(corpus, config, EmbeddingTable{}, features).state;
  const DiffusionOutput semantic = semantic_context(model);
  const CorpusImage* image = nullptr;
  for (const auto& im : corpus.images) {
    if (im.split == Split::Test) {
      image = &im;
      break;
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rank_image(*image, model, features, &semantic, 1.0).candidates);
  }
}
BENCHMARK(BM_RankImage)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
