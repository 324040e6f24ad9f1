#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vrdiff/corpus.hpp"
#include "vrdiff/features.hpp"
#include "vrdiff/types.hpp"

namespace vrdiff {

// Graph whose nodes carry attribute vectors. `adjacency` is row-stochastic;
// `power_tensor[h]` is its h-th power with slice 0 the identity, so every
// slice is row-stochastic too. `raw_adjacency` keeps the un-normalized edge
// weights (zero diagonal).
struct AttributeGraph {
  std::vector<int> node_ids;  // category ids or instance indices
  Matrix raw_adjacency;
  Matrix adjacency;
  Matrix attributes;  // N x d, row per node
  std::vector<Matrix> power_tensor;

  int node_count() const { return static_cast<int>(node_ids.size()); }
  int hop_count() const { return static_cast<int>(power_tensor.size()); }
  int attribute_dim() const { return static_cast<int>(attributes.cols()); }
};

// Whether semantic co-occurrence is counted once per unique triplet type or
// once per annotation instance.
enum class CountMode { Types, Instances };

// Row-normalizes nonnegative edge weights into jump probabilities.
// Zero-degree rows fall back to a unit self-loop so every row sums to 1.
Matrix normalize_adjacency(const Matrix& raw);

// Power series of a row-stochastic matrix: [I, A, A^2, ..., A^(hops-1)].
// Throws DataError when rows do not sum to 1 within 1e-9 or hops < 1.
std::vector<Matrix> power_tensor(const Matrix& adjacency, int hops);

// Global graph over object categories. Two categories are linked with the
// number of unordered pairs of distinct train triplet types that share the
// predicate and the opposite endpoint (e.g. "ride horse" / "ride elephant"
// links horse and elephant); counts are then row-normalized. Attributes are
// the categories' embedding vectors.
AttributeGraph build_semantic_graph(
    const RelationCorpus& corpus,
    const std::function<Vector(const std::string&)>& embedding, int hops,
    CountMode count_mode = CountMode::Types);

// Per-image graph over object instances: an edge where boxes overlap more
// than iou_threshold or their normalized center distance is below
// distance_threshold. Attributes are the instances' visual features.
AttributeGraph build_scene_graph(const CorpusImage& image,
                                 const FeatureProvider& features, int hops,
                                 double iou_threshold,
                                 double distance_threshold);

// Dense row-major float64 dump (header: N, H, d; then adjacency, power
// slices, attributes) for inspection tooling.
void dump_graph(const AttributeGraph& graph, const std::filesystem::path& path);
AttributeGraph load_graph_dump(const std::filesystem::path& path);

}  // namespace vrdiff
