#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>

#include "vrdiff/corpus.hpp"
#include "vrdiff/types.hpp"

namespace vrdiff {

// token -> d-vector, loaded from whitespace-separated text.
struct EmbeddingTable {
  int dimension = 0;
  std::unordered_map<std::string, Vector> vectors;
  std::size_t duplicates_replaced = 0;  // tokens that appeared more than once
};

// Parses "token v1 v2 ... vd" lines. Duplicated tokens keep the last
// occurrence and are counted in duplicates_replaced. Throws DataError on
// ragged dimensions or unparseable floats.
EmbeddingTable load_embeddings(const std::filesystem::path& path);

// Stored vector on a hit; on a miss, a deterministic unit vector seeded by
// (fallback_seed, name) so absent categories still get stable embeddings.
Vector category_vector(const EmbeddingTable& table, const std::string& name,
                       std::uint64_t fallback_seed);

struct FeatureConfig {
  std::string mode = "synthetic";  // "synthetic" | "file"
  std::string path;                // file mode only
  int dim = 16;                    // base dimension (file mode: from file)
  double class_sep = 2.0;          // distance scale between category means
  double noise = 0.25;             // per-instance noise scale
  bool include_mask = false;       // append flattened spatial mask block
  int mask_grid = 32;
  std::uint64_t seed = 0;

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

// Serves per-instance visual feature vectors. File mode replays stored
// vectors keyed by (image_id, instance_id); synthetic mode derives them
// deterministically as a seeded category mean plus per-instance noise, so
// classes are linearly separable in expectation with class_sep > 0.
class FeatureProvider {
 public:
  static FeatureProvider from_file(const std::filesystem::path& path,
                                   const FeatureConfig& config);
  static FeatureProvider synthetic(const FeatureConfig& config,
                                   const RelationCorpus& corpus);

  // Total dimension including the optional mask block.
  int dimension() const;

  Vector instance_feature(const CorpusImage& image,
                          const ObjectInstance& instance) const;

  const FeatureConfig& config() const { return config_; }

 private:
  FeatureProvider() = default;

  Vector base_feature(const CorpusImage& image,
                      const ObjectInstance& instance) const;

  FeatureConfig config_;
  int base_dim_ = 0;
  std::map<std::pair<std::string, std::string>, Vector> stored_;
  std::vector<std::string> category_names_;  // synthetic mode
};

}  // namespace vrdiff
