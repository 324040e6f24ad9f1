#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "vrdiff/features.hpp"

namespace vrdiff {

// All tunables in one place. The full struct is echoed into every
// checkpoint so a run can be reproduced from its artifact alone.
struct Config {
  int hops_semantic = 3;
  int hops_scene = 3;
  int embedding_dim = 16;     // fallback dimension without an embedding file
  int out_dim_semantic = 0;   // 0 = same as the input dimension
  int out_dim_scene = 0;
  std::string nonlinearity = "relu";  // relu | identity

  double iou_threshold = 0.5;
  double distance_threshold = 0.5;
  std::string count_mode = "types";  // types | instances

  double prior_alpha = 1e-3;
  double lambda = 1.0;  // weight of the log-prior term at scoring time

  double learning_rate = 1e-3;
  int epochs = 30;
  int decay_every = 5;     // epochs between learning-rate decays
  double decay_factor = 0.1;
  std::uint64_t seed = 0;
  bool trainable_embeddings = false;

  // Cue selection; the ablation grid toggles these.
  bool use_appearance = true;
  bool use_semantic = true;
  bool diffuse_semantic = true;
  bool diffuse_scene = true;

  std::string recall_agg = "micro";  // micro | macro

  FeatureConfig features;

  // Effective hop counts: a path that does not diffuse keeps only the
  // identity hop.
  int effective_hops_semantic() const { return diffuse_semantic ? hops_semantic : 1; }
  int effective_hops_scene() const { return diffuse_scene ? hops_scene : 1; }

  std::string to_json() const;
  static Config from_json(const std::string& text);
  static Config load(const std::filesystem::path& path);

  // Throws DataError on out-of-range or unknown enum-like values.
  void validate() const;

  friend bool operator==(const Config&, const Config&) = default;
};

}  // namespace vrdiff
