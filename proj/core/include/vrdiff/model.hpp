#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vrdiff/config.hpp"
#include "vrdiff/corpus.hpp"
#include "vrdiff/diffusion.hpp"
#include "vrdiff/features.hpp"
#include "vrdiff/graphs.hpp"
#include "vrdiff/priors.hpp"
#include "vrdiff/types.hpp"

namespace vrdiff {

// One weight row per predicate over the concatenated subject/object
// features; scores are plain dot products without a bias.
struct PredicateScorer {
  Matrix weights;  // K x 2*(enabled feature dims)

  int predicate_count() const { return static_cast<int>(weights.rows()); }

  static PredicateScorer init(int predicates, int pair_feature_dim,
                              std::uint64_t seed);
};

// A scored candidate (subject, object) with its diffused features:
// F = [diffused visual ; diffused semantic], either part dropped when the
// corresponding cue is disabled.
struct CandidatePair {
  ObjectInstance subject;
  ObjectInstance object;
  int subject_index = -1;  // node index in the image's scene graph
  int object_index = -1;
  Vector subject_features;
  Vector object_features;
};

struct ModelState {
  Config config;
  std::vector<std::string> object_vocabulary;
  std::vector<std::string> predicate_vocabulary;
  AttributeGraph semantic_graph;   // empty when the semantic cue is off
  DiffusionParams semantic_params; // zero-sized when the semantic cue is off
  DiffusionParams scene_params;    // zero-sized when the appearance cue is off
  PredicateScorer scorer;
  PriorTable priors;

  int pair_feature_dim() const;
};

// Builds F_s/F_o for one ordered instance pair from the per-image scene
// diffusion and the global semantic diffusion. Null outputs mean the
// corresponding cue is disabled.
CandidatePair pair_features(const CorpusImage& image, int subject_instance,
                            int object_instance,
                            const DiffusionOutput* scene_out,
                            const DiffusionOutput* semantic_out);

// psi(s, p, o) = w_p . [F_s; F_o]
double compatibility(const CandidatePair& pair, int predicate,
                     const PredicateScorer& scorer);

// psi + lambda * log(prior + 1e-12); lambda = 0 ranks by psi alone.
double score_triplet(const CandidatePair& pair, int predicate,
                     const ModelState& state, double lambda);

// Multi-class hinge over each annotated relation against the other K-1
// predicates on the same pair, with prior-dependent margins. Returns the
// loss and its gradients w.r.t. the scorer and both diffusion outputs.
struct HingeGradients {
  double loss = 0.0;
  Matrix scorer;      // K x 2*pair_dim
  Matrix scene_Z;     // zero-sized when appearance off
  Matrix semantic_Z;  // zero-sized when semantic off
};
HingeGradients hinge_loss(const CorpusImage& image, const PriorTable& priors,
                          const PredicateScorer& scorer,
                          const DiffusionOutput* scene_out,
                          const DiffusionOutput* semantic_out);

// One full forward/backward over an image: hinge loss plus gradients for
// the scorer and both diffusion parameter sets (and the semantic
// attributes when requested). Exposed for gradient-checking.
struct ImageStepResult {
  double loss = 0.0;
  Matrix scorer_grad;
  DiffusionGradients semantic_grads;
  DiffusionGradients scene_grads;
};
ImageStepResult image_loss_gradients(const CorpusImage& image,
                                     const Config& config,
                                     const AttributeGraph* semantic_graph,
                                     const AttributeGraph* scene_graph,
                                     const DiffusionParams& semantic_params,
                                     const DiffusionParams& scene_params,
                                     const PredicateScorer& scorer,
                                     const PriorTable& priors,
                                     bool want_embedding_grad = false);

struct TrainResult {
  ModelState state;
  std::vector<double> loss_history;  // mean per-image loss per epoch
};

// Deterministic training: seeded shuffling, per-image adaptive-moment
// steps, learning rate decayed by config.decay_factor every
// config.decay_every epochs. Throws NumericError when the loss leaves the
// finite range.
TrainResult train(const RelationCorpus& corpus, const Config& config,
                  const EmbeddingTable& embeddings,
                  const FeatureProvider& features);

// Single-file checkpoint: versioned header with vocabulary hashes, the
// config snapshot, named float64 tensors, and an integrity checksum.
// Round-trips bit-exactly.
void save_checkpoint(const ModelState& state,
                     const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

// Throws DataError naming the mismatched field when a checkpoint was
// trained against different vocabularies.
void ensure_vocabulary_compatible(const ModelState& state,
                                  const RelationCorpus& corpus);

}  // namespace vrdiff
