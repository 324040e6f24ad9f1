#include "vrdiff/model.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <utility>

#include "vrdiff/error.hpp"
#include "vrdiff/rng.hpp"

namespace vrdiff {

PredicateScorer PredicateScorer::init(int predicates, int pair_feature_dim,
                                      std::uint64_t seed) {
  PredicateScorer s;
  const int cols = 2 * pair_feature_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  SplitMix64 rng(seed);
  s.weights = Matrix(predicates, cols);
  for (Eigen::Index r = 0; r < s.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < s.weights.cols(); ++c) {
      s.weights(r, c) = rng.uniform(-bound, bound);
    }
  }
  return s;
}

int ModelState::pair_feature_dim() const {
  int dim = 0;
  if (config.use_appearance) dim += scene_params.output_dim();
  if (config.use_semantic) dim += semantic_params.output_dim();
  return dim;
}

CandidatePair pair_features(const CorpusImage& image, int subject_instance,
                            int object_instance,
                            const DiffusionOutput* scene_out,
                            const DiffusionOutput* semantic_out) {
  const int n = static_cast<int>(image.instances.size());
  if (subject_instance < 0 || subject_instance >= n || object_instance < 0 ||
      object_instance >= n) {
    throw DataError("pair_features: instance index out of range for image '" +
                    image.image_id + "'");
  }
  CandidatePair pair;
  pair.subject = image.instances[static_cast<std::size_t>(subject_instance)];
  pair.object = image.instances[static_cast<std::size_t>(object_instance)];
  pair.subject_index = subject_instance;
  pair.object_index = object_instance;

  const Eigen::Index vis = scene_out ? scene_out->Z.cols() : 0;
  const Eigen::Index sem = semantic_out ? semantic_out->Z.cols() : 0;
  pair.subject_features = Vector(vis + sem);
  pair.object_features = Vector(vis + sem);
  if (scene_out) {
    if (scene_out->Z.rows() != n) {
      throw DataError("pair_features: scene diffusion does not match image '" +
                      image.image_id + "'");
    }
    pair.subject_features.head(vis) =
        scene_out->Z.row(subject_instance).transpose();
    pair.object_features.head(vis) =
        scene_out->Z.row(object_instance).transpose();
  }
  if (semantic_out) {
    pair.subject_features.tail(sem) =
        semantic_out->Z.row(pair.subject.category_id).transpose();
    pair.object_features.tail(sem) =
        semantic_out->Z.row(pair.object.category_id).transpose();
  }
  return pair;
}

double compatibility(const CandidatePair& pair, int predicate,
                     const PredicateScorer& scorer) {
  const Eigen::Index d = pair.subject_features.size();
  return scorer.weights.row(predicate).head(d).dot(pair.subject_features) +
         scorer.weights.row(predicate).tail(d).dot(pair.object_features);
}

double score_triplet(const CandidatePair& pair, int predicate,
                     const ModelState& state, double lambda) {
  double total = compatibility(pair, predicate, state.scorer);
  if (lambda != 0.0) {
    constexpr double floor = 1e-12;
    total += lambda * std::log(state.priors.prior_score(
                                   predicate, pair.subject, pair.object) +
                               floor);
  }
  return total;
}

HingeGradients hinge_loss(const CorpusImage& image, const PriorTable& priors,
                          const PredicateScorer& scorer,
                          const DiffusionOutput* scene_out,
                          const DiffusionOutput* semantic_out) {
  if (image.relations.empty()) {
    throw DataError("hinge_loss: image '" + image.image_id +
                    "' has no annotated relations");
  }
  const int k = scorer.predicate_count();
  const Eigen::Index vis = scene_out ? scene_out->Z.cols() : 0;
  const Eigen::Index sem = semantic_out ? semantic_out->Z.cols() : 0;
  const Eigen::Index pair_dim = vis + sem;

  HingeGradients out;
  out.scorer = Matrix::Zero(k, 2 * pair_dim);
  if (scene_out) out.scene_Z = Matrix::Zero(scene_out->Z.rows(), vis);
  if (semantic_out) {
    out.semantic_Z = Matrix::Zero(semantic_out->Z.rows(), sem);
  }

  // Group annotations by ordered pair, in order of first appearance, so a
  // pair's psi vector is computed once.
  std::vector<std::pair<int, int>> pairs;
  std::vector<std::vector<int>> predicates_per_pair;
  for (const auto& rel : image.relations) {
    const std::pair<int, int> key{rel.subject_index, rel.object_index};
    std::size_t slot = 0;
    for (; slot < pairs.size(); ++slot) {
      if (pairs[slot] == key) break;
    }
    if (slot == pairs.size()) {
      pairs.push_back(key);
      predicates_per_pair.emplace_back();
    }
    predicates_per_pair[slot].push_back(rel.predicate_id);
  }

  for (std::size_t slot = 0; slot < pairs.size(); ++slot) {
    const CandidatePair pair = pair_features(
        image, pairs[slot].first, pairs[slot].second, scene_out, semantic_out);
    Vector feat(2 * pair_dim);
    feat.head(pair_dim) = pair.subject_features;
    feat.tail(pair_dim) = pair.object_features;
    const Vector psi = scorer.weights * feat;

    Vector grad_psi = Vector::Zero(k);
    for (int annotated : predicates_per_pair[slot]) {
      for (int other = 0; other < k; ++other) {
        if (other == annotated) continue;
        const double margin =
            priors.margin(annotated, other, pair.subject.category_id,
                          pair.object.category_id);
        const double term = margin + psi(other) - psi(annotated);
        if (std::isnan(term)) {
          // poisoned scores must surface as a non-finite loss, not vanish
          // through the positive-part filter
          out.loss = std::numeric_limits<double>::quiet_NaN();
        } else if (term > 0.0) {
          out.loss += term;
          grad_psi(other) += 1.0;
          grad_psi(annotated) -= 1.0;
        }
      }
    }
    if (grad_psi.isZero(0.0)) continue;

    out.scorer += grad_psi * feat.transpose();
    const Vector grad_feat = scorer.weights.transpose() * grad_psi;
    if (scene_out) {
      out.scene_Z.row(pair.subject_index) +=
          grad_feat.head(vis).transpose();
      out.scene_Z.row(pair.object_index) +=
          grad_feat.segment(pair_dim, vis).transpose();
    }
    if (semantic_out) {
      out.semantic_Z.row(pair.subject.category_id) +=
          grad_feat.segment(vis, sem).transpose();
      out.semantic_Z.row(pair.object.category_id) +=
          grad_feat.tail(sem).transpose();
    }
  }
  return out;
}

ImageStepResult image_loss_gradients(const CorpusImage& image,
                                     const Config& config,
                                     const AttributeGraph* semantic_graph,
                                     const AttributeGraph* scene_graph,
                                     const DiffusionParams& semantic_params,
                                     const DiffusionParams& scene_params,
                                     const PredicateScorer& scorer,
                                     const PriorTable& priors,
                                     bool want_embedding_grad) {
  DiffusionOutput scene_out, semantic_out;
  const bool appearance = config.use_appearance;
  const bool semantic = config.use_semantic;
  if (appearance) {
    if (!scene_graph) {
      throw DataError("image_loss_gradients: appearance cue needs a scene graph");
    }
    scene_out = diffuse_forward(*scene_graph, scene_params);
  }
  if (semantic) {
    if (!semantic_graph) {
      throw DataError("image_loss_gradients: semantic cue needs a semantic graph");
    }
    semantic_out = diffuse_forward(*semantic_graph, semantic_params);
  }

  const HingeGradients hinge =
      hinge_loss(image, priors, scorer, appearance ? &scene_out : nullptr,
                 semantic ? &semantic_out : nullptr);

  ImageStepResult result;
  result.loss = hinge.loss;
  result.scorer_grad = hinge.scorer;
  if (appearance) {
    result.scene_grads = diffuse_backward(*scene_graph, scene_params,
                                          scene_out, hinge.scene_Z);
  }
  if (semantic) {
    result.semantic_grads =
        diffuse_backward(*semantic_graph, semantic_params, semantic_out,
                         hinge.semantic_Z, want_embedding_grad);
  }
  return result;
}

namespace {

// Adaptive-moment updates over a flat list of tensors; one shared timestep
// per training step.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  int add_parameter(Eigen::Index size) {
    m_.emplace_back(Vector::Zero(size));
    v_.emplace_back(Vector::Zero(size));
    return static_cast<int>(m_.size()) - 1;
  }

  void begin_step() { ++t_; }

  void update(int slot, double* param, const double* grad, Eigen::Index size,
              double lr) {
    Vector& m = m_[static_cast<std::size_t>(slot)];
    Vector& v = v_[static_cast<std::size_t>(slot)];
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Eigen::Index i = 0; i < size; ++i) {
      m(i) = beta1_ * m(i) + (1.0 - beta1_) * grad[i];
      v(i) = beta2_ * v(i) + (1.0 - beta2_) * grad[i] * grad[i];
      const double mhat = m(i) / c1;
      const double vhat = v(i) / c2;
      param[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Vector> m_;
  std::vector<Vector> v_;
};

}  // namespace

TrainResult train(const RelationCorpus& corpus, const Config& config,
                  const EmbeddingTable& embeddings,
                  const FeatureProvider& features) {
  config.validate();

  std::vector<const CorpusImage*> train_images;
  for (const auto& image : corpus.images) {
    if (image.split == Split::Train && !image.relations.empty()) {
      train_images.push_back(&image);
    }
  }
  if (train_images.empty()) {
    throw DataError("train: corpus has no train images with relations");
  }

  TrainResult result;
  ModelState& state = result.state;
  state.config = config;
  state.object_vocabulary = corpus.object_vocabulary;
  state.predicate_vocabulary = corpus.predicate_vocabulary;
  state.priors = fit_priors(corpus, config.prior_alpha);

  const Nonlinearity nonlin = nonlinearity_from_string(config.nonlinearity);

  if (config.use_semantic) {
    EmbeddingTable table = embeddings;
    if (table.dimension == 0) table.dimension = config.embedding_dim;
    std::size_t misses = 0;
    auto embed = [&](const std::string& name) {
      if (!table.vectors.contains(name)) ++misses;
      return category_vector(table, name, config.seed);
    };
    state.semantic_graph = build_semantic_graph(
        corpus, embed, config.effective_hops_semantic(),
        config.count_mode == "types" ? CountMode::Types
                                     : CountMode::Instances);
    if (misses > 0 && !table.vectors.empty()) {
      std::clog << "train: " << misses
                << " categories missing from the embedding table, using "
                   "seeded fallback vectors\n";
    }
    const int d = state.semantic_graph.attribute_dim();
    const int d_out =
        config.out_dim_semantic > 0 ? config.out_dim_semantic : d;
    state.semantic_params =
        DiffusionParams::init(config.effective_hops_semantic(), d, d_out,
                              nonlin, stream_seed(config.seed, "semantic"));
  }

  std::vector<AttributeGraph> scene_graphs;
  if (config.use_appearance) {
    const int d = features.dimension();
    const int d_out = config.out_dim_scene > 0 ? config.out_dim_scene : d;
    state.scene_params =
        DiffusionParams::init(config.effective_hops_scene(), d, d_out, nonlin,
                              stream_seed(config.seed, "scene"));
    scene_graphs.reserve(train_images.size());
    for (const CorpusImage* image : train_images) {
      scene_graphs.push_back(build_scene_graph(
          *image, features, config.effective_hops_scene(),
          config.iou_threshold, config.distance_threshold));
    }
  }

  state.scorer = PredicateScorer::init(corpus.predicate_count(),
                                       state.pair_feature_dim(),
                                       stream_seed(config.seed, "scorer"));

  AdamOptimizer adam;
  const int slot_scorer = adam.add_parameter(state.scorer.weights.size());
  int slot_sem_w = -1, slot_sem_map = -1, slot_sem_bias = -1, slot_sem_x = -1;
  int slot_scn_w = -1, slot_scn_map = -1, slot_scn_bias = -1;
  if (config.use_semantic) {
    slot_sem_w = adam.add_parameter(state.semantic_params.hop_weights.size());
    slot_sem_map = adam.add_parameter(state.semantic_params.map_weights.size());
    slot_sem_bias = adam.add_parameter(state.semantic_params.map_bias.size());
    if (config.trainable_embeddings) {
      slot_sem_x = adam.add_parameter(state.semantic_graph.attributes.size());
    }
  }
  if (config.use_appearance) {
    slot_scn_w = adam.add_parameter(state.scene_params.hop_weights.size());
    slot_scn_map = adam.add_parameter(state.scene_params.map_weights.size());
    slot_scn_bias = adam.add_parameter(state.scene_params.map_bias.size());
  }

  std::vector<std::size_t> order(train_images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 shuffle_rng(stream_seed(config.seed, "shuffle"));

  result.loss_history.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate *
                      std::pow(config.decay_factor, epoch / config.decay_every);
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const CorpusImage& image = *train_images[idx];
      const AttributeGraph* scene =
          config.use_appearance ? &scene_graphs[idx] : nullptr;
      const AttributeGraph* semantic =
          config.use_semantic ? &state.semantic_graph : nullptr;
      ImageStepResult step = image_loss_gradients(
          image, config, semantic, scene, state.semantic_params,
          state.scene_params, state.scorer, state.priors,
          config.trainable_embeddings);
      if (!std::isfinite(step.loss)) {
        throw NumericError("train: loss diverged (non-finite) at epoch " +
                           std::to_string(epoch) + ", image '" +
                           image.image_id + "'");
      }
      epoch_loss += step.loss;

      adam.begin_step();
      adam.update(slot_scorer, state.scorer.weights.data(),
                  step.scorer_grad.data(), state.scorer.weights.size(), lr);
      if (config.use_semantic) {
        adam.update(slot_sem_w, state.semantic_params.hop_weights.data(),
                    step.semantic_grads.hop_weights.data(),
                    state.semantic_params.hop_weights.size(), lr);
        adam.update(slot_sem_map, state.semantic_params.map_weights.data(),
                    step.semantic_grads.map_weights.data(),
                    state.semantic_params.map_weights.size(), lr);
        adam.update(slot_sem_bias, state.semantic_params.map_bias.data(),
                    step.semantic_grads.map_bias.data(),
                    state.semantic_params.map_bias.size(), lr);
        if (config.trainable_embeddings) {
          adam.update(slot_sem_x, state.semantic_graph.attributes.data(),
                      step.semantic_grads.attributes.data(),
                      state.semantic_graph.attributes.size(), lr);
        }
      }
      if (config.use_appearance) {
        adam.update(slot_scn_w, state.scene_params.hop_weights.data(),
                    step.scene_grads.hop_weights.data(),
                    state.scene_params.hop_weights.size(), lr);
        adam.update(slot_scn_map, state.scene_params.map_weights.data(),
                    step.scene_grads.map_weights.data(),
                    state.scene_params.map_weights.size(), lr);
        adam.update(slot_scn_bias, state.scene_params.map_bias.data(),
                    step.scene_grads.map_bias.data(),
                    state.scene_params.map_bias.size(), lr);
      }
    }
    result.loss_history.push_back(epoch_loss /
                                  static_cast<double>(train_images.size()));
  }
  return result;
}

void ensure_vocabulary_compatible(const ModelState& state,
                                  const RelationCorpus& corpus) {
  if (state.object_vocabulary != corpus.object_vocabulary) {
    throw DataError(
        "checkpoint incompatible with corpus: object_vocabulary differs");
  }
  if (state.predicate_vocabulary != corpus.predicate_vocabulary) {
    throw DataError(
        "checkpoint incompatible with corpus: predicate_vocabulary differs");
  }
}

}  // namespace vrdiff
