#include "vrdiff/model.hpp"

#include <gtest/gtest.h>

#include <cstring>

#include "test_util.hpp"
#include "vrdiff/error.hpp"
#include "vrdiff/fixtures.hpp"

namespace vrdiff {
namespace {

AttributeGraph graph_from(const Matrix& adjacency, const Matrix& attributes,
                          int hops) {
  AttributeGraph g;
  g.node_ids.resize(static_cast<std::size_t>(adjacency.rows()));
  for (int i = 0; i < adjacency.rows(); ++i) {
    g.node_ids[static_cast<std::size_t>(i)] = i;
  }
  g.raw_adjacency = Matrix::Zero(adjacency.rows(), adjacency.cols());
  g.adjacency = adjacency;
  g.attributes = attributes;
  g.power_tensor = power_tensor(adjacency, hops);
  return g;
}

TEST(PairFeaturesTest, ConcatenatesSceneAndSemanticBlocks) {
  const testing::GradCheckSetup toy(1, Nonlinearity::Relu, 2, 2);
  const DiffusionOutput scene =
      diffuse_forward(toy.scene_graph, toy.scene_params, false);
  const DiffusionOutput semantic =
      diffuse_forward(toy.semantic_graph, toy.semantic_params, false);
  const CandidatePair pair = pair_features(toy.image, 0, 1, &scene, &semantic);
  ASSERT_EQ(pair.subject_features.size(), 4);
  EXPECT_EQ(pair.subject_features.head(2),
            scene.Z.row(0).transpose().eval());
  EXPECT_EQ(pair.subject_features.tail(2),
            semantic.Z.row(toy.image.instances[0].category_id)
                .transpose()
                .eval());
  EXPECT_EQ(pair.object_features.head(2), scene.Z.row(1).transpose().eval());
  EXPECT_EQ(pair.subject.instance_id, "a");
  EXPECT_EQ(pair.object.instance_id, "b");

  EXPECT_THROW(pair_features(toy.image, 0, 7, &scene, &semantic), DataError);
}

TEST(PairFeaturesTest, IdentityDiffusionReturnsRawInputs) {
  // identity adjacency, single hop, all-ones weights, identity map
  Matrix x_vis(2, 2), x_sem(3, 2);
  x_vis << 1, 2, 3, 4;
  x_sem << 5, 6, 7, 8, 9, 10;
  const AttributeGraph scene_g = graph_from(Matrix::Identity(2, 2), x_vis, 1);
  const AttributeGraph sem_g = graph_from(Matrix::Identity(3, 3), x_sem, 1);
  DiffusionParams id2;
  id2.nonlinearity = Nonlinearity::Identity;
  id2.hop_weights = Matrix::Ones(1, 2);
  id2.map_weights = Matrix::Identity(2, 2);
  id2.map_bias = Vector::Zero(2);

  CorpusImage image;
  image.image_id = "id";
  image.instances.push_back(
      testing::make_instance("a", 0, BoundingBox{0, 0, 1, 1}));
  image.instances.push_back(
      testing::make_instance("b", 2, BoundingBox{1, 0, 1, 1}));

  const DiffusionOutput scene = diffuse_forward(scene_g, id2, false);
  const DiffusionOutput semantic = diffuse_forward(sem_g, id2, false);
  const CandidatePair pair = pair_features(image, 0, 1, &scene, &semantic);
  Vector expected_s(4), expected_o(4);
  expected_s << 1, 2, 5, 6;    // raw visual row 0, raw embedding of cat 0
  expected_o << 3, 4, 9, 10;   // raw visual row 1, raw embedding of cat 2
  EXPECT_EQ(pair.subject_features, expected_s);
  EXPECT_EQ(pair.object_features, expected_o);
}

TEST(PairFeaturesTest, MatchesIndependentRecomputation) {
  const testing::GradCheckSetup toy(7, Nonlinearity::Relu);
  const DiffusionOutput scene =
      diffuse_forward(toy.scene_graph, toy.scene_params, false);
  const DiffusionOutput semantic =
      diffuse_forward(toy.semantic_graph, toy.semantic_params, false);
  const CandidatePair pair = pair_features(toy.image, 1, 2, &scene, &semantic);

  // recompute from scratch with the naive oracle
  const Matrix z_vis = testing::naive_diffusion(
      toy.scene_graph.adjacency, toy.scene_graph.attributes,
      toy.scene_params.hop_weights, toy.scene_params.map_weights,
      toy.scene_params.map_bias, true);
  const Matrix z_sem = testing::naive_diffusion(
      toy.semantic_graph.adjacency, toy.semantic_graph.attributes,
      toy.semantic_params.hop_weights, toy.semantic_params.map_weights,
      toy.semantic_params.map_bias, true);
  Vector expected(z_vis.cols() + z_sem.cols());
  expected << z_vis.row(1).transpose(),
      z_sem.row(toy.image.instances[1].category_id).transpose();
  EXPECT_LT((pair.subject_features - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CompatibilityTest, DotProductAgainstNaiveOracle) {
  const testing::GradCheckSetup toy(11, Nonlinearity::Relu);
  const DiffusionOutput scene =
      diffuse_forward(toy.scene_graph, toy.scene_params, false);
  const DiffusionOutput semantic =
      diffuse_forward(toy.semantic_graph, toy.semantic_params, false);
  const CandidatePair pair = pair_features(toy.image, 0, 2, &scene, &semantic);

  PredicateScorer zero;
  zero.weights = Matrix::Zero(3, 2 * pair.subject_features.size());
  EXPECT_DOUBLE_EQ(compatibility(pair, 1, zero), 0.0);

  PredicateScorer one_hot = zero;
  one_hot.weights(1, 2) = 1.0;  // selects subject feature entry 2
  EXPECT_DOUBLE_EQ(compatibility(pair, 1, one_hot), pair.subject_features(2));
  one_hot.weights(1, 2) = 0.0;
  const Eigen::Index d = pair.subject_features.size();
  one_hot.weights(1, d + 1) = 1.0;  // selects object feature entry 1
  EXPECT_DOUBLE_EQ(compatibility(pair, 1, one_hot), pair.object_features(1));

  double expected = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    expected += toy.scorer.weights(2, i) * pair.subject_features(i);
    expected += toy.scorer.weights(2, d + i) * pair.object_features(i);
  }
  EXPECT_NEAR(compatibility(pair, 2, toy.scorer), expected, 1e-12);
}

TEST(HingeLossTest, UniformScoresAndPriorsGiveMarginPerCompetitor) {
  testing::GradCheckSetup toy(13, Nonlinearity::Identity);
  toy.scorer.weights.setZero();
  toy.priors = PriorTable(3, 1e-3);  // no counts: every margin is exactly 1
  const double loss = toy.loss();
  const double expected =
      static_cast<double>(toy.image.relations.size()) * (3 - 1);
  EXPECT_NEAR(loss, expected, 1e-12);
}

TEST(HingeLossTest, ClearedMarginsGiveZeroLoss) {
  Matrix x(2, 2);
  x << 1, 0, 0, 1;
  const AttributeGraph scene_g = graph_from(Matrix::Identity(2, 2), x, 1);
  DiffusionParams id2;
  id2.nonlinearity = Nonlinearity::Identity;
  id2.hop_weights = Matrix::Ones(1, 2);
  id2.map_weights = Matrix::Identity(2, 2);
  id2.map_bias = Vector::Zero(2);

  CorpusImage image;
  image.image_id = "clear";
  image.instances.push_back(
      testing::make_instance("a", 0, BoundingBox{0, 0, 1, 1}));
  image.instances.push_back(
      testing::make_instance("b", 1, BoundingBox{1, 0, 1, 1}));
  image.relations.push_back(RelationAnnotation{0, 0, 1});

  PredicateScorer scorer;
  scorer.weights = Matrix::Zero(3, 4);
  scorer.weights.row(0) << 10, 0, 0, 10;  // psi(annotated) = 20, others 0

  const DiffusionOutput scene = diffuse_forward(scene_g, id2, false);
  const HingeGradients result =
      hinge_loss(image, PriorTable(3, 0.0), scorer, &scene, nullptr);
  EXPECT_DOUBLE_EQ(result.loss, 0.0);
  EXPECT_TRUE(result.scorer.isZero());
  EXPECT_TRUE(result.scene_Z.isZero());
}

TEST(HingeLossTest, RequiresAnnotatedRelations) {
  testing::GradCheckSetup toy(17, Nonlinearity::Relu);
  CorpusImage empty = toy.image;
  empty.relations.clear();
  const DiffusionOutput scene =
      diffuse_forward(toy.scene_graph, toy.scene_params, false);
  EXPECT_THROW(hinge_loss(empty, toy.priors, toy.scorer, &scene, nullptr),
               DataError);
}

TEST(GradientSuiteTest, FullModelMatchesFiniteDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 40 && checked < 8; ++seed) {
    testing::GradCheckSetup toy(seed, seed % 2 == 0 ? Nonlinearity::Identity
                                     : Nonlinearity::Relu);
    if (toy.kink_margin() < 1e-3) continue;  // unusable for central FD
    ++checked;

    const ImageStepResult analytic = image_loss_gradients(
        toy.image, toy.config, &toy.semantic_graph, &toy.scene_graph,
        toy.semantic_params, toy.scene_params, toy.scorer, toy.priors,
        /*want_embedding_grad=*/true);
    auto loss = [&toy]() { return toy.loss(); };

    EXPECT_TRUE(testing::check_gradient_fd(
        toy.scorer.weights, analytic.scorer_grad, loss, 1e-5, 1e-6,
        "scorer"));
    EXPECT_TRUE(testing::check_gradient_fd(
        toy.scene_params.hop_weights, analytic.scene_grads.hop_weights, loss,
        1e-5, 1e-6, "scene.hop_weights"));
    EXPECT_TRUE(testing::check_gradient_fd(
        toy.scene_params.map_weights, analytic.scene_grads.map_weights, loss,
        1e-5, 1e-6, "scene.map_weights"));
    EXPECT_TRUE(testing::check_gradient_fd(
        toy.semantic_params.hop_weights, analytic.semantic_grads.hop_weights,
        loss, 1e-5, 1e-6, "semantic.hop_weights"));
    EXPECT_TRUE(testing::check_gradient_fd(
        toy.semantic_params.map_weights, analytic.semantic_grads.map_weights,
        loss, 1e-5, 1e-6, "semantic.map_weights"));
    EXPECT_TRUE(testing::check_gradient_fd(
        toy.semantic_graph.attributes, analytic.semantic_grads.attributes,
        loss, 1e-5, 1e-6, "semantic.attributes"));

    Matrix scene_bias = toy.scene_params.map_bias;
    auto scene_bias_loss = [&]() {
      toy.scene_params.map_bias = scene_bias.col(0);
      return toy.loss();
    };
    EXPECT_TRUE(testing::check_gradient_fd(
        scene_bias, Matrix(analytic.scene_grads.map_bias), scene_bias_loss,
        1e-5, 1e-6, "scene.map_bias"));
    toy.scene_params.map_bias = scene_bias.col(0);

    Matrix sem_bias = toy.semantic_params.map_bias;
    auto sem_bias_loss = [&]() {
      toy.semantic_params.map_bias = sem_bias.col(0);
      return toy.loss();
    };
    EXPECT_TRUE(testing::check_gradient_fd(
        sem_bias, Matrix(analytic.semantic_grads.map_bias), sem_bias_loss,
        1e-5, 1e-6, "semantic.map_bias"));
    toy.semantic_params.map_bias = sem_bias.col(0);
  }
  EXPECT_GE(checked, 8);
}

TEST(ScoreTripletTest, LambdaControlsPriorTerm) {
  testing::GradCheckSetup toy(19, Nonlinearity::Relu);
  ModelState state;
  state.config = toy.config;
  state.semantic_graph = toy.semantic_graph;
  state.semantic_params = toy.semantic_params;
  state.scene_params = toy.scene_params;
  state.scorer = toy.scorer;
  state.priors = toy.priors;

  const DiffusionOutput scene =
      diffuse_forward(toy.scene_graph, toy.scene_params, false);
  const DiffusionOutput semantic =
      diffuse_forward(toy.semantic_graph, toy.semantic_params, false);
  const CandidatePair pair = pair_features(toy.image, 0, 1, &scene, &semantic);

  EXPECT_DOUBLE_EQ(score_triplet(pair, 0, state, 0.0),
                   compatibility(pair, 0, state.scorer));
  // priors fixture: P(0 | cats 0,1) = (3 + a) / (4 + 3a), confidences 0.9*0.8
  const double p = state.priors.prior_score(0, pair.subject, pair.object);
  EXPECT_NEAR(score_triplet(pair, 0, state, 1.0),
              compatibility(pair, 0, state.scorer) + std::log(p + 1e-12),
              1e-12);

  // a zero-count predicate with alpha = 0 gets the log floor
  state.priors = PriorTable(3, 0.0);
  EXPECT_NEAR(score_triplet(pair, 1, state, 1.0),
              compatibility(pair, 1, state.scorer) + std::log(1e-12), 1e-9);
}

TEST(ScoreTripletTest, LambdaZeroPreservesCompatibilityOrder) {
  testing::GradCheckSetup toy(23, Nonlinearity::Relu);
  ModelState state;
  state.config = toy.config;
  state.semantic_graph = toy.semantic_graph;
  state.semantic_params = toy.semantic_params;
  state.scene_params = toy.scene_params;
  state.scorer = toy.scorer;
  state.priors = toy.priors;
  const DiffusionOutput scene =
      diffuse_forward(toy.scene_graph, toy.scene_params, false);
  const DiffusionOutput semantic =
      diffuse_forward(toy.semantic_graph, toy.semantic_params, false);
  const CandidatePair pair = pair_features(toy.image, 2, 0, &scene, &semantic);

  std::vector<int> by_psi{0, 1, 2}, by_score{0, 1, 2};
  auto psi_key = [&](int p) { return compatibility(pair, p, state.scorer); };
  auto score_key = [&](int p) { return score_triplet(pair, p, state, 0.0); };
  std::sort(by_psi.begin(), by_psi.end(),
            [&](int a, int b) { return psi_key(a) > psi_key(b); });
  std::sort(by_score.begin(), by_score.end(),
            [&](int a, int b) { return score_key(a) > score_key(b); });
  EXPECT_EQ(by_psi, by_score);
}

Config small_train_config() {
  Config config;
  config.epochs = 3;
  config.seed = 5;
  config.embedding_dim = 6;
  config.features.dim = 6;
  config.features.seed = 5;
  config.features.class_sep = 3.0;
  config.hops_semantic = 2;
  config.hops_scene = 2;
  return config;
}

TEST(TrainTest, ZeroLearningRateLeavesParametersAtInit) {
  CliqueCorpusSpec spec = testing::small_clique_spec();
  const RelationCorpus corpus = generate_clique_corpus(spec);
  Config config = small_train_config();
  config.epochs = 1;

  Config frozen = config;
  frozen.learning_rate = 0.0;
  const FeatureProvider features =
      FeatureProvider::synthetic(config.features, corpus);
  const TrainResult trained =
      train(corpus, frozen, EmbeddingTable{}, features);

  Config zero_epochs = config;
  zero_epochs.epochs = 0;
  const TrainResult initial =
      train(corpus, zero_epochs, EmbeddingTable{}, features);
  EXPECT_EQ(trained.state.scorer.weights, initial.state.scorer.weights);
  EXPECT_EQ(trained.state.scene_params.map_weights,
            initial.state.scene_params.map_weights);
  EXPECT_EQ(trained.state.semantic_params.map_weights,
            initial.state.semantic_params.map_weights);
}

TEST(TrainTest, LossDecreasesOnSeparableCorpus) {
  CliqueCorpusSpec spec = testing::small_clique_spec();
  spec.train_images = 40;
  spec.holdout = 0.0;
  const RelationCorpus corpus = generate_clique_corpus(spec);
  Config config = small_train_config();
  config.epochs = 8;
  const FeatureProvider features =
      FeatureProvider::synthetic(config.features, corpus);
  const TrainResult result = train(corpus, config, EmbeddingTable{}, features);
  ASSERT_EQ(result.loss_history.size(), 8u);
  EXPECT_LT(result.loss_history.back(), result.loss_history.front());
}

TEST(TrainTest, SameSeedGivesBitIdenticalCheckpoints) {
  CliqueCorpusSpec spec = testing::small_clique_spec();
  const RelationCorpus corpus = generate_clique_corpus(spec);
  const Config config = small_train_config();
  const FeatureProvider features =
      FeatureProvider::synthetic(config.features, corpus);

  testing::TempDir dir("train");
  const TrainResult a = train(corpus, config, EmbeddingTable{}, features);
  const TrainResult b = train(corpus, config, EmbeddingTable{}, features);
  save_checkpoint(a.state, dir.file("a.ckpt"));
  save_checkpoint(b.state, dir.file("b.ckpt"));
  EXPECT_EQ(testing::read_file(dir.file("a.ckpt")),
            testing::read_file(dir.file("b.ckpt")));
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(CheckpointTest, RoundTripRestoresScoringExactly) {
  CliqueCorpusSpec spec = testing::small_clique_spec();
  const RelationCorpus corpus = generate_clique_corpus(spec);
  const Config config = small_train_config();
  const FeatureProvider features =
      FeatureProvider::synthetic(config.features, corpus);
  const TrainResult trained = train(corpus, config, EmbeddingTable{}, features);

  testing::TempDir dir("ckpt");
  save_checkpoint(trained.state, dir.file("model.ckpt"));
  const ModelState restored = load_checkpoint(dir.file("model.ckpt"));

  const DiffusionOutput sem_a = diffuse_forward(
      trained.state.semantic_graph, trained.state.semantic_params, false);
  const DiffusionOutput sem_b = diffuse_forward(
      restored.semantic_graph, restored.semantic_params, false);
  for (const auto& image : corpus.images) {
    if (image.split != Split::Test) continue;
    const AttributeGraph scene_a = build_scene_graph(
        image, features, config.effective_hops_scene(),
        config.iou_threshold, config.distance_threshold);
    const DiffusionOutput scn_a =
        diffuse_forward(scene_a, trained.state.scene_params, false);
    const DiffusionOutput scn_b =
        diffuse_forward(scene_a, restored.scene_params, false);
    for (int s = 0; s < 2; ++s) {
      const CandidatePair pa =
          pair_features(image, s, s + 1, &scn_a, &sem_a);
      const CandidatePair pb =
          pair_features(image, s, s + 1, &scn_b, &sem_b);
      for (int p = 0; p < corpus.predicate_count(); ++p) {
        EXPECT_EQ(score_triplet(pa, p, trained.state, 1.0),
                  score_triplet(pb, p, restored, 1.0));
      }
    }
  }
}

TEST(HingeLossTest, NonnegativeOnRandomSetups) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const testing::GradCheckSetup toy(
        seed, seed % 2 == 0 ? Nonlinearity::Relu : Nonlinearity::Identity);
    EXPECT_GE(toy.loss(), 0.0);
  }
}

TEST(TrainTest, DivergenceGuardReportsNumericError) {
  // Conflicting annotations on the same category pair plus an absurd
  // learning rate: the first step sends the pair's scores to +/-inf in one
  // direction, the conflicting image then produces an infinite hinge term.
  const RelationCorpus corpus =
      testing::corpus_from_triplets(2, 2, {{0, 0, 1}, {0, 1, 1}});
  Config config = small_train_config();
  config.learning_rate = 1e307;
  config.epochs = 2;
  const FeatureProvider features =
      FeatureProvider::synthetic(config.features, corpus);
  try {
    train(corpus, config, EmbeddingTable{}, features);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
  }
}

TEST(CheckpointTest, VersionMismatchIsRejected) {
  CliqueCorpusSpec spec = testing::small_clique_spec();
  const RelationCorpus corpus = generate_clique_corpus(spec);
  Config config = small_train_config();
  config.epochs = 0;
  const FeatureProvider features =
      FeatureProvider::synthetic(config.features, corpus);
  const TrainResult trained =
      train(corpus, config, EmbeddingTable{}, features);
  testing::TempDir dir("ckptver");
  save_checkpoint(trained.state, dir.file("m.ckpt"));

  // bump the version field (first u32 after the 8-byte magic) and restore
  // a consistent checksum over the patched payload
  std::string bytes = testing::read_file(dir.file("m.ckpt"));
  bytes[8] = static_cast<char>(bytes[8] + 1);
  std::uint64_t checksum =
      fnv1a({bytes.data(), bytes.size() - sizeof(std::uint64_t)});
  std::memcpy(bytes.data() + bytes.size() - sizeof(checksum), &checksum,
              sizeof(checksum));
  testing::write_file(dir.file("v2.ckpt"), bytes);
  try {
    load_checkpoint(dir.file("v2.ckpt"));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(CheckpointTest, TruncationAndVocabularyMismatchAreDetected) {
  CliqueCorpusSpec spec = testing::small_clique_spec();
  const RelationCorpus corpus = generate_clique_corpus(spec);
  const Config config = small_train_config();
  const FeatureProvider features =
      FeatureProvider::synthetic(config.features, corpus);
  const TrainResult trained = train(corpus, config, EmbeddingTable{}, features);

  testing::TempDir dir("ckpt");
  save_checkpoint(trained.state, dir.file("model.ckpt"));

  const std::string bytes = testing::read_file(dir.file("model.ckpt"));
  testing::write_file(dir.file("truncated.ckpt"),
                      bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_checkpoint(dir.file("truncated.ckpt")), DataError);

  std::string corrupted = bytes;
  corrupted[bytes.size() / 3] ^= 0x40;
  testing::write_file(dir.file("corrupt.ckpt"), corrupted);
  EXPECT_THROW(load_checkpoint(dir.file("corrupt.ckpt")), DataError);

  RelationCorpus other = corpus;
  other.object_vocabulary[0] = "different";
  try {
    ensure_vocabulary_compatible(trained.state, other);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("object_vocabulary"),
              std::string::npos);
  }
  RelationCorpus fewer = corpus;
  fewer.predicate_vocabulary.pop_back();
  try {
    ensure_vocabulary_compatible(trained.state, fewer);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("predicate_vocabulary"),
              std::string::npos);
  }
}

}  // namespace
}  // namespace vrdiff
