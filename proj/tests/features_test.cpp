#include "vrdiff/features.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vrdiff/error.hpp"

namespace vrdiff {
namespace {

using testing::TempDir;
using testing::write_file;

TEST(EmbeddingTest, LoadsTwoLineFile) {
  TempDir dir("emb");
  write_file(dir.file("e.txt"), "a 1 0\nb 0 1\n");
  const EmbeddingTable table = load_embeddings(dir.file("e.txt"));
  EXPECT_EQ(table.dimension, 2);
  EXPECT_EQ(table.vectors.size(), 2u);
  EXPECT_EQ(table.duplicates_replaced, 0u);
}

TEST(EmbeddingTest, RaggedDimensionsAndBadFloatsThrow) {
  TempDir dir("emb");
  write_file(dir.file("ragged.txt"), "a 1 0\nb 0 1 2\n");
  EXPECT_THROW(load_embeddings(dir.file("ragged.txt")), DataError);
  write_file(dir.file("bad.txt"), "a 1 zebra\n");
  EXPECT_THROW(load_embeddings(dir.file("bad.txt")), DataError);
}

TEST(EmbeddingTest, DuplicateTokensLastWinsWithCount) {
  TempDir dir("emb");
  write_file(dir.file("dup.txt"), "a 1 0\na 0 1\n");
  const EmbeddingTable table = load_embeddings(dir.file("dup.txt"));
  EXPECT_EQ(table.duplicates_replaced, 1u);
  EXPECT_EQ(table.vectors.at("a")(1), 1.0);
}

TEST(EmbeddingTest, LookupReturnsExactFileFloats) {
  TempDir dir("emb");
  std::ostringstream file;
  SplitMix64 rng(3);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (int t = 0; t < 10; ++t) {
    std::vector<double> vals;
    file << "tok" << t;
    for (int j = 0; j < 4; ++j) {
      const double v = rng.uniform(-2, 2);
      vals.push_back(v);
      file << ' ' << std::setprecision(17) << v;
    }
    file << '\n';
    rows.emplace_back("tok" + std::to_string(t), vals);
  }
  write_file(dir.file("ten.txt"), file.str());
  const EmbeddingTable table = load_embeddings(dir.file("ten.txt"));
  for (const auto& [token, vals] : rows) {
    const Vector v = category_vector(table, token, 0);
    for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(v(j), vals[j]);
  }
}

TEST(EmbeddingTest, FallbackIsDeterministicUnitVector) {
  EmbeddingTable table;
  table.dimension = 8;
  const Vector a = category_vector(table, "missing", 42);
  const Vector b = category_vector(table, "missing", 42);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a.norm(), 1.0, 1e-9);
  const Vector other_seed = category_vector(table, "missing", 43);
  EXPECT_NE(a, other_seed);
}

CorpusImage two_instance_image() {
  CorpusImage image;
  image.image_id = "img";
  image.instances.push_back(
      testing::make_instance("a", 0, BoundingBox{0, 0, 10, 10}));
  image.instances.push_back(
      testing::make_instance("b", 1, BoundingBox{10, 0, 10, 10}));
  return image;
}

TEST(FeatureProviderTest, SyntheticIsDeterministic) {
  RelationCorpus corpus = testing::corpus_from_triplets(3, 2, {{0, 0, 1}});
  FeatureConfig config;
  config.dim = 6;
  config.seed = 11;
  const FeatureProvider provider = FeatureProvider::synthetic(config, corpus);
  const CorpusImage image = two_instance_image();
  EXPECT_EQ(provider.instance_feature(image, image.instances[0]),
            provider.instance_feature(image, image.instances[0]));
  EXPECT_NE(provider.instance_feature(image, image.instances[0]),
            provider.instance_feature(image, image.instances[1]));
}

TEST(FeatureProviderTest, SameCategorySharesMeanAcrossInstances) {
  RelationCorpus corpus = testing::corpus_from_triplets(3, 2, {{0, 0, 1}});
  FeatureConfig config;
  config.dim = 8;
  config.seed = 5;
  config.class_sep = 10.0;
  config.noise = 0.01;
  const FeatureProvider provider = FeatureProvider::synthetic(config, corpus);
  CorpusImage image = two_instance_image();
  image.instances[1].category_id = 0;  // same category, different instance
  const Vector fa = provider.instance_feature(image, image.instances[0]);
  const Vector fb = provider.instance_feature(image, image.instances[1]);
  EXPECT_NE(fa, fb);  // noise differs
  EXPECT_LT((fa - fb).norm(), 1.0);
  EXPECT_NEAR(fa.norm(), 10.0, 1.0);
}

TEST(FeatureProviderTest, FileModeReplaysStoredFloats) {
  TempDir dir("feat");
  write_file(dir.file("f.jsonl"),
             R"({"image_id": "img", "instance_id": "a", "vec": [0.5, -1.25]})"
             "\n"
             R"({"image_id": "img", "instance_id": "b", "vec": [2.0, 3.0]})"
             "\n");
  const FeatureProvider provider =
      FeatureProvider::from_file(dir.file("f.jsonl"), FeatureConfig{});
  EXPECT_EQ(provider.dimension(), 2);
  const CorpusImage image = two_instance_image();
  const Vector fa = provider.instance_feature(image, image.instances[0]);
  EXPECT_DOUBLE_EQ(fa(0), 0.5);
  EXPECT_DOUBLE_EQ(fa(1), -1.25);
}

TEST(FeatureProviderTest, FileModeKeyMissThrows) {
  TempDir dir("feat");
  write_file(dir.file("f.jsonl"),
             R"({"image_id": "other", "instance_id": "a", "vec": [1.0]})"
             "\n");
  const FeatureProvider provider =
      FeatureProvider::from_file(dir.file("f.jsonl"), FeatureConfig{});
  const CorpusImage image = two_instance_image();
  EXPECT_THROW(provider.instance_feature(image, image.instances[0]),
               DataError);
}

TEST(FeatureProviderTest, MaskBlockExtendsDimension) {
  RelationCorpus corpus = testing::corpus_from_triplets(3, 2, {{0, 0, 1}});
  FeatureConfig config;
  config.dim = 4;
  config.include_mask = true;
  config.mask_grid = 32;
  const FeatureProvider provider = FeatureProvider::synthetic(config, corpus);
  EXPECT_EQ(provider.dimension(), 4 + 32 * 32);
  const CorpusImage image = two_instance_image();
  const Vector f = provider.instance_feature(image, image.instances[0]);
  ASSERT_EQ(f.size(), 4 + 32 * 32);
  // instance "a" covers the left half of the two boxes' union
  const double ones = f.tail(32 * 32).sum();
  EXPECT_EQ(ones, 32 * 16);
}

}  // namespace
}  // namespace vrdiff
