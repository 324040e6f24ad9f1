#pragma once

#include <compare>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace vrdiff {

// Axis-aligned box, (left, top, width, height), y grows downward.
struct BoundingBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double area() const { return w * h; }
  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ObjectInstance {
  std::string instance_id;  // unique within its image
  int category_id = 0;
  BoundingBox box;
  double confidence = 1.0;  // detector score, 1.0 for ground truth

  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

// Annotated (subject, predicate, object) over two instances of one image.
// Indices refer into CorpusImage::instances.
struct RelationAnnotation {
  int subject_index = 0;
  int predicate_id = 0;
  int object_index = 0;

  friend bool operator==(const RelationAnnotation&,
                         const RelationAnnotation&) = default;
};

enum class Split { Train, Test };

struct CorpusImage {
  std::string image_id;
  Split split = Split::Train;
  std::vector<ObjectInstance> instances;
  std::vector<RelationAnnotation> relations;

  friend bool operator==(const CorpusImage&, const CorpusImage&) = default;
};

struct RelationCorpus {
  std::vector<std::string> object_vocabulary;
  std::vector<std::string> predicate_vocabulary;
  std::vector<CorpusImage> images;

  int category_count() const {
    return static_cast<int>(object_vocabulary.size());
  }
  int predicate_count() const {
    return static_cast<int>(predicate_vocabulary.size());
  }

  friend bool operator==(const RelationCorpus&, const RelationCorpus&) = default;
};

// (subject category, predicate, object category).
struct TripletType {
  int subject_category = 0;
  int predicate = 0;
  int object_category = 0;

  auto operator<=>(const TripletType&) const = default;
};

// Loads and fully validates a JSON-lines annotation file. Line 1 declares
// the vocabularies; each following line is one image. Throws DataError with
// the offending line number on malformed input, dangling instance
// references, unknown vocabulary names, or duplicate ids.
RelationCorpus load_corpus(const std::filesystem::path& path);

// Writes a corpus back to the annotation format; load_corpus(save_corpus(c))
// reproduces c exactly.
void save_corpus(const RelationCorpus& corpus, const std::filesystem::path& path);

// Deduplicated (c_s, p, c_o) types over annotations of one split.
std::set<TripletType> unique_triplet_types(const RelationCorpus& corpus,
                                           Split split);

// Triplet types that occur in the test split but never in train.
std::set<TripletType> zero_shot_types(const RelationCorpus& corpus);

}  // namespace vrdiff
