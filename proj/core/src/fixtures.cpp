#include "vrdiff/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "vrdiff/error.hpp"
#include "vrdiff/rng.hpp"

namespace vrdiff {
namespace {

std::string padded(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%03d", prefix, i);
  return buf;
}

struct Combo {
  int predicate;
  int subject_category;
  int object_category;
};

BoundingBox random_box(SplitMix64& rng, double base_x, double base_y) {
  const double w = rng.uniform(60.0, 160.0);
  const double h = rng.uniform(60.0, 160.0);
  const double x = base_x + rng.uniform(0.0, 120.0);
  const double y = base_y + rng.uniform(0.0, 80.0);
  return BoundingBox{x, y, w, h};
}

}  // namespace

RelationCorpus generate_clique_corpus(const CliqueCorpusSpec& spec) {
  if (spec.cliques < 2) {
    throw DataError("clique corpus: need at least two cliques");
  }
  if (spec.categories % spec.cliques != 0) {
    throw DataError("clique corpus: categories must divide evenly into cliques");
  }
  const int members = spec.categories / spec.cliques;
  if (members < 2) {
    throw DataError("clique corpus: need at least two members per clique");
  }
  if (spec.predicates < 1 ||
      spec.predicates > spec.cliques * (spec.cliques - 1)) {
    throw DataError("clique corpus: predicates must be in [1, cliques*(cliques-1)]");
  }
  if (spec.pairs_per_image < 1 || spec.train_images < 1) {
    throw DataError("clique corpus: need at least one pair and one train image");
  }
  int held_per_side = 0;
  if (spec.holdout > 0.0) {
    held_per_side = std::max(
        1, static_cast<int>(std::llround(spec.holdout * members)));
    if (held_per_side > members - 2) {
      throw DataError(
          "clique corpus: holdout leaves fewer than two train members per "
          "clique side");
    }
  }

  RelationCorpus corpus;
  for (int c = 0; c < spec.categories; ++c) {
    corpus.object_vocabulary.push_back(padded("cat", c));
  }
  for (int p = 0; p < spec.predicates; ++p) {
    corpus.predicate_vocabulary.push_back(padded("rel", p));
  }

  // Each predicate gets a distinct ordered (subject clique, object clique)
  // pair; clique g owns the contiguous category block [g*members, ...).
  auto subject_clique = [&](int p) { return p % spec.cliques; };
  auto object_clique = [&](int p) {
    return (p % spec.cliques + 1 + p / spec.cliques) % spec.cliques;
  };
  auto member_of = [&](int clique, int local) {
    return clique * members + local;
  };
  // Rotating the held member with p / cliques keeps every category trained
  // under at least one predicate of its clique.
  auto held_subject = [&](int p, int local) {
    const int base = p / spec.cliques;
    const int offset = (local - base % members + members) % members;
    return offset < held_per_side;
  };
  auto held_object = [&](int p, int local) {
    const int base = p / spec.cliques + 1;
    const int offset = (local - base % members + members) % members;
    return offset < held_per_side;
  };

  // Train draws from combos with neither endpoint held out. The zero-shot
  // pool keeps only combos where BOTH endpoints are held: those give the
  // predicate no trained slot to lean on, so recovering them requires
  // information shared across the clique. Combos with exactly one held
  // endpoint are emitted nowhere.
  std::vector<Combo> train_pool;
  std::vector<Combo> zero_shot_pool;
  std::vector<Combo> seen_pool;  // train combos replayed in test images
  for (int p = 0; p < spec.predicates; ++p) {
    for (int s = 0; s < members; ++s) {
      for (int o = 0; o < members; ++o) {
        const Combo combo{p, member_of(subject_clique(p), s),
                          member_of(object_clique(p), o)};
        const bool s_held = held_subject(p, s);
        const bool o_held = held_object(p, o);
        if (s_held && o_held) {
          zero_shot_pool.push_back(combo);
        } else if (!s_held && !o_held) {
          train_pool.push_back(combo);
          seen_pool.push_back(combo);
        }
      }
    }
  }

  // Every train combo must actually be emitted, otherwise test images could
  // replay "seen" combos that never made it into the train split.
  if (static_cast<std::size_t>(spec.train_images) * spec.pairs_per_image <
      train_pool.size()) {
    throw DataError("clique corpus: train_images * pairs_per_image must be >= " +
                    std::to_string(train_pool.size()) +
                    " to cover every train combo");
  }

  SplitMix64 rng(stream_seed(spec.seed, "clique-corpus"));
  rng.shuffle(train_pool);
  rng.shuffle(zero_shot_pool);
  rng.shuffle(seen_pool);

  std::size_t train_cursor = 0, zs_cursor = 0, seen_cursor = 0;
  auto next_train = [&]() {
    const Combo c = train_pool[train_cursor % train_pool.size()];
    ++train_cursor;
    return c;
  };
  auto next_test = [&](int slot) {
    if (held_per_side > 0 && slot % 2 == 0) {
      const Combo c = zero_shot_pool[zs_cursor % zero_shot_pool.size()];
      ++zs_cursor;
      return c;
    }
    const Combo c = seen_pool[seen_cursor % seen_pool.size()];
    ++seen_cursor;
    return c;
  };

  int test_slot = 0;
  auto make_image = [&](const std::string& id, Split split) {
    CorpusImage image;
    image.image_id = id;
    image.split = split;
    for (int pair = 0; pair < spec.pairs_per_image; ++pair) {
      const Combo combo =
          split == Split::Train ? next_train() : next_test(test_slot++);
      // Related boxes are laid out near each other so the scene graph
      // connects every annotated pair.
      const double base_x = (pair % 2) * 320.0;
      const double base_y = (pair / 2) * 260.0;
      const BoundingBox subject_box = random_box(rng, base_x, base_y);
      BoundingBox object_box = random_box(rng, base_x, base_y);
      object_box.x = subject_box.x + rng.uniform(-50.0, 50.0);
      object_box.y = subject_box.y + rng.uniform(-50.0, 50.0);

      ObjectInstance subject;
      subject.instance_id = padded("i", 2 * pair);
      subject.category_id = combo.subject_category;
      subject.box = subject_box;
      ObjectInstance object;
      object.instance_id = padded("i", 2 * pair + 1);
      object.category_id = combo.object_category;
      object.box = object_box;

      const int s_index = static_cast<int>(image.instances.size());
      image.instances.push_back(std::move(subject));
      image.instances.push_back(std::move(object));
      image.relations.push_back(
          RelationAnnotation{s_index, combo.predicate, s_index + 1});
    }
    return image;
  };

  for (int i = 0; i < spec.train_images; ++i) {
    corpus.images.push_back(make_image(padded("train_", i), Split::Train));
  }
  for (int i = 0; i < spec.test_images; ++i) {
    corpus.images.push_back(make_image(padded("test_", i), Split::Test));
  }
  return corpus;
}

}  // namespace vrdiff
