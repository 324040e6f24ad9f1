#pragma once

#include <cstdint>

#include "vrdiff/corpus.hpp"

namespace vrdiff {

// Synthetic corpus whose categories form semantic cliques: each predicate
// connects one subject clique to one object clique, so clique members are
// exchangeable under it. With holdout > 0, for every predicate some clique
// members appear with it only in the test split, producing zero-shot
// triplet types whose endpoints were never seen with that predicate in
// training.
struct CliqueCorpusSpec {
  int categories = 24;
  int cliques = 6;       // categories must divide evenly into cliques
  int predicates = 12;   // at most cliques * (cliques - 1)
  int train_images = 120;
  int test_images = 40;
  int pairs_per_image = 2;  // instances per image = 2 * pairs
  double holdout = 0.25;    // fraction of clique members held out per side
  std::uint64_t seed = 1;
};

RelationCorpus generate_clique_corpus(const CliqueCorpusSpec& spec);

}  // namespace vrdiff
