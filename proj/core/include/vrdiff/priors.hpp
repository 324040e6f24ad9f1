#pragma once

#include <cstdint>
#include <map>

#include "vrdiff/corpus.hpp"

namespace vrdiff {

// Smoothed conditional predicate distribution P(p | c_s, c_o) tallied from
// train annotations: (count + alpha) / (pair_total + alpha * K). With
// alpha = 0 this is the raw relative frequency.
class PriorTable {
 public:
  PriorTable() = default;
  PriorTable(int predicate_count, double alpha)
      : predicate_count_(predicate_count), alpha_(alpha) {}

  void add(int subject_category, int object_category, int predicate,
           std::int64_t count = 1);

  double probability(int predicate, int subject_category,
                     int object_category) const;

  // Hinge margin between an annotated predicate and a competitor on the
  // same category pair: 1 + P(p|pair) - P(p'|pair), always in [0, 2].
  double margin(int annotated_predicate, int competitor_predicate,
                int subject_category, int object_category) const;

  // P(p|c_s,c_o) * P(c_s|s) * P(c_o|o), the detector-confidence-weighted
  // prior used at test time.
  double prior_score(int predicate, const ObjectInstance& subject,
                     const ObjectInstance& object) const;

  std::int64_t count(int subject_category, int object_category,
                     int predicate) const;
  int predicate_count() const { return predicate_count_; }
  double alpha() const { return alpha_; }

  // Sorted (c_s, c_o, p) -> count view, for serialization and tests.
  const std::map<std::tuple<int, int, int>, std::int64_t>& counts() const {
    return counts_;
  }

 private:
  int predicate_count_ = 0;
  double alpha_ = 0.0;
  std::map<std::tuple<int, int, int>, std::int64_t> counts_;
  std::map<std::pair<int, int>, std::int64_t> pair_totals_;
};

PriorTable fit_priors(const RelationCorpus& corpus, double alpha);

}  // namespace vrdiff
