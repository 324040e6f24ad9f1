#include "vrdiff/priors.hpp"

namespace vrdiff {

void PriorTable::add(int subject_category, int object_category, int predicate,
                     std::int64_t count) {
  counts_[{subject_category, object_category, predicate}] += count;
  pair_totals_[{subject_category, object_category}] += count;
}

double PriorTable::probability(int predicate, int subject_category,
                               int object_category) const {
  auto tot = pair_totals_.find({subject_category, object_category});
  const double total = tot == pair_totals_.end()
                           ? 0.0
                           : static_cast<double>(tot->second);
  const double denom = total + alpha_ * predicate_count_;
  if (denom <= 0.0) return 0.0;  // unseen pair without smoothing
  return (static_cast<double>(count(subject_category, object_category,
                                    predicate)) +
          alpha_) /
         denom;
}

double PriorTable::margin(int annotated_predicate, int competitor_predicate,
                          int subject_category, int object_category) const {
  return 1.0 +
         probability(annotated_predicate, subject_category, object_category) -
         probability(competitor_predicate, subject_category, object_category);
}

double PriorTable::prior_score(int predicate, const ObjectInstance& subject,
                               const ObjectInstance& object) const {
  return probability(predicate, subject.category_id, object.category_id) *
         subject.confidence * object.confidence;
}

std::int64_t PriorTable::count(int subject_category, int object_category,
                               int predicate) const {
  auto it = counts_.find({subject_category, object_category, predicate});
  return it == counts_.end() ? 0 : it->second;
}

PriorTable fit_priors(const RelationCorpus& corpus, double alpha) {
  PriorTable table(corpus.predicate_count(), alpha);
  for (const auto& image : corpus.images) {
    if (image.split != Split::Train) continue;
    for (const auto& rel : image.relations) {
      table.add(image.instances[static_cast<std::size_t>(rel.subject_index)]
                    .category_id,
                image.instances[static_cast<std::size_t>(rel.object_index)]
                    .category_id,
                rel.predicate_id);
    }
  }
  return table;
}

}  // namespace vrdiff
