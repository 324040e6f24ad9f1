#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vrdiff/corpus.hpp"
#include "vrdiff/features.hpp"
#include "vrdiff/model.hpp"

namespace vrdiff {

// Predicate detection matches on labels only (boxes are ground truth);
// relationship detection additionally requires both boxes to overlap their
// ground truth with IoU > 0.5.
enum class EvalTask { Predicate, Relationship };
enum class MatchMode { Label, LabelIou };
enum class Subset { All, ZeroShot };
enum class RecallAgg { Micro, Macro };

MatchMode match_mode_for(EvalTask task);

struct ScoredCandidate {
  int subject_index = 0;
  int predicate = 0;
  int object_index = 0;
  double score = 0.0;
};

// All ordered instance pairs x all predicates of one image, sorted by
// score descending; ties broken by (subject id, predicate id, object id).
struct PredictionRanking {
  std::string image_id;
  std::vector<ScoredCandidate> candidates;
};

// Semantic diffusion for a frozen model, computed once per evaluation.
DiffusionOutput semantic_context(const ModelState& state);

PredictionRanking rank_image(const CorpusImage& image, const ModelState& state,
                             const FeatureProvider& features,
                             const DiffusionOutput* semantic_out,
                             double lambda);

// Fraction of ground-truth relations recovered in the top-K candidates,
// matched greedily in rank order (each candidate and each ground truth
// used at most once). Returns nullopt when the subset has no ground truth.
std::optional<double> recall_at_k(
    const std::vector<PredictionRanking>& rankings,
    const std::vector<const CorpusImage*>& images, int k, MatchMode mode,
    Subset subset, const std::set<TripletType>& zero_shot,
    RecallAgg agg = RecallAgg::Micro);

struct ReportCell {
  std::optional<double> recall;
  long matched = 0;
  long total_ground_truth = 0;
};

struct EvalReport {
  std::vector<int> ks;
  double lambda = 1.0;
  RecallAgg agg = RecallAgg::Micro;
  // (task, subset) -> one cell per k
  std::map<std::pair<EvalTask, Subset>, std::vector<ReportCell>> cells;
};

// Ranks every image of one split once and aggregates recall for both tasks
// and both subsets at each requested K. The zero-shot subset always means
// types absent from the train split.
EvalReport evaluate(const RelationCorpus& corpus, const ModelState& state,
                    const FeatureProvider& features, const std::vector<int>& ks,
                    double lambda, int threads = 1, Split split = Split::Test);

std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);

// JSON-lines per-image match debugging output: matched/total ground truth
// and the rank of each matched candidate.
std::string match_details_jsonl(const std::vector<PredictionRanking>& rankings,
                                const std::vector<const CorpusImage*>& images,
                                int k, MatchMode mode, Subset subset,
                                const std::set<TripletType>& zero_shot);

// One trained-and-evaluated configuration of the cue/diffusion grid.
struct AblationRow {
  std::string name;
  Config config;
  EvalReport report;
};

// Trains and evaluates the standard grid with a shared seed:
// appearance / semantic / both without diffusion, diffusion on one graph
// at a time, full diffusion, and full diffusion with trainable embeddings.
std::vector<AblationRow> ablation_report(const RelationCorpus& corpus,
                                         const Config& base,
                                         const EmbeddingTable& embeddings,
                                         const FeatureProvider& features,
                                         const std::vector<int>& ks);

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace vrdiff
