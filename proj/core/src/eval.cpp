#include "vrdiff/eval.hpp"

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <sstream>
#include <thread>

#include "vrdiff/error.hpp"
#include "vrdiff/geometry.hpp"

#include <json.hpp>

namespace vrdiff {

MatchMode match_mode_for(EvalTask task) {
  return task == EvalTask::Predicate ? MatchMode::Label : MatchMode::LabelIou;
}

DiffusionOutput semantic_context(const ModelState& state) {
  if (!state.config.use_semantic) return {};
  return diffuse_forward(state.semantic_graph, state.semantic_params,
                         /*keep_cache=*/false);
}

PredictionRanking rank_image(const CorpusImage& image, const ModelState& state,
                             const FeatureProvider& features,
                             const DiffusionOutput* semantic_out,
                             double lambda) {
  PredictionRanking ranking;
  ranking.image_id = image.image_id;
  const int n = static_cast<int>(image.instances.size());
  if (n < 2) return ranking;  // no pairs to score

  DiffusionOutput scene_out;
  if (state.config.use_appearance) {
    const AttributeGraph scene = build_scene_graph(
        image, features, state.config.effective_hops_scene(),
        state.config.iou_threshold, state.config.distance_threshold);
    scene_out = diffuse_forward(scene, state.scene_params,
                                /*keep_cache=*/false);
  }

  const int k = state.scorer.predicate_count();
  ranking.candidates.reserve(static_cast<std::size_t>(n) * (n - 1) * k);
  for (int s = 0; s < n; ++s) {
    for (int o = 0; o < n; ++o) {
      if (s == o) continue;
      const CandidatePair pair = pair_features(
          image, s, o, state.config.use_appearance ? &scene_out : nullptr,
          state.config.use_semantic ? semantic_out : nullptr);
      for (int p = 0; p < k; ++p) {
        ranking.candidates.push_back(
            ScoredCandidate{s, p, o, score_triplet(pair, p, state, lambda)});
      }
    }
  }

  std::sort(ranking.candidates.begin(), ranking.candidates.end(),
            [&image](const ScoredCandidate& a, const ScoredCandidate& b) {
              if (a.score != b.score) return a.score > b.score;
              const std::string& a_s =
                  image.instances[static_cast<std::size_t>(a.subject_index)]
                      .instance_id;
              const std::string& b_s =
                  image.instances[static_cast<std::size_t>(b.subject_index)]
                      .instance_id;
              if (a_s != b_s) return a_s < b_s;
              if (a.predicate != b.predicate) return a.predicate < b.predicate;
              return image.instances[static_cast<std::size_t>(a.object_index)]
                         .instance_id <
                     image.instances[static_cast<std::size_t>(b.object_index)]
                         .instance_id;
            });
  return ranking;
}

namespace {

struct GroundTruth {
  TripletType type;
  BoundingBox subject_box;
  BoundingBox object_box;
  bool matched = false;
};

std::vector<GroundTruth> ground_truth_of(
    const CorpusImage& image, Subset subset,
    const std::set<TripletType>& zero_shot) {
  std::vector<GroundTruth> out;
  for (const auto& rel : image.relations) {
    const auto& subj =
        image.instances[static_cast<std::size_t>(rel.subject_index)];
    const auto& obj =
        image.instances[static_cast<std::size_t>(rel.object_index)];
    const TripletType type{subj.category_id, rel.predicate_id,
                           obj.category_id};
    if (subset == Subset::ZeroShot && !zero_shot.contains(type)) continue;
    out.push_back(GroundTruth{type, subj.box, obj.box, false});
  }
  return out;
}

// Greedy top-K matching; each candidate matches at most one ground truth.
long match_image(const PredictionRanking& ranking, const CorpusImage& image,
                 std::vector<GroundTruth>& gt, int k, MatchMode mode,
                 std::vector<std::size_t>* matched_ranks = nullptr) {
  long matched = 0;
  const std::size_t top =
      std::min(ranking.candidates.size(), static_cast<std::size_t>(k));
  for (std::size_t rank = 0; rank < top; ++rank) {
    const ScoredCandidate& cand = ranking.candidates[rank];
    const auto& subj =
        image.instances[static_cast<std::size_t>(cand.subject_index)];
    const auto& obj =
        image.instances[static_cast<std::size_t>(cand.object_index)];
    // The break keeps one candidate from ever consuming two ground truths.
    for (auto& g : gt) {
      if (g.matched) continue;
      if (g.type.subject_category != subj.category_id ||
          g.type.predicate != cand.predicate ||
          g.type.object_category != obj.category_id) {
        continue;
      }
      if (mode == MatchMode::LabelIou &&
          !(iou(subj.box, g.subject_box) > 0.5 &&
            iou(obj.box, g.object_box) > 0.5)) {
        continue;
      }
      g.matched = true;
      ++matched;
      if (matched_ranks) matched_ranks->push_back(rank);
      break;
    }
  }
  return matched;
}

}  // namespace

std::optional<double> recall_at_k(
    const std::vector<PredictionRanking>& rankings,
    const std::vector<const CorpusImage*>& images, int k, MatchMode mode,
    Subset subset, const std::set<TripletType>& zero_shot, RecallAgg agg) {
  if (k <= 0) {
    throw DataError("recall_at_k: K must be positive");
  }
  if (rankings.size() != images.size()) {
    throw DataError("recall_at_k: rankings do not cover the evaluated images");
  }
  long total_matched = 0;
  long total_gt = 0;
  double macro_sum = 0.0;
  long macro_images = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (rankings[i].image_id != images[i]->image_id) {
      throw DataError("recall_at_k: ranking for image '" +
                      rankings[i].image_id + "' paired with image '" +
                      images[i]->image_id + "'");
    }
    std::vector<GroundTruth> gt =
        ground_truth_of(*images[i], subset, zero_shot);
    if (gt.empty()) continue;
    const long matched = match_image(rankings[i], *images[i], gt, k, mode);
    total_matched += matched;
    total_gt += static_cast<long>(gt.size());
    macro_sum += static_cast<double>(matched) / static_cast<double>(gt.size());
    ++macro_images;
  }
  if (total_gt == 0) return std::nullopt;
  if (agg == RecallAgg::Macro) {
    return macro_sum / static_cast<double>(macro_images);
  }
  return static_cast<double>(total_matched) / static_cast<double>(total_gt);
}

EvalReport evaluate(const RelationCorpus& corpus, const ModelState& state,
                    const FeatureProvider& features, const std::vector<int>& ks,
                    double lambda, int threads, Split split) {
  ensure_vocabulary_compatible(state, corpus);
  for (int k : ks) {
    if (k <= 0) throw DataError("evaluate: K must be positive");
  }

  std::vector<const CorpusImage*> images;
  for (const auto& image : corpus.images) {
    if (image.split == split) images.push_back(&image);
  }

  const DiffusionOutput semantic_out = semantic_context(state);
  std::vector<PredictionRanking> rankings(images.size());
  const int workers = std::max(1, threads);
  if (workers == 1 || images.size() < 2) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      rankings[i] =
          rank_image(*images[i], state, features, &semantic_out, lambda);
    }
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (std::size_t i = next.fetch_add(1); i < images.size();
             i = next.fetch_add(1)) {
          rankings[i] =
              rank_image(*images[i], state, features, &semantic_out, lambda);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  const std::set<TripletType> zero_shot = zero_shot_types(corpus);
  const RecallAgg agg =
      state.config.recall_agg == "macro" ? RecallAgg::Macro : RecallAgg::Micro;

  EvalReport report;
  report.ks = ks;
  report.lambda = lambda;
  report.agg = agg;
  for (EvalTask task : {EvalTask::Predicate, EvalTask::Relationship}) {
    for (Subset subset : {Subset::All, Subset::ZeroShot}) {
      std::vector<ReportCell> cells;
      for (int k : ks) {
        ReportCell cell;
        cell.recall = recall_at_k(rankings, images, k, match_mode_for(task),
                                  subset, zero_shot, agg);
        // Recompute the raw counts for the cell (micro view).
        long matched = 0, total = 0;
        for (std::size_t i = 0; i < images.size(); ++i) {
          std::vector<GroundTruth> gt =
              ground_truth_of(*images[i], subset, zero_shot);
          if (gt.empty()) continue;
          matched += match_image(rankings[i], *images[i], gt, k,
                                 match_mode_for(task));
          total += static_cast<long>(gt.size());
        }
        cell.matched = matched;
        cell.total_ground_truth = total;
        cells.push_back(cell);
      }
      report.cells[{task, subset}] = std::move(cells);
    }
  }
  return report;
}

namespace {

std::string task_name(EvalTask t) {
  return t == EvalTask::Predicate ? "predicate" : "relationship";
}
std::string subset_name(Subset s) {
  return s == Subset::All ? "all" : "zero_shot";
}

std::string cell_text(const ReportCell& cell, bool percent) {
  if (!cell.recall.has_value()) return "NA";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(percent ? 2 : 6)
     << (percent ? 100.0 * *cell.recall : *cell.recall);
  return ss.str();
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::ostringstream ss;
  ss << "task,subset,k,recall,matched,ground_truth\n";
  for (const auto& [key, cells] : report.cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      ss << task_name(key.first) << ',' << subset_name(key.second) << ','
         << report.ks[i] << ',' << cell_text(cells[i], false) << ','
         << cells[i].matched << ',' << cells[i].total_ground_truth << '\n';
    }
  }
  return ss.str();
}

std::string report_table(const EvalReport& report) {
  std::ostringstream ss;
  ss << std::left << std::setw(14) << "task" << std::setw(11) << "subset";
  for (int k : report.ks) ss << std::setw(10) << ("R@" + std::to_string(k));
  ss << "\n";
  for (const auto& [key, cells] : report.cells) {
    ss << std::left << std::setw(14) << task_name(key.first) << std::setw(11)
       << subset_name(key.second);
    for (const auto& cell : cells) ss << std::setw(10) << cell_text(cell, true);
    ss << "\n";
  }
  return ss.str();
}

std::string match_details_jsonl(const std::vector<PredictionRanking>& rankings,
                                const std::vector<const CorpusImage*>& images,
                                int k, MatchMode mode, Subset subset,
                                const std::set<TripletType>& zero_shot) {
  if (rankings.size() != images.size()) {
    throw DataError("match_details: rankings do not cover the images");
  }
  std::ostringstream ss;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::vector<GroundTruth> gt =
        ground_truth_of(*images[i], subset, zero_shot);
    std::vector<std::size_t> ranks;
    const long matched =
        match_image(rankings[i], *images[i], gt, k, mode, &ranks);
    nlohmann::json j;
    j["image_id"] = images[i]->image_id;
    j["matched"] = matched;
    j["ground_truth"] = gt.size();
    j["matched_ranks"] = ranks;
    ss << j.dump() << '\n';
  }
  return ss.str();
}

}  // namespace vrdiff
