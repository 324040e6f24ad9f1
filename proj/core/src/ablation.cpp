#include <iomanip>
#include <sstream>

#include "vrdiff/eval.hpp"

namespace vrdiff {
namespace {

struct Variant {
  std::string name;
  bool use_appearance;
  bool use_semantic;
  bool diffuse_semantic;
  bool diffuse_scene;
  bool trainable_embeddings;
};

const Variant kGrid[] = {
    {"appearance", true, false, false, false, false},
    {"semantic", false, true, false, false, false},
    {"both-no-diffusion", true, true, false, false, false},
    {"diffusion-on-semantic", true, true, true, false, false},
    {"diffusion-on-scene", true, true, false, true, false},
    {"diffusion", true, true, true, true, false},
    {"diffusion-trainable-emb", true, true, true, true, true},
};

}  // namespace

std::vector<AblationRow> ablation_report(const RelationCorpus& corpus,
                                         const Config& base,
                                         const EmbeddingTable& embeddings,
                                         const FeatureProvider& features,
                                         const std::vector<int>& ks) {
  std::vector<AblationRow> rows;
  rows.reserve(std::size(kGrid));
  for (const Variant& variant : kGrid) {
    Config config = base;  // shared seed and hyperparameters
    config.use_appearance = variant.use_appearance;
    config.use_semantic = variant.use_semantic;
    config.diffuse_semantic = variant.diffuse_semantic;
    config.diffuse_scene = variant.diffuse_scene;
    config.trainable_embeddings = variant.trainable_embeddings;

    TrainResult trained = train(corpus, config, embeddings, features);
    EvalReport report =
        evaluate(corpus, trained.state, features, ks, config.lambda);
    rows.push_back(AblationRow{variant.name, config, std::move(report)});
  }
  return rows;
}

namespace {

std::string cell(const ReportCell& c) {
  if (!c.recall.has_value()) return "NA";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << 100.0 * *c.recall;
  return ss.str();
}

}  // namespace

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream ss;
  ss << "configuration";
  if (!rows.empty()) {
    for (const auto& [key, cells] : rows.front().report.cells) {
      const std::string task =
          key.first == EvalTask::Predicate ? "predicate" : "relationship";
      const std::string subset = key.second == Subset::All ? "all" : "zs";
      for (std::size_t i = 0; i < cells.size(); ++i) {
        ss << ',' << task << '_' << subset << "_r"
           << rows.front().report.ks[i];
      }
    }
  }
  ss << '\n';
  for (const auto& row : rows) {
    ss << row.name;
    for (const auto& [key, cells] : row.report.cells) {
      for (const auto& c : cells) {
        ss << ',' << (c.recall.has_value() ? std::to_string(*c.recall) : "NA");
      }
    }
    ss << '\n';
  }
  return ss.str();
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream ss;
  ss << std::left << std::setw(26) << "configuration";
  if (!rows.empty()) {
    for (const auto& [key, cells] : rows.front().report.cells) {
      const std::string task =
          key.first == EvalTask::Predicate ? "pred" : "rel";
      const std::string subset = key.second == Subset::All ? "" : "-zs";
      for (std::size_t i = 0; i < cells.size(); ++i) {
        ss << std::setw(12)
           << (task + subset + "@" +
               std::to_string(rows.front().report.ks[i]));
      }
    }
  }
  ss << '\n';
  for (const auto& row : rows) {
    ss << std::left << std::setw(26) << row.name;
    for (const auto& [key, cells] : row.report.cells) {
      for (const auto& c : cells) ss << std::setw(12) << cell(c);
    }
    ss << '\n';
  }
  return ss.str();
}

}  // namespace vrdiff
