// vrdiff command line: corpus fixtures, semantic-graph inspection, training,
// evaluation, and the cue/diffusion ablation grid.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "vrdiff/config.hpp"
#include "vrdiff/error.hpp"
#include "vrdiff/eval.hpp"
#include "vrdiff/fixtures.hpp"
#include "vrdiff/model.hpp"

namespace {

constexpr const char* kVersion = "vrdiff 0.1.0";

struct CommonArgs {
  std::string corpus_path;
  std::string embeddings_path;
  std::string features_path;
  std::string config_path;
  std::string checkpoint_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> lambda;
  int threads = 1;
  std::vector<int> ks;
};

vrdiff::Config resolve_config(const CommonArgs& args) {
  vrdiff::Config config = args.config_path.empty()
                              ? vrdiff::Config{}
                              : vrdiff::Config::load(args.config_path);
  if (args.seed) {
    config.seed = *args.seed;
    config.features.seed = *args.seed;
  }
  if (args.epochs) config.epochs = *args.epochs;
  if (args.lambda) config.lambda = *args.lambda;
  if (!args.features_path.empty()) {
    config.features.mode = "file";
    config.features.path = args.features_path;
  }
  config.validate();
  return config;
}

vrdiff::EmbeddingTable resolve_embeddings(const CommonArgs& args,
                                          const vrdiff::Config& config) {
  if (!args.embeddings_path.empty()) {
    vrdiff::EmbeddingTable table =
        vrdiff::load_embeddings(args.embeddings_path);
    if (table.duplicates_replaced > 0) {
      std::clog << "embeddings: " << table.duplicates_replaced
                << " duplicate tokens replaced (last occurrence wins)\n";
    }
    return table;
  }
  vrdiff::EmbeddingTable table;
  table.dimension = config.embedding_dim;
  return table;
}

vrdiff::FeatureProvider resolve_features(const vrdiff::Config& config,
                                         const vrdiff::RelationCorpus& corpus) {
  if (config.features.mode == "file") {
    return vrdiff::FeatureProvider::from_file(config.features.path,
                                              config.features);
  }
  return vrdiff::FeatureProvider::synthetic(config.features, corpus);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw vrdiff::DataError("cannot write output file: " + path);
  out << text;
}

int cmd_build_graph(const CommonArgs& args, int top_edges) {
  const vrdiff::Config config = resolve_config(args);
  const vrdiff::RelationCorpus corpus = vrdiff::load_corpus(args.corpus_path);
  vrdiff::EmbeddingTable table = resolve_embeddings(args, config);
  if (table.dimension == 0) table.dimension = config.embedding_dim;

  const vrdiff::AttributeGraph graph = vrdiff::build_semantic_graph(
      corpus,
      [&table, &config](const std::string& name) {
        return vrdiff::category_vector(table, name, config.seed);
      },
      config.effective_hops_semantic(),
      config.count_mode == "types" ? vrdiff::CountMode::Types
                                   : vrdiff::CountMode::Instances);

  const int n = graph.node_count();
  long edges = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (graph.raw_adjacency(i, j) > 0) ++edges;
    }
  }
  std::cout << "semantic graph: " << n << " categories, " << edges
            << " undirected edges, density "
            << (n > 1 ? static_cast<double>(2 * edges) / (n * (n - 1)) : 0.0)
            << ", " << graph.hop_count() << " power slices\n";

  std::vector<std::tuple<double, int, int>> weights;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (graph.raw_adjacency(i, j) > 0) {
        weights.emplace_back(graph.raw_adjacency(i, j), i, j);
      }
    }
  }
  std::sort(weights.begin(), weights.end(), std::greater<>());
  std::cout << "top edges (count, pair):\n";
  for (std::size_t e = 0;
       e < std::min<std::size_t>(weights.size(),
                                 static_cast<std::size_t>(top_edges));
       ++e) {
    const auto& [w, i, j] = weights[e];
    std::cout << "  " << w << "  "
              << corpus.object_vocabulary[static_cast<std::size_t>(i)]
              << " -- "
              << corpus.object_vocabulary[static_cast<std::size_t>(j)] << "\n";
  }

  if (!args.out_path.empty()) {
    vrdiff::dump_graph(graph, args.out_path);
    std::cout << "dump written to " << args.out_path << "\n";
  }
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const vrdiff::Config config = resolve_config(args);
  const vrdiff::RelationCorpus corpus = vrdiff::load_corpus(args.corpus_path);
  const vrdiff::EmbeddingTable table = resolve_embeddings(args, config);
  const vrdiff::FeatureProvider features = resolve_features(config, corpus);

  const vrdiff::TrainResult result =
      vrdiff::train(corpus, config, table, features);
  vrdiff::save_checkpoint(result.state, args.checkpoint_path);
  std::cout << "trained " << config.epochs << " epochs";
  if (!result.loss_history.empty()) {
    std::cout << ", mean image loss " << result.loss_history.front() << " -> "
              << result.loss_history.back();
  }
  std::cout << "\ncheckpoint written to " << args.checkpoint_path << "\n";

  if (!args.out_path.empty()) {
    std::ostringstream csv;
    csv << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
      csv << e << ',' << std::setprecision(17) << result.loss_history[e]
          << '\n';
    }
    write_text(args.out_path, csv.str());
    std::cout << "loss history written to " << args.out_path << "\n";
  }
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& task,
             const std::string& subset, const std::string& split,
             const std::string& matches_path) {
  const vrdiff::RelationCorpus corpus = vrdiff::load_corpus(args.corpus_path);
  vrdiff::ModelState state = vrdiff::load_checkpoint(args.checkpoint_path);
  vrdiff::ensure_vocabulary_compatible(state, corpus);
  if (!args.features_path.empty()) {
    state.config.features.mode = "file";
    state.config.features.path = args.features_path;
  }
  const vrdiff::FeatureProvider features =
      resolve_features(state.config, corpus);

  const std::vector<int> ks =
      args.ks.empty() ? std::vector<int>{50, 100} : args.ks;
  const double lambda = args.lambda.value_or(state.config.lambda);
  const vrdiff::Split eval_split =
      split == "train" ? vrdiff::Split::Train : vrdiff::Split::Test;
  vrdiff::EvalReport report = vrdiff::evaluate(corpus, state, features, ks,
                                               lambda, args.threads,
                                               eval_split);

  // --task / --subset narrow the printed rows
  if (task != "both") {
    const vrdiff::EvalTask keep = task == "predicate"
                                      ? vrdiff::EvalTask::Predicate
                                      : vrdiff::EvalTask::Relationship;
    std::erase_if(report.cells,
                  [keep](const auto& kv) { return kv.first.first != keep; });
  }
  if (subset != "both") {
    const vrdiff::Subset keep = subset == "all" ? vrdiff::Subset::All
                                                : vrdiff::Subset::ZeroShot;
    std::erase_if(report.cells,
                  [keep](const auto& kv) { return kv.first.second != keep; });
  }

  std::cout << vrdiff::report_table(report);
  if (!args.out_path.empty()) {
    write_text(args.out_path, vrdiff::report_csv(report));
    std::cout << "report written to " << args.out_path << "\n";
  }

  if (!matches_path.empty()) {
    std::vector<const vrdiff::CorpusImage*> images;
    std::vector<vrdiff::PredictionRanking> rankings;
    const vrdiff::DiffusionOutput semantic = vrdiff::semantic_context(state);
    for (const auto& image : corpus.images) {
      if (image.split != eval_split) continue;
      images.push_back(&image);
      rankings.push_back(
          vrdiff::rank_image(image, state, features, &semantic, lambda));
    }
    const vrdiff::MatchMode mode = task == "relationship"
                                       ? vrdiff::MatchMode::LabelIou
                                       : vrdiff::MatchMode::Label;
    const vrdiff::Subset sub = subset == "zero-shot"
                                   ? vrdiff::Subset::ZeroShot
                                   : vrdiff::Subset::All;
    write_text(matches_path, vrdiff::match_details_jsonl(
                                 rankings, images, ks.back(), mode, sub,
                                 vrdiff::zero_shot_types(corpus)));
    std::cout << "per-image matches written to " << matches_path << "\n";
  }
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  const vrdiff::Config config = resolve_config(args);
  const vrdiff::RelationCorpus corpus = vrdiff::load_corpus(args.corpus_path);
  const vrdiff::EmbeddingTable table = resolve_embeddings(args, config);
  const vrdiff::FeatureProvider features = resolve_features(config, corpus);
  const std::vector<int> ks =
      args.ks.empty() ? std::vector<int>{50, 100} : args.ks;

  const std::vector<vrdiff::AblationRow> rows =
      vrdiff::ablation_report(corpus, config, table, features, ks);
  std::cout << vrdiff::ablation_table(rows);
  if (!args.out_path.empty()) {
    write_text(args.out_path, vrdiff::ablation_csv(rows));
    std::cout << "ablation table written to " << args.out_path << "\n";
  }
  return 0;
}

int cmd_fixtures_generate(const CommonArgs& args,
                          const vrdiff::CliqueCorpusSpec& spec) {
  vrdiff::CliqueCorpusSpec resolved = spec;
  if (args.seed) resolved.seed = *args.seed;
  const vrdiff::RelationCorpus corpus =
      vrdiff::generate_clique_corpus(resolved);
  vrdiff::save_corpus(corpus, args.out_path);
  std::cout << "wrote " << corpus.images.size() << " images ("
            << resolved.train_images << " train, " << resolved.test_images
            << " test), " << corpus.category_count() << " categories, "
            << corpus.predicate_count() << " predicates, "
            << vrdiff::zero_shot_types(corpus).size()
            << " zero-shot triplet types to " << args.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visual relationship detection with graph diffusion"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&args](CLI::App* cmd, bool needs_corpus) {
    auto* corpus = cmd->add_option("--corpus", args.corpus_path,
                                   "annotation JSON-lines file");
    if (needs_corpus) corpus->required();
    cmd->add_option("--embeddings", args.embeddings_path,
                    "word embedding text file (token then floats per line)");
    cmd->add_option("--features", args.features_path,
                    "visual feature JSON-lines file (default: synthetic)");
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--seed", args.seed, "seed override");
    cmd->add_option("--threads", args.threads, "evaluation worker threads")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", args.out_path, "output path");
  };

  // build-graph
  auto* build = app.add_subcommand(
      "build-graph", "build the semantic graph and print summary stats");
  add_common(build, true);
  int top_edges = 10;
  build->add_option("--top", top_edges, "top weighted edges to print");

  // train
  auto* train_cmd =
      app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train_cmd, true);
  train_cmd
      ->add_option("--checkpoint", args.checkpoint_path,
                   "output checkpoint path")
      ->required();
  train_cmd->add_option("--epochs", args.epochs, "epoch override");
  train_cmd->add_option("--lambda", args.lambda, "prior weight override");

  // eval
  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint with Recall@K");
  add_common(eval_cmd, true);
  eval_cmd
      ->add_option("--checkpoint", args.checkpoint_path,
                   "trained checkpoint path")
      ->required();
  std::string task = "both", subset = "both", split = "test";
  std::string matches_path;
  eval_cmd->add_option("--task", task, "predicate | relationship | both")
      ->check(CLI::IsMember({"predicate", "relationship", "both"}));
  eval_cmd->add_option("--subset", subset, "all | zero-shot | both")
      ->check(CLI::IsMember({"all", "zero-shot", "both"}));
  eval_cmd->add_option("--split", split, "test | train")
      ->check(CLI::IsMember({"test", "train"}));
  eval_cmd->add_option("--k", args.ks, "recall cutoffs (repeatable)")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--lambda", args.lambda, "prior weight override");
  eval_cmd->add_option("--matches-out", matches_path,
                       "JSON-lines per-image match debug output");

  // ablate
  auto* ablate_cmd = app.add_subcommand(
      "ablate", "train and evaluate the cue/diffusion ablation grid");
  add_common(ablate_cmd, true);
  ablate_cmd->add_option("--epochs", args.epochs, "epoch override");
  ablate_cmd->add_option("--lambda", args.lambda, "prior weight override");
  ablate_cmd->add_option("--k", args.ks, "recall cutoffs (repeatable)")
      ->check(CLI::PositiveNumber);

  // fixtures generate
  auto* fixtures = app.add_subcommand("fixtures", "synthetic corpus tooling");
  fixtures->require_subcommand(1);
  auto* generate =
      fixtures->add_subcommand("generate", "emit the synthetic clique corpus");
  vrdiff::CliqueCorpusSpec spec;
  generate->add_option("--out", args.out_path, "output annotation file")
      ->required();
  generate->add_option("--categories", spec.categories, "object categories");
  generate->add_option("--cliques", spec.cliques, "semantic cliques");
  generate->add_option("--predicates", spec.predicates, "predicates");
  generate->add_option("--train-images", spec.train_images, "train images");
  generate->add_option("--test-images", spec.test_images, "test images");
  generate->add_option("--pairs", spec.pairs_per_image,
                       "annotated pairs per image");
  generate->add_option("--holdout", spec.holdout,
                       "held-out member fraction per predicate side");
  generate->add_option("--seed", args.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // CLI11 returns 0 for --help/--version, nonzero for usage errors
    return code == 0 ? 0 : 1;
  }

  try {
    if (build->parsed()) return cmd_build_graph(args, top_edges);
    if (train_cmd->parsed()) return cmd_train(args);
    if (eval_cmd->parsed())
      return cmd_eval(args, task, subset, split, matches_path);
    if (ablate_cmd->parsed()) return cmd_ablate(args);
    if (fixtures->parsed() && generate->parsed())
      return cmd_fixtures_generate(args, spec);
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const vrdiff::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const vrdiff::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
