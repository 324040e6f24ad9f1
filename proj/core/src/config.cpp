#include "vrdiff/config.hpp"

#include <fstream>
#include <sstream>

#include "vrdiff/error.hpp"

#include <json.hpp>

namespace vrdiff {

using nlohmann::json;

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string Config::to_json() const {
  json j;
  j["hops_semantic"] = hops_semantic;
  j["hops_scene"] = hops_scene;
  j["embedding_dim"] = embedding_dim;
  j["out_dim_semantic"] = out_dim_semantic;
  j["out_dim_scene"] = out_dim_scene;
  j["nonlinearity"] = nonlinearity;
  j["iou_threshold"] = iou_threshold;
  j["distance_threshold"] = distance_threshold;
  j["count_mode"] = count_mode;
  j["prior_alpha"] = prior_alpha;
  j["lambda"] = lambda;
  j["learning_rate"] = learning_rate;
  j["epochs"] = epochs;
  j["decay_every"] = decay_every;
  j["decay_factor"] = decay_factor;
  j["seed"] = seed;
  j["trainable_embeddings"] = trainable_embeddings;
  j["use_appearance"] = use_appearance;
  j["use_semantic"] = use_semantic;
  j["diffuse_semantic"] = diffuse_semantic;
  j["diffuse_scene"] = diffuse_scene;
  j["recall_agg"] = recall_agg;
  json f;
  f["mode"] = features.mode;
  f["path"] = features.path;
  f["dim"] = features.dim;
  f["class_sep"] = features.class_sep;
  f["noise"] = features.noise;
  f["include_mask"] = features.include_mask;
  f["mask_grid"] = features.mask_grid;
  f["seed"] = features.seed;
  j["features"] = std::move(f);
  return j.dump(2);
}

Config Config::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed config: ") + e.what());
  }
  Config c;
  try {
    read_if(j, "hops_semantic", c.hops_semantic);
    read_if(j, "hops_scene", c.hops_scene);
    read_if(j, "embedding_dim", c.embedding_dim);
    read_if(j, "out_dim_semantic", c.out_dim_semantic);
    read_if(j, "out_dim_scene", c.out_dim_scene);
    read_if(j, "nonlinearity", c.nonlinearity);
    read_if(j, "iou_threshold", c.iou_threshold);
    read_if(j, "distance_threshold", c.distance_threshold);
    read_if(j, "count_mode", c.count_mode);
    read_if(j, "prior_alpha", c.prior_alpha);
    read_if(j, "lambda", c.lambda);
    read_if(j, "learning_rate", c.learning_rate);
    read_if(j, "epochs", c.epochs);
    read_if(j, "decay_every", c.decay_every);
    read_if(j, "decay_factor", c.decay_factor);
    read_if(j, "seed", c.seed);
    read_if(j, "trainable_embeddings", c.trainable_embeddings);
    read_if(j, "use_appearance", c.use_appearance);
    read_if(j, "use_semantic", c.use_semantic);
    read_if(j, "diffuse_semantic", c.diffuse_semantic);
    read_if(j, "diffuse_scene", c.diffuse_scene);
    read_if(j, "recall_agg", c.recall_agg);
    if (j.contains("features")) {
      const json& f = j.at("features");
      read_if(f, "mode", c.features.mode);
      read_if(f, "path", c.features.path);
      read_if(f, "dim", c.features.dim);
      read_if(f, "class_sep", c.features.class_sep);
      read_if(f, "noise", c.features.noise);
      read_if(f, "include_mask", c.features.include_mask);
      read_if(f, "mask_grid", c.features.mask_grid);
      read_if(f, "seed", c.features.seed);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open config file: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void Config::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw DataError("config: " + what);
  };
  require(hops_semantic >= 1, "hops_semantic must be >= 1");
  require(hops_scene >= 1, "hops_scene must be >= 1");
  require(embedding_dim >= 1, "embedding_dim must be >= 1");
  require(out_dim_semantic >= 0, "out_dim_semantic must be >= 0");
  require(out_dim_scene >= 0, "out_dim_scene must be >= 0");
  require(nonlinearity == "relu" || nonlinearity == "identity",
          "nonlinearity must be \"relu\" or \"identity\"");
  require(count_mode == "types" || count_mode == "instances",
          "count_mode must be \"types\" or \"instances\"");
  require(recall_agg == "micro" || recall_agg == "macro",
          "recall_agg must be \"micro\" or \"macro\"");
  require(prior_alpha >= 0.0, "prior_alpha must be >= 0");
  require(learning_rate >= 0.0, "learning_rate must be >= 0");
  require(epochs >= 0, "epochs must be >= 0");
  require(decay_every >= 1, "decay_every must be >= 1");
  require(decay_factor > 0.0, "decay_factor must be > 0");
  require(use_appearance || use_semantic,
          "at least one of use_appearance / use_semantic must be on");
  require(features.mode == "synthetic" || features.mode == "file",
          "features.mode must be \"synthetic\" or \"file\"");
  require(features.dim >= 1, "features.dim must be >= 1");
  require(features.mask_grid >= 1, "features.mask_grid must be >= 1");
  require(features.class_sep >= 0.0, "features.class_sep must be >= 0");
  require(features.noise >= 0.0, "features.noise must be >= 0");
}

}  // namespace vrdiff
