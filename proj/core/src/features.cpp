#include "vrdiff/features.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "vrdiff/error.hpp"
#include "vrdiff/geometry.hpp"
#include "vrdiff/rng.hpp"

#include <json.hpp>

namespace vrdiff {
namespace {

Vector seeded_gaussian(std::uint64_t seed, int dim) {
  SplitMix64 rng(seed);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  return v;
}

Vector seeded_unit(std::uint64_t seed, int dim) {
  Vector v = seeded_gaussian(seed, dim);
  double n = v.norm();
  if (n == 0.0) {
    v(0) = 1.0;
    n = 1.0;
  }
  return v / n;
}

}  // namespace

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open embedding file: " + path.string());
  }
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    if (token.empty()) continue;
    std::vector<double> values;
    std::string field;
    while (ss >> field) {
      try {
        std::size_t used = 0;
        double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        values.push_back(v);
      } catch (const std::exception&) {
        throw DataError("embedding line " + std::to_string(line_no) +
                        ": unparseable float '" + field + "'");
      }
    }
    if (values.empty()) {
      throw DataError("embedding line " + std::to_string(line_no) +
                      ": token '" + token + "' has no values");
    }
    if (table.dimension == 0) {
      table.dimension = static_cast<int>(values.size());
    } else if (static_cast<int>(values.size()) != table.dimension) {
      throw DataError("embedding line " + std::to_string(line_no) +
                      ": dimension " + std::to_string(values.size()) +
                      " does not match earlier dimension " +
                      std::to_string(table.dimension));
    }
    Vector v = Eigen::Map<Vector>(values.data(),
                                  static_cast<Eigen::Index>(values.size()));
    auto [it, inserted] = table.vectors.emplace(token, v);
    if (!inserted) {
      it->second = v;  // last occurrence wins
      ++table.duplicates_replaced;
    }
  }
  return table;
}

Vector category_vector(const EmbeddingTable& table, const std::string& name,
                       std::uint64_t fallback_seed) {
  auto it = table.vectors.find(name);
  if (it != table.vectors.end()) return it->second;
  return seeded_unit(stream_seed(fallback_seed, "embedding-fallback", name),
                     table.dimension);
}

FeatureProvider FeatureProvider::from_file(const std::filesystem::path& path,
                                           const FeatureConfig& config) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open feature file: " + path.string());
  }
  FeatureProvider provider;
  provider.config_ = config;
  provider.config_.mode = "file";
  provider.config_.path = path.string();

  using nlohmann::json;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      std::string image_id = j.at("image_id").get<std::string>();
      std::string instance_id = j.at("instance_id").get<std::string>();
      std::vector<double> values = j.at("vec").get<std::vector<double>>();
      if (provider.base_dim_ == 0) {
        provider.base_dim_ = static_cast<int>(values.size());
      } else if (static_cast<int>(values.size()) != provider.base_dim_) {
        throw DataError("feature line " + std::to_string(line_no) +
                        ": dimension " + std::to_string(values.size()) +
                        " does not match earlier dimension " +
                        std::to_string(provider.base_dim_));
      }
      provider.stored_[{std::move(image_id), std::move(instance_id)}] =
          Eigen::Map<Vector>(values.data(),
                             static_cast<Eigen::Index>(values.size()));
    } catch (const json::exception& e) {
      throw DataError("feature line " + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  if (provider.base_dim_ == 0) {
    throw DataError("feature file has no records: " + path.string());
  }
  return provider;
}

FeatureProvider FeatureProvider::synthetic(const FeatureConfig& config,
                                           const RelationCorpus& corpus) {
  FeatureProvider provider;
  provider.config_ = config;
  provider.config_.mode = "synthetic";
  provider.base_dim_ = config.dim;
  provider.category_names_ = corpus.object_vocabulary;
  return provider;
}

int FeatureProvider::dimension() const {
  return base_dim_ +
         (config_.include_mask ? config_.mask_grid * config_.mask_grid : 0);
}

Vector FeatureProvider::base_feature(const CorpusImage& image,
                                     const ObjectInstance& instance) const {
  if (config_.mode == "file") {
    auto it = stored_.find({image.image_id, instance.instance_id});
    if (it == stored_.end()) {
      throw DataError("no stored feature for image '" + image.image_id +
                      "' instance '" + instance.instance_id + "'");
    }
    return it->second;
  }
  const std::string& category =
      category_names_.at(static_cast<std::size_t>(instance.category_id));
  Vector mean =
      seeded_unit(stream_seed(config_.seed, "category-mean", category),
                  base_dim_) *
      config_.class_sep;
  Vector noise = seeded_gaussian(stream_seed(config_.seed, "instance-noise",
                                             image.image_id,
                                             instance.instance_id),
                                 base_dim_) *
                 config_.noise;
  return mean + noise;
}

Vector FeatureProvider::instance_feature(const CorpusImage& image,
                                         const ObjectInstance& instance) const {
  Vector base = base_feature(image, instance);
  if (!config_.include_mask) return base;

  // The mask is rasterized against the union of all instance boxes, the
  // only image extent the annotation format carries.
  BoundingBox extent = instance.box;
  for (const auto& other : image.instances) {
    extent = union_box(extent, other.box);
  }
  Vector mask =
      flatten_mask(spatial_mask(instance.box, extent, config_.mask_grid));
  Vector out(base.size() + mask.size());
  out << base, mask;
  return out;
}

}  // namespace vrdiff
