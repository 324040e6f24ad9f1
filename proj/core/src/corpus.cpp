#include "vrdiff/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "vrdiff/error.hpp"

#include <json.hpp>

namespace vrdiff {
namespace {

using nlohmann::json;

[[noreturn]] void fail(std::size_t line_no, const std::string& msg) {
  throw DataError("annotation line " + std::to_string(line_no) + ": " + msg);
}

void check_vocabulary(const std::vector<std::string>& names,
                      const std::string& which) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) {
      throw DataError(which + " vocabulary has duplicate entry '" + n + "'");
    }
  }
}

BoundingBox parse_box(const json& j, std::size_t line_no) {
  if (!j.is_array() || j.size() != 4) {
    fail(line_no, "\"box\" must be [x, y, w, h]");
  }
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                j[3].get<double>()};
  if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) ||
      !std::isfinite(b.h)) {
    fail(line_no, "box coordinates must be finite");
  }
  if (b.w <= 0 || b.h <= 0) {
    fail(line_no, "box width and height must be positive");
  }
  return b;
}

CorpusImage parse_image(const json& j, std::size_t line_no,
                        const std::unordered_map<std::string, int>& cat_ids,
                        const std::unordered_map<std::string, int>& pred_ids) {
  CorpusImage image;
  image.image_id = j.at("image_id").get<std::string>();

  const std::string split = j.at("split").get<std::string>();
  if (split == "train") {
    image.split = Split::Train;
  } else if (split == "test") {
    image.split = Split::Test;
  } else {
    fail(line_no, "image '" + image.image_id + "': unknown split '" + split +
                      "' (expected \"train\" or \"test\")");
  }

  std::unordered_map<std::string, int> instance_index;
  for (const auto& ji : j.at("instances")) {
    ObjectInstance inst;
    inst.instance_id = ji.at("id").get<std::string>();
    const std::string cat = ji.at("cat").get<std::string>();
    auto it = cat_ids.find(cat);
    if (it == cat_ids.end()) {
      fail(line_no, "image '" + image.image_id + "': unknown category '" +
                        cat + "'");
    }
    inst.category_id = it->second;
    inst.box = parse_box(ji.at("box"), line_no);
    if (ji.contains("conf")) {
      inst.confidence = ji.at("conf").get<double>();
      if (!(inst.confidence >= 0.0 && inst.confidence <= 1.0)) {
        fail(line_no, "image '" + image.image_id + "': confidence " +
                          std::to_string(inst.confidence) +
                          " outside [0, 1]");
      }
    }
    if (!instance_index
             .emplace(inst.instance_id,
                      static_cast<int>(image.instances.size()))
             .second) {
      fail(line_no, "image '" + image.image_id + "': duplicate instance id '" +
                        inst.instance_id + "'");
    }
    image.instances.push_back(std::move(inst));
  }

  for (const auto& jr : j.at("relations")) {
    RelationAnnotation rel;
    const std::string s = jr.at("s").get<std::string>();
    const std::string o = jr.at("o").get<std::string>();
    const std::string p = jr.at("p").get<std::string>();
    auto resolve = [&](const std::string& id) {
      auto it = instance_index.find(id);
      if (it == instance_index.end()) {
        fail(line_no, "image '" + image.image_id +
                          "': relation references missing instance id '" + id +
                          "'");
      }
      return it->second;
    };
    rel.subject_index = resolve(s);
    rel.object_index = resolve(o);
    if (rel.subject_index == rel.object_index) {
      fail(line_no, "image '" + image.image_id +
                        "': relation subject and object are the same "
                        "instance '" +
                        s + "'");
    }
    auto it = pred_ids.find(p);
    if (it == pred_ids.end()) {
      fail(line_no,
           "image '" + image.image_id + "': unknown predicate '" + p + "'");
    }
    rel.predicate_id = it->second;
    image.relations.push_back(rel);
  }
  return image;
}

}  // namespace

RelationCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open annotation file: " + path.string());
  }

  std::string line;
  std::size_t line_no = 0;
  RelationCorpus corpus;

  // Header line declares the vocabularies so ids stay stable across runs.
  if (!std::getline(in, line)) {
    throw DataError("annotation file is empty: " + path.string());
  }
  ++line_no;
  json header;
  try {
    header = json::parse(line);
    corpus.object_vocabulary =
        header.at("objects").get<std::vector<std::string>>();
    corpus.predicate_vocabulary =
        header.at("predicates").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(line_no, std::string("malformed header: ") + e.what());
  }
  check_vocabulary(corpus.object_vocabulary, "object");
  check_vocabulary(corpus.predicate_vocabulary, "predicate");

  std::unordered_map<std::string, int> cat_ids;
  for (std::size_t i = 0; i < corpus.object_vocabulary.size(); ++i) {
    cat_ids[corpus.object_vocabulary[i]] = static_cast<int>(i);
  }
  std::unordered_map<std::string, int> pred_ids;
  for (std::size_t i = 0; i < corpus.predicate_vocabulary.size(); ++i) {
    pred_ids[corpus.predicate_vocabulary[i]] = static_cast<int>(i);
  }

  std::unordered_set<std::string> image_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      CorpusImage image = parse_image(j, line_no, cat_ids, pred_ids);
      if (!image_ids.insert(image.image_id).second) {
        fail(line_no, "duplicate image id '" + image.image_id + "'");
      }
      corpus.images.push_back(std::move(image));
    } catch (const json::exception& e) {
      fail(line_no, std::string("malformed image record: ") + e.what());
    }
  }
  return corpus;
}

void save_corpus(const RelationCorpus& corpus,
                 const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write annotation file: " + path.string());
  }
  json header;
  header["objects"] = corpus.object_vocabulary;
  header["predicates"] = corpus.predicate_vocabulary;
  out << header.dump() << '\n';

  for (const auto& image : corpus.images) {
    json j;
    j["image_id"] = image.image_id;
    j["split"] = image.split == Split::Train ? "train" : "test";
    j["instances"] = json::array();
    for (const auto& inst : image.instances) {
      json ji;
      ji["id"] = inst.instance_id;
      ji["cat"] = corpus.object_vocabulary.at(
          static_cast<std::size_t>(inst.category_id));
      ji["box"] = {inst.box.x, inst.box.y, inst.box.w, inst.box.h};
      ji["conf"] = inst.confidence;
      j["instances"].push_back(std::move(ji));
    }
    j["relations"] = json::array();
    for (const auto& rel : image.relations) {
      json jr;
      jr["s"] = image.instances.at(static_cast<std::size_t>(rel.subject_index))
                    .instance_id;
      jr["p"] = corpus.predicate_vocabulary.at(
          static_cast<std::size_t>(rel.predicate_id));
      jr["o"] = image.instances.at(static_cast<std::size_t>(rel.object_index))
                    .instance_id;
      j["relations"].push_back(std::move(jr));
    }
    out << j.dump() << '\n';
  }
  if (!out) {
    throw DataError("failed while writing annotation file: " + path.string());
  }
}

std::set<TripletType> unique_triplet_types(const RelationCorpus& corpus,
                                           Split split) {
  std::set<TripletType> types;
  for (const auto& image : corpus.images) {
    if (image.split != split) continue;
    for (const auto& rel : image.relations) {
      types.insert(TripletType{
          image.instances[static_cast<std::size_t>(rel.subject_index)]
              .category_id,
          rel.predicate_id,
          image.instances[static_cast<std::size_t>(rel.object_index)]
              .category_id});
    }
  }
  return types;
}

std::set<TripletType> zero_shot_types(const RelationCorpus& corpus) {
  std::set<TripletType> train = unique_triplet_types(corpus, Split::Train);
  std::set<TripletType> test = unique_triplet_types(corpus, Split::Test);
  std::set<TripletType> out;
  std::set_difference(test.begin(), test.end(), train.begin(), train.end(),
                      std::inserter(out, out.begin()));
  return out;
}

}  // namespace vrdiff
