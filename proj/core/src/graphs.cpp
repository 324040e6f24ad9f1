#include "vrdiff/graphs.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>

#include "vrdiff/error.hpp"
#include "vrdiff/geometry.hpp"

namespace vrdiff {

Matrix normalize_adjacency(const Matrix& raw) {
  const Eigen::Index n = raw.rows();
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double degree = raw.row(i).sum();
    if (degree > 0.0) {
      out.row(i) = raw.row(i) / degree;
    } else {
      out(i, i) = 1.0;  // isolated node keeps its own mass
    }
  }
  return out;
}

std::vector<Matrix> power_tensor(const Matrix& adjacency, int hops) {
  if (hops < 1) {
    throw DataError("power_tensor: hop count must be >= 1");
  }
  if (adjacency.rows() != adjacency.cols()) {
    throw DataError("power_tensor: adjacency must be square");
  }
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
    const double s = adjacency.row(i).sum();
    if (std::abs(s - 1.0) > 1e-9) {
      throw DataError("power_tensor: row " + std::to_string(i) +
                      " sums to " + std::to_string(s) + ", expected 1");
    }
  }
  std::vector<Matrix> slices;
  slices.reserve(static_cast<std::size_t>(hops));
  slices.push_back(Matrix::Identity(adjacency.rows(), adjacency.cols()));
  for (int h = 1; h < hops; ++h) {
    slices.push_back(slices.back() * adjacency);
  }
  return slices;
}

AttributeGraph build_semantic_graph(
    const RelationCorpus& corpus,
    const std::function<Vector(const std::string&)>& embedding, int hops,
    CountMode count_mode) {
  const int n = corpus.category_count();
  if (n == 0) {
    throw DataError("build_semantic_graph: empty object vocabulary");
  }

  // Tally train triplets grouped by (predicate, shared endpoint); every
  // pair of distinct categories in the open slot of one group co-occurs.
  // In Types mode each unique triplet type counts once; in Instances mode
  // every annotation counts.
  std::map<std::pair<int, int>, std::map<int, std::int64_t>> by_object;
  std::map<std::pair<int, int>, std::map<int, std::int64_t>> by_subject;
  if (count_mode == CountMode::Types) {
    for (const TripletType& t : unique_triplet_types(corpus, Split::Train)) {
      by_object[{t.predicate, t.object_category}][t.subject_category] = 1;
      by_subject[{t.predicate, t.subject_category}][t.object_category] = 1;
    }
  } else {
    for (const auto& image : corpus.images) {
      if (image.split != Split::Train) continue;
      for (const auto& rel : image.relations) {
        const int cs = image.instances[static_cast<std::size_t>(
                                           rel.subject_index)]
                           .category_id;
        const int co = image.instances[static_cast<std::size_t>(
                                           rel.object_index)]
                           .category_id;
        by_object[{rel.predicate_id, co}][cs] += 1;
        by_subject[{rel.predicate_id, cs}][co] += 1;
      }
    }
  }

  Matrix raw = Matrix::Zero(n, n);
  auto accumulate =
      [&raw](const std::map<std::pair<int, int>,
                            std::map<int, std::int64_t>>& groups) {
        for (const auto& [key, members] : groups) {
          for (auto it = members.begin(); it != members.end(); ++it) {
            for (auto jt = std::next(it); jt != members.end(); ++jt) {
              const double pairs =
                  static_cast<double>(it->second) *
                  static_cast<double>(jt->second);
              raw(it->first, jt->first) += pairs;
              raw(jt->first, it->first) += pairs;
            }
          }
        }
      };
  accumulate(by_object);
  accumulate(by_subject);

  AttributeGraph graph;
  graph.node_ids.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) graph.node_ids[static_cast<std::size_t>(i)] = i;
  graph.raw_adjacency = std::move(raw);
  graph.adjacency = normalize_adjacency(graph.raw_adjacency);

  Vector first = embedding(corpus.object_vocabulary.front());
  graph.attributes = Matrix::Zero(n, first.size());
  graph.attributes.row(0) = first.transpose();
  for (int i = 1; i < n; ++i) {
    Vector v = embedding(corpus.object_vocabulary[static_cast<std::size_t>(i)]);
    if (v.size() != first.size()) {
      throw DataError("build_semantic_graph: embedding for '" +
                      corpus.object_vocabulary[static_cast<std::size_t>(i)] +
                      "' has dimension " + std::to_string(v.size()) +
                      ", expected " + std::to_string(first.size()));
    }
    graph.attributes.row(i) = v.transpose();
  }
  graph.power_tensor = power_tensor(graph.adjacency, hops);
  return graph;
}

AttributeGraph build_scene_graph(const CorpusImage& image,
                                 const FeatureProvider& features, int hops,
                                 double iou_threshold,
                                 double distance_threshold) {
  const int n = static_cast<int>(image.instances.size());
  if (n == 0) {
    throw DataError("build_scene_graph: image '" + image.image_id +
                    "' has no instances");
  }
  AttributeGraph graph;
  graph.node_ids.resize(static_cast<std::size_t>(n));
  Matrix raw = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    graph.node_ids[static_cast<std::size_t>(i)] = i;
    for (int j = i + 1; j < n; ++j) {
      const BoundingBox& a = image.instances[static_cast<std::size_t>(i)].box;
      const BoundingBox& b = image.instances[static_cast<std::size_t>(j)].box;
      if (iou(a, b) > iou_threshold ||
          normalized_distance(a, b) < distance_threshold) {
        raw(i, j) = 1.0;
        raw(j, i) = 1.0;
      }
    }
  }
  graph.raw_adjacency = std::move(raw);
  graph.adjacency = normalize_adjacency(graph.raw_adjacency);

  graph.attributes = Matrix::Zero(n, features.dimension());
  for (int i = 0; i < n; ++i) {
    graph.attributes.row(i) =
        features
            .instance_feature(image,
                              image.instances[static_cast<std::size_t>(i)])
            .transpose();
  }
  graph.power_tensor = power_tensor(graph.adjacency, hops);
  return graph;
}

namespace {

void write_matrix_rowmajor(std::ofstream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
}

Matrix read_matrix_rowmajor(std::ifstream& in, Eigen::Index rows,
                            Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      m(r, c) = v;
    }
  }
  return m;
}

}  // namespace

void dump_graph(const AttributeGraph& graph,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write graph dump: " + path.string());
  }
  const std::uint32_t n = static_cast<std::uint32_t>(graph.node_count());
  const std::uint32_t h = static_cast<std::uint32_t>(graph.hop_count());
  const std::uint32_t d = static_cast<std::uint32_t>(graph.attribute_dim());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&h), sizeof(h));
  out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  write_matrix_rowmajor(out, graph.adjacency);
  for (const Matrix& slice : graph.power_tensor) {
    write_matrix_rowmajor(out, slice);
  }
  write_matrix_rowmajor(out, graph.attributes);
  if (!out) {
    throw DataError("failed while writing graph dump: " + path.string());
  }
}

AttributeGraph load_graph_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open graph dump: " + path.string());
  }
  std::uint32_t n = 0, h = 0, d = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&h), sizeof(h));
  in.read(reinterpret_cast<char*>(&d), sizeof(d));
  if (!in) {
    throw DataError("graph dump truncated: " + path.string());
  }
  AttributeGraph graph;
  graph.node_ids.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    graph.node_ids[i] = static_cast<int>(i);
  }
  graph.adjacency = read_matrix_rowmajor(in, n, n);
  graph.power_tensor.reserve(h);
  for (std::uint32_t s = 0; s < h; ++s) {
    graph.power_tensor.push_back(read_matrix_rowmajor(in, n, n));
  }
  graph.attributes = read_matrix_rowmajor(in, n, d);
  graph.raw_adjacency = Matrix::Zero(n, n);
  if (!in) {
    throw DataError("graph dump truncated: " + path.string());
  }
  return graph;
}

}  // namespace vrdiff
