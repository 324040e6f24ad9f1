#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "vrdiff/error.hpp"
#include "vrdiff/model.hpp"
#include "vrdiff/rng.hpp"

namespace vrdiff {
namespace {

constexpr char kMagic[8] = {'V', 'R', 'D', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t vocabulary_hash(const std::vector<std::string>& names) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& n : names) {
    h = fnv1a(n, h);
    h = fnv1a("\x1f", h);
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof(v)); }
  void u64(std::uint64_t v) { raw(&v, sizeof(v)); }
  void f64(double v) { raw(&v, sizeof(v)); }

  void string(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }

  void string_list(const std::vector<std::string>& list) {
    u64(list.size());
    for (const auto& s : list) string(s);
  }

  void matrix(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }

  void named_matrix(const std::string& name, const Matrix& m) {
    string(name);
    matrix(m);
  }

  const std::string& bytes() const { return buffer_; }

 private:
  void raw(const void* p, std::size_t n) {
    buffer_.append(static_cast<const char*>(p), n);
  }
  std::string buffer_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

  std::uint32_t u32() { return read_pod<std::uint32_t>(); }
  std::uint64_t u64() { return read_pod<std::uint64_t>(); }
  double f64() { return read_pod<double>(); }

  std::string string() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }

  std::vector<std::string> string_list() {
    const std::uint64_t n = u64();
    std::vector<std::string> out;
    out.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(string());
    return out;
  }

  Matrix matrix() {
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    need(rows * cols * sizeof(double));
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t r = 0; r < rows; ++r) {
      for (std::uint64_t c = 0; c < cols; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f64();
      }
    }
    return m;
  }

 private:
  template <typename T>
  T read_pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void need(std::uint64_t n) {
    if (pos_ + n > size_) {
      throw DataError("corrupt checkpoint: payload truncated");
    }
  }

  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

Matrix vector_as_matrix(const Vector& v) {
  Matrix m(v.size(), 1);
  m.col(0) = v;
  return m;
}

}  // namespace

void save_checkpoint(const ModelState& state,
                     const std::filesystem::path& path) {
  Writer w;
  w.u32(kVersion);
  w.u64(vocabulary_hash(state.object_vocabulary));
  w.u64(vocabulary_hash(state.predicate_vocabulary));
  w.string_list(state.object_vocabulary);
  w.string_list(state.predicate_vocabulary);
  w.string(state.config.to_json());

  std::vector<std::pair<std::string, Matrix>> tensors;
  if (state.config.use_semantic) {
    tensors.emplace_back("semantic.adjacency", state.semantic_graph.adjacency);
    tensors.emplace_back("semantic.attributes",
                         state.semantic_graph.attributes);
    tensors.emplace_back("semantic.hop_weights",
                         state.semantic_params.hop_weights);
    tensors.emplace_back("semantic.map_weights",
                         state.semantic_params.map_weights);
    tensors.emplace_back("semantic.map_bias",
                         vector_as_matrix(state.semantic_params.map_bias));
  }
  if (state.config.use_appearance) {
    tensors.emplace_back("scene.hop_weights", state.scene_params.hop_weights);
    tensors.emplace_back("scene.map_weights", state.scene_params.map_weights);
    tensors.emplace_back("scene.map_bias",
                         vector_as_matrix(state.scene_params.map_bias));
  }
  tensors.emplace_back("scorer.weights", state.scorer.weights);

  // Prior counts as a sparse (c_s, c_o, p, count) table; the map is
  // ordered, so the layout is reproducible.
  Matrix prior_counts(state.priors.counts().size(), 4);
  Eigen::Index row = 0;
  for (const auto& [key, count] : state.priors.counts()) {
    prior_counts(row, 0) = std::get<0>(key);
    prior_counts(row, 1) = std::get<1>(key);
    prior_counts(row, 2) = std::get<2>(key);
    prior_counts(row, 3) = static_cast<double>(count);
    ++row;
  }
  tensors.emplace_back("priors.counts", std::move(prior_counts));

  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) w.named_matrix(name, m);

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write checkpoint: " + path.string());
  }
  out.write(kMagic, sizeof(kMagic));
  const std::string& payload = w.bytes();
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  std::uint64_t checksum = fnv1a({kMagic, sizeof(kMagic)});
  checksum = fnv1a(payload, checksum);
  out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  if (!out) {
    throw DataError("failed while writing checkpoint: " + path.string());
  }
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open checkpoint: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();

  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file: " + path.string());
  }
  std::uint64_t stored_checksum = 0;
  std::memcpy(&stored_checksum, bytes.data() + bytes.size() - sizeof(stored_checksum),
              sizeof(stored_checksum));
  const std::string_view payload_and_magic(bytes.data(),
                                           bytes.size() - sizeof(stored_checksum));
  if (fnv1a(payload_and_magic) != stored_checksum) {
    throw DataError("corrupt checkpoint (checksum mismatch, possibly truncated): " +
                    path.string());
  }

  Reader r(bytes.data() + sizeof(kMagic),
           bytes.size() - sizeof(kMagic) - sizeof(stored_checksum));
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version) + " (expected " +
                    std::to_string(kVersion) + ")");
  }
  const std::uint64_t object_hash = r.u64();
  const std::uint64_t predicate_hash = r.u64();

  ModelState state;
  state.object_vocabulary = r.string_list();
  state.predicate_vocabulary = r.string_list();
  if (vocabulary_hash(state.object_vocabulary) != object_hash) {
    throw DataError("corrupt checkpoint: object_vocabulary hash mismatch");
  }
  if (vocabulary_hash(state.predicate_vocabulary) != predicate_hash) {
    throw DataError("corrupt checkpoint: predicate_vocabulary hash mismatch");
  }
  state.config = Config::from_json(r.string());

  std::map<std::string, Matrix> tensors;
  const std::uint32_t tensor_count = r.u32();
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    std::string name = r.string();
    tensors[name] = r.matrix();
  }
  auto take = [&tensors, &path](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw DataError("checkpoint missing tensor '" + name + "': " +
                      path.string());
    }
    Matrix m = std::move(it->second);
    tensors.erase(it);
    return m;
  };

  const Nonlinearity nonlin =
      nonlinearity_from_string(state.config.nonlinearity);
  if (state.config.use_semantic) {
    state.semantic_graph.adjacency = take("semantic.adjacency");
    state.semantic_graph.attributes = take("semantic.attributes");
    const int n = static_cast<int>(state.semantic_graph.adjacency.rows());
    state.semantic_graph.node_ids.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      state.semantic_graph.node_ids[static_cast<std::size_t>(i)] = i;
    }
    state.semantic_graph.raw_adjacency = Matrix::Zero(n, n);
    state.semantic_graph.power_tensor = power_tensor(
        state.semantic_graph.adjacency,
        state.config.effective_hops_semantic());
    state.semantic_params.hop_weights = take("semantic.hop_weights");
    state.semantic_params.map_weights = take("semantic.map_weights");
    state.semantic_params.map_bias = take("semantic.map_bias").col(0);
    state.semantic_params.nonlinearity = nonlin;
  }
  if (state.config.use_appearance) {
    state.scene_params.hop_weights = take("scene.hop_weights");
    state.scene_params.map_weights = take("scene.map_weights");
    state.scene_params.map_bias = take("scene.map_bias").col(0);
    state.scene_params.nonlinearity = nonlin;
  }
  state.scorer.weights = take("scorer.weights");

  const Matrix prior_counts = take("priors.counts");
  state.priors = PriorTable(
      static_cast<int>(state.predicate_vocabulary.size()),
      state.config.prior_alpha);
  for (Eigen::Index i = 0; i < prior_counts.rows(); ++i) {
    state.priors.add(static_cast<int>(prior_counts(i, 0)),
                     static_cast<int>(prior_counts(i, 1)),
                     static_cast<int>(prior_counts(i, 2)),
                     static_cast<std::int64_t>(prior_counts(i, 3)));
  }
  return state;
}

}  // namespace vrdiff
