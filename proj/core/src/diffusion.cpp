#include "vrdiff/diffusion.hpp"

#include <cmath>

#include "vrdiff/error.hpp"
#include "vrdiff/rng.hpp"

namespace vrdiff {

Nonlinearity nonlinearity_from_string(const std::string& name) {
  if (name == "relu") return Nonlinearity::Relu;
  if (name == "identity") return Nonlinearity::Identity;
  throw DataError("unknown nonlinearity '" + name +
                  "' (expected \"relu\" or \"identity\")");
}

std::string to_string(Nonlinearity n) {
  return n == Nonlinearity::Relu ? "relu" : "identity";
}

DiffusionParams DiffusionParams::init(int hops, int input_dim, int output_dim,
                                      Nonlinearity nonlinearity,
                                      std::uint64_t seed) {
  DiffusionParams p;
  p.nonlinearity = nonlinearity;
  p.hop_weights = Matrix::Ones(hops, input_dim);
  const int fan_in = hops * input_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  SplitMix64 rng(seed);
  p.map_weights = Matrix(fan_in, output_dim);
  for (Eigen::Index r = 0; r < p.map_weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.map_weights.cols(); ++c) {
      p.map_weights(r, c) = rng.uniform(-bound, bound);
    }
  }
  p.map_bias = Vector::Zero(output_dim);
  return p;
}

DiffusionOutput diffuse_forward(const AttributeGraph& graph,
                                const DiffusionParams& params,
                                bool keep_cache) {
  const int n = graph.node_count();
  const int hops = graph.hop_count();
  const int d = graph.attribute_dim();
  if (params.hops() != hops || params.input_dim() != d) {
    throw DataError("diffuse_forward: params are " +
                    std::to_string(params.hops()) + "x" +
                    std::to_string(params.input_dim()) + " but graph is " +
                    std::to_string(hops) + " hops x " + std::to_string(d) +
                    " dims");
  }
  if (params.map_weights.rows() != static_cast<Eigen::Index>(hops) * d) {
    throw DataError("diffuse_forward: map_weights rows do not match H*d");
  }

  DiffusionOutput out;
  Matrix hop_stack(n, hops * d);
  Matrix weighted(n, hops * d);
  for (int h = 0; h < hops; ++h) {
    const Matrix block =
        graph.power_tensor[static_cast<std::size_t>(h)] * graph.attributes;
    hop_stack.middleCols(static_cast<Eigen::Index>(h) * d, d) = block;
    weighted.middleCols(static_cast<Eigen::Index>(h) * d, d) =
        block.array().rowwise() *
        params.hop_weights.row(h).array();
  }
  Matrix preact = weighted * params.map_weights;
  preact.rowwise() += params.map_bias.transpose();

  out.Z = params.nonlinearity == Nonlinearity::Relu
              ? preact.cwiseMax(0.0)
              : preact;
  if (keep_cache) {
    out.hop_stack = std::move(hop_stack);
    out.weighted = std::move(weighted);
    out.preact = std::move(preact);
    out.has_cache = true;
  }
  return out;
}

void DiffusionGradients::scale_add(const DiffusionGradients& other,
                                   double factor) {
  hop_weights += factor * other.hop_weights;
  map_weights += factor * other.map_weights;
  map_bias += factor * other.map_bias;
  if (attributes.size() > 0 && other.attributes.size() > 0) {
    attributes += factor * other.attributes;
  }
}

DiffusionGradients diffuse_backward(const AttributeGraph& graph,
                                    const DiffusionParams& params,
                                    const DiffusionOutput& output,
                                    const Matrix& grad_Z,
                                    bool want_attribute_grad) {
  if (!output.has_cache) {
    throw DataError("diffuse_backward: output was produced without a cache");
  }
  const int n = graph.node_count();
  const int hops = params.hops();
  const int d = params.input_dim();
  if (grad_Z.rows() != n || grad_Z.cols() != params.output_dim()) {
    throw DataError("diffuse_backward: grad_Z shape mismatch");
  }
  if (output.hop_stack.rows() != n ||
      output.hop_stack.cols() != static_cast<Eigen::Index>(hops) * d) {
    throw DataError("diffuse_backward: cache is stale for these params");
  }

  Matrix grad_pre = grad_Z;
  if (params.nonlinearity == Nonlinearity::Relu) {
    grad_pre = (output.preact.array() > 0.0)
                   .select(grad_pre, Matrix::Zero(n, params.output_dim()));
  }

  DiffusionGradients grads;
  grads.map_bias = grad_pre.colwise().sum().transpose();
  grads.map_weights = output.weighted.transpose() * grad_pre;

  const Matrix grad_weighted = grad_pre * params.map_weights.transpose();
  // d/dW: the hop weight multiplies every node's hop feature, so sum over
  // nodes; d/d(hop_stack): scale back by the broadcast weight.
  grads.hop_weights = Matrix(hops, d);
  Matrix grad_stack(n, hops * d);
  for (int h = 0; h < hops; ++h) {
    const auto gw = grad_weighted.middleCols(static_cast<Eigen::Index>(h) * d, d);
    const auto hs = output.hop_stack.middleCols(static_cast<Eigen::Index>(h) * d, d);
    grads.hop_weights.row(h) = (gw.array() * hs.array()).colwise().sum();
    grad_stack.middleCols(static_cast<Eigen::Index>(h) * d, d) =
        gw.array().rowwise() * params.hop_weights.row(h).array();
  }

  if (want_attribute_grad) {
    grads.attributes = Matrix::Zero(n, d);
    for (int h = 0; h < hops; ++h) {
      grads.attributes +=
          graph.power_tensor[static_cast<std::size_t>(h)].transpose() *
          grad_stack.middleCols(static_cast<Eigen::Index>(h) * d, d);
    }
  }
  return grads;
}

}  // namespace vrdiff
