#pragma once

#include <cstdint>
#include <string>

#include "vrdiff/graphs.hpp"
#include "vrdiff/types.hpp"

namespace vrdiff {

enum class Nonlinearity { Relu, Identity };

Nonlinearity nonlinearity_from_string(const std::string& name);
std::string to_string(Nonlinearity n);

// Learned diffusion layer: hop-weighted aggregation over the adjacency
// power series followed by one fully connected map.
//
//   Z = f( flatten_h( hop_weights ⊙ [A^h X]_h ) · map_weights + map_bias )
//
// hop_weights is H x d and broadcast across nodes, which is what makes the
// layer equivariant under node permutations and lets it transfer across
// scene graphs of different sizes.
struct DiffusionParams {
  Matrix hop_weights;   // H x d
  Matrix map_weights;   // (H*d) x d_out
  Vector map_bias;      // d_out
  Nonlinearity nonlinearity = Nonlinearity::Relu;

  int hops() const { return static_cast<int>(hop_weights.rows()); }
  int input_dim() const { return static_cast<int>(hop_weights.cols()); }
  int output_dim() const { return static_cast<int>(map_bias.size()); }

  // hop_weights start at all-ones (a plain diffusion average); map_weights
  // are uniform in ±1/sqrt(fan_in); bias is zero.
  static DiffusionParams init(int hops, int input_dim, int output_dim,
                              Nonlinearity nonlinearity, std::uint64_t seed);
};

// Forward result plus the intermediates the backward pass needs. Built
// without a cache (keep_cache = false) for evaluation-only passes.
struct DiffusionOutput {
  Matrix Z;          // N x d_out
  Matrix hop_stack;  // N x (H*d), block h = A^h X
  Matrix weighted;   // N x (H*d), hop_stack scaled by broadcast hop_weights
  Matrix preact;     // N x d_out, before the nonlinearity
  bool has_cache = false;
};

DiffusionOutput diffuse_forward(const AttributeGraph& graph,
                                const DiffusionParams& params,
                                bool keep_cache = true);

struct DiffusionGradients {
  Matrix hop_weights;
  Matrix map_weights;
  Vector map_bias;
  Matrix attributes;  // filled only when requested

  void scale_add(const DiffusionGradients& other, double factor);
};

// Exact gradients of a scalar loss with gradient grad_Z at the layer
// output. Throws DataError if the output was produced without a cache.
DiffusionGradients diffuse_backward(const AttributeGraph& graph,
                                    const DiffusionParams& params,
                                    const DiffusionOutput& output,
                                    const Matrix& grad_Z,
                                    bool want_attribute_grad = false);

}  // namespace vrdiff
