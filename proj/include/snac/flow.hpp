#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "snac/condnet.hpp"
#include "snac/detail/flow_math.hpp"
#include "snac/tensor.hpp"

namespace snac {

// One affine coupling layer. The first `split` channels pass through; the
// rest are scaled and shifted by the conditioner. In snac mode `proj` holds
// the condition-to-(mean, log-std) maps; in baseline mode it is empty.
using CouplingLayer = detail::BasicCouplingLayer<Tensor>;

// K coupling layers, each followed by a full channel reversal.
struct FlowStack {
  FlowArch arch;
  std::vector<CouplingLayer> layers;

  static FlowStack from_params(const FlowArch& arch, const ParamSet& params);
};

// Thrown by flow_forward / flow_inverse when layer `layer` fails.
class LayerError : public std::runtime_error {
 public:
  LayerError(std::size_t layer, const std::string& what)
      : std::runtime_error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

// Speaker normalization over a T x k sequence with per-channel m, v (length k),
// the same for every frame: (x - m) / exp(v).
Tensor sn(const Tensor& x, const Tensor& m, const Tensor& v);
// Inverse of sn: x * exp(v) + m.
Tensor sdn(const Tensor& x, const Tensor& m, const Tensor& v);
// Channel reversal per frame.
Tensor flip(const Tensor& x);

struct ForwardResult {
  Tensor y;
  double logdet = 0.0;
};

// Single sample: x is T x D, g has length E.
ForwardResult coupling_forward(const CouplingLayer& layer, const Tensor& x, const Tensor& g);
Tensor coupling_inverse(const CouplingLayer& layer, const Tensor& y, const Tensor& g);

ForwardResult flow_forward(const FlowStack& stack, const Tensor& x, const Tensor& g);
Tensor flow_inverse(const FlowStack& stack, const Tensor& z, const Tensor& g);

// Batched: x is (B*T) x D sample-major, g is B x E. logdet has one entry
// per sample.
struct BatchForward {
  Tensor z;
  std::vector<double> logdet;
};
BatchForward flow_forward_batch(const FlowStack& stack, const Tensor& x, const Tensor& g,
                                std::size_t frames);
Tensor flow_inverse_batch(const FlowStack& stack, const Tensor& z, const Tensor& g,
                          std::size_t frames);

}  // namespace snac
