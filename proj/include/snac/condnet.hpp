#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snac/autodiff.hpp"
#include "snac/tensor.hpp"

namespace snac {

// How the condition embedding g enters a coupling layer.
//   baseline: g is concatenated to the scale/bias network input.
//   snac:     g only drives per-channel normalization (m, v); the network
//             sees the normalized identity half and never g itself.
enum class Mode { baseline, snac };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct FlowArch {
  Mode mode = Mode::snac;
  std::size_t channels = 2;     // D
  std::size_t split = 0;        // d; 0 selects floor(D/2)
  std::size_t embed_dim = 16;   // E
  std::size_t hidden = 64;      // H
  std::size_t depth = 2;        // L hidden layers
  std::size_t layers = 4;       // K coupling layers
  double scale_clamp = 4.0;     // c

  std::size_t identity_channels() const { return split == 0 ? channels / 2 : split; }
  std::size_t coupled_channels() const { return channels - identity_channels(); }
  std::size_t net_inputs() const {
    return identity_channels() + (mode == Mode::baseline ? embed_dim : 0);
  }
  // Throws ConfigError naming the offending field.
  void validate() const;

  friend bool operator==(const FlowArch&, const FlowArch&) = default;
};

// Per-frame MLP with tanh hidden activations. Output channels are
// 2 * (D - d): the first half is the raw log-scale, the second the bias.
template <class V>
struct BasicScaleBiasNet {
  std::vector<V> weights;  // [in x H], [H x H]..., [H x 2(D-d)]
  std::vector<V> biases;
  double clamp = 4.0;
};

// Linear maps g -> m (mean) and g -> v (log-std), each E x D plus bias D.
template <class V>
struct BasicCondProjection {
  V mean_w, mean_b, logstd_w, logstd_b;
};

using ScaleBiasNet = BasicScaleBiasNet<Tensor>;
using CondProjection = BasicCondProjection<Tensor>;

struct ScaleBias {
  Tensor scale;  // clamped to [-c, c]
  Tensor bias;
};

struct MeanLogStd {
  Tensor mean;     // [D]
  Tensor log_std;  // [D]
};

// x_id is T x d. Baseline mode requires g (length E), appended to every
// frame; snac mode rejects g because the caller passes SN(x_id) instead.
ScaleBias scale_bias(const ScaleBiasNet& net, const Tensor& x_id,
                     const std::optional<Tensor>& g, Mode mode);

MeanLogStd project_mv(const CondProjection& proj, const Tensor& g);

// Parameter naming: layerNN.net.w<i>, layerNN.net.b<i>,
// layerNN.proj.{mean_w,mean_b,logstd_w,logstd_b}.
std::string layer_prefix(std::size_t layer);

// Hidden layers Xavier-uniform; the last net layer and both projections
// exactly zero, so every coupling layer starts as the identity.
ParamSet init_params(std::uint64_t seed, const FlowArch& arch);

// Adds seeded uniform(-amplitude, amplitude) noise to every parameter,
// including the zero-initialized ones. Used to get non-identity flows for
// verification.
ParamSet perturb_params(const ParamSet& params, std::uint64_t seed, double amplitude);

}  // namespace snac
