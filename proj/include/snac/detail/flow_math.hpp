#pragma once

// Coupling-layer math written once over a value type V (Tensor for
// inference, ad::Var for training). Calls are unqualified so overload
// resolution picks snac:: or snac::ad:: by argument type.
//
// Row layout: a batch of B samples with T frames each is a (B*T) x D matrix,
// sample-major. Condition embeddings arrive as a B x E matrix and are
// expanded to frames with repeat_rows.

#include <cstddef>
#include <optional>
#include <utility>

#include "snac/condnet.hpp"

namespace snac::detail {

template <class V>
struct BasicCouplingLayer {
  std::size_t split = 1;
  Mode mode = Mode::snac;
  BasicScaleBiasNet<V> net;
  std::optional<BasicCondProjection<V>> proj;
};

template <class V>
struct RowsPass {
  V out;
  V logdet_rows;  // (B*T) x 1
};

template <class V>
std::pair<V, V> scale_bias_rows(const BasicScaleBiasNet<V>& net, const V& input) {
  V h = input;
  const std::size_t last = net.weights.size() - 1;
  for (std::size_t i = 0; i < last; ++i) h = tanh(add_row(matmul(h, net.weights[i]), net.biases[i]));
  V out = add_row(matmul(h, net.weights[last]), net.biases[last]);
  const std::size_t width = out.shape().back() / 2;
  V raw = slice_channels(out, 0, width);
  V s = scale(tanh(scale(raw, 1.0 / net.clamp)), net.clamp);
  return {std::move(s), slice_channels(out, width, 2 * width)};
}

// (x - m) / exp(v), all operands row-aligned.
template <class V>
V normalize_rows(const V& x, const V& m, const V& v) {
  return div(sub(x, m), exp(v));
}

// x * exp(v) + m
template <class V>
V denormalize_rows(const V& x, const V& m, const V& v) {
  return add(mul(x, exp(v)), m);
}

// m and v per frame row: each is (B*T) x D.
template <class V>
std::pair<V, V> project_rows(const BasicCondProjection<V>& proj, const V& g, std::size_t frames) {
  V m = add_row(matmul(g, proj.mean_w), proj.mean_b);
  V v = add_row(matmul(g, proj.logstd_w), proj.logstd_b);
  return {repeat_rows(m, frames), repeat_rows(v, frames)};
}

template <class V>
RowsPass<V> coupling_forward_rows(const BasicCouplingLayer<V>& layer, const V& x, const V& g,
                                  std::size_t frames) {
  const std::size_t d = layer.split;
  const std::size_t channels = x.shape().back();
  V x_id = slice_channels(x, 0, d);
  V x_tr = slice_channels(x, d, channels);
  if (layer.mode == Mode::baseline) {
    auto [s, b] = scale_bias_rows(layer.net, concat_channels(x_id, repeat_rows(g, frames)));
    V y_tr = add(mul(x_tr, exp(s)), b);
    return {concat_channels(x_id, y_tr), sum_channels(s)};
  }
  auto [m, v] = project_rows(*layer.proj, g, frames);
  V v_tr = slice_channels(v, d, channels);
  V x_id_n = normalize_rows(x_id, slice_channels(m, 0, d), slice_channels(v, 0, d));
  auto [s, b] = scale_bias_rows(layer.net, x_id_n);
  V x_tr_n = normalize_rows(x_tr, slice_channels(m, d, channels), v_tr);
  V y_tr = add(mul(x_tr_n, exp(s)), b);
  return {concat_channels(x_id, y_tr), sub(sum_channels(s), sum_channels(v_tr))};
}

// Inverse only runs on concrete values.
template <class V>
V coupling_inverse_rows(const BasicCouplingLayer<V>& layer, const V& y, const V& g,
                        std::size_t frames) {
  const std::size_t d = layer.split;
  const std::size_t channels = y.shape().back();
  V y_id = slice_channels(y, 0, d);
  V y_tr = slice_channels(y, d, channels);
  if (layer.mode == Mode::baseline) {
    auto [s, b] = scale_bias_rows(layer.net, concat_channels(y_id, repeat_rows(g, frames)));
    return concat_channels(y_id, div(sub(y_tr, b), exp(s)));
  }
  auto [m, v] = project_rows(*layer.proj, g, frames);
  V y_id_n = normalize_rows(y_id, slice_channels(m, 0, d), slice_channels(v, 0, d));
  auto [s, b] = scale_bias_rows(layer.net, y_id_n);
  V x_tr_n = div(sub(y_tr, b), exp(s));
  return concat_channels(
      y_id, denormalize_rows(x_tr_n, slice_channels(m, d, channels), slice_channels(v, d, channels)));
}

// Builds layer k's weights by looking names up in a map of V.
template <class V, class Map>
BasicCouplingLayer<V> layer_from(const FlowArch& arch, std::size_t k, const Map& params) {
  BasicCouplingLayer<V> layer;
  layer.split = arch.identity_channels();
  layer.mode = arch.mode;
  layer.net.clamp = arch.scale_clamp;
  const std::string prefix = layer_prefix(k);
  for (std::size_t i = 0; i <= arch.depth; ++i) {
    layer.net.weights.push_back(params.at(prefix + "net.w" + std::to_string(i)));
    layer.net.biases.push_back(params.at(prefix + "net.b" + std::to_string(i)));
  }
  if (arch.mode == Mode::snac) {
    layer.proj = BasicCondProjection<V>{params.at(prefix + "proj.mean_w"), params.at(prefix + "proj.mean_b"),
                                        params.at(prefix + "proj.logstd_w"),
                                        params.at(prefix + "proj.logstd_b")};
  }
  return layer;
}

// f(x): (coupling, flip) per layer. Returns z rows and per-row logdet.
template <class V>
RowsPass<V> flow_forward_rows(const std::vector<BasicCouplingLayer<V>>& layers, const V& x,
                              const V& g, std::size_t frames) {
  V h = x;
  std::optional<V> logdet;
  for (const auto& layer : layers) {
    auto pass = coupling_forward_rows(layer, h, g, frames);
    h = reverse_channels(pass.out);
    logdet = logdet ? add(*logdet, pass.logdet_rows) : pass.logdet_rows;
  }
  if (!logdet) logdet = scale(sum_channels(x), 0.0);
  return {std::move(h), std::move(*logdet)};
}

}  // namespace snac::detail
