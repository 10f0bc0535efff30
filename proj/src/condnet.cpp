#include "snac/condnet.hpp"

#include <cmath>
#include <cstdio>

#include "snac/detail/flow_math.hpp"
#include "snac/rng.hpp"

namespace snac {

std::string to_string(Mode mode) { return mode == Mode::baseline ? "baseline" : "snac"; }

Mode parse_mode(const std::string& text) {
  if (text == "baseline") return Mode::baseline;
  if (text == "snac") return Mode::snac;
  throw ConfigError("mode: expected 'baseline' or 'snac', got '" + text + "'");
}

void FlowArch::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model." + msg); };
  if (channels < 2) fail("D: need at least 2 channels");
  if (split >= channels) fail("d: split must satisfy 1 <= d < D");
  if (embed_dim < 1) fail("E: embedding dimension must be >= 1");
  if (hidden < 1) fail("H: hidden width must be >= 1");
  if (depth < 1) fail("L: depth must be >= 1");
  if (!(scale_clamp > 0.0) || !std::isfinite(scale_clamp)) fail("c: scale clamp must be > 0");
}

std::string layer_prefix(std::size_t layer) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "layer%02zu.", layer);
  return buf;
}

ScaleBias scale_bias(const ScaleBiasNet& net, const Tensor& x_id, const std::optional<Tensor>& g,
                     Mode mode) {
  if (mode == Mode::snac && g)
    throw ConfigError("scale_bias: snac mode takes the normalized input only; g must not be passed");
  if (mode == Mode::baseline && !g)
    throw ConfigError("scale_bias: baseline mode needs the condition embedding g");
  if (net.weights.empty()) throw ConfigError("scale_bias: network has no layers");
  Tensor input = x_id.rank() == 2 ? x_id : x_id.reshaped({1, x_id.numel()});
  if (g) input = concat_channels(input, repeat_rows(g->reshaped({1, g->numel()}), input.rows()));
  if (input.cols() != net.weights.front().shape()[0])
    throw ShapeError("scale_bias: network expects " + std::to_string(net.weights.front().shape()[0]) +
                     " input channels, got " + std::to_string(input.cols()));
  auto [s, b] = detail::scale_bias_rows(net, input);
  return {std::move(s), std::move(b)};
}

MeanLogStd project_mv(const CondProjection& proj, const Tensor& g) {
  const std::size_t embed = proj.mean_w.shape()[0];
  if (g.numel() != embed)
    throw ShapeError("project_mv: embedding has length " + std::to_string(g.numel()) + ", expected " +
                     std::to_string(embed));
  const Tensor row = g.reshaped({1, embed});
  Tensor m = add_row(matmul(row, proj.mean_w), proj.mean_b);
  Tensor v = add_row(matmul(row, proj.logstd_w), proj.logstd_b);
  return {m.reshaped({m.numel()}), v.reshaped({v.numel()})};
}

ParamSet init_params(std::uint64_t seed, const FlowArch& arch) {
  arch.validate();
  ParamSet params;
  const std::size_t outputs = 2 * arch.coupled_channels();
  for (std::size_t k = 0; k < arch.layers; ++k) {
    Rng rng(derive_seed(seed, k));
    const std::string prefix = layer_prefix(k);
    for (std::size_t i = 0; i <= arch.depth; ++i) {
      const std::size_t fan_in = i == 0 ? arch.net_inputs() : arch.hidden;
      const std::size_t fan_out = i == arch.depth ? outputs : arch.hidden;
      std::vector<double> w(fan_in * fan_out, 0.0);
      if (i < arch.depth) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& x : w) x = rng.uniform(-bound, bound);
      }
      params.emplace(prefix + "net.w" + std::to_string(i), Tensor::matrix(fan_in, fan_out, std::move(w)));
      params.emplace(prefix + "net.b" + std::to_string(i), Tensor::zeros({fan_out}));
    }
    if (arch.mode == Mode::snac) {
      params.emplace(prefix + "proj.mean_w", Tensor::zeros({arch.embed_dim, arch.channels}));
      params.emplace(prefix + "proj.mean_b", Tensor::zeros({arch.channels}));
      params.emplace(prefix + "proj.logstd_w", Tensor::zeros({arch.embed_dim, arch.channels}));
      params.emplace(prefix + "proj.logstd_b", Tensor::zeros({arch.channels}));
    }
  }
  return params;
}

ParamSet perturb_params(const ParamSet& params, std::uint64_t seed, double amplitude) {
  Rng rng(seed);
  ParamSet out = params;
  for (auto& [name, value] : out)
    for (double& x : value.mutable_data()) x += rng.uniform(-amplitude, amplitude);
  return out;
}

}  // namespace snac
