#include "snac/flow.hpp"

#include <cmath>

namespace snac {

namespace {

Tensor as_rows(const Tensor& x) { return x.rank() == 2 ? x : x.reshaped({1, x.numel()}); }

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NonFiniteError(what, "output shape " + to_string(t.shape()));
}

void check_channels(const Tensor& x, const Tensor& m, const Tensor& v, const char* op) {
  if (m.numel() != x.cols() || v.numel() != x.cols())
    throw ShapeError(std::string(op) + ": x has " + std::to_string(x.cols()) + " channels but m " +
                     to_string(m.shape()) + ", v " + to_string(v.shape()));
}

std::pair<Tensor, Tensor> frame_params(const Tensor& x, const Tensor& m, const Tensor& v) {
  return {repeat_rows(m.reshaped({1, m.numel()}), x.rows()),
          repeat_rows(v.reshaped({1, v.numel()}), x.rows())};
}

void check_layer_inputs(const CouplingLayer& layer, const Tensor& x, const Tensor& g,
                        std::size_t frames) {
  if (x.rank() != 2 || x.cols() <= layer.split)
    throw ShapeError("coupling: input " + to_string(x.shape()) + " incompatible with split " +
                     std::to_string(layer.split));
  if (g.rank() != 2 || g.rows() * frames != x.rows())
    throw ShapeError("coupling: embedding rows " + to_string(g.shape()) + " do not match " +
                     std::to_string(x.rows()) + " frame rows");
  if (layer.mode == Mode::snac && !layer.proj)
    throw ConfigError("coupling: snac layer has no condition projection");
  if (layer.mode == Mode::baseline && layer.proj)
    throw ConfigError("coupling: baseline layer must not carry a condition projection");
}

}  // namespace

FlowStack FlowStack::from_params(const FlowArch& arch, const ParamSet& params) {
  arch.validate();
  FlowStack stack{arch, {}};
  for (std::size_t k = 0; k < arch.layers; ++k)
    stack.layers.push_back(detail::layer_from<Tensor>(arch, k, params));
  return stack;
}

Tensor sn(const Tensor& x, const Tensor& m, const Tensor& v) {
  const Tensor rows = as_rows(x);
  check_channels(rows, m, v, "sn");
  auto [mr, vr] = frame_params(rows, m, v);
  return detail::normalize_rows(rows, mr, vr).reshaped(x.shape());
}

Tensor sdn(const Tensor& x, const Tensor& m, const Tensor& v) {
  const Tensor rows = as_rows(x);
  check_channels(rows, m, v, "sdn");
  auto [mr, vr] = frame_params(rows, m, v);
  return detail::denormalize_rows(rows, mr, vr).reshaped(x.shape());
}

Tensor flip(const Tensor& x) { return reverse_channels(x); }

ForwardResult coupling_forward(const CouplingLayer& layer, const Tensor& x, const Tensor& g) {
  const Tensor rows = as_rows(x);
  const Tensor g_row = g.reshaped({1, g.numel()});
  check_layer_inputs(layer, rows, g_row, rows.rows());
  auto pass = detail::coupling_forward_rows(layer, rows, g_row, rows.rows());
  require_finite(pass.out, "coupling_forward");
  const double logdet = sum(pass.logdet_rows).item();
  return {pass.out.reshaped(x.shape()), logdet};
}

Tensor coupling_inverse(const CouplingLayer& layer, const Tensor& y, const Tensor& g) {
  const Tensor rows = as_rows(y);
  const Tensor g_row = g.reshaped({1, g.numel()});
  check_layer_inputs(layer, rows, g_row, rows.rows());
  Tensor x = detail::coupling_inverse_rows(layer, rows, g_row, rows.rows());
  require_finite(x, "coupling_inverse");
  return x.reshaped(y.shape());
}

BatchForward flow_forward_batch(const FlowStack& stack, const Tensor& x, const Tensor& g,
                                std::size_t frames) {
  if (frames == 0 || x.rows() % frames != 0)
    throw ShapeError("flow_forward: " + std::to_string(x.rows()) + " rows not divisible by " +
                     std::to_string(frames) + " frames");
  if (x.cols() != stack.arch.channels)
    throw ShapeError("flow_forward: expected " + std::to_string(stack.arch.channels) +
                     " channels, got " + to_string(x.shape()));
  const std::size_t samples = x.rows() / frames;
  Tensor h = as_rows(x);
  std::vector<double> row_logdet(h.rows(), 0.0);
  for (std::size_t k = 0; k < stack.layers.size(); ++k) {
    try {
      check_layer_inputs(stack.layers[k], h, g, frames);
      auto pass = detail::coupling_forward_rows(stack.layers[k], h, g, frames);
      require_finite(pass.out, "coupling_forward");
      for (std::size_t r = 0; r < row_logdet.size(); ++r) row_logdet[r] += pass.logdet_rows[r];
      h = flip(pass.out);
    } catch (const LayerError&) {
      throw;
    } catch (const std::exception& e) {
      throw LayerError(k, e.what());
    }
  }
  std::vector<double> logdet(samples, 0.0);
  for (std::size_t b = 0; b < samples; ++b)
    for (std::size_t t = 0; t < frames; ++t) logdet[b] += row_logdet[b * frames + t];
  return {std::move(h), std::move(logdet)};
}

Tensor flow_inverse_batch(const FlowStack& stack, const Tensor& z, const Tensor& g,
                          std::size_t frames) {
  if (frames == 0 || z.rows() % frames != 0)
    throw ShapeError("flow_inverse: " + std::to_string(z.rows()) + " rows not divisible by " +
                     std::to_string(frames) + " frames");
  Tensor h = as_rows(z);
  for (std::size_t k = stack.layers.size(); k-- > 0;) {
    try {
      h = flip(h);
      check_layer_inputs(stack.layers[k], h, g, frames);
      h = detail::coupling_inverse_rows(stack.layers[k], h, g, frames);
      require_finite(h, "coupling_inverse");
    } catch (const std::exception& e) {
      throw LayerError(k, e.what());
    }
  }
  return h;
}

ForwardResult flow_forward(const FlowStack& stack, const Tensor& x, const Tensor& g) {
  const Tensor rows = as_rows(x);
  auto result = flow_forward_batch(stack, rows, g.reshaped({1, g.numel()}), rows.rows());
  return {result.z.reshaped(x.shape()), result.logdet[0]};
}

Tensor flow_inverse(const FlowStack& stack, const Tensor& z, const Tensor& g) {
  const Tensor rows = as_rows(z);
  return flow_inverse_batch(stack, rows, g.reshaped({1, g.numel()}), rows.rows()).reshaped(z.shape());
}

}  // namespace snac
