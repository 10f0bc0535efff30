#include "snac/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "snac/kernels.hpp"
#include "snac/rng.hpp"

namespace snac {
namespace ad {

namespace {

Tape& tape_of(const char* op, const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape())
    throw ShapeError(std::string(op) + ": operands recorded on different tapes");
  return *a.tape();
}

Tape& tape_of(const char* op, const Var& a) {
  if (a.tape() == nullptr) throw ShapeError(std::string(op) + ": unbound Var");
  return *a.tape();
}

Tensor broadcast_scalar(double g, const Shape& shape) { return Tensor::adopt(shape, std::vector<double>(
    std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{}), g)); }

}  // namespace

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ShapeError("Var: not bound to a tape");
  return tape_->value(id_);
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back({"leaf", std::move(value), {}, nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back({"constant", std::move(value), {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::vector<Var> parents, Backward backward) {
  if (!value.all_finite()) throw NonFiniteError(op, "output shape " + to_string(value.shape()));
  Node node{op, std::move(value), {}, std::move(backward), false};
  node.parents.reserve(parents.size());
  for (const auto& p : parents) {
    node.parents.push_back(p.id());
    node.needs_grad = node.needs_grad || nodes_[p.id()].needs_grad;
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(const Var& out) {
  if (out.tape() != this) throw ShapeError("backward: Var belongs to another tape");
  if (value(out.id()).numel() != 1)
    throw ShapeError("backward: output must be scalar, got " + to_string(value(out.id()).shape()));
  grads_.assign(nodes_.size(), Tensor());
  grads_[out.id()] = Tensor::adopt(value(out.id()).shape(), {1.0});
  for (std::size_t i = out.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.needs_grad || !node.backward || grads_[i].numel() == 0) continue;
    auto parent_grads = node.backward(*this, grads_[i]);
    for (std::size_t p = 0; p < node.parents.size(); ++p) {
      const std::size_t pid = node.parents[p];
      if (!nodes_[pid].needs_grad || parent_grads[p].numel() == 0) continue;
      if (grads_[pid].numel() == 0)
        grads_[pid] = std::move(parent_grads[p]);
      else
        grads_[pid] = snac::add(grads_[pid], parent_grads[p]);
    }
  }
}

const Tensor& Tape::grad(const Var& v) const {
  static const Tensor kEmpty;
  if (v.id() >= grads_.size()) return kEmpty;
  return grads_[v.id()];
}

Var add(const Var& a, const Var& b) {
  auto& t = tape_of("add", a, b);
  return t.record("add", snac::add(a.value(), b.value()), {a, b},
                  [](const Tape&, const Tensor& g) { return std::vector<Tensor>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  auto& t = tape_of("sub", a, b);
  return t.record("sub", snac::sub(a.value(), b.value()), {a, b},
                  [](const Tape&, const Tensor& g) { return std::vector<Tensor>{g, snac::neg(g)}; });
}

Var mul(const Var& a, const Var& b) {
  auto& t = tape_of("mul", a, b);
  return t.record("mul", snac::mul(a.value(), b.value()), {a, b},
                  [ia = a.id(), ib = b.id()](const Tape& tp, const Tensor& g) {
                    return std::vector<Tensor>{snac::mul(g, tp.value(ib)),
                                               snac::mul(g, tp.value(ia))};
                  });
}

Var div(const Var& a, const Var& b) {
  auto& t = tape_of("div", a, b);
  return t.record("div", snac::div(a.value(), b.value()), {a, b},
                  [ia = a.id(), ib = b.id()](const Tape& tp, const Tensor& g) {
                    const Tensor& bv = tp.value(ib);
                    Tensor ga = snac::div(g, bv);
                    Tensor gb = snac::neg(snac::div(snac::mul(ga, tp.value(ia)), bv));
                    return std::vector<Tensor>{std::move(ga), std::move(gb)};
                  });
}

Var neg(const Var& a) {
  auto& t = tape_of("neg", a);
  return t.record("neg", snac::neg(a.value()), {a},
                  [](const Tape&, const Tensor& g) { return std::vector<Tensor>{snac::neg(g)}; });
}

Var exp(const Var& a) {
  auto& t = tape_of("exp", a);
  const std::size_t self = t.size();
  return t.record("exp", snac::exp(a.value()), {a}, [self](const Tape& tp, const Tensor& g) {
    return std::vector<Tensor>{snac::mul(g, tp.value(self))};
  });
}

Var log(const Var& a) {
  auto& t = tape_of("log", a);
  return t.record("log", snac::log(a.value()), {a}, [ia = a.id()](const Tape& tp, const Tensor& g) {
    return std::vector<Tensor>{snac::div(g, tp.value(ia))};
  });
}

Var tanh(const Var& a) {
  auto& t = tape_of("tanh", a);
  const std::size_t self = t.size();
  return t.record("tanh", snac::tanh(a.value()), {a}, [self](const Tape& tp, const Tensor& g) {
    const Tensor& y = tp.value(self);
    std::vector<double> out(g.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = g[i] * (1.0 - y[i] * y[i]);
    return std::vector<Tensor>{Tensor::adopt(g.shape(), std::move(out))};
  });
}

Var scale(const Var& a, double alpha) {
  auto& t = tape_of("scale", a);
  return t.record("scale", snac::scale(a.value(), alpha), {a},
                  [alpha](const Tape&, const Tensor& g) {
                    return std::vector<Tensor>{snac::scale(g, alpha)};
                  });
}

Var add_scalar(const Var& a, double beta) {
  auto& t = tape_of("add_scalar", a);
  return t.record("add_scalar", snac::add_scalar(a.value(), beta), {a},
                  [](const Tape&, const Tensor& g) { return std::vector<Tensor>{g}; });
}

Var matmul(const Var& a, const Var& b) {
  auto& t = tape_of("matmul", a, b);
  return t.record("matmul", snac::matmul(a.value(), b.value()), {a, b},
                  [ia = a.id(), ib = b.id()](const Tape& tp, const Tensor& g) {
                    const Tensor& av = tp.value(ia);
                    const Tensor& bv = tp.value(ib);
                    const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
                    std::vector<double> ga(m * k), gb(k * n);
                    kernels::matmul_nt(g.data().data(), bv.data().data(), ga.data(), m, n, k);
                    kernels::matmul_tn(av.data().data(), g.data().data(), gb.data(), m, k, n);
                    return std::vector<Tensor>{Tensor::adopt(av.shape(), std::move(ga)),
                                               Tensor::adopt(bv.shape(), std::move(gb))};
                  });
}

Var add_row(const Var& a, const Var& bias) {
  auto& t = tape_of("add_row", a, bias);
  return t.record("add_row", snac::add_row(a.value(), bias.value()), {a, bias},
                  [ib = bias.id()](const Tape& tp, const Tensor& g) {
                    std::vector<double> gb(g.cols());
                    kernels::col_sum(g.data().data(), gb.data(), g.rows(), g.cols());
                    return std::vector<Tensor>{g, Tensor::adopt(tp.value(ib).shape(), std::move(gb))};
                  });
}

Var slice_channels(const Var& a, std::size_t begin, std::size_t end) {
  auto& t = tape_of("slice_channels", a);
  return t.record("slice_channels", snac::slice_channels(a.value(), begin, end), {a},
                  [ia = a.id(), begin](const Tape& tp, const Tensor& g) {
                    const Tensor& av = tp.value(ia);
                    std::vector<double> out(av.numel(), 0.0);
                    const std::size_t cols = av.cols(), width = g.cols();
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < width; ++j)
                        out[i * cols + begin + j] = g[i * width + j];
                    return std::vector<Tensor>{Tensor::adopt(av.shape(), std::move(out))};
                  });
}

Var concat_channels(const Var& a, const Var& b) {
  auto& t = tape_of("concat_channels", a, b);
  const std::size_t split = a.value().cols();
  return t.record("concat_channels", snac::concat_channels(a.value(), b.value()), {a, b},
                  [split](const Tape&, const Tensor& g) {
                    return std::vector<Tensor>{snac::slice_channels(g, 0, split),
                                               snac::slice_channels(g, split, g.cols())};
                  });
}

Var reverse_channels(const Var& a) {
  auto& t = tape_of("reverse_channels", a);
  return t.record("reverse_channels", snac::reverse_channels(a.value()), {a},
                  [](const Tape&, const Tensor& g) {
                    return std::vector<Tensor>{snac::reverse_channels(g)};
                  });
}

Var repeat_rows(const Var& a, std::size_t times) {
  auto& t = tape_of("repeat_rows", a);
  return t.record("repeat_rows", snac::repeat_rows(a.value(), times), {a},
                  [ia = a.id(), times](const Tape& tp, const Tensor& g) {
                    const Tensor& av = tp.value(ia);
                    const std::size_t rows = av.rows(), cols = av.cols();
                    std::vector<double> out(rows * cols, 0.0);
                    for (std::size_t i = 0; i < rows; ++i)
                      for (std::size_t r = 0; r < times; ++r)
                        for (std::size_t j = 0; j < cols; ++j)
                          out[i * cols + j] += g[(i * times + r) * cols + j];
                    return std::vector<Tensor>{Tensor::adopt(av.shape(), std::move(out))};
                  });
}

Var sum(const Var& a) {
  auto& t = tape_of("sum", a);
  return t.record("sum", snac::sum(a.value()), {a}, [ia = a.id()](const Tape& tp, const Tensor& g) {
    return std::vector<Tensor>{broadcast_scalar(g.item(), tp.value(ia).shape())};
  });
}

Var mean(const Var& a) {
  auto& t = tape_of("mean", a);
  return t.record("mean", snac::mean(a.value()), {a}, [ia = a.id()](const Tape& tp, const Tensor& g) {
    const Tensor& av = tp.value(ia);
    return std::vector<Tensor>{
        broadcast_scalar(g.item() / static_cast<double>(av.numel()), av.shape())};
  });
}

Var sum_channels(const Var& a) {
  auto& t = tape_of("sum_channels", a);
  return t.record("sum_channels", snac::sum_channels(a.value()), {a},
                  [ia = a.id()](const Tape& tp, const Tensor& g) {
                    const Tensor& av = tp.value(ia);
                    const std::size_t cols = av.cols();
                    std::vector<double> out(av.numel());
                    for (std::size_t i = 0; i < av.rows(); ++i)
                      for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = g[i];
                    return std::vector<Tensor>{Tensor::adopt(av.shape(), std::move(out))};
                  });
}

}  // namespace ad

namespace {

ad::Var record_loss(ad::Tape& tape, const LossFn& loss, const ParamSet& params,
                    ParamVars& vars) {
  for (const auto& [name, value] : params) vars.emplace(name, tape.leaf(value));
  ad::Var out = loss(tape, vars);
  if (out.value().numel() != 1)
    throw ShapeError("loss must be scalar, got shape " + to_string(out.value().shape()));
  return out;
}

}  // namespace

double evaluate(const LossFn& loss, const ParamSet& params) {
  ad::Tape tape;
  ParamVars vars;
  return record_loss(tape, loss, params, vars).value().item();
}

std::pair<double, ParamSet> value_and_gradient(const LossFn& loss, const ParamSet& params) {
  ad::Tape tape;
  ParamVars vars;
  ad::Var out = record_loss(tape, loss, params, vars);
  tape.backward(out);
  ParamSet grads;
  for (const auto& [name, var] : vars) {
    const Tensor& g = tape.grad(var);
    grads.emplace(name, g.numel() == 0 ? Tensor::zeros(var.shape()) : g);
  }
  return {out.value().item(), std::move(grads)};
}

ParamSet gradient(const LossFn& loss, const ParamSet& params) {
  return value_and_gradient(loss, params).second;
}

double finite_diff_check(const LossFn& loss, const ParamSet& params, double step,
                         std::size_t max_params, std::uint64_t seed) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be > 0");
  const ParamSet analytic = gradient(loss, params);

  std::vector<std::pair<std::string, std::size_t>> coords;
  for (const auto& [name, value] : params)
    for (std::size_t i = 0; i < value.numel(); ++i) coords.emplace_back(name, i);
  if (max_params != 0 && max_params < coords.size()) {
    // Partial Fisher-Yates: the first max_params entries become the sample.
    Rng rng(seed);
    for (std::size_t i = 0; i < max_params; ++i)
      std::swap(coords[i], coords[i + rng.index(coords.size() - i)]);
    coords.resize(max_params);
  }

  ParamSet probe = params;
  double worst = 0.0;
  for (const auto& [name, i] : coords) {
    Tensor& p = probe.at(name);
    const double saved = p[i];
    p[i] = saved + step;
    const double up = evaluate(loss, probe);
    p[i] = saved - step;
    const double down = evaluate(loss, probe);
    p[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double exact = analytic.at(name)[i];
    const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(exact - numeric) / denom);
  }
  return worst;
}

}  // namespace snac
