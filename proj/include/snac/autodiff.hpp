#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "snac/tensor.hpp"

namespace snac {

// Named parameter tensors. std::map gives the lexicographic iteration order
// that optimizer state and checkpoints rely on.
using ParamSet = std::map<std::string, Tensor>;

namespace ad {

class Tape;

// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode recording of whole-tensor ops. Not copyable or movable: Vars
// point back into it.
class Tape {
 public:
  // Returns one gradient per parent, in parent order. An empty Tensor means
  // "no contribution".
  using Backward = std::function<std::vector<Tensor>(const Tape&, const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);      // differentiable input
  Var constant(Tensor value);  // never receives a gradient

  // Records an op result. Throws NonFiniteError naming `op` if `value` has
  // NaN/Inf, so the first offending op is reported.
  Var record(const char* op, Tensor value, std::vector<Var> parents, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Seeds d(out)/d(out) = 1 (out must be scalar) and propagates to every
  // node. Afterwards grad(v) is available for any v that needs a gradient.
  void backward(const Var& out);
  const Tensor& grad(const Var& v) const;

 private:
  struct Node {
    const char* op;
    Tensor value;
    std::vector<std::size_t> parents;
    Backward backward;
    bool needs_grad;
  };
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var scale(const Var& a, double alpha);
Var add_scalar(const Var& a, double beta);
Var matmul(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& bias);
Var slice_channels(const Var& a, std::size_t begin, std::size_t end);
Var concat_channels(const Var& a, const Var& b);
Var reverse_channels(const Var& a);
Var repeat_rows(const Var& a, std::size_t times);
Var sum(const Var& a);
Var mean(const Var& a);
Var sum_channels(const Var& a);

}  // namespace ad

using ParamVars = std::map<std::string, ad::Var>;
// A scalar loss recorded on `tape` from parameter leaves.
using LossFn = std::function<ad::Var(ad::Tape& tape, const ParamVars& params)>;

double evaluate(const LossFn& loss, const ParamSet& params);

// d(loss)/d(p) for every named p; same names and shapes as `params`.
ParamSet gradient(const LossFn& loss, const ParamSet& params);
std::pair<double, ParamSet> value_and_gradient(const LossFn& loss, const ParamSet& params);

// Central differences against the tape gradient. Returns the maximum over
// the checked scalars of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// max_params = 0 checks every scalar; otherwise a seeded sample of that many.
double finite_diff_check(const LossFn& loss, const ParamSet& params, double step,
                         std::size_t max_params = 0, std::uint64_t seed = 0);

}  // namespace snac
