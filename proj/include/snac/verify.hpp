#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "snac/flow.hpp"
#include "snac/trainer.hpp"

namespace snac::verify {

// log|det J| of f at x, with J assembled by central differences (one column
// per input scalar) and factored by partial-pivot LU.
double numerical_log_abs_det(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                             double step = 1e-6);

// A non-identity flow with matching random input and embedding.
struct Instance {
  FlowStack stack;
  ParamSet params;
  Tensor x;  // T x D
  Tensor g;  // [E]
};

struct InstanceShape {
  Mode mode = Mode::snac;
  std::size_t channels = 4;
  std::size_t frames = 1;
  std::size_t layers = 2;
  std::size_t embed_dim = 4;
  std::size_t hidden = 16;
  double amplitude = 0.3;  // perturbation of every parameter
};

Instance random_instance(std::uint64_t seed, const InstanceShape& shape);

// Small fixed batch and its NLL objective for gradient checks.
struct GradientProblem {
  FlowArch arch;
  ParamSet params;
  Batch batch;
};
GradientProblem gradient_problem(std::uint64_t seed, Mode mode, std::size_t channels,
                                 std::size_t layers);

struct CheckOptions {
  std::uint64_t seed = 2024;
  // Test hook: negate the analytic log-determinant inside the Jacobian check.
  bool flip_logdet_sign = false;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured error
  double threshold = 0.0;  // pass iff value < threshold
  double seconds = 0.0;
};

CheckResult check_sn_sdn(const CheckOptions& options);
CheckResult check_roundtrip(const CheckOptions& options, std::size_t trials);
CheckResult check_logdet(const CheckOptions& options, std::size_t trials);
CheckResult check_gradient(const CheckOptions& options, Mode mode);
CheckResult check_identity_init(const CheckOptions& options);

// One zero-net snac layer whose projections are set to the true per-channel
// mean and log-std of Gaussian input. Returns the worst of |mean| and
// |std - 1| over the coupled channels of the output, from n draws.
double mechanism_deviation(std::uint64_t seed, std::size_t channels, std::size_t n);

// The full built-in suite, in a fixed order.
std::vector<CheckResult> run_checks(const CheckOptions& options);

}  // namespace snac::verify
