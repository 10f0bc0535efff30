#include "snac/verify.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "snac/rng.hpp"

namespace snac::verify {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_data()) v = rng.uniform(lo, hi);
  return t;
}

template <class F>
CheckResult timed(std::string name, double threshold, F&& measure) {
  const auto start = std::chrono::steady_clock::now();
  const double value = measure();
  const auto stop = std::chrono::steady_clock::now();
  return {std::move(name), std::isfinite(value) && value < threshold, value, threshold,
          std::chrono::duration<double>(stop - start).count()};
}

}  // namespace

double numerical_log_abs_det(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                             double step) {
  const std::size_t n = x.numel();
  Eigen::MatrixXd jac(n, n);
  Tensor probe = x;
  for (std::size_t col = 0; col < n; ++col) {
    const double saved = probe[col];
    probe[col] = saved + step;
    const Tensor up = f(probe);
    probe[col] = saved - step;
    const Tensor down = f(probe);
    probe[col] = saved;
    for (std::size_t row = 0; row < n; ++row) jac(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = (up[row] - down[row]) / (2.0 * step);
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lu.matrixLU().rows(); ++i) acc += std::log(std::abs(lu.matrixLU()(i, i)));
  return acc;
}

Instance random_instance(std::uint64_t seed, const InstanceShape& s) {
  FlowArch arch;
  arch.mode = s.mode;
  arch.channels = s.channels;
  arch.embed_dim = s.embed_dim;
  arch.hidden = s.hidden;
  arch.layers = s.layers;
  ParamSet params = perturb_params(init_params(seed, arch), derive_seed(seed, 1), s.amplitude);
  Rng rng(derive_seed(seed, 2));
  Tensor x = random_tensor(rng, {s.frames, s.channels}, -2.0, 2.0);
  Tensor g = random_tensor(rng, {s.embed_dim}, -1.0, 1.0);
  return {FlowStack::from_params(arch, params), std::move(params), std::move(x), std::move(g)};
}

GradientProblem gradient_problem(std::uint64_t seed, Mode mode, std::size_t channels,
                                 std::size_t layers) {
  FlowArch arch;
  arch.mode = mode;
  arch.channels = channels;
  arch.layers = layers;
  arch.embed_dim = 8;
  arch.hidden = 16;
  ParamSet params = perturb_params(init_params(seed, arch), derive_seed(seed, 1), 0.2);
  Rng rng(derive_seed(seed, 3));
  constexpr std::size_t kSamples = 4, kFrames = 2;
  Batch batch{random_tensor(rng, {kSamples * kFrames, channels}, -2.0, 2.0),
              random_tensor(rng, {kSamples, arch.embed_dim}, -1.0, 1.0), kFrames};
  return {arch, std::move(params), std::move(batch)};
}

CheckResult check_sn_sdn(const CheckOptions& options) {
  return timed("sn/sdn inverse pair", 1e-12, [&] {
    Rng rng(derive_seed(options.seed, 10));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t k = 1 + rng.index(8), T = 1 + rng.index(4);
      const Tensor x = random_tensor(rng, {T, k}, -3.0, 3.0);
      const Tensor m = random_tensor(rng, {k}, -2.0, 2.0);
      const Tensor v = random_tensor(rng, {k}, -1.5, 1.5);
      worst = std::max(worst, max_abs_diff(sdn(sn(x, m, v), m, v), x));
      worst = std::max(worst, max_abs_diff(sn(sdn(x, m, v), m, v), x));
    }
    return worst;
  });
}

CheckResult check_roundtrip(const CheckOptions& options, std::size_t trials) {
  return timed("flow round-trip invertibility", 1e-8, [&] {
    constexpr std::size_t kChannels[] = {2, 4, 8}, kFrames[] = {1, 3}, kLayers[] = {1, 4};
    Rng pick(derive_seed(options.seed, 11));
    double worst = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      InstanceShape shape;
      shape.mode = trial % 2 == 0 ? Mode::snac : Mode::baseline;
      shape.channels = kChannels[pick.index(3)];
      shape.frames = kFrames[pick.index(2)];
      shape.layers = kLayers[pick.index(2)];
      const auto inst = random_instance(derive_seed(options.seed, 1000 + trial), shape);
      const auto fwd = flow_forward(inst.stack, inst.x, inst.g);
      worst = std::max(worst, max_abs_diff(flow_inverse(inst.stack, fwd.y, inst.g), inst.x));
    }
    return worst;
  });
}

CheckResult check_logdet(const CheckOptions& options, std::size_t trials) {
  return timed("log-det vs numerical Jacobian", 1e-5, [&] {
    struct Dims { std::size_t channels, frames; };
    constexpr Dims kDims[] = {{2, 1}, {2, 3}, {3, 2}, {4, 1}, {4, 3}, {6, 2}, {8, 1}, {12, 1}};
    Rng pick(derive_seed(options.seed, 12));
    double worst = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      const Dims dims = kDims[pick.index(std::size(kDims))];
      InstanceShape shape;
      shape.mode = trial % 2 == 0 ? Mode::snac : Mode::baseline;
      shape.channels = dims.channels;
      shape.frames = dims.frames;
      shape.layers = 1 + pick.index(4);
      const auto inst = random_instance(derive_seed(options.seed, 5000 + trial), shape);
      double analytic = flow_forward(inst.stack, inst.x, inst.g).logdet;
      if (options.flip_logdet_sign) analytic = -analytic;
      const double numeric = numerical_log_abs_det(
          [&](const Tensor& x) { return flow_forward(inst.stack, x, inst.g).y; }, inst.x);
      worst = std::max(worst, std::abs(analytic - numeric));
    }
    return worst;
  });
}

CheckResult check_gradient(const CheckOptions& options, Mode mode) {
  return timed("NLL gradient vs finite differences (" + to_string(mode) + ")", 1e-4, [&] {
    const auto problem = gradient_problem(options.seed, mode, 4, 2);
    return finite_diff_check(nll_objective(problem.arch, problem.batch), problem.params, 1e-5);
  });
}

CheckResult check_identity_init(const CheckOptions& options) {
  return timed("identity at init", 1e-10, [&] {
    double worst = 0.0;
    for (Mode mode : {Mode::baseline, Mode::snac}) {
      auto problem = gradient_problem(options.seed, mode, 4, 3);
      const auto stack = FlowStack::from_params(problem.arch, init_params(options.seed, problem.arch));
      const auto fwd = flow_forward_batch(stack, problem.batch.x, problem.batch.g, problem.batch.frames);
      for (double ld : fwd.logdet) worst = std::max(worst, std::abs(ld) > 0.0 ? 1.0 : 0.0);
      // Three layers means an odd number of flips.
      worst = std::max(worst, max_abs_diff(fwd.z, reverse_channels(problem.batch.x)));
      double expected = 0.0;
      for (double x : problem.batch.x.data()) expected += 0.5 * x * x + 0.91893853320467274178;
      expected /= static_cast<double>(problem.batch.size());
      worst = std::max(worst, std::abs(nll_loss(stack, problem.batch) - expected));
    }
    return worst;
  });
}

double mechanism_deviation(std::uint64_t seed, std::size_t channels, std::size_t n) {
  FlowArch arch;
  arch.mode = Mode::snac;
  arch.channels = channels;
  arch.layers = 1;
  ParamSet params = init_params(seed, arch);
  Rng rng(derive_seed(seed, 20));
  Tensor mu = random_tensor(rng, {channels}, -2.0, 2.0);
  Tensor log_sigma = random_tensor(rng, {channels}, -1.0, 1.0);
  params.at("layer00.proj.mean_b") = mu;
  params.at("layer00.proj.logstd_b") = log_sigma;
  const auto stack = FlowStack::from_params(arch, params);

  Tensor x = Tensor::zeros({n, channels});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < channels; ++j)
      x.at(r, j) = rng.normal() * std::exp(log_sigma[j]) + mu[j];
  const Tensor g = random_tensor(rng, {arch.embed_dim}, -1.0, 1.0);
  const Tensor y = coupling_forward(stack.layers[0], x, g).y;

  double worst = 0.0;
  for (std::size_t j = arch.identity_channels(); j < channels; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += y.at(r, j);
    mean /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) sq += (y.at(r, j) - mean) * (y.at(r, j) - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    worst = std::max({worst, std::abs(mean), std::abs(sd - 1.0)});
  }
  return worst;
}

std::vector<CheckResult> run_checks(const CheckOptions& options) {
  return {check_sn_sdn(options),
          check_roundtrip(options, 1000),
          check_logdet(options, 200),
          check_gradient(options, Mode::baseline),
          check_gradient(options, Mode::snac),
          check_identity_init(options)};
}

}  // namespace snac::verify
