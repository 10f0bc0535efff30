#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "snac/autodiff.hpp"
#include "snac/condnet.hpp"
#include "snac/flow.hpp"
#include "snac/synthdata.hpp"

namespace snac {

struct TrainConfig {
  FlowArch arch;
  DatasetSpec data;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;  // 0 disables periodic unseen evaluation

  void validate() const;
};

struct AdamState {
  std::uint64_t step = 0;
  ParamSet first_moment;
  ParamSet second_moment;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

// Bias-corrected Adam update of `params` in place.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr);

struct EvalPoint {
  std::uint64_t step = 0;
  double unseen_nll = 0.0;  // nats per sample
};

inline constexpr int kCheckpointFormatVersion = 1;

// Everything needed to continue training bit-for-bit.
struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  TrainConfig config;
  ParamSet params;
  AdamState optimizer;
  std::string rng_state;
  std::vector<double> history;  // training objective per completed step
  std::vector<EvalPoint> evals;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::uint64_t step, double last_finite, const std::string& why);
  std::uint64_t step() const noexcept { return step_; }
  double last_finite_loss() const noexcept { return last_finite_; }

 private:
  std::uint64_t step_;
  double last_finite_;
};

// One observation with its condition embedding.
struct Example {
  Tensor x;  // T x D
  Tensor g;  // [E]
};

// Rows (B*T) x D and embeddings B x E for a selection of dataset samples.
struct Batch {
  Tensor x;
  Tensor g;
  std::size_t frames = 1;
  std::size_t size() const { return g.rows(); }
};
Batch gather(const Dataset& data, std::span<const std::size_t> indices);
Batch gather(std::span<const Example> examples);

// log N(z; 0, I) + logdet with (z, logdet) = f(x; g).
double log_likelihood(const FlowStack& stack, const Tensor& x, const Tensor& g);
std::vector<double> log_likelihood_batch(const FlowStack& stack, const Batch& batch);

// -mean log_likelihood over the batch.
double nll_loss(const FlowStack& stack, std::span<const Example> batch);
double nll_loss(const FlowStack& stack, const Batch& batch);

// The same objective recorded on a tape, for gradients.
LossFn nll_objective(const FlowArch& arch, const Batch& batch);

Checkpoint initial_checkpoint(const TrainConfig& config);

using StepObserver = std::function<void(std::uint64_t step, double loss)>;

// Adam on minibatches drawn (with replacement) from seen-condition samples
// until config.steps updates have been made. With `resume`, continues from
// its state. Throws DivergenceError on a non-finite loss or gradient.
Checkpoint train(const TrainConfig& config, const Dataset& data, const Checkpoint* resume = nullptr,
                 const StepObserver& observer = {});

}  // namespace snac
