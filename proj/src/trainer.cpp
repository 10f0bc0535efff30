#include "snac/trainer.hpp"

#include <cmath>

#include "snac/detail/flow_math.hpp"
#include "snac/rng.hpp"

namespace snac {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

// Stream id for the minibatch sampler, kept apart from init streams.
constexpr std::uint64_t kSamplerStream = 0xBA7C4ULL;

double prior_logpdf_sum(std::span<const double> z, std::size_t begin, std::size_t end) {
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += -0.5 * z[i] * z[i] - kHalfLog2Pi;
  return acc;
}

double mean_unseen_nll(const FlowStack& stack, const Dataset& data,
                       const std::vector<std::size_t>& unseen) {
  const auto ll = log_likelihood_batch(stack, gather(data, unseen));
  double acc = 0.0;
  for (double v : ll) acc -= v;
  return acc / static_cast<double>(ll.size());
}

}  // namespace

void TrainConfig::validate() const {
  arch.validate();
  data.validate();
  if (arch.channels != data.channels)
    throw ConfigError("model.D (" + std::to_string(arch.channels) + ") must equal dataset.D (" +
                      std::to_string(data.channels) + ")");
  if (arch.embed_dim != data.embed_dim)
    throw ConfigError("model.E must match the dataset embedding dimension");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("train.learning_rate: must be > 0");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
}

DivergenceError::DivergenceError(std::uint64_t step, double last_finite, const std::string& why)
    : std::runtime_error("training diverged at step " + std::to_string(step) +
                         " (last finite loss " + std::to_string(last_finite) + "): " + why),
      step_(step),
      last_finite_(last_finite) {}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(kAdamBeta1, t);
  const double correct2 = 1.0 - std::pow(kAdamBeta2, t);
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    if (g.shape() != p.shape())
      throw ShapeError("adam_step: gradient for '" + name + "' has shape " + to_string(g.shape()));
    auto& m = state.first_moment.try_emplace(name, Tensor::zeros(p.shape())).first->second;
    auto& v = state.second_moment.try_emplace(name, Tensor::zeros(p.shape())).first->second;
    auto pd = p.mutable_data();
    auto md = m.mutable_data();
    auto vd = v.mutable_data();
    for (std::size_t i = 0; i < pd.size(); ++i) {
      md[i] = kAdamBeta1 * md[i] + (1.0 - kAdamBeta1) * g[i];
      vd[i] = kAdamBeta2 * vd[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      const double m_hat = md[i] / correct1;
      const double v_hat = vd[i] / correct2;
      pd[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
    }
  }
}

Batch gather(const Dataset& data, std::span<const std::size_t> indices) {
  const std::size_t T = data.spec.frames, D = data.spec.channels, E = data.spec.embed_dim;
  std::vector<double> x, g;
  x.reserve(indices.size() * T * D);
  g.reserve(indices.size() * E);
  for (std::size_t i : indices) {
    const Sample& s = data.samples.at(i);
    x.insert(x.end(), s.x.data().begin(), s.x.data().end());
    const Tensor& emb = data.embeddings.at(static_cast<std::size_t>(s.cond_id));
    g.insert(g.end(), emb.data().begin(), emb.data().end());
  }
  return {Tensor::matrix(indices.size() * T, D, std::move(x)),
          Tensor::matrix(indices.size(), E, std::move(g)), T};
}

Batch gather(std::span<const Example> examples) {
  if (examples.empty()) throw ShapeError("gather: empty batch");
  const std::size_t T = examples[0].x.rows(), D = examples[0].x.cols(), E = examples[0].g.numel();
  std::vector<double> x, g;
  for (const auto& ex : examples) {
    if (ex.x.rows() != T || ex.x.cols() != D || ex.g.numel() != E)
      throw ShapeError("gather: inconsistent example shapes");
    x.insert(x.end(), ex.x.data().begin(), ex.x.data().end());
    g.insert(g.end(), ex.g.data().begin(), ex.g.data().end());
  }
  return {Tensor::matrix(examples.size() * T, D, std::move(x)),
          Tensor::matrix(examples.size(), E, std::move(g)), T};
}

double log_likelihood(const FlowStack& stack, const Tensor& x, const Tensor& g) {
  const auto [z, logdet] = flow_forward(stack, x, g);
  const double ll = prior_logpdf_sum(z.data(), 0, z.numel()) + logdet;
  if (!std::isfinite(ll)) throw NonFiniteError("log_likelihood", "");
  return ll;
}

std::vector<double> log_likelihood_batch(const FlowStack& stack, const Batch& batch) {
  const auto fwd = flow_forward_batch(stack, batch.x, batch.g, batch.frames);
  const std::size_t per_sample = batch.frames * fwd.z.cols();
  std::vector<double> out(batch.size());
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b] = prior_logpdf_sum(fwd.z.data(), b * per_sample, (b + 1) * per_sample) + fwd.logdet[b];
    if (!std::isfinite(out[b])) throw NonFiniteError("log_likelihood", "sample " + std::to_string(b));
  }
  return out;
}

double nll_loss(const FlowStack& stack, const Batch& batch) {
  const auto ll = log_likelihood_batch(stack, batch);
  double acc = 0.0;
  for (double v : ll) acc += v;
  return -acc / static_cast<double>(ll.size());
}

double nll_loss(const FlowStack& stack, std::span<const Example> batch) {
  return nll_loss(stack, gather(batch));
}

LossFn nll_objective(const FlowArch& arch, const Batch& batch) {
  return [arch, batch](ad::Tape& tape, const ParamVars& params) {
    std::vector<detail::BasicCouplingLayer<ad::Var>> layers;
    for (std::size_t k = 0; k < arch.layers; ++k)
      layers.push_back(detail::layer_from<ad::Var>(arch, k, params));
    const ad::Var x = tape.constant(batch.x);
    const ad::Var g = tape.constant(batch.g);
    auto pass = detail::flow_forward_rows(layers, x, g, batch.frames);
    const double samples = static_cast<double>(batch.size());
    const double dims = static_cast<double>(batch.x.numel()) / samples;
    ad::Var energy = sub(scale(sum(mul(pass.out, pass.out)), 0.5), sum(pass.logdet_rows));
    return add_scalar(scale(energy, 1.0 / samples), dims * kHalfLog2Pi);
  };
}

Checkpoint initial_checkpoint(const TrainConfig& config) {
  config.validate();
  Checkpoint ck;
  ck.config = config;
  ck.params = init_params(config.seed, config.arch);
  ck.rng_state = Rng(derive_seed(config.seed, kSamplerStream)).state();
  return ck;
}

Checkpoint train(const TrainConfig& config, const Dataset& data, const Checkpoint* resume,
                 const StepObserver& observer) {
  config.validate();
  Checkpoint ck = resume ? *resume : initial_checkpoint(config);
  if (resume && !(resume->config.arch == config.arch))
    throw ConfigError("train: resume checkpoint architecture differs from config");
  ck.config = config;

  const auto seen = data.sample_indices(Split::seen);
  const auto unseen = data.sample_indices(Split::unseen);
  if (seen.empty()) throw ConfigError("train: dataset has no seen-condition samples");

  Rng rng;
  rng.restore(ck.rng_state);
  std::vector<std::size_t> picks(config.batch_size);
  double last_finite = ck.history.empty() ? NAN : ck.history.back();

  while (ck.optimizer.step < config.steps) {
    const std::uint64_t step = ck.optimizer.step;
    for (auto& p : picks) p = seen[rng.index(seen.size())];
    const Batch batch = gather(data, picks);

    double loss = 0.0;
    ParamSet grads;
    try {
      std::tie(loss, grads) = value_and_gradient(nll_objective(config.arch, batch), ck.params);
    } catch (const NonFiniteError& e) {
      throw DivergenceError(step, last_finite, e.what());
    }
    if (!std::isfinite(loss)) throw DivergenceError(step, last_finite, "loss is not finite");
    for (const auto& [name, g] : grads)
      if (!g.all_finite()) throw DivergenceError(step, last_finite, "gradient of " + name + " is not finite");

    adam_step(ck.params, grads, ck.optimizer, config.learning_rate);
    ck.history.push_back(loss);
    last_finite = loss;
    if (observer) observer(step, loss);

    if (config.eval_every != 0 && ck.optimizer.step % config.eval_every == 0 && !unseen.empty()) {
      const auto stack = FlowStack::from_params(config.arch, ck.params);
      ck.evals.push_back({ck.optimizer.step, mean_unseen_nll(stack, data, unseen)});
    }
  }
  ck.rng_state = rng.state();
  return ck;
}

}  // namespace snac
