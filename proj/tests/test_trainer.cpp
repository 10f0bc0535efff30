#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "snac/io.hpp"
#include "snac/trainer.hpp"

using namespace snac;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.arch.channels = 2;
  c.arch.layers = 2;
  c.arch.hidden = 16;
  c.arch.embed_dim = 4;
  c.data.channels = 2;
  c.data.embed_dim = 4;
  c.data.n_seen = 3;
  c.data.n_unseen = 2;
  c.data.samples_per_condition = 32;
  c.batch_size = 16;
  c.steps = 40;
  c.eval_every = 10;
  c.seed = 3;
  return c;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("log_likelihood of the identity-init stack at the origin") {
  FlowArch arch;
  arch.channels = 2;
  const auto stack = FlowStack::from_params(arch, init_params(0, arch));
  const Tensor g = Tensor::zeros({16});
  CHECK(std::abs(log_likelihood(stack, Tensor::matrix(1, 2, {0, 0}), g) - -1.8378770664093453) < 1e-12);
}

TEST_CASE("nll_loss: batch of one, duplicates, batched path agrees with per-sample path") {
  FlowArch arch;
  arch.channels = 2;
  arch.layers = 2;
  arch.hidden = 8;
  arch.embed_dim = 4;
  DatasetSpec ds;
  ds.samples_per_condition = 4;
  ds.embed_dim = 4;
  const Dataset data = make_dataset(ds);
  const std::vector<std::size_t> idx{0, 5, 9, 20};

  for (Mode mode : {Mode::snac, Mode::baseline}) {
    arch.mode = mode;
    const auto stack = FlowStack::from_params(arch, perturb_params(init_params(3, arch), 3, 0.3));
    std::vector<Example> ex;
    double acc = 0.0;
    for (auto i : idx) {
      const auto& s = data.samples[i];
      ex.push_back({s.x, data.embeddings[static_cast<std::size_t>(s.cond_id)]});
      const auto fwd = flow_forward(stack, ex.back().x, ex.back().g);
      double lp = fwd.logdet;
      for (double z : fwd.y.data()) lp += -0.5 * z * z - 0.5 * std::log(2 * std::numbers::pi);
      acc -= lp;
    }
    const double loss = nll_loss(stack, gather(data, idx));
    CHECK(std::abs(loss - acc / 4.0) < 1e-13);
    CHECK(std::abs(nll_loss(stack, std::span<const Example>(ex)) - loss) < 1e-13);
    CHECK(std::abs(nll_loss(stack, std::span<const Example>(ex.data(), 1)) +
                   log_likelihood(stack, ex[0].x, ex[0].g)) < 1e-13);

    std::vector<Example> doubled = ex;
    doubled.insert(doubled.end(), ex.begin(), ex.end());
    CHECK(std::abs(nll_loss(stack, std::span<const Example>(doubled)) - loss) < 1e-13);

    const double golden = mode == Mode::snac ? 5.2849411041087855 : 3.3832160539103802;
    CHECK(std::abs(loss - golden) < 1e-12);

    const auto lls = log_likelihood_batch(stack, gather(data, idx));
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(lls[k] - log_likelihood(stack, ex[k].x, ex[k].g)) < 1e-13);
  }
}

TEST_CASE("nll_objective matches nll_loss and its gradient passes the finite-difference check") {
  for (Mode mode : {Mode::snac, Mode::baseline}) {
    FlowArch arch;
    arch.mode = mode;
    arch.channels = 3;
    arch.layers = 2;
    arch.hidden = 8;
    arch.embed_dim = 3;
    ParamSet params = perturb_params(init_params(1, arch), 2, 0.2);
    const Batch batch{Tensor::matrix(4, 3, {0.1, -0.4, 1.2, 0.7, 0.3, -1.1, 0.0, 2.0, 0.5, -0.3, 0.2, 0.9}),
                      Tensor::matrix(2, 3, {0.5, -0.5, 0.1, 1.0, 0.2, -0.3}), 2};
    const auto obj = nll_objective(arch, batch);
    CHECK(std::abs(evaluate(obj, params) - nll_loss(FlowStack::from_params(arch, params), batch)) < 1e-12);
    CHECK(finite_diff_check(obj, params, 1e-5) < 1e-4);
  }
}

TEST_CASE("adam_step") {
  ParamSet params{{"p", Tensor::vector({1.0, -2.0, 0.5})}};
  AdamState state;
  adam_step(params, {{"p", Tensor::vector({3.0, -0.01, 0.0})}}, state, 0.1);
  CHECK(state.step == 1);
  CHECK(std::abs(params.at("p")[0] - 0.9) < 1e-8);
  CHECK(std::abs(params.at("p")[1] - -1.9) < 1e-5);
  CHECK(params.at("p")[2] == 0.5);

  ParamSet frozen{{"w", Tensor::vector({4.0, 5.0})}};
  AdamState fs;
  for (int i = 0; i < 3; ++i) adam_step(frozen, {{"w", Tensor::zeros({2})}}, fs, 1e-3);
  CHECK(frozen.at("w") == Tensor::vector({4.0, 5.0}));

  // three steps on 0.5 * c * p^2, iterated by hand
  const double c[] = {2.0, 0.5};
  ParamSet q{{"q", Tensor::vector({1.0, -3.0})}};
  AdamState qs;
  double p[] = {1.0, -3.0}, m[] = {0, 0}, v[] = {0, 0};
  for (int t = 1; t <= 3; ++t) {
    adam_step(q, {{"q", Tensor::vector({c[0] * q.at("q")[0], c[1] * q.at("q")[1]})}}, qs, 0.05);
    for (int i = 0; i < 2; ++i) {
      const double g = c[i] * p[i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      p[i] -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  CHECK(std::abs(q.at("q")[0] - p[0]) < 1e-14);
  CHECK(std::abs(q.at("q")[1] - p[1]) < 1e-14);

  CHECK_THROWS(adam_step(q, {{"other", Tensor::vector({1.0})}}, qs, 0.1));
}

TEST_CASE("steps = 0 returns the identity-init model") {
  TrainConfig c = small_config();
  c.steps = 0;
  const Dataset data = make_dataset(c.data);
  const Checkpoint ck = train(c, data);
  CHECK(ck.history.empty());
  CHECK(ck.params == init_params(c.seed, c.arch));
  const auto stack = FlowStack::from_params(c.arch, ck.params);
  const auto seen = data.sample_indices(Split::seen);
  double expected = 0.0;
  for (auto i : seen)
    for (double x : data.samples[i].x.data()) expected += 0.5 * x * x + 0.5 * std::log(2 * std::numbers::pi);
  CHECK(std::abs(nll_loss(stack, gather(data, seen)) - expected / seen.size()) < 1e-10);
}

TEST_CASE("training is deterministic, logs unseen evals, and resumes bit-for-bit") {
  const TrainConfig c = small_config();
  const Dataset data = make_dataset(c.data);
  std::vector<double> observed;
  const Checkpoint a = train(c, data, nullptr, [&](std::uint64_t, double loss) { observed.push_back(loss); });
  const Checkpoint b = train(c, data);
  CHECK(a.history == b.history);
  CHECK(a.params == b.params);
  CHECK(observed == a.history);
  REQUIRE(a.history.size() == 40);
  REQUIRE(a.evals.size() == 4);
  CHECK(a.evals[3].step == 40);

  TrainConfig half = c;
  half.steps = 15;
  const Checkpoint first = train(half, data);
  const auto path = std::filesystem::temp_directory_path() / "snac_trainer_resume.json";
  save_checkpoint(path, first);
  const Checkpoint loaded = load_checkpoint(path);
  std::filesystem::remove(path);
  const Checkpoint resumed = train(c, data, &loaded);
  CHECK(resumed.history == a.history);
  CHECK(resumed.params == a.params);
  CHECK(resumed.evals.size() == a.evals.size());
  for (std::size_t i = 0; i < a.evals.size(); ++i) CHECK(resumed.evals[i].unseen_nll == a.evals[i].unseen_nll);

  TrainConfig other = c;
  other.seed = 4;
  CHECK(train(other, data).history != a.history);
}

TEST_CASE("loss trends down on the default config") {
  TrainConfig c;
  const Dataset data = make_dataset(c.data);
  const Checkpoint ck = train(c, data);
  REQUIRE(ck.history.size() == c.steps);
  const std::vector<double> head(ck.history.begin(), ck.history.begin() + 101);
  const std::vector<double> tail(ck.history.end() - 101, ck.history.end());
  CHECK(median(head) > median(tail));
}

TEST_CASE("divergence aborts with the step and last finite loss") {
  TrainConfig c = small_config();
  c.learning_rate = 1e4;
  const Dataset data = make_dataset(c.data);
  try {
    train(c, data);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() >= 1);
    CHECK(std::isfinite(e.last_finite_loss()));
  }
}

TEST_CASE("config validation") {
  TrainConfig c = small_config();
  c.data.channels = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
