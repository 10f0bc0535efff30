#include <doctest.h>

#include <cmath>

#include "snac/flow.hpp"
#include "snac/rng.hpp"
#include "snac/verify.hpp"

using namespace snac;

namespace {

FlowArch small_arch(Mode mode, std::size_t channels, std::size_t layers) {
  FlowArch arch;
  arch.mode = mode;
  arch.channels = channels;
  arch.embed_dim = 3;
  arch.hidden = 8;
  arch.layers = layers;
  return arch;
}

Tensor cols(const Tensor& x, std::size_t begin, std::size_t end) { return slice_channels(x, begin, end); }

Tensor slice_rows_for_test(const Tensor& x, std::size_t begin, std::size_t end) {
  std::vector<double> v(x.data().begin() + static_cast<std::ptrdiff_t>(begin * x.cols()),
                        x.data().begin() + static_cast<std::ptrdiff_t>(end * x.cols()));
  return Tensor::matrix(end - begin, x.cols(), std::move(v));
}

}  // namespace

TEST_CASE("sn and sdn examples") {
  const Tensor m = Tensor::vector({1.0}), v = Tensor::vector({std::log(2.0)});
  CHECK(std::abs(sn(Tensor::matrix(1, 1, {3.0}), m, v)[0] - 1.0) < 1e-15);
  CHECK(std::abs(sdn(Tensor::matrix(1, 1, {1.0}), m, v)[0] - 3.0) < 1e-15);

  Rng rng(3);
  std::vector<double> xs(12);
  for (double& x : xs) x = rng.uniform(-5, 5);
  const Tensor x = Tensor::matrix(4, 3, xs);
  const Tensor m3 = Tensor::vector({0.3, -1.2, 2.0}), v3 = Tensor::vector({-0.7, 0.1, 1.3});
  CHECK(max_abs_diff(sdn(sn(x, m3, v3), m3, v3), x) < 1e-12);
  // same statistics for every frame
  const Tensor y = sn(x, m3, v3);
  for (std::size_t t = 0; t < 4; ++t)
    CHECK(std::abs(y.at(t, 1) - (x.at(t, 1) + 1.2) / std::exp(0.1)) < 1e-15);
  CHECK_THROWS_AS(sn(x, Tensor::vector({1, 2}), v3), ShapeError);
}

TEST_CASE("flip") {
  CHECK(flip(Tensor::matrix(1, 3, {1, 2, 3})) == Tensor::matrix(1, 3, {3, 2, 1}));
  const Tensor x = Tensor::matrix(2, 4, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(flip(flip(x)) == x);
  CHECK(flip(Tensor::matrix(3, 1, {1, 2, 3})) == Tensor::matrix(3, 1, {1, 2, 3}));
}

TEST_CASE("snac layer worked example: zero nets, fixed projections") {
  FlowArch arch = small_arch(Mode::snac, 2, 1);
  ParamSet params = init_params(0, arch);
  params.at("layer00.proj.mean_b") = Tensor::vector({0.5, 1.0});
  params.at("layer00.proj.logstd_b") = Tensor::vector({0.0, std::log(2.0)});
  const auto stack = FlowStack::from_params(arch, params);
  const Tensor g = Tensor::vector({0.4, -0.2, 9.0});
  const auto fwd = coupling_forward(stack.layers[0], Tensor::matrix(1, 2, {1.0, 2.0}), g);
  CHECK(std::abs(fwd.y.at(0, 0) - 1.0) < 1e-15);
  CHECK(std::abs(fwd.y.at(0, 1) - 0.5) < 1e-15);
  CHECK(std::abs(fwd.logdet + std::log(2.0)) < 1e-15);
  CHECK(max_abs_diff(coupling_inverse(stack.layers[0], fwd.y, g), Tensor::matrix(1, 2, {1.0, 2.0})) < 1e-15);
}

TEST_CASE("snac layer golden, checked against an explicit composition") {
  FlowArch arch = small_arch(Mode::snac, 4, 1);
  const auto params = perturb_params(init_params(42, arch), 42, 0.5);
  const auto layer = FlowStack::from_params(arch, params).layers[0];
  const Tensor g = Tensor::vector({0.3, -0.7, 1.1});
  const Tensor x = Tensor::matrix(2, 4, {0.5, -1.0, 2.0, 0.1, 1.5, 0.25, -0.3, 0.8});

  const auto mv = project_mv(*layer.proj, g);
  const Tensor xn_id = sn(cols(x, 0, 2), cols(mv.mean.reshaped({1, 4}), 0, 2).reshaped({2}),
                          cols(mv.log_std.reshaped({1, 4}), 0, 2).reshaped({2}));
  const auto sb = scale_bias(layer.net, xn_id, std::nullopt, Mode::snac);
  double expected_logdet = 0.0;
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t j = 0; j < 2; ++j) {
      const double v = mv.log_std[2 + j];
      expected_logdet += sb.scale.at(t, j) - v;
    }

  const auto fwd = coupling_forward(layer, x, g);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t j = 0; j < 2; ++j) {
      const double m = mv.mean[2 + j], v = mv.log_std[2 + j];
      CHECK(std::abs(fwd.y.at(t, 2 + j) - ((x.at(t, 2 + j) - m) / std::exp(v) * std::exp(sb.scale.at(t, j)) +
                                           sb.bias.at(t, j))) < 1e-14);
      CHECK(fwd.y.at(t, j) == x.at(t, j));
    }
  CHECK(std::abs(fwd.logdet - expected_logdet) < 1e-14);

  const double golden_y[] = {0.5, -1, 0.81453927258972803, -0.56478617574485523,
                             1.5, 0.25, -0.4915878254129401, 0.55582123831858987};
  for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(fwd.y[i] - golden_y[i]) < 1e-14);
  CHECK(std::abs(fwd.logdet - -0.029637175114751946) < 1e-14);
}

TEST_CASE("snac with zero projections matches plain affine coupling") {
  FlowArch arch = small_arch(Mode::snac, 5, 1);
  ParamSet params = perturb_params(init_params(9, arch), 9, 0.4);
  for (const char* name : {"mean_w", "mean_b", "logstd_w", "logstd_b"})
    for (double& w : params.at(std::string("layer00.proj.") + name).mutable_data()) w = 0.0;
  const auto layer = FlowStack::from_params(arch, params).layers[0];
  Rng rng(1);
  std::vector<double> xs(15);
  for (double& v : xs) v = rng.uniform(-2, 2);
  const Tensor x = Tensor::matrix(3, 5, xs);
  const auto sb = scale_bias(layer.net, cols(x, 0, 2), std::nullopt, Mode::snac);
  const auto fwd = coupling_forward(layer, x, Tensor::vector({1, 2, 3}));
  const Tensor expected = concat_channels(cols(x, 0, 2), add(mul(cols(x, 2, 5), exp(sb.scale)), sb.bias));
  CHECK(max_abs_diff(fwd.y, expected) < 1e-14);
  CHECK(std::abs(fwd.logdet - sum(sb.scale).item()) < 1e-13);
}

TEST_CASE("baseline layer uses g") {
  FlowArch arch = small_arch(Mode::baseline, 4, 1);
  const auto layer = FlowStack::from_params(arch, perturb_params(init_params(2, arch), 2, 0.5)).layers[0];
  const Tensor x = Tensor::matrix(1, 4, {0.1, 0.2, 0.3, 0.4});
  const auto a = coupling_forward(layer, x, Tensor::vector({1, 0, 0}));
  const auto b = coupling_forward(layer, x, Tensor::vector({0, 1, 0}));
  CHECK(max_abs_diff(a.y, b.y) > 1e-6);
  CHECK(max_abs_diff(coupling_inverse(layer, a.y, Tensor::vector({1, 0, 0})), x) < 1e-13);
}

TEST_CASE("log-determinant matches the numerical Jacobian") {
  for (Mode mode : {Mode::baseline, Mode::snac})
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      verify::InstanceShape shape;
      shape.mode = mode;
      shape.channels = 3 + seed % 3;
      shape.frames = 1 + seed % 2;
      shape.layers = 3;
      const auto inst = verify::random_instance(seed, shape);
      const double analytic = flow_forward(inst.stack, inst.x, inst.g).logdet;
      const double numeric = verify::numerical_log_abs_det(
          [&](const Tensor& x) { return flow_forward(inst.stack, x, inst.g).y; }, inst.x);
      CHECK(std::abs(analytic - numeric) < 1e-5);
    }
}

TEST_CASE("numerical_log_abs_det on a linear map") {
  // diag(2, 3) then swap: |det| = 6
  const auto f = [](const Tensor& x) { return Tensor::vector({3 * x[1], 2 * x[0]}); };
  CHECK(std::abs(verify::numerical_log_abs_det(f, Tensor::vector({0.3, -0.2})) - std::log(6.0)) < 1e-9);
}

TEST_CASE("round trip, single and batched") {
  for (Mode mode : {Mode::baseline, Mode::snac}) {
    verify::InstanceShape shape;
    shape.mode = mode;
    shape.channels = 7;
    shape.frames = 3;
    shape.layers = 4;
    shape.amplitude = 0.5;
    const auto inst = verify::random_instance(11, shape);
    const auto fwd = flow_forward(inst.stack, inst.x, inst.g);
    CHECK(max_abs_diff(flow_inverse(inst.stack, fwd.y, inst.g), inst.x) < 1e-9);

    // batch: the same sample under its own g and a second g
    std::vector<double> xv(inst.x.data().begin(), inst.x.data().end());
    xv.insert(xv.end(), inst.x.data().begin(), inst.x.data().end());
    const Tensor xb = Tensor::matrix(6, 7, xv);
    const Tensor gb = Tensor::matrix(2, 4, {inst.g[0], inst.g[1], inst.g[2], inst.g[3], 0.5, 0.5, -0.5, 0.1});
    const auto batch = flow_forward_batch(inst.stack, xb, gb, 3);
    REQUIRE(batch.logdet.size() == 2);
    CHECK(std::abs(batch.logdet[0] - fwd.logdet) < 1e-12);
    CHECK(max_abs_diff(slice_rows_for_test(batch.z, 0, 3), fwd.y) < 1e-12);
    CHECK(max_abs_diff(flow_inverse_batch(inst.stack, batch.z, gb, 3), xb) < 1e-9);
  }
}

TEST_CASE("K = 0 is the identity and a zero-init stack is only flips") {
  FlowArch arch = small_arch(Mode::snac, 4, 0);
  const auto empty = FlowStack::from_params(arch, ParamSet{});
  const Tensor x = Tensor::matrix(2, 4, {1, 2, 3, 4, 5, 6, 7, 8});
  const auto fwd = flow_forward(empty, x, Tensor::vector({0, 0, 0}));
  CHECK(fwd.y == x);
  CHECK(fwd.logdet == 0.0);

  for (Mode mode : {Mode::baseline, Mode::snac}) {
    for (std::size_t k : {1u, 2u, 3u}) {
      arch = small_arch(mode, 4, k);
      const auto stack = FlowStack::from_params(arch, init_params(5, arch));
      const auto out = flow_forward(stack, x, Tensor::vector({0.3, 0.2, 0.1}));
      CHECK(out.y == (k % 2 == 1 ? flip(x) : x));
      CHECK(out.logdet == 0.0);
    }
  }
}

TEST_CASE("failures name the layer") {
  FlowArch arch = small_arch(Mode::snac, 2, 2);
  ParamSet params = init_params(0, arch);
  params.at("layer01.proj.logstd_b") = Tensor::vector({-800.0, -800.0});
  const auto stack = FlowStack::from_params(arch, params);
  try {
    flow_forward(stack, Tensor::matrix(1, 2, {1, 2}), Tensor::vector({0, 0, 0}));
    FAIL("expected LayerError");
  } catch (const LayerError& e) {
    CHECK(e.layer() == 1);
  }
  CHECK_THROWS_AS(flow_forward(stack, Tensor::matrix(1, 3, {1, 2, 3}), Tensor::vector({0, 0, 0})), std::exception);
}

TEST_CASE("snac layer standardizes the coupled channels") {
  CHECK(verify::mechanism_deviation(1, 4, 100000) < 0.02);
  CHECK(verify::mechanism_deviation(2, 3, 100000) < 0.02);
}
