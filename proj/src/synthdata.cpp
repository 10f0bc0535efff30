#include "snac/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "snac/rng.hpp"

namespace snac {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

struct Mixture2d {
  std::array<std::array<double, 2>, 8> centers;
  double std;
};

Mixture2d make_rings() {
  Mixture2d m{{}, 0.2};
  for (int k = 0; k < 4; ++k) {
    const double inner = k * std::numbers::pi / 2.0;
    const double outer = std::numbers::pi / 4.0 + inner;
    m.centers[k] = {std::cos(inner), std::sin(inner)};
    m.centers[k + 4] = {2.0 * std::cos(outer), 2.0 * std::sin(outer)};
  }
  return m;
}

Mixture2d make_moons() {
  Mixture2d m{{}, 0.15};
  for (int k = 0; k < 4; ++k) {
    const double theta = k * std::numbers::pi / 3.0;
    m.centers[k] = {std::cos(theta) - 0.5, std::sin(theta) - 0.25};
    m.centers[k + 4] = {0.5 - std::cos(theta), 0.25 - std::sin(theta)};
  }
  return m;
}

const Mixture2d& mixture(BaseShape shape) {
  static const Mixture2d rings = make_rings();
  static const Mixture2d moons = make_moons();
  return shape == BaseShape::two_rings ? rings : moons;
}

double std_normal_logpdf(double u) { return -0.5 * u * u - kHalfLog2Pi; }

double mixture_logpdf(double u0, double u1, const Mixture2d& m) {
  std::array<double, 8> terms{};
  const double var = m.std * m.std;
  for (std::size_t k = 0; k < 8; ++k) {
    const double d0 = u0 - m.centers[k][0], d1 = u1 - m.centers[k][1];
    terms[k] = std::log(1.0 / 8.0) - (d0 * d0 + d1 * d1) / (2.0 * var) -
               2.0 * kHalfLog2Pi - 2.0 * std::log(m.std);
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc);
}

}  // namespace

std::string to_string(BaseShape shape) {
  switch (shape) {
    case BaseShape::gaussian: return "gaussian";
    case BaseShape::two_rings: return "two_rings";
    case BaseShape::two_moons_2d: return "two_moons_2d";
  }
  return "gaussian";
}

BaseShape parse_base_shape(const std::string& text) {
  if (text == "gaussian") return BaseShape::gaussian;
  if (text == "two_rings") return BaseShape::two_rings;
  if (text == "two_moons_2d") return BaseShape::two_moons_2d;
  throw ConfigError("dataset.base_shape: unknown shape '" + text + "'");
}

std::string to_string(Split split) { return split == Split::seen ? "seen" : "unseen"; }

Split parse_split(const std::string& text) {
  if (text == "seen") return Split::seen;
  if (text == "unseen") return Split::unseen;
  throw ConfigError("split: expected 'seen' or 'unseen', got '" + text + "'");
}

void DatasetSpec::validate() const {
  if (channels < 2) throw ConfigError("dataset.D: need at least 2 channels");
  if (base == BaseShape::two_moons_2d && channels != 2)
    throw ConfigError("dataset.base_shape: two_moons_2d requires D = 2");
  if (frames < 1) throw ConfigError("dataset.T: need at least one frame");
  if (n_seen < 1) throw ConfigError("dataset.n_seen: need at least one seen condition");
  if (samples_per_condition < 1)
    throw ConfigError("dataset.samples_per_condition: must be >= 1");
  if (embed_dim < 1) throw ConfigError("model.E: embedding dimension must be >= 1");
  if (!(embed_noise >= 0.0) || !(unseen_embed_noise >= 0.0))
    throw ConfigError("dataset.embed_noise: must be >= 0");
}

std::vector<std::size_t> Dataset::sample_indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (conditions[static_cast<std::size_t>(samples[i].cond_id)].split == split) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::sample_indices(int cond_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].cond_id == cond_id) out.push_back(i);
  return out;
}

double base_logpdf(std::span<const double> u, BaseShape shape) {
  double acc = 0.0;
  std::size_t first = 0;
  if (shape != BaseShape::gaussian) {
    acc += mixture_logpdf(u[0], u[1], mixture(shape));
    first = 2;
  }
  for (std::size_t j = first; j < u.size(); ++j) acc += std_normal_logpdf(u[j]);
  return acc;
}

void base_sample(std::span<double> out, BaseShape shape, Rng& rng) {
  std::size_t first = 0;
  if (shape != BaseShape::gaussian) {
    const Mixture2d& m = mixture(shape);
    const auto& c = m.centers[rng.index(8)];
    out[0] = c[0] + m.std * rng.normal();
    out[1] = c[1] + m.std * rng.normal();
    first = 2;
  }
  for (std::size_t j = first; j < out.size(); ++j) out[j] = rng.normal();
}

Dataset make_dataset(const DatasetSpec& spec) {
  spec.validate();
  const std::size_t D = spec.channels, T = spec.frames;
  Dataset data{spec, {}, {}, {}};
  for (std::size_t c = 0; c < spec.conditions(); ++c) {
    Rng rng(derive_seed(spec.seed, c));
    std::vector<double> mu(D), ls(D);
    for (double& x : mu) x = rng.uniform(-2.0, 2.0);
    for (double& x : ls) x = rng.uniform(-1.0, 1.0);
    ConditionSpec cond{static_cast<int>(c), Tensor::vector(std::move(mu)),
                       Tensor::vector(std::move(ls)), c < spec.n_seen ? Split::seen : Split::unseen};
    for (std::size_t n = 0; n < spec.samples_per_condition; ++n) {
      std::vector<double> x(T * D);
      for (std::size_t t = 0; t < T; ++t) {
        std::span<double> frame(x.data() + t * D, D);
        base_sample(frame, spec.base, rng);
        for (std::size_t j = 0; j < D; ++j)
          frame[j] = frame[j] * std::exp(cond.log_sigma[j]) + cond.mu[j];
      }
      data.samples.push_back({cond.id, Tensor::matrix(T, D, std::move(x))});
    }
    const EmbedOptions opts{cond.split == Split::seen ? spec.embed_noise : spec.unseen_embed_noise,
                            spec.hard_embed};
    data.embeddings.push_back(embed_condition(cond, spec.embed_dim, spec.embed_seed, opts));
    data.conditions.push_back(std::move(cond));
  }
  return data;
}

Tensor embed_condition(const ConditionSpec& c, std::size_t embed_dim, std::uint64_t map_seed,
                       const EmbedOptions& options) {
  const std::size_t D = c.mu.numel();
  const std::size_t in = 2 * D;
  Rng map_rng(map_seed);
  std::vector<double> a(embed_dim * in);
  for (double& x : a) x = map_rng.normal();
  for (std::size_t i = 0; i < embed_dim; ++i) {
    double norm = 0.0;
    for (std::size_t j = 0; j < in; ++j) norm += a[i * in + j] * a[i * in + j];
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < in; ++j) a[i * in + j] /= norm;
  }
  std::vector<double> u(in);
  for (std::size_t j = 0; j < D; ++j) {
    u[j] = c.mu[j];
    u[D + j] = c.log_sigma[j];
  }
  Rng noise_rng(derive_seed(map_seed ^ 0x5EEDF00DULL, static_cast<std::uint64_t>(c.id)));
  std::vector<double> g(embed_dim);
  for (std::size_t i = 0; i < embed_dim; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < in; ++j) acc += a[i * in + j] * u[j];
    g[i] = (options.hard ? std::tanh(acc) : acc) + options.noise_std * noise_rng.normal();
  }
  return Tensor::vector(std::move(g));
}

double true_loglik(const Tensor& x, const ConditionSpec& c, BaseShape shape) {
  const std::size_t D = c.mu.numel();
  if (x.cols() != D)
    throw ShapeError("true_loglik: sample has " + std::to_string(x.cols()) +
                     " channels, condition has " + std::to_string(D));
  if (shape == BaseShape::two_moons_2d && D != 2)
    throw ConfigError("true_loglik: two_moons_2d requires D = 2");
  double log_sigma_sum = 0.0;
  for (std::size_t j = 0; j < D; ++j) log_sigma_sum += c.log_sigma[j];
  std::vector<double> u(D);
  double total = 0.0;
  for (std::size_t t = 0; t < x.rows(); ++t) {
    for (std::size_t j = 0; j < D; ++j) u[j] = (x.at(t, j) - c.mu[j]) / std::exp(c.log_sigma[j]);
    total += base_logpdf(u, shape) - log_sigma_sum;
  }
  return total;
}

double oracle_nll_per_dim(const Dataset& data, const std::vector<std::size_t>& indices) {
  if (indices.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i : indices) {
    const Sample& s = data.samples[i];
    acc -= true_loglik(s.x, data.conditions[static_cast<std::size_t>(s.cond_id)], data.spec.base);
  }
  const double dims = static_cast<double>(data.spec.frames * data.spec.channels);
  return acc / static_cast<double>(indices.size()) / dims;
}

}  // namespace snac
