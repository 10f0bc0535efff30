#include "snac/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "snac/io.hpp"
#include "snac/kernels.hpp"
#include "snac/rng.hpp"

namespace snac {

namespace {

Tensor sample_rows(const Dataset& data, const std::vector<std::size_t>& indices) {
  return gather(data, indices).x;
}

Tensor embeddings_repeated(const Tensor& g, std::size_t n) {
  return repeat_rows(g.reshaped({1, g.numel()}), n);
}

// Stream id offset so generation never shares a stream with dataset draws.
constexpr std::uint64_t kGenerationStream = 0x6E4E00ULL;

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

ChannelMoments channel_moments(const Tensor& rows) {
  const std::size_t n = rows.rows(), D = rows.cols();
  if (n == 0) throw ShapeError("channel_moments: no rows");
  std::vector<double> sums(D, 0.0);
  kernels::col_sum(rows.data().data(), sums.data(), n, D);
  ChannelMoments out{std::vector<double>(D), std::vector<double>(D, 0.0)};
  for (std::size_t j = 0; j < D; ++j) out.mean[j] = sums[j] / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < D; ++j) {
      const double c = rows.at(i, j) - out.mean[j];
      out.std[j] += c * c;
    }
  for (double& s : out.std) s = std::sqrt(s / static_cast<double>(n));
  return out;
}

std::vector<ChannelMoments> latent_stats(const FlowStack& stack, const Dataset& data) {
  std::vector<ChannelMoments> out;
  for (const auto& c : data.conditions) {
    const auto idx = data.sample_indices(c.id);
    const Batch batch = gather(data, idx);
    const auto fwd = flow_forward_batch(stack, batch.x, batch.g, batch.frames);
    out.push_back(channel_moments(fwd.z));
  }
  return out;
}

double nll_per_dim(const FlowStack& stack, const Dataset& data, Split split) {
  const auto idx = data.sample_indices(split);
  if (idx.empty()) return 0.0;
  const auto ll = log_likelihood_batch(stack, gather(data, idx));
  double acc = 0.0;
  for (double v : ll) acc -= v;
  return acc / static_cast<double>(ll.size()) /
         static_cast<double>(data.spec.frames * data.spec.channels);
}

double zero_shot_nll(const FlowStack& stack, const Dataset& data) {
  return nll_per_dim(stack, data, Split::unseen);
}

Tensor generate(const FlowStack& stack, const Tensor& g, std::size_t n, std::size_t frames,
                std::uint64_t seed) {
  const std::size_t D = stack.arch.channels;
  if (n == 0) return Tensor::zeros({0, D});
  Rng rng(seed);
  std::vector<double> z(n * frames * D);
  for (double& v : z) v = rng.normal();
  return flow_inverse_batch(stack, Tensor::matrix(n * frames, D, std::move(z)),
                            embeddings_repeated(g, n), frames);
}

double moment_distance(const Tensor& samples, const ConditionSpec& c) {
  const auto m = channel_moments(samples);
  const std::size_t D = m.mean.size();
  double dm = 0.0, ds = 0.0;
  for (std::size_t j = 0; j < D; ++j) {
    dm += (m.mean[j] - c.mu[j]) * (m.mean[j] - c.mu[j]);
    const double sd = m.std[j] - std::exp(c.log_sigma[j]);
    ds += sd * sd;
  }
  const double root_d = std::sqrt(static_cast<double>(D));
  return std::sqrt(dm) / root_d + std::sqrt(ds) / root_d;
}

double generation_fidelity(const FlowStack& stack, const ConditionSpec& c, const Tensor& g,
                           std::size_t n, std::size_t frames, std::uint64_t seed) {
  return moment_distance(generate(stack, g, n, frames, seed), c);
}

double mmd_rbf(const Tensor& a, const Tensor& b) {
  const std::size_t na = a.rows(), nb = b.rows(), D = a.cols();
  if (na < 2 || nb < 2 || b.cols() != D) throw ShapeError("mmd_rbf: need >= 2 rows of equal width");
  auto row = [&](std::size_t i) { return i < na ? &a.data()[i * D] : &b.data()[(i - na) * D]; };
  auto sqdist = [&](std::size_t i, std::size_t j) {
    const double *x = row(i), *y = row(j);
    double acc = 0.0;
    for (std::size_t k = 0; k < D; ++k) acc += (x[k] - y[k]) * (x[k] - y[k]);
    return acc;
  };
  const std::size_t n = na + nb;
  std::vector<double> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.push_back(sqdist(i, j));
  std::nth_element(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(pairs.size() / 2), pairs.end());
  const double bandwidth2 = std::max(pairs[pairs.size() / 2], 1e-12);
  auto k = [&](std::size_t i, std::size_t j) { return std::exp(-sqdist(i, j) / (2.0 * bandwidth2)); };

  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < na; ++j)
      if (i != j) kxx += k(i, j);
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      if (i != j) kyy += k(na + i, na + j);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) kxy += k(i, na + j);
  const double fa = static_cast<double>(na), fb = static_cast<double>(nb);
  return kxx / (fa * (fa - 1.0)) + kyy / (fb * (fb - 1.0)) - 2.0 * kxy / (fa * fb);
}

double roundtrip_error(const FlowStack& stack, const Dataset& data) {
  std::vector<std::size_t> all(data.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Batch batch = gather(data, all);
  const auto fwd = flow_forward_batch(stack, batch.x, batch.g, batch.frames);
  const Tensor back = flow_inverse_batch(stack, fwd.z, batch.g, batch.frames);
  return max_abs_diff(back, batch.x);
}

EvalReport evaluate(const FlowStack& stack, const TrainConfig& config, const Dataset& data,
                    const EvalOptions& options) {
  EvalReport r;
  r.mode = to_string(stack.arch.mode);
  r.config = config;
  const auto latents = latent_stats(stack, data);
  const double dims = static_cast<double>(data.spec.frames * data.spec.channels);
  double distance_sum = 0.0;
  std::size_t unseen_count = 0;
  for (const auto& c : data.conditions) {
    const auto idx = data.sample_indices(c.id);
    ConditionReport cr;
    cr.id = c.id;
    cr.split = c.split;
    cr.latent = latents[static_cast<std::size_t>(c.id)];
    const auto ll = log_likelihood_batch(stack, gather(data, idx));
    for (double v : ll) cr.nll -= v;
    cr.nll /= static_cast<double>(ll.size()) * dims;
    cr.oracle_nll = oracle_nll_per_dim(data, idx);
    if (c.split == Split::unseen) {
      const Tensor& g = data.embeddings[static_cast<std::size_t>(c.id)];
      const Tensor gen = generate(stack, g, options.generation_samples, data.spec.frames,
                                  derive_seed(options.seed + kGenerationStream, static_cast<std::uint64_t>(c.id)));
      cr.moment_distance = moment_distance(gen, c);
      distance_sum += *cr.moment_distance;
      ++unseen_count;
      if (options.mmd) {
        const std::size_t n = std::min({options.mmd_samples, gen.rows(), idx.size() * data.spec.frames});
        const Tensor truth = sample_rows(data, idx);
        if (n >= 2)
          cr.mmd = mmd_rbf(Tensor::matrix(n, truth.cols(), {truth.data().begin(), truth.data().begin() + static_cast<std::ptrdiff_t>(n * truth.cols())}),
                           Tensor::matrix(n, gen.cols(), {gen.data().begin(), gen.data().begin() + static_cast<std::ptrdiff_t>(n * gen.cols())}));
      }
    }
    r.conditions.push_back(std::move(cr));
  }
  r.seen_nll = nll_per_dim(stack, data, Split::seen);
  r.unseen_nll = nll_per_dim(stack, data, Split::unseen);
  r.oracle_seen_nll = oracle_nll_per_dim(data, data.sample_indices(Split::seen));
  r.oracle_unseen_nll = oracle_nll_per_dim(data, data.sample_indices(Split::unseen));
  r.mean_moment_distance = unseen_count ? distance_sum / static_cast<double>(unseen_count) : 0.0;
  r.roundtrip_error = roundtrip_error(stack, data);
  return r;
}

Json to_json(const EvalReport& r) {
  Json conds = Json::array();
  for (const auto& c : r.conditions) {
    Json j{{"id", c.id},
           {"split", to_string(c.split)},
           {"latent_mean", c.latent.mean},
           {"latent_std", c.latent.std},
           {"nll", c.nll},
           {"oracle_nll", c.oracle_nll}};
    if (c.moment_distance) j["moment_distance"] = *c.moment_distance;
    if (c.mmd) j["mmd"] = *c.mmd;
    conds.push_back(std::move(j));
  }
  return Json{{"mode", r.mode},
              {"config", to_json(r.config)},
              {"seen_nll", r.seen_nll},
              {"unseen_nll", r.unseen_nll},
              {"oracle_seen_nll", r.oracle_seen_nll},
              {"oracle_unseen_nll", r.oracle_unseen_nll},
              {"mean_moment_distance", r.mean_moment_distance},
              {"roundtrip_error", r.roundtrip_error},
              {"conditions", conds}};
}

std::vector<ComparisonRow> comparison_table(const std::vector<EvalReport>& reports,
                                            const Dataset& data, const EvalOptions& options) {
  std::vector<ComparisonRow> rows;
  const double oracle_unseen = oracle_nll_per_dim(data, data.sample_indices(Split::unseen));
  for (const auto& r : reports)
    rows.push_back({r.mode, r.seen_nll, r.unseen_nll, oracle_unseen, r.mean_moment_distance,
                    r.roundtrip_error});

  // Oracle: draws from the true generative process, same sample budget.
  double distance_sum = 0.0;
  std::size_t unseen_count = 0;
  const std::size_t D = data.spec.channels, T = data.spec.frames;
  for (const auto& c : data.conditions) {
    if (c.split != Split::unseen) continue;
    Rng rng(derive_seed(options.seed + kGenerationStream, static_cast<std::uint64_t>(c.id)));
    std::vector<double> x(options.generation_samples * T * D);
    for (std::size_t r = 0; r < options.generation_samples * T; ++r) {
      std::span<double> frame(x.data() + r * D, D);
      base_sample(frame, data.spec.base, rng);
      for (std::size_t j = 0; j < D; ++j) frame[j] = frame[j] * std::exp(c.log_sigma[j]) + c.mu[j];
    }
    const std::size_t rows = x.size() / D;
    if (rows != 0) distance_sum += moment_distance(Tensor::matrix(rows, D, std::move(x)), c);
    ++unseen_count;
  }
  rows.push_back({"oracle", oracle_nll_per_dim(data, data.sample_indices(Split::seen)), oracle_unseen,
                  oracle_unseen, unseen_count ? distance_sum / static_cast<double>(unseen_count) : 0.0,
                  0.0});
  return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "mode,seen_nll,unseen_nll,oracle_nll,moment_distance,roundtrip_error\n";
  for (const auto& r : rows) {
    out += r.mode + ',' + format_double(r.seen_nll) + ',' + format_double(r.unseen_nll) + ',' +
           format_double(r.oracle_nll) + ',' + format_double(r.moment_distance) + ',' +
           format_double(r.roundtrip_error) + '\n';
  }
  return out;
}

ModeComparison compare_modes(const TrainConfig& config, const Dataset& data,
                             const EvalOptions& options) {
  ModeComparison out;
  for (Mode mode : {Mode::baseline, Mode::snac}) {
    TrainConfig c = config;
    c.arch.mode = mode;
    Checkpoint ck = train(c, data);
    const auto stack = FlowStack::from_params(c.arch, ck.params);
    out.reports.push_back(evaluate(stack, c, data, options));
    out.checkpoints.push_back(std::move(ck));
  }
  out.table = comparison_table(out.reports, data, options);
  return out;
}

std::string scatter_svg(const Tensor& truth, const Tensor& generated, const std::string& title) {
  constexpr double kSize = 640.0, kMargin = 60.0;
  double lo0 = 1e300, hi0 = -1e300, lo1 = 1e300, hi1 = -1e300;
  for (const Tensor* t : {&truth, &generated})
    for (std::size_t i = 0; i < t->rows(); ++i) {
      lo0 = std::min(lo0, t->at(i, 0));
      hi0 = std::max(hi0, t->at(i, 0));
      lo1 = std::min(lo1, t->at(i, 1));
      hi1 = std::max(hi1, t->at(i, 1));
    }
  if (!(hi0 > lo0)) { lo0 -= 1.0; hi0 += 1.0; }
  if (!(hi1 > lo1)) { lo1 -= 1.0; hi1 += 1.0; }
  const double span = kSize - 2.0 * kMargin;
  auto px = [&](double v) { return kMargin + (v - lo0) / (hi0 - lo0) * span; };
  auto py = [&](double v) { return kSize - kMargin - (v - lo1) / (hi1 - lo1) * span; };

  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" viewBox=\"0 0 640 640\">\n"
     << "<rect width=\"640\" height=\"640\" fill=\"white\"/>\n"
     << "<text x=\"320\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title) << "</text>\n"
     << "<line x1=\"" << kMargin << "\" y1=\"" << kSize - kMargin << "\" x2=\"" << kSize - kMargin
     << "\" y2=\"" << kSize - kMargin << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
     << kSize - kMargin << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v0 = lo0 + (hi0 - lo0) * t / 4.0, v1 = lo1 + (hi1 - lo1) * t / 4.0;
    os << "<text x=\"" << px(v0) << "\" y=\"" << kSize - kMargin + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << v0 << "</text>\n"
       << "<text x=\"" << kMargin - 6 << "\" y=\"" << py(v1) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << v1 << "</text>\n";
  }
  os << "<text x=\"320\" y=\"" << kSize - 15 << "\" text-anchor=\"middle\" font-size=\"13\">ch0</text>\n"
     << "<text x=\"18\" y=\"320\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 320)\">ch1</text>\n";
  auto dots = [&](const Tensor& t, const char* colour) {
    for (std::size_t i = 0; i < t.rows(); ++i)
      os << "<circle cx=\"" << px(t.at(i, 0)) << "\" cy=\"" << py(t.at(i, 1))
         << "\" r=\"1.5\" fill=\"" << colour << "\" fill-opacity=\"0.5\"/>\n";
  };
  dots(truth, "#1f77b4");
  dots(generated, "#d62728");
  os << "<text x=\"" << kSize - kMargin << "\" y=\"50\" text-anchor=\"end\" font-size=\"12\" fill=\"#1f77b4\">true</text>\n"
     << "<text x=\"" << kSize - kMargin << "\" y=\"66\" text-anchor=\"end\" font-size=\"12\" fill=\"#d62728\">generated</text>\n"
     << "</svg>\n";
  return os.str();
}

}  // namespace snac
