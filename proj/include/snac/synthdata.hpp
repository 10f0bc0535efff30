#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "snac/tensor.hpp"

namespace snac {

class Rng;

// Base densities before the per-condition affine map. The two non-Gaussian
// shapes are fixed 8-component Gaussian mixtures so the log-density stays
// closed-form.
enum class BaseShape { gaussian, two_rings, two_moons_2d };

std::string to_string(BaseShape shape);
BaseShape parse_base_shape(const std::string& text);

enum class Split { seen, unseen };
std::string to_string(Split split);
Split parse_split(const std::string& text);

struct DatasetSpec {
  std::size_t channels = 2;  // D
  std::size_t frames = 1;    // T
  BaseShape base = BaseShape::gaussian;
  std::size_t n_seen = 8;
  std::size_t n_unseen = 4;
  std::size_t samples_per_condition = 512;
  std::uint64_t seed = 0;

  // Condition embedding g = A [mu; log_sigma] + noise (see embed_condition).
  std::size_t embed_dim = 16;
  std::uint64_t embed_seed = 1;
  double embed_noise = 0.01;
  double unseen_embed_noise = 0.01;  // != embed_noise simulates domain mismatch
  bool hard_embed = false;           // tanh on A [mu; log_sigma]

  void validate() const;
  std::size_t conditions() const { return n_seen + n_unseen; }
};

// Ground truth for one synthetic "speaker": frame = base * exp(log_sigma) + mu.
struct ConditionSpec {
  int id = 0;
  Tensor mu;         // [D]
  Tensor log_sigma;  // [D], entries in [-1.5, 1.5]
  Split split = Split::seen;
};

struct Sample {
  int cond_id = 0;
  Tensor x;  // T x D
};

struct Dataset {
  DatasetSpec spec;
  std::vector<ConditionSpec> conditions;  // indexed by id
  std::vector<Sample> samples;            // grouped by condition, in id order
  std::vector<Tensor> embeddings;         // [E] per condition id

  std::vector<std::size_t> sample_indices(Split split) const;
  std::vector<std::size_t> sample_indices(int cond_id) const;
};

// Deterministic in spec.seed. Conditions 0..n_seen-1 are seen, the rest
// unseen; every condition draws from its own seeded stream.
Dataset make_dataset(const DatasetSpec& spec);

struct EmbedOptions {
  double noise_std = 0.01;
  bool hard = false;
};
Tensor embed_condition(const ConditionSpec& c, std::size_t embed_dim, std::uint64_t map_seed,
                       const EmbedOptions& options = {});

// log p_base(u) for one frame u of length D.
double base_logpdf(std::span<const double> u, BaseShape shape);
// One frame from the base density.
void base_sample(std::span<double> out, BaseShape shape, Rng& rng);

// log p(x | c) summed over frames of the T x D sample x.
double true_loglik(const Tensor& x, const ConditionSpec& c, BaseShape shape);

// Mean of -true_loglik / (T*D) over the given samples.
double oracle_nll_per_dim(const Dataset& data, const std::vector<std::size_t>& indices);

}  // namespace snac
