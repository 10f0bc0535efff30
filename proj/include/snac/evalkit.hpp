#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snac/config.hpp"
#include "snac/flow.hpp"
#include "snac/synthdata.hpp"
#include "snac/trainer.hpp"

namespace snac {

struct ChannelMoments {
  std::vector<double> mean;
  std::vector<double> std;  // population (divide by n)
};

// Per-channel moments over all rows of a (rows x D) tensor.
ChannelMoments channel_moments(const Tensor& rows);

// Moments of z = f(x; g) over every sample of each condition, in id order.
std::vector<ChannelMoments> latent_stats(const FlowStack& stack, const Dataset& data);

// Mean -log_likelihood / (T*D) over the samples of `split`.
double nll_per_dim(const FlowStack& stack, const Dataset& data, Split split);
double zero_shot_nll(const FlowStack& stack, const Dataset& data);

// n samples of `frames` frames: z ~ N(0, I) pushed through the inverse flow.
Tensor generate(const FlowStack& stack, const Tensor& g, std::size_t n, std::size_t frames,
                std::uint64_t seed);

// |mean - mu|_2 / sqrt(D) + |std - exp(log_sigma)|_2 / sqrt(D)
double moment_distance(const Tensor& samples, const ConditionSpec& c);

double generation_fidelity(const FlowStack& stack, const ConditionSpec& c, const Tensor& g,
                           std::size_t n, std::size_t frames, std::uint64_t seed);

// Unbiased MMD^2 with an RBF kernel, bandwidth from the median pairwise
// distance of the pooled sample.
double mmd_rbf(const Tensor& a, const Tensor& b);

// max |f^-1(f(x)) - x| over every dataset sample.
double roundtrip_error(const FlowStack& stack, const Dataset& data);

struct ConditionReport {
  int id = 0;
  Split split = Split::seen;
  ChannelMoments latent;
  double nll = 0.0;         // nats/dim
  double oracle_nll = 0.0;  // nats/dim
  std::optional<double> moment_distance;  // unseen only
  std::optional<double> mmd;
};

struct EvalReport {
  std::string mode;
  TrainConfig config;
  std::vector<ConditionReport> conditions;
  double seen_nll = 0.0;
  double unseen_nll = 0.0;
  double oracle_seen_nll = 0.0;
  double oracle_unseen_nll = 0.0;
  double mean_moment_distance = 0.0;
  double roundtrip_error = 0.0;
};

EvalReport evaluate(const FlowStack& stack, const TrainConfig& config, const Dataset& data,
                    const EvalOptions& options);
Json to_json(const EvalReport& report);

struct ComparisonRow {
  std::string mode;
  double seen_nll = 0.0;
  double unseen_nll = 0.0;
  double oracle_nll = 0.0;  // unseen-split oracle, the zero-shot floor
  double moment_distance = 0.0;
  double roundtrip_error = 0.0;
};

// Model rows in the given order followed by an "oracle" row computed from
// the true generative process.
std::vector<ComparisonRow> comparison_table(const std::vector<EvalReport>& reports,
                                            const Dataset& data, const EvalOptions& options);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

struct ModeComparison {
  std::vector<Checkpoint> checkpoints;  // baseline, snac
  std::vector<EvalReport> reports;
  std::vector<ComparisonRow> table;
};

// Trains baseline and snac under the same config and seeds, then evaluates.
ModeComparison compare_modes(const TrainConfig& config, const Dataset& data,
                             const EvalOptions& options);

// True samples vs generated samples on channels 0 and 1; 640x640 viewport.
std::string scatter_svg(const Tensor& truth, const Tensor& generated, const std::string& title);

}  // namespace snac
