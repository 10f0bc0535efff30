#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "snac/trainer.hpp"

namespace snac {

struct EvalOptions {
  std::size_t generation_samples = 10000;
  std::uint64_t seed = 7;
  bool mmd = false;
  std::size_t mmd_samples = 500;
  bool svg = true;
};

// Whole run description: dataset, model, training and evaluation.
struct RunConfig {
  TrainConfig train;
  EvalOptions eval;
  std::string output_dir = "runs";
};

using Json = nlohmann::ordered_json;

Json to_json(const RunConfig& config);
Json to_json(const TrainConfig& config);
Json to_json(const DatasetSpec& spec);

// Strict: unknown keys or wrong types throw ConfigError naming the key.
RunConfig run_config_from_json(const Json& doc);
TrainConfig train_config_from_json(const Json& doc);
DatasetSpec dataset_spec_from_json(const Json& doc);

// Applies "a.b.c=value". The value is parsed as JSON when possible,
// otherwise taken as a string. The path must already exist in `doc`.
void apply_override(Json& doc, const std::string& assignment);

// Defaults merged with `file_doc` and then `overrides`, validated.
RunConfig load_run_config(const Json& file_doc, const std::vector<std::string>& overrides);

// 16 hex digits (FNV-1a 64) of the canonical config dump.
std::string config_hash(const RunConfig& config);

}  // namespace snac
