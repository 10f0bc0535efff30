#pragma once

#include <filesystem>
#include <string>

#include "snac/config.hpp"
#include "snac/synthdata.hpp"
#include "snac/trainer.hpp"

namespace snac {

// "%.17g": round-trip exact for float64.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);
// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

Json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const Json& doc);

// Header `cond_id,split,frame,ch0..chD-1`; one row per frame.
std::string dataset_csv(const Dataset& data);
// {spec, conditions: [{id, split, mu, log_sigma, embedding}]}
Json conditions_json(const Dataset& data);
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);

Json checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const Json& doc);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

inline constexpr const char* kDatasetCsv = "dataset.csv";
inline constexpr const char* kConditionsJson = "conditions.json";

}  // namespace snac
