#include "snac/config.hpp"

#include <cstdio>

namespace snac {

namespace {

bool compatible(const Json& def, const Json& value) {
  if (def.is_boolean()) return value.is_boolean();
  if (def.is_string()) return value.is_string();
  if (def.is_number_float()) return value.is_number();
  if (def.is_number_unsigned() || def.is_number_integer()) return value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
  if (def.is_object()) return value.is_object();
  return def.type() == value.type();
}

void merge_strict(Json& target, const Json& overlay, const std::string& path) {
  if (!overlay.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!target.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    Json& slot = target[key];
    if (!compatible(slot, value))
      throw ConfigError("config key '" + where + "' has the wrong type (expected " +
                        std::string(slot.type_name()) + ")");
    if (slot.is_object())
      merge_strict(slot, value, where);
    else
      slot = value;
  }
}

template <class T>
T read(const Json& obj, const char* key, const std::string& section) {
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + section + "." + key + "' is missing or has the wrong type");
  }
}

Json model_json(const FlowArch& arch) {
  return Json{{"mode", to_string(arch.mode)}, {"K", arch.layers}, {"d", arch.split},
              {"E", arch.embed_dim}, {"H", arch.hidden}, {"L", arch.depth},
              {"c", arch.scale_clamp}};
}

Json train_json(const TrainConfig& c) {
  return Json{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"steps", c.steps},
              {"seed", c.seed}, {"eval_every", c.eval_every}};
}

Json eval_json(const EvalOptions& e) {
  return Json{{"generation_samples", e.generation_samples}, {"seed", e.seed}, {"mmd", e.mmd},
              {"mmd_samples", e.mmd_samples}, {"svg", e.svg}};
}

}  // namespace

Json to_json(const DatasetSpec& s) {
  return Json{{"D", s.channels},
              {"T", s.frames},
              {"base_shape", to_string(s.base)},
              {"n_seen", s.n_seen},
              {"n_unseen", s.n_unseen},
              {"samples_per_condition", s.samples_per_condition},
              {"seed", s.seed},
              {"embed_seed", s.embed_seed},
              {"embed_noise", s.embed_noise},
              {"unseen_embed_noise", s.unseen_embed_noise},
              {"hard_embed", s.hard_embed}};
}

Json to_json(const TrainConfig& config) {
  return Json{{"dataset", to_json(config.data)},
              {"model", model_json(config.arch)},
              {"train", train_json(config)}};
}

Json to_json(const RunConfig& config) {
  Json doc = to_json(config.train);
  doc["eval"] = eval_json(config.eval);
  doc["output_dir"] = config.output_dir;
  return doc;
}

DatasetSpec dataset_spec_from_json(const Json& d) {
  const std::string sec = "dataset";
  DatasetSpec s;
  s.channels = read<std::size_t>(d, "D", sec);
  s.frames = read<std::size_t>(d, "T", sec);
  s.base = parse_base_shape(read<std::string>(d, "base_shape", sec));
  s.n_seen = read<std::size_t>(d, "n_seen", sec);
  s.n_unseen = read<std::size_t>(d, "n_unseen", sec);
  s.samples_per_condition = read<std::size_t>(d, "samples_per_condition", sec);
  s.seed = read<std::uint64_t>(d, "seed", sec);
  s.embed_seed = read<std::uint64_t>(d, "embed_seed", sec);
  s.embed_noise = read<double>(d, "embed_noise", sec);
  s.unseen_embed_noise = read<double>(d, "unseen_embed_noise", sec);
  s.hard_embed = read<bool>(d, "hard_embed", sec);
  return s;
}

TrainConfig train_config_from_json(const Json& doc) {
  Json merged = to_json(TrainConfig{});
  merge_strict(merged, doc, "");
  TrainConfig c;
  c.data = dataset_spec_from_json(merged.at("dataset"));
  const Json& m = merged.at("model");
  c.arch.mode = parse_mode(read<std::string>(m, "mode", "model"));
  c.arch.layers = read<std::size_t>(m, "K", "model");
  c.arch.split = read<std::size_t>(m, "d", "model");
  c.arch.embed_dim = read<std::size_t>(m, "E", "model");
  c.arch.hidden = read<std::size_t>(m, "H", "model");
  c.arch.depth = read<std::size_t>(m, "L", "model");
  c.arch.scale_clamp = read<double>(m, "c", "model");
  c.arch.channels = c.data.channels;
  c.data.embed_dim = c.arch.embed_dim;
  const Json& t = merged.at("train");
  c.learning_rate = read<double>(t, "learning_rate", "train");
  c.batch_size = read<std::size_t>(t, "batch_size", "train");
  c.steps = read<std::size_t>(t, "steps", "train");
  c.seed = read<std::uint64_t>(t, "seed", "train");
  c.eval_every = read<std::size_t>(t, "eval_every", "train");
  return c;
}

RunConfig run_config_from_json(const Json& doc) {
  Json merged = to_json(RunConfig{});
  merge_strict(merged, doc, "");
  RunConfig rc;
  Json train_part = merged;
  train_part.erase("eval");
  train_part.erase("output_dir");
  rc.train = train_config_from_json(train_part);
  const Json& e = merged.at("eval");
  rc.eval.generation_samples = read<std::size_t>(e, "generation_samples", "eval");
  rc.eval.seed = read<std::uint64_t>(e, "seed", "eval");
  rc.eval.mmd = read<bool>(e, "mmd", "eval");
  rc.eval.mmd_samples = read<std::size_t>(e, "mmd_samples", "eval");
  rc.eval.svg = read<bool>(e, "svg", "eval");
  rc.output_dir = merged.at("output_dir").get<std::string>();
  return rc;
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (!node->is_object() || !node->contains(key))
      throw ConfigError("unknown config key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (!compatible(*node, value))
    throw ConfigError("config key '" + path + "' has the wrong type (expected " +
                      std::string(node->type_name()) + ")");
  *node = value;
}

RunConfig load_run_config(const Json& file_doc, const std::vector<std::string>& overrides) {
  Json merged = to_json(RunConfig{});
  merge_strict(merged, file_doc, "");
  for (const auto& o : overrides) apply_override(merged, o);
  RunConfig rc = run_config_from_json(merged);
  rc.train.validate();
  return rc;
}

std::string config_hash(const RunConfig& config) {
  const std::string canonical = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace snac
