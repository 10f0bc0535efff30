#include "snac/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <system_error>

namespace snac {

namespace {

Json nested(const Tensor& t, std::size_t axis, std::size_t& offset) {
  Json arr = Json::array();
  const std::size_t extent = t.shape()[axis];
  for (std::size_t i = 0; i < extent; ++i) {
    if (axis + 1 == t.rank())
      arr.push_back(t[offset++]);
    else
      arr.push_back(nested(t, axis + 1, offset));
  }
  return arr;
}

void flatten(const Json& doc, std::size_t depth, Shape& shape, std::vector<double>& out) {
  if (doc.is_number()) {
    if (depth != shape.size()) throw IoError("tensor: ragged nested array");
    out.push_back(doc.get<double>());
    return;
  }
  if (!doc.is_array()) throw IoError("tensor: expected number or array");
  if (depth == shape.size()) {
    if (!out.empty()) throw IoError("tensor: ragged nested array");
    shape.push_back(doc.size());
  } else if (shape[depth] != doc.size()) {
    throw IoError("tensor: ragged nested array");
  }
  for (const auto& item : doc) flatten(item, depth + 1, shape, out);
}

Json param_set_json(const ParamSet& params) {
  Json obj = Json::object();
  for (const auto& [name, value] : params) obj[name] = tensor_to_json(value);
  return obj;
}

ParamSet param_set_from_json(const Json& doc) {
  ParamSet out;
  for (const auto& [name, value] : doc.items()) out.emplace(name, tensor_from_json(value));
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& cell) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
    throw std::invalid_argument("bad number");
  return v;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

Json tensor_to_json(const Tensor& t) {
  if (t.rank() == 0) return t.item();
  std::size_t offset = 0;
  return nested(t, 0, offset);
}

Tensor tensor_from_json(const Json& doc) {
  if (doc.is_number()) return Tensor::scalar(doc.get<double>());
  Shape shape;
  std::vector<double> values;
  flatten(doc, 0, shape, values);
  return Tensor(std::move(shape), std::move(values));
}

std::string dataset_csv(const Dataset& data) {
  std::string out = "cond_id,split,frame";
  for (std::size_t j = 0; j < data.spec.channels; ++j) out += ",ch" + std::to_string(j);
  out += '\n';
  for (const auto& s : data.samples) {
    const auto& cond = data.conditions[static_cast<std::size_t>(s.cond_id)];
    for (std::size_t t = 0; t < s.x.rows(); ++t) {
      out += std::to_string(s.cond_id) + ',' + to_string(cond.split) + ',' + std::to_string(t);
      for (std::size_t j = 0; j < s.x.cols(); ++j) out += ',' + format_double(s.x.at(t, j));
      out += '\n';
    }
  }
  return out;
}

Json conditions_json(const Dataset& data) {
  Json conds = Json::array();
  for (const auto& c : data.conditions) {
    conds.push_back(Json{{"id", c.id},
                         {"split", to_string(c.split)},
                         {"mu", tensor_to_json(c.mu)},
                         {"log_sigma", tensor_to_json(c.log_sigma)},
                         {"embedding", tensor_to_json(data.embeddings[static_cast<std::size_t>(c.id)])}});
  }
  return Json{{"spec", to_json(data.spec)}, {"embed_dim", data.spec.embed_dim}, {"conditions", conds}};
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  write_file_atomic(dir / kDatasetCsv, dataset_csv(data));
  write_file_atomic(dir / kConditionsJson, conditions_json(data).dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset data;
  try {
    const Json doc = Json::parse(read_text_file(dir / kConditionsJson));
    data.spec = dataset_spec_from_json(doc.at("spec"));
    data.spec.embed_dim = doc.at("embed_dim").get<std::size_t>();
    for (const auto& c : doc.at("conditions")) {
      ConditionSpec cond{c.at("id").get<int>(), tensor_from_json(c.at("mu")),
                         tensor_from_json(c.at("log_sigma")), parse_split(c.at("split").get<std::string>())};
      if (cond.id != static_cast<int>(data.conditions.size()))
        throw IoError("conditions must be listed in id order");
      data.embeddings.push_back(tensor_from_json(c.at("embedding")));
      data.conditions.push_back(std::move(cond));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed '" + (dir / kConditionsJson).string() + "': " + e.what());
  } catch (const ConfigError& e) {
    throw IoError("malformed '" + (dir / kConditionsJson).string() + "': " + e.what());
  }

  std::istringstream csv(read_text_file(dir / kDatasetCsv));
  std::string line;
  std::getline(csv, line);
  const std::size_t D = data.spec.channels;
  std::vector<double> frames;
  int current = -1;
  auto flush = [&] {
    if (frames.empty()) return;
    const std::size_t rows = frames.size() / D;
    data.samples.push_back({current, Tensor::matrix(rows, D, std::move(frames))});
    frames.clear();
  };
  std::size_t line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3 + D)
      throw IoError("dataset.csv line " + std::to_string(line_no) + ": expected " +
                    std::to_string(3 + D) + " fields");
    try {
      const int id = std::stoi(cells[0]);
      const auto frame = std::stoul(cells[2]);
      if (frame == 0) flush();
      current = id;
      for (std::size_t j = 0; j < D; ++j) frames.push_back(parse_double(cells[3 + j]));
    } catch (const std::logic_error&) {
      throw IoError("dataset.csv line " + std::to_string(line_no) + ": malformed number");
    }
  }
  flush();
  return data;
}

Json checkpoint_to_json(const Checkpoint& ck) {
  Json evals = Json::array();
  for (const auto& e : ck.evals) evals.push_back(Json{{"step", e.step}, {"unseen_nll", e.unseen_nll}});
  return Json{{"format_version", ck.format_version},
              {"config", to_json(ck.config)},
              {"params", param_set_json(ck.params)},
              {"opt_state",
               {{"step", ck.optimizer.step},
                {"first_moment", param_set_json(ck.optimizer.first_moment)},
                {"second_moment", param_set_json(ck.optimizer.second_moment)}}},
              {"rng_state", ck.rng_state},
              {"history", {{"train_nll", ck.history}, {"evals", evals}}}};
}

Checkpoint checkpoint_from_json(const Json& doc) {
  try {
    Checkpoint ck;
    ck.format_version = doc.at("format_version").get<int>();
    if (ck.format_version != kCheckpointFormatVersion)
      throw IoError("checkpoint: unsupported format_version " + std::to_string(ck.format_version));
    ck.config = train_config_from_json(doc.at("config"));
    ck.params = param_set_from_json(doc.at("params"));
    const Json& opt = doc.at("opt_state");
    ck.optimizer.step = opt.at("step").get<std::uint64_t>();
    ck.optimizer.first_moment = param_set_from_json(opt.at("first_moment"));
    ck.optimizer.second_moment = param_set_from_json(opt.at("second_moment"));
    ck.rng_state = doc.at("rng_state").get<std::string>();
    ck.history = doc.at("history").at("train_nll").get<std::vector<double>>();
    for (const auto& e : doc.at("history").at("evals"))
      ck.evals.push_back({e.at("step").get<std::uint64_t>(), e.at("unseen_nll").get<double>()});
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file_atomic(path, checkpoint_to_json(ck).dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw IoError("checkpoint '" + path.string() + "' is not valid JSON");
  return checkpoint_from_json(doc);
}

}  // namespace snac
