#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "snac/evalkit.hpp"
#include "snac/io.hpp"
#include "snac/rng.hpp"

using namespace snac;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "snac_cli_test";

int run(const std::string& args) {
  const std::string cmd = "cd \"" + kWork.string() + "\" && \"" SNACFLOW_CLI "\" " + args +
                          " > out.txt 2> err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string file(const fs::path& p) { return read_text_file(kWork / p); }

fs::path only_run_dir(const fs::path& root) {
  fs::path found;
  int count = 0;
  for (const auto& e : fs::directory_iterator(kWork / root)) {
    found = e.path();
    ++count;
  }
  REQUIRE(count == 1);
  return found;
}

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    write_file_atomic(kWork / "small.json",
                      R"({"dataset": {"samples_per_condition": 20, "n_seen": 3, "n_unseen": 2},
                          "model": {"K": 2, "H": 16},
                          "train": {"steps": 40, "batch_size": 16, "eval_every": 10},
                          "eval": {"generation_samples": 500}})");
  }
  ~Workspace() { fs::remove_all(kWork); }
};

std::vector<std::vector<double>> read_samples(const fs::path& p) {
  std::istringstream in(file(p));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    for (int i = 0; std::getline(cells, cell, ','); ++i)
      if (i >= 2) row.push_back(std::strtod(cell.c_str(), nullptr));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("gen writes deterministic dataset files") {
  Workspace ws;
  REQUIRE(run("gen --config small.json --set output_dir=a") == 0);
  REQUIRE(run("gen --config small.json --set output_dir=b") == 0);
  const fs::path a = only_run_dir("a"), b = only_run_dir("b");
  CHECK(read_text_file(a / kDatasetCsv) == read_text_file(b / kDatasetCsv));
  CHECK(read_text_file(a / kConditionsJson) == read_text_file(b / kConditionsJson));
  const std::string csv = read_text_file(a / kDatasetCsv);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 5 * 20);
  CHECK(file("out.txt").find("entropy estimate") != std::string::npos);
}

TEST_CASE("bad input exits 2 and names the problem") {
  Workspace ws;
  write_file_atomic(kWork / "bad.json", R"({"train": {"stepz": 3}})");
  CHECK(run("gen --config bad.json") == 2);
  CHECK(file("err.txt").find("train.stepz") != std::string::npos);
  write_file_atomic(kWork / "broken.json", "{");
  CHECK(run("train --config broken.json") == 2);
  CHECK(run("gen --set model.K=abc") == 2);
  CHECK(file("err.txt").find("model.K") != std::string::npos);
  CHECK(run("eval --checkpoint missing.json") == 2);
  CHECK(run("gen --config nowhere.json") == 2);
  CHECK(run("frobnicate") == 2);
}

TEST_CASE("train: steps=0 identity, divergence exit 3, resume equals uninterrupted") {
  Workspace ws;
  REQUIRE(run("train --config small.json --set train.steps=0 --set output_dir=zero") == 0);
  const fs::path zero = only_run_dir("zero");
  const Checkpoint ck = load_checkpoint(zero / "checkpoint.json");
  CHECK(ck.params == init_params(ck.config.seed, ck.config.arch));
  CHECK(read_text_file(zero / "loss.csv") == "step,train_nll,unseen_nll\n");

  CHECK(run("train --config small.json --set train.learning_rate=10000 --set output_dir=div") == 3);
  CHECK(file("err.txt").find("diverged at step") != std::string::npos);

  REQUIRE(run("train --config small.json --set output_dir=full") == 0);
  REQUIRE(run("train --config small.json --set train.steps=15 --set output_dir=half") == 0);
  const fs::path half = only_run_dir("half");
  REQUIRE(run("train --config small.json --set output_dir=resumed --resume \"" + (half / "checkpoint.json").string() + "\"") == 0);
  const std::string full_loss = read_text_file(only_run_dir("full") / "loss.csv");
  CHECK(read_text_file(only_run_dir("resumed") / "loss.csv") == full_loss);
  CHECK(std::count(full_loss.begin(), full_loss.end(), '\n') == 41);
  CHECK(full_loss.find("\n10,") != std::string::npos);

  const std::string before = read_text_file(half / "checkpoint.json");
  CHECK(run("train --config small.json --set train.steps=15 --set output_dir=half --resume \"" +
            (half / "checkpoint.json").string() + "\"") == 2);
  CHECK(read_text_file(half / "checkpoint.json") == before);
}

TEST_CASE("eval: identity checkpoint on standard-normal data, both modes, svg") {
  Workspace ws;
  REQUIRE(run("train --config small.json --set train.steps=0 --set output_dir=id") == 0);
  const fs::path id = only_run_dir("id");
  const Checkpoint ck = load_checkpoint(id / "checkpoint.json");

  Dataset d;
  d.spec = ck.config.data;
  Rng rng(4);
  for (int c = 0; c < 5; ++c) {
    d.conditions.push_back({c, Tensor::zeros({2}), Tensor::zeros({2}), c < 3 ? Split::seen : Split::unseen});
    d.embeddings.push_back(Tensor::zeros({16}));
    for (int n = 0; n < 4000; ++n) d.samples.push_back({c, Tensor::matrix(1, 2, {rng.normal(), rng.normal()})});
  }
  write_dataset(kWork / "normal", d);
  REQUIRE(run("eval --checkpoint \"" + (id / "checkpoint.json").string() + "\" --dataset normal --out ev") == 0);
  const Json report = Json::parse(file("ev/report_snac.json"));
  const double entropy = 0.5 * std::log(2 * M_PI) + 0.5;
  CHECK(std::abs(report.at("unseen_nll").get<double>() - entropy) < 0.03);
  CHECK(std::abs(report.at("seen_nll").get<double>() - entropy) < 0.03);
  CHECK(fs::exists(kWork / "ev" / "scatter_snac_cond4.svg"));
  CHECK(!fs::exists(kWork / "ev" / "scatter_snac_cond0.svg"));

  REQUIRE(run("train --config small.json --set output_dir=s") == 0);
  REQUIRE(run("train --config small.json --set model.mode=baseline --set output_dir=b") == 0);
  const std::string s = (only_run_dir("s") / "checkpoint.json").string(), b = (only_run_dir("b") / "checkpoint.json").string();
  REQUIRE(run("eval --checkpoint \"" + b + "\" --checkpoint \"" + s + "\" --out cmp") == 0);
  const std::string csv = file("cmp/comparison.csv");
  CHECK(csv.rfind("mode,seen_nll,unseen_nll,oracle_nll,moment_distance,roundtrip_error\nbaseline,", 0) == 0);
  CHECK(csv.find("\nsnac,") != std::string::npos);
  CHECK(csv.find("\noracle,") != std::string::npos);

  // seeded end-to-end golden
  const Json snac_report = Json::parse(file("cmp/report_snac.json"));
  CHECK(std::abs(snac_report.at("seen_nll").get<double>() - 1.869190858273768) < 1e-10);
  REQUIRE(run("eval --checkpoint \"" + b + "\" --checkpoint \"" + s + "\" --out cmp2") == 0);
  CHECK(file("cmp2/comparison.csv") == csv);
}

TEST_CASE("sample") {
  Workspace ws;
  REQUIRE(run("train --config small.json --set train.steps=0 --set output_dir=id") == 0);
  const std::string ck = (only_run_dir("id") / "checkpoint.json").string();
  REQUIRE(run("sample --checkpoint \"" + ck + "\" --condition 4 --n 20000 --out s.csv") == 0);
  const auto rows = read_samples("s.csv");
  REQUIRE(rows.size() == 20000);
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0, sq = 0.0;
    for (const auto& r : rows) mean += r[j];
    mean /= rows.size();
    for (const auto& r : rows) sq += (r[j] - mean) * (r[j] - mean);
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(std::sqrt(sq / rows.size()) - 1.0) < 0.03);
  }
  REQUIRE(run("sample --checkpoint \"" + ck + "\" --condition 4 --n 0 --out empty.csv") == 0);
  CHECK(file("empty.csv") == "sample,frame,ch0,ch1\n");

  write_file_atomic(kWork / "g.json", "[0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]");
  CHECK(run("sample --checkpoint \"" + ck + "\" --embedding g.json --n 5 --out g.csv") == 0);
  CHECK(read_samples("g.csv").size() == 5);
  write_file_atomic(kWork / "short.json", "[0,0]");
  CHECK(run("sample --checkpoint \"" + ck + "\" --embedding short.json --n 5") == 2);
  CHECK(run("sample --checkpoint \"" + ck + "\" --condition 99 --n 5") == 2);
  CHECK(run("sample --checkpoint \"" + ck + "\" --n 5") == 2);
}

TEST_CASE("check passes and a logdet sign fault fails it") {
  Workspace ws;
  CHECK(run("check") == 0);
  CHECK(file("out.txt").find("all checks passed") != std::string::npos);
  CHECK(run("check --inject-fault logdet-sign") == 1);
  CHECK(file("out.txt").find("FAIL") != std::string::npos);
}
