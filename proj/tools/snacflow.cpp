#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snac/evalkit.hpp"
#include "snac/io.hpp"
#include "snac/rng.hpp"
#include "snac/verify.hpp"

namespace fs = std::filesystem;
using namespace snac;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kBadInput = 2, kDiverged = 3 };

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "JSON run config")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "override a config value, e.g. model.K=6")->take_all();
  }

  RunConfig load() const {
    Json doc = Json::object();
    if (!file.empty()) {
      doc = Json::parse(read_text_file(file), nullptr, false);
      if (doc.is_discarded()) throw IoError("config '" + file + "' is not valid JSON");
    }
    return load_run_config(doc, overrides);
  }
};

fs::path run_dir(const RunConfig& rc) { return fs::path(rc.output_dir) / config_hash(rc); }

Dataset dataset_for(const TrainConfig& config, const std::string& dir) {
  if (dir.empty()) return make_dataset(config.data);
  Dataset data = read_dataset(dir);
  if (data.spec.channels != config.arch.channels)
    throw ConfigError("dataset in '" + dir + "' has D = " + std::to_string(data.spec.channels) +
                      ", model expects " + std::to_string(config.arch.channels));
  if (data.spec.embed_dim != config.arch.embed_dim)
    throw ConfigError("dataset in '" + dir + "' has E = " + std::to_string(data.spec.embed_dim) +
                      ", model expects " + std::to_string(config.arch.embed_dim));
  return data;
}

std::string loss_csv(const Checkpoint& ck) {
  std::string out = "step,train_nll,unseen_nll\n";
  std::size_t next_eval = 0;
  for (std::size_t i = 0; i < ck.history.size(); ++i) {
    const std::uint64_t step = i + 1;
    out += std::to_string(step) + ',' + format_double(ck.history[i]) + ',';
    while (next_eval < ck.evals.size() && ck.evals[next_eval].step < step) ++next_eval;
    if (next_eval < ck.evals.size() && ck.evals[next_eval].step == step)
      out += format_double(ck.evals[next_eval].unseen_nll);
    out += '\n';
  }
  return out;
}

std::string samples_csv(const Tensor& x, std::size_t frames) {
  std::string out = "sample,frame";
  for (std::size_t j = 0; j < x.cols(); ++j) out += ",ch" + std::to_string(j);
  out += '\n';
  for (std::size_t r = 0; r < x.rows(); ++r) {
    out += std::to_string(r / frames) + ',' + std::to_string(r % frames);
    for (std::size_t j = 0; j < x.cols(); ++j) out += ',' + format_double(x.at(r, j));
    out += '\n';
  }
  return out;
}

Tensor first_rows(const Tensor& x, std::size_t n) {
  n = std::min(n, x.rows());
  return Tensor::matrix(n, x.cols(), {x.data().begin(), x.data().begin() + static_cast<std::ptrdiff_t>(n * x.cols())});
}

int cmd_gen(const ConfigArgs& cfg) {
  const RunConfig rc = cfg.load();
  const fs::path dir = run_dir(rc);
  const Dataset data = make_dataset(rc.train.data);
  write_file_atomic(dir / "config.json", to_json(rc).dump(2) + "\n");
  write_dataset(dir, data);
  std::vector<std::size_t> all(data.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::printf("dataset: %s\n", (dir / kDatasetCsv).string().c_str());
  std::printf("conditions: %zu seen, %zu unseen\n", rc.train.data.n_seen, rc.train.data.n_unseen);
  std::printf("samples: %zu (T=%zu, D=%zu)\n", data.samples.size(), data.spec.frames, data.spec.channels);
  std::printf("entropy estimate: %.6f nats/dim\n", oracle_nll_per_dim(data, all));
  return kOk;
}

int cmd_train(const ConfigArgs& cfg, const std::string& dataset_dir, const std::string& resume_path) {
  const RunConfig rc = cfg.load();
  const fs::path dir = run_dir(rc);
  std::optional<Checkpoint> resume;
  if (!resume_path.empty()) {
    std::error_code ec;
    if (fs::equivalent(resume_path, dir / "checkpoint.json", ec))
      throw ConfigError("--resume points at the checkpoint this run would overwrite; change output_dir");
    resume = load_checkpoint(resume_path);
  }
  const Dataset data = dataset_for(rc.train, dataset_dir);

  const std::size_t every = std::max<std::size_t>(1, rc.train.steps / 20);
  const auto observer = [&](std::uint64_t step, double loss) {
    if ((step + 1) % every == 0) std::printf("step %6llu  nll %.6f\n", static_cast<unsigned long long>(step + 1), loss);
  };
  const Checkpoint ck = train(rc.train, data, resume ? &*resume : nullptr, observer);
  write_file_atomic(dir / "config.json", to_json(rc).dump(2) + "\n");
  save_checkpoint(dir / "checkpoint.json", ck);
  write_file_atomic(dir / "loss.csv", loss_csv(ck));

  const auto stack = FlowStack::from_params(rc.train.arch, ck.params);
  std::printf("checkpoint: %s\n", (dir / "checkpoint.json").string().c_str());
  std::printf("seen nll %.6f (oracle %.6f), unseen nll %.6f (oracle %.6f) nats/dim\n",
              nll_per_dim(stack, data, Split::seen),
              oracle_nll_per_dim(data, data.sample_indices(Split::seen)),
              nll_per_dim(stack, data, Split::unseen),
              oracle_nll_per_dim(data, data.sample_indices(Split::unseen)));
  return kOk;
}

void write_scatters(const fs::path& dir, const FlowStack& stack, const Dataset& data, const EvalOptions& eval) {
  constexpr std::size_t kPoints = 1000;
  for (const auto& c : data.conditions) {
    if (c.split != Split::unseen) continue;
    const Tensor truth = gather(data, data.sample_indices(c.id)).x;
    const Tensor gen = generate(stack, data.embeddings[static_cast<std::size_t>(c.id)],
                                std::min(kPoints, eval.generation_samples), data.spec.frames,
                                derive_seed(eval.seed, static_cast<std::uint64_t>(c.id)));
    const std::string name = "scatter_" + to_string(stack.arch.mode) + "_cond" + std::to_string(c.id);
    write_file_atomic(dir / (name + ".svg"),
                      scatter_svg(first_rows(truth, kPoints), gen,
                                  to_string(stack.arch.mode) + ", unseen condition " + std::to_string(c.id)));
  }
}

int cmd_eval(const ConfigArgs& cfg, const std::vector<std::string>& checkpoints, const std::string& dataset_dir,
             const std::string& out) {
  const EvalOptions eval = cfg.load().eval;
  std::vector<Checkpoint> cks;
  for (const auto& p : checkpoints) cks.push_back(load_checkpoint(p));
  for (const auto& ck : cks)
    if (to_json(ck.config.data) != to_json(cks.front().config.data))
      throw ConfigError("checkpoints were trained on different datasets");
  const fs::path dir = out.empty() ? fs::path(checkpoints.front()).parent_path() : fs::path(out);
  const Dataset data = dataset_for(cks.front().config, dataset_dir);

  std::vector<EvalReport> reports;
  for (const auto& ck : cks) {
    const auto stack = FlowStack::from_params(ck.config.arch, ck.params);
    reports.push_back(evaluate(stack, ck.config, data, eval));
    const EvalReport& r = reports.back();
    write_file_atomic(dir / ("report_" + r.mode + ".json"), to_json(r).dump(2) + "\n");
    if (eval.svg && data.spec.channels >= 2) write_scatters(dir, stack, data, eval);
    std::printf("%-8s seen %.6f  unseen %.6f  oracle(unseen) %.6f  moment_distance %.6f  roundtrip %.3g\n",
                r.mode.c_str(), r.seen_nll, r.unseen_nll, r.oracle_unseen_nll, r.mean_moment_distance,
                r.roundtrip_error);
  }
  if (reports.size() == 2 && reports[0].mode != reports[1].mode) {
    write_file_atomic(dir / "comparison.csv", comparison_csv(comparison_table(reports, data, eval)));
    std::printf("comparison: %s\n", (dir / "comparison.csv").string().c_str());
  }
  return kOk;
}

int cmd_sample(const std::string& checkpoint, std::optional<int> condition, const std::string& embedding_file,
               std::size_t n, std::uint64_t seed, const std::string& dataset_dir, const std::string& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  Tensor g;
  if (condition) {
    const Dataset data = dataset_for(ck.config, dataset_dir);
    if (*condition < 0 || static_cast<std::size_t>(*condition) >= data.conditions.size())
      throw ConfigError("--condition " + std::to_string(*condition) + " is out of range (dataset has " +
                        std::to_string(data.conditions.size()) + " conditions)");
    g = data.embeddings[static_cast<std::size_t>(*condition)];
  } else {
    const Json doc = Json::parse(read_text_file(embedding_file), nullptr, false);
    if (doc.is_discarded()) throw IoError("embedding '" + embedding_file + "' is not valid JSON");
    g = tensor_from_json(doc);
    if (g.rank() != 1 || g.numel() != ck.config.arch.embed_dim)
      throw ConfigError("embedding must be a flat array of " + std::to_string(ck.config.arch.embed_dim) + " numbers");
  }
  const auto stack = FlowStack::from_params(ck.config.arch, ck.params);
  const std::size_t frames = ck.config.data.frames;
  write_file_atomic(out, samples_csv(generate(stack, g, n, frames, seed), frames));
  std::printf("wrote %zu samples to %s\n", n, out.c_str());
  return kOk;
}

int cmd_check(std::uint64_t seed, const std::string& fault) {
  verify::CheckOptions options;
  options.seed = seed;
  if (fault == "logdet-sign") options.flip_logdet_sign = true;
  else if (!fault.empty()) throw ConfigError("unknown fault '" + fault + "'");

  bool ok = true;
  double total = 0.0;
  std::printf("%-44s %12s %10s %8s  %s\n", "check", "error", "limit", "seconds", "result");
  for (const auto& r : verify::run_checks(options)) {
    ok = ok && r.passed;
    total += r.seconds;
    std::printf("%-44s %12.3e %10.1e %8.2f  %s\n", r.name.c_str(), r.value, r.threshold, r.seconds,
                r.passed ? "PASS" : "FAIL");
  }
  std::printf("total %.2f s: %s\n", total, ok ? "all checks passed" : "FAILED");
  return ok ? kOk : kCheckFailed;
}

int cmd_compare(const ConfigArgs& cfg) {
  const RunConfig rc = cfg.load();
  const fs::path dir = run_dir(rc);
  const Dataset data = make_dataset(rc.train.data);
  const ModeComparison cmp = compare_modes(rc.train, data, rc.eval);
  write_file_atomic(dir / "config.json", to_json(rc).dump(2) + "\n");
  for (std::size_t i = 0; i < cmp.reports.size(); ++i) {
    const std::string& mode = cmp.reports[i].mode;
    save_checkpoint(dir / ("checkpoint_" + mode + ".json"), cmp.checkpoints[i]);
    write_file_atomic(dir / ("report_" + mode + ".json"), to_json(cmp.reports[i]).dump(2) + "\n");
  }
  const std::string csv = comparison_csv(cmp.table);
  write_file_atomic(dir / "comparison.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional normalizing flows on synthetic multi-condition data"};
  app.require_subcommand(1);

  ConfigArgs gen_cfg, train_cfg, eval_cfg, compare_cfg;
  auto* gen = app.add_subcommand("gen", "write a synthetic dataset");
  gen_cfg.attach(gen);

  auto* train_cmd = app.add_subcommand("train", "train a flow, write checkpoint.json and loss.csv");
  train_cfg.attach(train_cmd);
  std::string train_dataset, resume;
  train_cmd->add_option("--dataset", train_dataset, "dataset directory written by gen")->check(CLI::ExistingDirectory);
  train_cmd->add_option("--resume", resume, "continue from this checkpoint")->check(CLI::ExistingFile);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate one or two checkpoints");
  eval_cfg.attach(eval_cmd);
  std::vector<std::string> eval_ckpts;
  std::string eval_dataset, eval_out;
  eval_cmd->add_option("--checkpoint", eval_ckpts, "checkpoint file (repeat for a second mode)")->required()->expected(1, 2);
  eval_cmd->add_option("--dataset", eval_dataset, "dataset directory written by gen");
  eval_cmd->add_option("--out", eval_out, "output directory (default: next to the first checkpoint)");

  auto* sample_cmd = app.add_subcommand("sample", "draw samples for a condition or embedding");
  std::string sample_ckpt, embedding_file, sample_dataset, sample_out = "samples.csv";
  int condition = -1;
  std::size_t n = 1000;
  std::uint64_t sample_seed = 0;
  sample_cmd->add_option("--checkpoint", sample_ckpt)->required();
  auto* cond_opt = sample_cmd->add_option("--condition", condition, "condition id in the dataset");
  auto* emb_opt = sample_cmd->add_option("--embedding", embedding_file, "JSON array holding g");
  cond_opt->excludes(emb_opt);
  sample_cmd->add_option("--n", n, "number of samples")->default_val(1000);
  sample_cmd->add_option("--seed", sample_seed)->default_val(0);
  sample_cmd->add_option("--dataset", sample_dataset, "dataset directory written by gen");
  sample_cmd->add_option("--out", sample_out, "output CSV")->default_val("samples.csv");

  auto* check_cmd = app.add_subcommand("check", "run the built-in verification suite");
  std::uint64_t check_seed = 2024;
  std::string fault;
  check_cmd->add_option("--seed", check_seed)->default_val(2024);
  check_cmd->add_option("--inject-fault", fault)->group("");

  auto* compare_cmd = app.add_subcommand("compare", "train baseline and snac, write comparison.csv");
  compare_cfg.attach(compare_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*gen) return cmd_gen(gen_cfg);
    if (*train_cmd) return cmd_train(train_cfg, train_dataset, resume);
    if (*eval_cmd) return cmd_eval(eval_cfg, eval_ckpts, eval_dataset, eval_out);
    if (*sample_cmd) {
      if (!*cond_opt && !*emb_opt) throw ConfigError("sample needs --condition or --embedding");
      return cmd_sample(sample_ckpt, *cond_opt ? std::optional<int>(condition) : std::nullopt, embedding_file, n,
                        sample_seed, sample_dataset, sample_out);
    }
    if (*check_cmd) return cmd_check(check_seed, fault);
    if (*compare_cmd) return cmd_compare(compare_cfg);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kBadInput;
  }
  return kOk;
}
