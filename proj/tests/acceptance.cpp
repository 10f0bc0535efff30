// Acceptance run: one PASS/FAIL line per criterion, exit 0 iff all pass.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "snac/evalkit.hpp"
#include "snac/io.hpp"
#include "snac/verify.hpp"

using namespace snac;

namespace {

constexpr double kRoundTripTol = 1e-8, kRoundTripSeconds = 10.0;
constexpr double kLogdetTol = 1e-5, kLogdetSeconds = 30.0;
constexpr double kGradTol = 1e-4, kGradSeconds = 30.0;
constexpr double kIdentityTol = 1e-10;
constexpr double kOracleGap = 0.15, kOracleFloor = 0.05, kTrainSeconds = 300.0;
constexpr double kMechanismTol = 0.02;
constexpr std::size_t kMechanismDraws = 100000;
constexpr double kCheckSeconds = 60.0;

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void invertibility(const verify::CheckOptions& o) {
  const auto r = verify::check_roundtrip(o, 1000);
  report(1, "invertibility", r.passed && r.value < kRoundTripTol && r.seconds < kRoundTripSeconds,
         fmt("1000 trials, max |f^-1(f(x)) - x| = %.3e (< %.0e), %.2f s (< %.0f s)", r.value, kRoundTripTol,
             r.seconds, kRoundTripSeconds));
}

void logdet(const verify::CheckOptions& o) {
  const auto r = verify::check_logdet(o, 200);
  report(2, "log-determinant", r.passed && r.value < kLogdetTol && r.seconds < kLogdetSeconds,
         fmt("200 instances, max |analytic - numerical| = %.3e (< %.0e), %.2f s (< %.0f s)", r.value, kLogdetTol,
             r.seconds, kLogdetSeconds));
}

void gradients(const verify::CheckOptions& o) {
  const auto b = verify::check_gradient(o, Mode::baseline);
  const auto s = verify::check_gradient(o, Mode::snac);
  const double seconds = b.seconds + s.seconds;
  report(3, "gradient", b.value < kGradTol && s.value < kGradTol && seconds < kGradSeconds,
         fmt("D=4 K=2 rel. error baseline %.3e, snac %.3e (< %.0e), %.2f s", b.value, s.value, kGradTol, seconds));
}

void identity(const verify::CheckOptions& o) {
  const auto r = verify::check_identity_init(o);
  // check_identity_init counts any nonzero logdet as an error of 1.
  report(4, "identity at init", r.value < kIdentityTol,
         fmt("max |NLL - standard-normal NLL|, |z - flip(x)| = %.3e (< %.0e), logdet exactly 0: ", r.value,
             kIdentityTol) + (r.value < 1.0 ? "yes" : "no"));
}

void oracle_floor() {
  TrainConfig c;
  c.data.base = BaseShape::gaussian;
  c.data.channels = c.arch.channels = 2;
  c.data.n_seen = 8;
  c.data.n_unseen = 4;
  c.arch.layers = 4;
  c.steps = 2000;
  const Dataset data = make_dataset(c.data);
  const double oracle = oracle_nll_per_dim(data, data.sample_indices(Split::seen));

  const auto start = std::chrono::steady_clock::now();
  Checkpoint ck = initial_checkpoint(c);
  double lowest = 1e300, final_nll = 0.0;
  for (std::size_t until = 100; until <= c.steps; until += 100) {
    TrainConfig part = c;
    part.steps = until;
    ck = train(part, data, &ck);
    final_nll = nll_per_dim(FlowStack::from_params(c.arch, ck.params), data, Split::seen);
    lowest = std::min(lowest, final_nll);
  }
  const double secs = seconds_since(start);
  const bool ok = std::abs(final_nll - oracle) <= kOracleGap && lowest >= oracle - kOracleFloor && secs < kTrainSeconds;
  report(5, "oracle floor", ok,
         fmt("seen NLL %.4f vs oracle %.4f nats/dim (gap %.4f <= 0.15), lowest along training %.4f", final_nll, oracle,
             final_nll - oracle, lowest) +
             fmt(" (>= oracle - 0.05), %.1f s", secs));
}

void mechanism() {
  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) worst = std::max(worst, verify::mechanism_deviation(seed, 4, kMechanismDraws));
  report(6, "mechanism", worst < kMechanismTol,
         fmt("snac layer with true projections, n=1e5: max(|mean|, |std-1|) = %.4f (< %.2f)", worst, kMechanismTol));
}

void comparison() {
  const RunConfig rc;
  const Dataset data = make_dataset(rc.train.data);
  const auto start = std::chrono::steady_clock::now();
  const std::string first = comparison_csv(compare_modes(rc.train, data, rc.eval).table);
  const std::string second = comparison_csv(compare_modes(rc.train, data, rc.eval).table);
  const bool has_oracle = first.find("\noracle,") != std::string::npos;
  report(7, "zero-shot comparison", first == second && has_oracle,
         std::string("default config, re-run byte-equal: ") + (first == second ? "yes" : "no") +
             ", oracle row: " + (has_oracle ? "yes" : "no") + fmt(", %.1f s", seconds_since(start)));
  std::fputs(first.c_str(), stdout);
}

void resume() {
  const TrainConfig c;
  const Dataset data = make_dataset(c.data);
  const Checkpoint full = train(c, data);
  TrainConfig part = c;
  part.steps = 700;
  const auto path = std::filesystem::temp_directory_path() / "snac_acceptance_resume.json";
  save_checkpoint(path, train(part, data));
  const Checkpoint loaded = load_checkpoint(path);
  std::filesystem::remove(path);
  const Checkpoint resumed = train(c, data, &loaded);
  std::size_t equal = 0;
  for (std::size_t i = 0; i < std::min(resumed.history.size(), full.history.size()); ++i)
    equal += resumed.history[i] == full.history[i];
  const bool same = resumed.history == full.history && resumed.params == full.params;
  report(8, "checkpoint resume", same,
         fmt("2000 steps vs 700 + save/load + 1300: %.0f of %.0f losses bit-identical, params identical: ",
             static_cast<double>(equal), static_cast<double>(full.history.size())) +
             (resumed.params == full.params ? "yes" : "no"));
}

void check_command(const char* cli) {
  const auto start = std::chrono::steady_clock::now();
  const std::string cmd = std::string("\"") + cli + "\" check > /dev/null";
  const int status = std::system(cmd.c_str());
  const double secs = seconds_since(start);
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  report(9, "check command", code == 0 && secs < kCheckSeconds,
         fmt("exit code %.0f, %.2f s (< %.0f s)", static_cast<double>(code), secs, kCheckSeconds));
}

}  // namespace

int main(int argc, char** argv) {
  const char* cli = argc > 1 ? argv[1] : SNACFLOW_CLI;
  const verify::CheckOptions options;
  invertibility(options);
  logdet(options);
  gradients(options);
  identity(options);
  oracle_floor();
  mechanism();
  comparison();
  resume();
  check_command(cli);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
