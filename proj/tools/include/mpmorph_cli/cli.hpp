#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpmorph/gradcheck.hpp"
#include "mpmorph/loss.hpp"
#include "mpmorph/optimizer.hpp"

namespace mpmorph::cli {

/// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigError = 2,
  kSimulationError = 3,
  kOptimizationError = 4,
  kGradcheckFailed = 5,
};

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::string> output_dir;
  std::optional<int> threads;
  std::optional<bool> deterministic;
  std::optional<int> passes;
  std::optional<int> iterations;
  std::optional<int> control_period;
  std::optional<int> segment_len;
  std::optional<LossKind> loss;
  std::optional<std::uint64_t> seed;
  std::optional<int> frames;
};

struct RunSummary {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double accuracy = 0.0;
  std::string loss_kind;
  int passes = 0;
  int iterations = 0;
  int control_period = 0;
  int segment_len = 0;
  int segments = 0;
  int frames = 0;
  int updates = 0;
  int threads = 1;
  bool deterministic = true;
  std::size_t particles = 0;
  std::size_t peak_tape_states = 0;
  PhaseTimes times;
  double wall_seconds = 0.0;
};

std::string summary_json(const RunSummary& s);

/// Thread count: flag, else MPMORPH_THREADS, else hardware parallelism.
int resolve_threads(std::optional<int> flag);

int cmd_morph(const std::string& config_path, const Overrides& overrides, RunSummary* summary = nullptr);

/// Forward-only run of the config's source for its frame count; writes frames.
int cmd_simulate(const std::string& config_path, const Overrides& overrides);

struct GradcheckArgs {
  GradcheckOptions options;
  /// Test hook: corrupts the stress adjoint by this relative amount.
  double corrupt = 0.0;
};
int cmd_gradcheck(const GradcheckArgs& args);

struct BenchArgs {
  int particles = 50000;
  int steps = 10;
  int dim = 3;
  int grid_res = 64;
  std::vector<int> threads{1, 2, 4, 8};
  int repeats = 1;
  bool deterministic = true;
  std::string output_dir;  // optional: writes bench.json
};

struct BenchRow {
  int threads = 1;
  double seconds = 0.0;
  double speedup = 1.0;
  std::uint64_t hash = 0;  // FNV-1a of the final state bytes
};

struct BenchResult {
  std::vector<BenchRow> rows;
  bool identical = true;  // every row hashed equal
};

BenchResult run_bench(const BenchArgs& args);
int cmd_bench(const BenchArgs& args);

/// Full argument vector entry point (argv[0] included).
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace mpmorph::cli
