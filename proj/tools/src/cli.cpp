#include <CLI11.hpp>

#include "mpmorph/errors.hpp"
#include "mpmorph/log.hpp"
#include "mpmorph/parallel.hpp"
#include "mpmorph_cli/cli.hpp"

namespace mpmorph::cli {

namespace {

struct MorphFlags {
  std::string config;
  std::string output_dir;
  int threads = 0;
  bool deterministic = false;
  bool fast = false;
  int passes = 0;
  int iters = 0;
  int control_period = 0;
  int segment_len = 0;
  int frames = 0;
  std::string loss;
  std::uint64_t seed = 0;
};

void add_run_flags(CLI::App* cmd, MorphFlags& f) {
  cmd->add_option("--config", f.config, "Scene config (JSON)")->required();
  cmd->add_option("--output-dir", f.output_dir, "Directory for frames, trace and summary");
  cmd->add_option("--threads", f.threads, "Worker threads (default: MPMORPH_THREADS or all cores)");
  cmd->add_flag("--deterministic", f.deterministic, "Ordered reductions (bit-reproducible)");
  cmd->add_flag("--fast", f.fast, "Atomic scatter; results may differ in the last bits");
  cmd->add_option("--passes", f.passes, "Optimization passes");
  cmd->add_option("--iters", f.iters, "Adam iterations per control layer and pass");
  cmd->add_option("--control-period", f.control_period, "Timesteps between control layers");
  cmd->add_option("--segment-len", f.segment_len, "Timesteps per chained segment");
  cmd->add_option("--frames", f.frames, "Total frames");
  cmd->add_option("--loss", f.loss, "position | mass | logmass")
      ->check(CLI::IsMember({"position", "mass", "logmass", "log_mass"}));
  cmd->add_option("--seed", f.seed, "Seeding RNG seed");
}

Overrides to_overrides(const MorphFlags& f, const CLI::App* cmd) {
  Overrides o;
  if (cmd->count("--output-dir")) o.output_dir = f.output_dir;
  if (cmd->count("--threads")) o.threads = f.threads;
  if (f.deterministic) o.deterministic = true;
  if (f.fast) o.deterministic = false;
  if (cmd->count("--passes")) o.passes = f.passes;
  if (cmd->count("--iters")) o.iterations = f.iters;
  if (cmd->count("--control-period")) o.control_period = f.control_period;
  if (cmd->count("--segment-len")) o.segment_len = f.segment_len;
  if (cmd->count("--frames")) o.frames = f.frames;
  if (cmd->count("--loss")) o.loss = parse_loss_kind(f.loss);
  if (cmd->count("--seed")) o.seed = f.seed;
  return o;
}

std::vector<LossKind> parse_losses(const std::vector<std::string>& names) {
  std::vector<LossKind> out;
  for (const auto& n : names) out.push_back(parse_loss_kind(n));
  return out;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Differentiable MLS-MPM shape morphing"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  MorphFlags morph_flags;
  CLI::App* morph = app.add_subcommand("morph", "Optimize a morph from a scene config");
  add_run_flags(morph, morph_flags);

  MorphFlags sim_flags;
  CLI::App* simulate = app.add_subcommand("simulate", "Forward simulation without control");
  add_run_flags(simulate, sim_flags);

  GradcheckArgs gc;
  std::vector<std::string> gc_losses;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Adjoint vs finite differences");
  gradcheck->add_option("--dims", gc.options.dims, "Spatial dimensions")->expected(1, -1);
  gradcheck->add_option("--particles", gc.options.particles, "Particle counts")->expected(1, -1);
  gradcheck->add_option("--horizons", gc.options.horizons, "Timestep horizons")->expected(1, -1);
  gradcheck->add_option("--losses", gc_losses, "Loss kinds")
      ->expected(1, -1)
      ->check(CLI::IsMember({"position", "mass", "logmass", "log_mass"}));
  gradcheck->add_option("--filter", gc.options.filter, "Run cases whose name contains this string");
  gradcheck->add_option("--step", gc.options.h, "Finite-difference step");
  gradcheck->add_option("--tol", gc.options.rel_tol, "Relative error threshold");
  gradcheck->add_option("--seed", gc.options.seed, "Scene RNG seed");
  gradcheck->add_option("--corrupt-adjoint", gc.corrupt, "Test hook: perturb the stress adjoint");
  int gc_threads = 0;
  gradcheck->add_option("--threads", gc_threads, "Worker threads");

  BenchArgs bench_args;
  bool bench_fast = false;
  CLI::App* bench = app.add_subcommand("bench", "Forward stepping scaling table");
  bench->add_option("--particles", bench_args.particles, "Particle count");
  bench->add_option("--steps", bench_args.steps, "Timesteps per measurement");
  bench->add_option("--dim", bench_args.dim, "Spatial dimension")->check(CLI::IsMember({2, 3}));
  bench->add_option("--grid-res", bench_args.grid_res, "Nodes per axis");
  bench->add_option("--threads", bench_args.threads, "Thread counts")->expected(1, -1);
  bench->add_option("--repeats", bench_args.repeats, "Repetitions (median is reported)");
  bench->add_flag("--fast", bench_fast, "Atomic scatter instead of the deterministic scheme");
  bench->add_option("--output-dir", bench_args.output_dir, "Writes bench.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  if (verbose) set_log_level(LogLevel::kDebug);
  if (quiet) set_log_level(LogLevel::kWarning);

  try {
    if (*morph) return cmd_morph(morph_flags.config, to_overrides(morph_flags, morph));
    if (*simulate) return cmd_simulate(sim_flags.config, to_overrides(sim_flags, simulate));
    if (*gradcheck) {
      if (!gc_losses.empty()) gc.options.losses = parse_losses(gc_losses);
      if (gc_threads > 0) set_num_threads(gc_threads);
      return cmd_gradcheck(gc);
    }
    if (*bench) {
      bench_args.deterministic = !bench_fast;
      return cmd_bench(bench_args);
    }
  } catch (const ConfigError& e) {
    log(LogLevel::kError, e.what());
    return kConfigError;
  }
  return kUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mpmorph::cli
