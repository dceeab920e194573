#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "mpmorph/config.hpp"
#include "mpmorph/errors.hpp"
#include "mpmorph/log.hpp"
#include "mpmorph/parallel.hpp"
#include "mpmorph/ply.hpp"
#include "mpmorph/tape.hpp"
#include "mpmorph_cli/cli.hpp"

namespace mpmorph::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

void apply(SceneConfig& c, const Overrides& o) {
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.deterministic) c.sim.deterministic = *o.deterministic;
  if (o.passes) c.optimizer.passes = *o.passes;
  if (o.iterations) c.optimizer.iterations = *o.iterations;
  if (o.control_period) c.optimizer.control_period = *o.control_period;
  if (o.segment_len) c.optimizer.segment_len = *o.segment_len;
  if (o.loss) c.optimizer.loss = *o.loss;
  if (o.seed) c.seed = *o.seed;
  if (o.frames) c.frames = *o.frames;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out || !(out << text)) throw IoError("cannot write '" + path.string() + "'");
}

class CsvTrace {
 public:
  explicit CsvTrace(const fs::path& path) : f_(std::fopen(path.string().c_str(), "w")) {
    if (!f_) throw IoError("cannot write '" + path.string() + "'");
    std::fprintf(f_, "segment,pass,layer,iter,loss,gradnorm,alpha\n");
  }
  ~CsvTrace() {
    if (f_) std::fclose(f_);
  }
  CsvTrace(const CsvTrace&) = delete;
  CsvTrace& operator=(const CsvTrace&) = delete;

  void operator()(const TraceRecord& r) {
    std::fprintf(f_, "%d,%d,%d,%d,%.17g,%.17g,%.17g\n", r.segment, r.pass, r.layer, r.iter, r.loss, r.gradnorm,
                 r.alpha);
    std::fflush(f_);
  }

 private:
  std::FILE* f_;
};

/// Loads, overrides and validates; never touches the output directory.
SceneConfig prepare(const std::string& config_path, const Overrides& overrides) {
  if (config_path.empty()) throw ConfigError("no --config given");
  if (!fs::exists(config_path)) throw ConfigError("config file '" + config_path + "' not found");
  SceneConfig c = load_config(config_path);
  apply(c, overrides);
  c.validate();
  return c;
}

template <int Dim>
int morph(const SceneConfig& config, int threads, RunSummary* out) {
  const auto t_start = Clock::now();
  Scene<Dim> scene;
  try {
    scene = build_scene<Dim>(config);
  } catch (const OutOfDomain& e) {
    log(LogLevel::kError, std::string("scene: ") + e.what());
    return kConfigError;
  } catch (const EmptyGeometry& e) {
    log(LogLevel::kError, std::string("scene: ") + e.what());
    return kConfigError;
  }

  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  write_text(dir / "effective_config.json", serialize_config(config));
  fs::remove(dir / "summary.json");  // a stale summary must not outlive a failed run

  CsvTrace csv(dir / "loss_trace.csv");
  const TraceSink trace = [&csv](const TraceRecord& r) { csv(r); };
  const FrameSink<Dim> frames = [&dir](const FrameRecord<Dim>& rec) { write_frame<Dim>(rec, dir); };

  log_info("morph: " + std::to_string(scene.source.size()) + " particles, " + std::to_string(config.frames) +
           " frames, loss " + to_string(config.optimizer.loss) + ", " + std::to_string(threads) + " thread(s)");
  const ChainResult<Dim> result =
      chain_segments<Dim>(scene.source, scene.objective, scene.plan, config.frames, scene.params, frames, trace);

  RunSummary s;
  s.initial_loss = result.initial_loss;
  s.final_loss = result.final_loss;
  s.accuracy = accuracy_percent(result.initial_loss, result.final_loss);
  s.loss_kind = to_string(config.optimizer.loss);
  s.passes = config.optimizer.passes;
  s.iterations = config.optimizer.iterations;
  s.control_period = config.optimizer.control_period;
  s.segment_len = config.optimizer.segment_len;
  s.segments = static_cast<int>(result.segment_losses.size());
  s.frames = config.frames;
  s.updates = result.updates;
  s.threads = threads;
  s.deterministic = config.sim.deterministic;
  s.particles = scene.source.size();
  s.peak_tape_states = result.peak_tape_states;
  s.times = result.times;
  s.wall_seconds = std::chrono::duration<double>(Clock::now() - t_start).count();
  write_text(dir / "summary.json", summary_json(s));
  log_info("morph: loss " + std::to_string(s.initial_loss) + " -> " + std::to_string(s.final_loss) +
           " (accuracy " + std::to_string(s.accuracy) + "%)");
  if (out) *out = s;
  return kOk;
}

template <int Dim>
int simulate_forward(const SceneConfig& config, int threads) {
  const auto t_start = Clock::now();
  Scene<Dim> scene = build_scene<Dim>(config);
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  write_text(dir / "effective_config.json", serialize_config(config));

  StepWorkspace<Dim> ws;
  ParticleSet<Dim> state = scene.source;
  const ControlSequence<Dim> none;
  const double initial = scene.objective.value(state, scene.params);
  for (int k = 1; k <= config.frames; ++k) {
    state = simulate<Dim>(std::move(state), none, k, k, scene.params, ws);
    write_frame<Dim>(FrameRecord<Dim>{k, state.x, scene.objective.particle_channel(state, scene.params)}, dir);
  }
  nlohmann::json j;
  j["initial_loss"] = initial;
  j["final_loss"] = scene.objective.value(state, scene.params);
  j["frames"] = config.frames;
  j["particles"] = state.size();
  j["threads"] = threads;
  j["wall_seconds"] = std::chrono::duration<double>(Clock::now() - t_start).count();
  write_text(dir / "summary.json", j.dump(2) + "\n");
  return kOk;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    log(LogLevel::kError, std::string("config error: ") + e.what());
    return kConfigError;
  } catch (const ParseError& e) {
    log(LogLevel::kError, std::string("parse error: ") + e.what());
    return kConfigError;
  } catch (const IoError& e) {
    log(LogLevel::kError, std::string("i/o error: ") + e.what());
    return kConfigError;
  } catch (const SimulationError& e) {
    log(LogLevel::kError, std::string("simulation error: ") + e.what());
    return kSimulationError;
  } catch (const SingularDeformation& e) {
    log(LogLevel::kError, std::string("simulation error: ") + e.what());
    return kSimulationError;
  } catch (const OutOfDomain& e) {
    log(LogLevel::kError, std::string("simulation error: ") + e.what());
    return kSimulationError;
  } catch (const Error& e) {
    log(LogLevel::kError, std::string("optimization error: ") + e.what());
    return kOptimizationError;
  } catch (const fs::filesystem_error& e) {
    log(LogLevel::kError, std::string("i/o error: ") + e.what());
    return kConfigError;
  }
}

}  // namespace

std::string summary_json(const RunSummary& s) {
  nlohmann::json j;
  j["initial_loss"] = s.initial_loss;
  j["final_loss"] = s.final_loss;
  j["accuracy"] = s.accuracy;
  j["loss"] = s.loss_kind;
  j["passes"] = s.passes;
  j["iterations"] = s.iterations;
  j["control_period"] = s.control_period;
  j["segment_len"] = s.segment_len;
  j["segments"] = s.segments;
  j["frames"] = s.frames;
  j["updates"] = s.updates;
  j["threads"] = s.threads;
  j["deterministic"] = s.deterministic;
  j["particles"] = s.particles;
  j["peak_tape_states"] = s.peak_tape_states;
  j["times"] = {{"simulate", s.times.simulate},
                {"evaluate", s.times.evaluate},
                {"backprop", s.times.backprop},
                {"line_search", s.times.line_search},
                {"io", s.times.io}};
  j["wall_seconds"] = s.wall_seconds;
  return j.dump(2) + "\n";
}

int resolve_threads(std::optional<int> flag) {
  if (flag && *flag > 0) return *flag;
  if (const char* env = std::getenv("MPMORPH_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    log_warning(std::string("ignoring MPMORPH_THREADS='") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int cmd_morph(const std::string& config_path, const Overrides& overrides, RunSummary* summary) {
  return guarded([&] {
    const SceneConfig config = prepare(config_path, overrides);
    const int threads = resolve_threads(overrides.threads);
    set_num_threads(threads);
    return config.dim == 2 ? morph<2>(config, threads, summary) : morph<3>(config, threads, summary);
  });
}

int cmd_simulate(const std::string& config_path, const Overrides& overrides) {
  return guarded([&] {
    const SceneConfig config = prepare(config_path, overrides);
    const int threads = resolve_threads(overrides.threads);
    set_num_threads(threads);
    return config.dim == 2 ? simulate_forward<2>(config, threads) : simulate_forward<3>(config, threads);
  });
}

int cmd_gradcheck(const GradcheckArgs& args) {
  hooks::set_adjoint_corruption(args.corrupt);
  int failed = 0;
  std::size_t count = 0;
  run_gradcheck(args.options, [&](const GradcheckResult& r) {
    ++count;
    if (!r.passed) ++failed;
    std::printf("%-22s %s  max_rel_err=%.3e  checked=%d/%d  max_abs_small=%.3e  %.2fs\n", r.scene.name().c_str(),
                r.passed ? "PASS" : "FAIL", r.max_rel_error, r.checked, r.entries, r.max_abs_error_small,
                r.seconds);
    std::fflush(stdout);
  });
  hooks::set_adjoint_corruption(0.0);
  std::printf("gradcheck: %zu case(s), %d failed\n", count, failed);
  if (count == 0) {
    log(LogLevel::kError, "gradcheck: filter matched no case");
    return kUsage;
  }
  return failed == 0 ? kOk : kGradcheckFailed;
}

}  // namespace mpmorph::cli
