#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpmorph/geometry.hpp"
#include "mpmorph/loss.hpp"
#include "mpmorph/optimizer.hpp"
#include "mpmorph/seeding.hpp"
#include "mpmorph/sim_params.hpp"

namespace mpmorph {

struct SimConfig {
  double mu = 40.0;
  double lambda = 40.0;
  double density = 75.0;
  double zeta = 0.5;
  double gamma = 0.955;
  double dt = 0.00833;
  int grid_res = 32;
  double dx = 1.0 / 32.0;
  std::vector<double> gravity;  // empty means zero
  double blend = 0.0;
  bool gate = true;
  bool deterministic = true;

  bool operator==(const SimConfig&) const = default;
};

struct OptimizerConfig {
  int passes = 3;
  int iterations = 4;
  int control_period = 10;
  int segment_len = 10;
  LossKind loss = LossKind::kLogMass;
  double alpha = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double kappa = 1e-6;
  int max_halvings = 20;
  bool persist_moments = false;
  double mass_scale = 1.0;

  bool operator==(const OptimizerConfig&) const = default;
};

struct SeedingConfig {
  SeedingOptions options;
  /// Rescale target masses so their total equals the source mass.
  bool match_target_mass = true;

  bool operator==(const SeedingConfig&) const = default;
};

/// One morph run. The JSON layout is documented in docs/config.md.
struct SceneConfig {
  int dim = 3;
  GeometrySpec source;
  GeometrySpec target;
  SimConfig sim;
  OptimizerConfig optimizer;
  SeedingConfig seeding;
  std::uint64_t seed = 0;
  int frames = 120;
  std::string output_dir = "out";

  bool operator==(const SceneConfig&) const = default;

  /// Value checks plus existence of referenced point-cloud files.
  void validate() const;
};

/// Strict parse: unknown keys and wrong types raise ConfigError.
SceneConfig parse_config(const std::string& json_text);
std::string serialize_config(const SceneConfig& config);

/// Reads and parses a file; relative point-cloud paths are resolved against
/// the file's directory. Throws ConfigError (also for a missing file).
SceneConfig load_config(const std::filesystem::path& path);

template <int Dim>
SimParams<Dim> make_sim_params(const SceneConfig& config);

/// Plan with schedule.N = segment_len.
MorphPlan make_plan(const SceneConfig& config);

/// Seeded source, target and objective of a config.
template <int Dim>
struct Scene {
  SimParams<Dim> params;
  MorphPlan plan;
  ParticleSet<Dim> source;
  VecField<Dim> target_x;
  std::vector<double> target_m;
  Objective<Dim> objective;
};

template <int Dim>
Scene<Dim> build_scene(const SceneConfig& config);

}  // namespace mpmorph
