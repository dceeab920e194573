#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "mpmorph/log.hpp"
#include "mpmorph/parallel.hpp"
#include "mpmorph/transfer.hpp"
#include "mpmorph_cli/cli.hpp"

namespace mpmorph::cli {

namespace {

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ull;
  void add(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < bytes; ++k) {
      h ^= p[k];
      h *= 1099511628211ull;
    }
  }
};

template <int Dim>
std::uint64_t hash_state(const ParticleSet<Dim>& s) {
  Fnv1a f;
  for (std::size_t p = 0; p < s.size(); ++p) {
    f.add(s.x[p].data(), sizeof(double) * Dim);
    f.add(s.v[p].data(), sizeof(double) * Dim);
    f.add(s.F[p].data(), sizeof(double) * Dim * Dim);
    f.add(s.C[p].data(), sizeof(double) * Dim * Dim);
  }
  return f.h;
}

template <int Dim>
ParticleSet<Dim> bench_particles(const BenchArgs& args, const SimParams<Dim>& params) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double L = params.domain_length();
  VecField<Dim> x(static_cast<std::size_t>(args.particles));
  for (auto& p : x)
    for (int a = 0; a < Dim; ++a) p[a] = L * (0.25 + 0.5 * u(rng));
  const double V0 = std::pow(0.5 * L, Dim) / static_cast<double>(x.size());
  ParticleSet<Dim> s = ParticleSet<Dim>::at_rest(std::move(x), params.rho * V0, V0);
  for (std::size_t p = 0; p < s.size(); ++p)
    for (int a = 0; a < Dim; ++a) {
      s.v[p][a] = 0.1 * (u(rng) - 0.5);
      s.F[p](a, a) += 0.02 * (u(rng) - 0.5);
    }
  return s;
}

template <int Dim>
BenchResult bench(const BenchArgs& args) {
  SimParams<Dim> params;
  params.grid_res = args.grid_res;
  params.dx = 1.0 / args.grid_res;
  params.deterministic = args.deterministic;
  const ParticleSet<Dim> start = bench_particles<Dim>(args, params);

  std::vector<int> threads = args.threads;
  if (std::find(threads.begin(), threads.end(), 1) == threads.end()) threads.insert(threads.begin(), 1);
  std::sort(threads.begin(), threads.end());
  threads.erase(std::unique(threads.begin(), threads.end()), threads.end());

  const int previous = num_threads();
  BenchResult result;
  double baseline = 0.0;
  for (int t : threads) {
    set_num_threads(t);
    std::vector<double> times;
    std::uint64_t hash = 0;
    for (int r = 0; r < std::max(1, args.repeats); ++r) {
      ParticleSet<Dim> s = start;
      StepWorkspace<Dim> ws;
      const auto t0 = std::chrono::steady_clock::now();
      for (int k = 0; k < args.steps; ++k) step_in_place<Dim>(s, params, ws);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      hash = hash_state<Dim>(s);
    }
    std::sort(times.begin(), times.end());
    BenchRow row;
    row.threads = t;
    row.seconds = times[times.size() / 2];
    if (t == 1) baseline = row.seconds;
    row.speedup = row.seconds > 0.0 ? baseline / row.seconds : 0.0;
    row.hash = hash;
    if (!result.rows.empty() && result.rows.front().hash != hash) result.identical = false;
    result.rows.push_back(row);
  }
  set_num_threads(previous);
  return result;
}

}  // namespace

BenchResult run_bench(const BenchArgs& args) { return args.dim == 2 ? bench<2>(args) : bench<3>(args); }

int cmd_bench(const BenchArgs& args) {
  if (args.particles < 1 || args.steps < 1 || args.grid_res < 8) {
    log(LogLevel::kError, "bench: particles, steps must be positive and grid_res at least 8");
    return kUsage;
  }
  const BenchResult r = run_bench(args);
  std::printf("threads  seconds     speedup  hash\n");
  for (const BenchRow& row : r.rows)
    std::printf("%7d  %10.4f  %7.2f  %016llx\n", row.threads, row.seconds, row.speedup,
                static_cast<unsigned long long>(row.hash));
  if (args.deterministic)
    std::printf("deterministic results %s across thread counts\n", r.identical ? "identical" : "DIFFER");
  if (!args.output_dir.empty()) {
    std::filesystem::create_directories(args.output_dir);
    nlohmann::json j;
    j["particles"] = args.particles;
    j["steps"] = args.steps;
    j["dim"] = args.dim;
    j["grid_res"] = args.grid_res;
    j["deterministic"] = args.deterministic;
    j["identical"] = r.identical;
    for (const BenchRow& row : r.rows) {
      char hex[17];
      std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(row.hash));
      j["rows"].push_back({{"threads", row.threads}, {"seconds", row.seconds}, {"speedup", row.speedup}, {"hash", hex}});
    }
    std::ofstream(std::filesystem::path(args.output_dir) / "bench.json") << j.dump(2) << "\n";
  }
  return kOk;
}

}  // namespace mpmorph::cli
