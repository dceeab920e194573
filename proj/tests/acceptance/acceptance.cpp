// Acceptance suite: one PASS/FAIL line per criterion.
//
//   mpmorph_acceptance            run every criterion
//   mpmorph_acceptance 4 7        run criteria 4 and 7
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "mpmorph/config.hpp"
#include "mpmorph/errors.hpp"
#include "mpmorph/gradcheck.hpp"
#include "mpmorph/kernel.hpp"
#include "mpmorph/log.hpp"
#include "mpmorph/optimizer.hpp"
#include "mpmorph/parallel.hpp"
#include "mpmorph/stress.hpp"
#include "mpmorph/tape.hpp"
#include "mpmorph/transfer.hpp"
#include "mpmorph_cli/cli.hpp"

namespace fs = std::filesystem;
using namespace mpmorph;

namespace {

// Tolerances and budgets.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradFdFloor = 1e-8;
constexpr double kGradSeconds = 60.0;
constexpr double kMassTol = 1e-12;
constexpr double kMomentumTol = 1e-10;
constexpr double kKernelTol = 1e-12;
constexpr double kSuiteSeconds = 5.0;
constexpr double kRotationTol = 1e-10;
constexpr double kStressFdTol = 1e-6;
constexpr int kStressSamples = 100;
constexpr double kMinAccuracy = 90.0;
constexpr double kDeskSeconds = 600.0;
constexpr double kPassLossRatio = 1.05;
constexpr double kPassTimeBand = 0.10;
constexpr int kPassRepeats = 3;
constexpr double kChainLossRatio = 1.10;
constexpr double kEjectionRadii = 2.0;
constexpr int kFuzzCases = 1000;
constexpr int kFuzzHalvings = 20;
constexpr int kScalingParticles = 50000;
constexpr int kScalingThreads = 8;
constexpr double kMinSpeedup = 3.0;
constexpr double kAccuracyTol = 0.01;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

fs::path config_path(const char* name) { return fs::path(MPMORPH_SOURCE_DIR) / "configs" / name; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(MPMORPH_ACCEPTANCE_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 1 ---------------------------------------------------------------------------

Outcome adjoint_correctness() {
  GradcheckOptions opt;
  opt.rel_tol = kGradRelTol;
  opt.fd_floor = kGradFdFloor;
  const auto t0 = Clock::now();
  int failed = 0, cases = 0, checked = 0;
  double worst = 0.0;
  std::string worst_case;
  for (const GradcheckResult& r : run_gradcheck(opt)) {
    ++cases;
    checked += r.checked;
    if (!r.passed) ++failed;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_case = r.scene.name();
    }
  }
  const double secs = since(t0);
  return {failed == 0 && cases == 54 && secs < kGradSeconds,
          fmt("%d cases, %d entries checked, %d failed, worst rel err %.2e (%s), %.1f s (limit %.0f s)", cases,
              checked, failed, worst, worst_case.c_str(), secs, kGradSeconds)};
}

// 2 ---------------------------------------------------------------------------

template <int Dim>
ParticleSet<Dim> random_scene(std::mt19937_64& rng, const SimParams<Dim>& params, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VecField<Dim> x(n);
  for (auto& p : x)
    for (int a = 0; a < Dim; ++a) p[a] = 0.5 + 0.25 * u(rng);
  ParticleSet<Dim> s = ParticleSet<Dim>::at_rest(std::move(x), 1.0, 1e-4);
  for (std::size_t p = 0; p < n; ++p) {
    s.m[p] = 0.5 + 0.5 * (u(rng) + 1.0);
    for (int a = 0; a < Dim; ++a) s.v[p][a] = u(rng);
  }
  return s;
}

template <int Dim>
void conservation_dim(std::mt19937_64& rng, double& mass_err, double& mom_err, double& pou_err, double& lin_err) {
  SimParams<Dim> params;
  params.zeta = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const ParticleSet<Dim> s = random_scene<Dim>(rng, params, 2000);
    const Grid<Dim> g = p2g<Dim>(s, params);
    double gm = 0.0;
    Vec<Dim> gp = Vec<Dim>::Zero();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      gm += g.mass[i];
      gp += g.momentum[i];
    }
    const double pm = total_mass(s);
    const Vec<Dim> pp = total_momentum(s);
    mass_err = std::max(mass_err, std::abs(gm - pm) / pm);
    mom_err = std::max(mom_err, (gp - pp).norm() / pp.norm());
    for (std::size_t p = 0; p < s.size(); p += 10) {
      KernelStencil<Dim> st(s.x[p], params.dx);
      double w = 0.0;
      Vec<Dim> xs = Vec<Dim>::Zero();
      st.for_each(g, s.x[p], [&](std::size_t i, double wi, const Vec<Dim>&, const Vec<Dim>&) {
        w += wi;
        xs += wi * g.position(g.node(i));
      });
      pou_err = std::max(pou_err, std::abs(w - 1.0));
      lin_err = std::max(lin_err, (xs - s.x[p]).norm());
    }
  }
}

Outcome conservation() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double mass = 0.0, mom = 0.0, pou = 0.0, lin = 0.0;
  conservation_dim<2>(rng, mass, mom, pou, lin);
  conservation_dim<3>(rng, mass, mom, pou, lin);
  const double secs = since(t0);
  return {mass <= kMassTol && mom <= kMomentumTol && pou <= kKernelTol && lin <= kKernelTol && secs < kSuiteSeconds,
          fmt("mass %.1e (<= %.0e), momentum %.1e (<= %.0e), partition %.1e, linear %.1e (<= %.0e), %.2f s", mass,
              kMassTol, mom, kMomentumTol, pou, lin, kKernelTol, secs)};
}

// 3 ---------------------------------------------------------------------------

Outcome stress_model() {
  const auto t0 = Clock::now();
  SimParams<3> params;
  params.mu = 3.0;
  params.lambda = 7.0;
  const double rest = pk1_stress<3>(Mat<3>::Identity(), params).P.norm();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double rot = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vec<3> axis(u(rng), u(rng), u(rng));
    const Mat<3> R = Eigen::AngleAxisd(3.0 * u(rng), axis.normalized()).toRotationMatrix();
    rot = std::max(rot, pk1_stress<3>(R, params).P.norm());
  }
  double fd_err = 0.0;
  int samples = 0;
  const double h = 1e-6;
  while (samples < kStressSamples) {
    Mat<3> F = Mat<3>::Identity();
    for (int i = 0; i < 9; ++i) F(i) += 0.3 * u(rng);
    if (F.jacobiSvd().singularValues().minCoeff() < 0.3 || F.determinant() <= 0.0) continue;
    ++samples;
    const Mat<3> P = pk1_stress<3>(F, params).P;
    Mat<3> fd;
    for (int i = 0; i < 9; ++i) {
      Mat<3> Fp = F, Fm = F;
      Fp(i) += h;
      Fm(i) -= h;
      fd(i) = (corotated_energy<3>(Fp, params) - corotated_energy<3>(Fm, params)) / (2 * h);
    }
    fd_err = std::max(fd_err, (P - fd).norm() / P.norm());
  }
  const double secs = since(t0);
  return {rest <= kRotationTol && rot <= kRotationTol && fd_err < kStressFdTol && secs < kSuiteSeconds,
          fmt("|P(I)| %.1e, max |P(R)| %.1e (<= %.0e), energy FD rel err %.1e over %d samples (< %.0e), %.2f s", rest,
              rot, kRotationTol, fd_err, samples, kStressFdTol, secs)};
}

// 4 ---------------------------------------------------------------------------

Outcome desk_morph() {
  const fs::path out = scratch("desk_morph");
  cli::Overrides o;
  o.output_dir = out.string();
  o.threads = 1;
  cli::RunSummary s;
  const auto t0 = Clock::now();
  const int code = cli::cmd_morph(config_path("desk_sphere_to_cube.json").string(), o, &s);
  const double secs = since(t0);
  if (code != cli::kOk) return {false, fmt("morph exited with %d", code)};
  return {s.accuracy >= kMinAccuracy && secs < kDeskSeconds,
          fmt("%zu particles, %d frames, loss %.4g -> %.4g, accuracy %.2f%% (>= %.0f%%), %.1f s (limit %.0f s)",
              s.particles, s.frames, s.initial_loss, s.final_loss, s.accuracy, kMinAccuracy, secs, kDeskSeconds)};
}

// 5, 6, 7 share a library-level morph runner without frame output.

struct MorphRun {
  double initial = 0.0;
  double final_loss = 0.0;
  double seconds = 0.0;
  std::size_t peak_states = 0;
  VecField<3> final_x;
};

MorphRun morph3(SceneConfig config) {
  set_num_threads(1);
  const Scene<3> scene = build_scene<3>(config);
  const auto t0 = Clock::now();
  const ChainResult<3> r = chain_segments<3>(scene.source, scene.objective, scene.plan, config.frames, scene.params);
  MorphRun m;
  m.seconds = since(t0);
  m.initial = r.initial_loss;
  m.final_loss = r.final_loss;
  m.peak_states = r.peak_tape_states;
  m.final_x = r.final_state.x;
  return m;
}

Outcome multi_pass() {
  const SceneConfig base = load_config(config_path("desk_sphere_to_cube.json"));
  SceneConfig three = base, one = base;
  three.optimizer.passes = 3;
  three.optimizer.iterations = 4;
  one.optimizer.passes = 1;
  one.optimizer.iterations = 12;
  // Wall time on a shared machine drifts by well over 10% between runs;
  // interleaved repeats and the fastest of each keep the comparison fair.
  double t3 = INFINITY, t1 = INFINITY, l3 = 0.0, l1 = 0.0;
  for (int k = 0; k < kPassRepeats; ++k) {
    const MorphRun a = morph3(three);
    const MorphRun b = morph3(one);
    t3 = std::min(t3, a.seconds);
    t1 = std::min(t1, b.seconds);
    l3 = a.final_loss;
    l1 = b.final_loss;
  }
  const double ratio = l3 / l1;
  const double dt = t3 / t1 - 1.0;
  return {ratio <= kPassLossRatio && std::abs(dt) <= kPassTimeBand,
          fmt("3x4 loss %.4g vs 1x12 loss %.4g (ratio %.3f, limit %.2f); time %.1f s vs %.1f s (%+.1f%%, band "
              "+-%.0f%%, best of %d)",
              l3, l1, ratio, kPassLossRatio, t3, t1, 100.0 * dt, 100.0 * kPassTimeBand, kPassRepeats)};
}

Outcome chaining() {
  SceneConfig chained = load_config(config_path("desk_sphere_to_cube.json"));
  chained.optimizer.control_period = 12;
  chained.optimizer.segment_len = 12;
  SceneConfig unchained = chained;
  unchained.optimizer.segment_len = chained.frames;
  const MorphRun a = morph3(chained);
  const MorphRun b = morph3(unchained);
  const double ratio = a.final_loss / b.final_loss;
  const std::size_t segment_states = static_cast<std::size_t>(chained.optimizer.segment_len + 1);
  return {ratio <= kChainLossRatio && a.peak_states == segment_states,
          fmt("chained loss %.4g vs unchained %.4g (ratio %.3f, limit %.2f); peak tape states %zu (one segment = %zu), "
              "unchained %zu; %.0f s + %.0f s",
              a.final_loss, b.final_loss, ratio, kChainLossRatio, a.peak_states, segment_states, b.peak_states,
              a.seconds, b.seconds)};
}

Outcome mass_ejection() {
  const SceneConfig base = load_config(config_path("desk_two_blobs_to_one.json"));
  const Vec<3> centre(base.target.center[0], base.target.center[1], base.target.center[2]);
  const double limit = kEjectionRadii * base.target.radius;
  const auto ejected = [&](const MorphRun& r) {
    int n = 0;
    for (const auto& x : r.final_x)
      if ((x - centre).norm() > limit) ++n;
    return n;
  };
  SceneConfig mass = base, logmass = base;
  mass.optimizer.loss = LossKind::kMass;
  logmass.optimizer.loss = LossKind::kLogMass;
  const MorphRun a = morph3(mass);
  const MorphRun b = morph3(logmass);
  const int na = ejected(a), nb = ejected(b);
  return {na >= 1 && nb == 0,
          fmt("particles beyond %.3f: mass loss %d (>= 1), log-mass loss %d (== 0), of %zu", limit, na, nb,
              a.final_x.size())};
}

// 8 ---------------------------------------------------------------------------

Outcome line_search_fuzz() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int accepted = 0, failed_at_cap = 0, violations = 0;
  for (int c = 0; c < kFuzzCases; ++c) {
    const int dim = 1 + static_cast<int>(rng() % 8);
    Eigen::VectorXd x(dim), dx(dim), a(dim);
    for (int i = 0; i < dim; ++i) {
      x[i] = 3.0 * u(rng);
      dx[i] = 5.0 * u(rng);
      a[i] = std::exp(3.0 * u(rng));
    }
    const int kind = c % 3;
    const double wiggle = std::exp(2.0 * u(rng));
    const std::function<double(const Eigen::VectorXd&)> loss = [&](const Eigen::VectorXd& y) {
      switch (kind) {
        case 0: return (a.array() * y.array().square()).sum();
        case 1: return (a.array() * y.array().square()).sum() + std::sin(wiggle * y.sum());
        default: return std::log1p((a.array() * y.array().abs()).sum()) + 0.1 * std::cos(wiggle * y.norm());
      }
    };
    const double L0 = loss(x) + (c % 5 == 0 ? -std::abs(u(rng)) : 0.0);
    const double alpha0 = std::exp(2.0 * u(rng));
    int calls = 0;
    const auto counted = [&](const Eigen::VectorXd& y) {
      ++calls;
      return loss(y);
    };
    try {
      const double alpha = compute_step_size(L0, x, dx, counted, alpha0, kFuzzHalvings);
      ++accepted;
      if (!(loss(x + alpha * dx) <= L0) || alpha > alpha0) ++violations;
    } catch (const LineSearchFailed&) {
      ++failed_at_cap;
      if (calls != kFuzzHalvings + 1) ++violations;
    }
  }
  return {violations == 0, fmt("%d cases: %d accepted with L <= L0, %d raised at the %d-halving cap, %d violations",
                               kFuzzCases, accepted, failed_at_cap, kFuzzHalvings, violations)};
}

// 9 ---------------------------------------------------------------------------

Outcome scaling() {
  cli::BenchArgs args;
  args.particles = kScalingParticles;
  args.steps = 10;
  args.dim = 3;
  args.grid_res = 64;
  args.threads = {1, kScalingThreads};
  const cli::BenchResult r = cli::run_bench(args);
  const cli::BenchRow& top = r.rows.back();
  return {top.speedup >= kMinSpeedup && r.identical,
          fmt("%d particles: %.2f s at 1 thread, %.2f s at %d threads, speedup %.2fx (>= %.1fx); bit-identical: %s; "
              "hardware threads: %d",
              kScalingParticles, r.rows.front().seconds, top.seconds, top.threads, top.speedup, kMinSpeedup,
              r.identical ? "yes" : "no", cli::resolve_threads(std::nullopt))};
}

// 10 --------------------------------------------------------------------------

Outcome accuracy_identity() {
  struct Row {
    double initial, final_loss, printed;
  };
  const Row rows[] = {{5302.69, 91.0895, 98.28}, {11600.0, 300.528, 97.41}, {7685.97, 124.435, 98.38}};
  double worst = 0.0;
  std::string detail;
  for (const Row& r : rows) {
    const double acc = accuracy_percent(r.initial, r.final_loss);
    worst = std::max(worst, std::abs(acc - r.printed));
    detail += fmt("%.6g -> %.6g = %.3f%% (printed %.2f%%); ", r.initial, r.final_loss, acc, r.printed);
  }
  return {worst <= kAccuracyTol, detail + fmt("max deviation %.4f pp (<= %.2f)", worst, kAccuracyTol)};
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "adjoint matches finite differences", adjoint_correctness},
    {2, "conservation suite", conservation},
    {3, "stress model", stress_model},
    {4, "desk morph sphere to cube", desk_morph},
    {5, "multi-pass at fixed budget", multi_pass},
    {6, "chained segments vs unchained", chaining},
    {7, "mass ejection contrast", mass_ejection},
    {8, "line-search contract fuzz", line_search_fuzz},
    {9, "parallel scaling", scaling},
    {10, "accuracy identity on published rows", accuracy_identity},
};

}  // namespace

int main(int argc, char** argv) {
  set_log_level(LogLevel::kError);
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
