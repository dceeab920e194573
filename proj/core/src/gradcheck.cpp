#include "mpmorph/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "mpmorph/tape.hpp"

namespace mpmorph {

namespace {

constexpr int kGridRes = 16;

template <int Dim>
GradcheckResult run_case(const GradcheckCase& scene, const GradcheckOptions& opt) {
  SimParams<Dim> params;
  params.grid_res = kGridRes;
  params.dx = 1.0 / kGridRes;
  // Stiffer than the morph default so control effects dominate FD roundoff;
  // the wave speed still keeps the CFL number below 0.4.
  params.mu = 200.0;
  params.lambda = 200.0;

  std::mt19937_64 rng(opt.seed + 1000003ull * static_cast<std::uint64_t>(scene.particles) +
                      7919ull * static_cast<std::uint64_t>(scene.horizon) + static_cast<std::uint64_t>(Dim));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto rand_mat = [&](double scale) {
    Mat<Dim> M;
    for (int r = 0; r < Dim; ++r)
      for (int c = 0; c < Dim; ++c) M(r, c) = scale * u(rng);
    return M;
  };

  const std::size_t n = static_cast<std::size_t>(scene.particles);
  const double half_width = 2.0 * params.dx;
  VecField<Dim> x(n);
  for (auto& p : x)
    for (int a = 0; a < Dim; ++a) p[a] = 0.5 + half_width * u(rng);
  const double V0 = std::pow(params.dx, Dim) / 4.0;
  ParticleSet<Dim> start = ParticleSet<Dim>::at_rest(std::move(x), params.rho * V0, V0);
  for (std::size_t p = 0; p < n; ++p) {
    for (int a = 0; a < Dim; ++a) start.v[p][a] = 0.1 * u(rng);
    start.F[p] += rand_mat(0.05);
    start.C[p] = rand_mat(0.5);
  }

  MatField<Dim> control(n);
  for (auto& M : control) M = rand_mat(0.02);

  ControlSequence<Dim> controls(static_cast<std::size_t>(scene.horizon));
  controls[0] = control;
  Tape<Dim> tape = record_segment<Dim>(start, controls, scene.horizon, params);

  // Target near the recorded end state keeps the loss small, so FD roundoff stays low.
  const ParticleSet<Dim>& end = tape.final_state();
  VecField<Dim> target_x = end.x;
  for (auto& p : target_x)
    for (int a = 0; a < Dim; ++a) p[a] += 0.01 * params.dx * u(rng);
  const double mass_scale = 1.0 / start.m.front();
  const Objective<Dim> objective =
      Objective<Dim>::make(scene.loss, target_x, end.m, params, mass_scale);

  VecField<Dim> dL_dx;
  objective.gradient(end, params, dL_dx);
  const MatField<Dim> adjoint = backprop<Dim>(tape, dL_dx, 1).dL_dFctrl;

  StepWorkspace<Dim> ws;
  const auto loss_of = [&](const MatField<Dim>& trial) {
    ControlSequence<Dim> seq = controls;
    seq[0] = trial;
    return objective.value(simulate<Dim>(start, seq, 1, scene.horizon, params, ws), params);
  };
  const MatField<Dim> fd = fd_gradient<Dim>(loss_of, control, opt.h);

  GradcheckResult r;
  r.scene = scene;
  for (std::size_t p = 0; p < n; ++p)
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) {
        const double a = adjoint[p](i, j);
        const double b = fd[p](i, j);
        ++r.entries;
        if (std::abs(b) > opt.fd_floor) {
          ++r.checked;
          r.max_rel_error = std::max(r.max_rel_error, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
        } else {
          r.max_abs_error_small = std::max(r.max_abs_error_small, std::abs(a - b));
        }
      }
  r.passed = std::isfinite(r.max_rel_error) && r.max_rel_error < opt.rel_tol && r.max_abs_error_small <= opt.abs_tol;
  return r;
}

}  // namespace

std::string GradcheckCase::name() const {
  return std::to_string(dim) + "d-p" + std::to_string(particles) + "-h" + std::to_string(horizon) + "-" +
         to_string(loss);
}

std::vector<GradcheckCase> gradcheck_cases(const GradcheckOptions& options) {
  std::vector<GradcheckCase> cases;
  for (int dim : options.dims)
    for (int particles : options.particles)
      for (int horizon : options.horizons)
        for (LossKind loss : options.losses) {
          GradcheckCase c{dim, particles, horizon, loss};
          if (options.filter.empty() || c.name().find(options.filter) != std::string::npos) cases.push_back(c);
        }
  return cases;
}

GradcheckResult run_gradcheck_case(const GradcheckCase& scene, const GradcheckOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckResult r = scene.dim == 2 ? run_case<2>(scene, options) : run_case<3>(scene, options);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& options,
                                           const std::function<void(const GradcheckResult&)>& on_result) {
  std::vector<GradcheckResult> results;
  for (const GradcheckCase& c : gradcheck_cases(options)) {
    results.push_back(run_gradcheck_case(c, options));
    if (on_result) on_result(results.back());
  }
  return results;
}

}  // namespace mpmorph
