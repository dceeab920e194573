#include <gtest/gtest.h>

#include <random>

#include "mpmorph/errors.hpp"
#include "mpmorph/gradcheck.hpp"
#include "mpmorph/loss.hpp"
#include "mpmorph/tape.hpp"
#include "test_util.hpp"

namespace mpmorph {
namespace {

using test::random_cluster;
using test::random_mat;
using test::small_params;

TEST(Tape, RejectsEmptyHorizon) {
  auto params = small_params<2>();
  std::mt19937_64 rng(1);
  const auto s = random_cluster<2>(rng, params, 4);
  EXPECT_THROW(record_segment<2>(s, {}, 0, params), Error);
}

TEST(Tape, RestStateStaysPut) {
  auto params = small_params<3>();
  std::mt19937_64 rng(2);
  const auto s = random_cluster<3>(rng, params, 32, 0.0, 0.0, 0.0);
  const Tape<3> tape = record_segment<3>(s, {}, 10, params);
  EXPECT_EQ(tape.final_state().x, s.x);
  EXPECT_EQ(tape.final_state().F, s.F);
}

TEST(Tape, StoresEveryStateAndReplaysBitwise) {
  auto params = small_params<3>();
  std::mt19937_64 rng(3);
  const auto s = random_cluster<3>(rng, params, 64);
  ControlSequence<3> ctrl(3);
  ctrl[0] = MatField<3>(s.size(), Mat<3>::Zero());
  for (auto& M : ctrl[0]) M = random_mat<3>(rng, 0.02);
  Tape<3> tape = record_segment<3>(s, ctrl, 3, params);

  ParticleSet<3> cur = s;
  for (int k = 1; k <= 3; ++k) {
    const MatField<3>& c = ctrl[static_cast<std::size_t>(k - 1)];
    cur = step<3>(cur, std::span<const Mat<3>>(c.data(), c.size()), params);
    EXPECT_EQ(tape.state(k), cur) << k;
  }
  const ParticleSet<3> final_before = tape.final_state();
  tape.record_from(2, ctrl);
  EXPECT_EQ(tape.final_state(), final_before);
}

TEST(Tape, FailingStepIsNamed) {
  auto params = small_params<2>();
  auto s = ParticleSet<2>::at_rest(VecField<2>{Vec<2>(0.5, 0.5)}, 1.0, 1e-3);
  s.v[0] = Vec<2>(60.0, 0.0);  // leaves the grid during step 1
  try {
    record_segment<2>(s, {}, 3, params);
    FAIL() << "expected SimulationError";
  } catch (const SimulationError& e) {
    EXPECT_GE(e.timestep(), 1);
    EXPECT_LE(e.timestep(), 3);
    EXPECT_NE(std::string(e.what()).find("timestep"), std::string::npos);
  }
}

TEST(Backprop, ZeroLossGradientGivesZeroBundle) {
  auto params = small_params<2>();
  std::mt19937_64 rng(4);
  const auto s = random_cluster<2>(rng, params, 16);
  const Tape<2> tape = record_segment<2>(s, {}, 3, params);
  const auto g = backprop<2>(tape, VecField<2>(s.size(), Vec<2>::Zero()), 1);
  for (const auto& M : g.dL_dFctrl) EXPECT_EQ(M.norm(), 0.0);
  EXPECT_TRUE(g.vanishing);
}

TEST(Backprop, RejectsBadLayer) {
  auto params = small_params<2>();
  std::mt19937_64 rng(5);
  const auto s = random_cluster<2>(rng, params, 4);
  const Tape<2> tape = record_segment<2>(s, {}, 3, params);
  const VecField<2> seed(s.size(), Vec<2>::Ones());
  EXPECT_THROW(backprop<2>(tape, seed, 0), Error);
  EXPECT_THROW(backprop<2>(tape, seed, 4), Error);
}

// A lone particle cannot push itself: momentum conservation keeps its path
// independent of its own control, so adjoint and FD must both vanish.
TEST(Backprop, SingleParticlePosition) {
  GradcheckOptions opt;
  for (int horizon : {1, 3}) {
    const GradcheckResult r = run_gradcheck_case({3, 1, horizon, LossKind::kPosition}, opt);
    EXPECT_TRUE(r.passed);
    EXPECT_EQ(r.checked, 0);
    EXPECT_LE(r.max_abs_error_small, 1e-12);
  }
}

TEST(Backprop, SixteenParticles2DLogMass) {
  GradcheckOptions opt;
  const GradcheckResult r = run_gradcheck_case({2, 16, 3, LossKind::kLogMass}, opt);
  EXPECT_EQ(r.entries, 64);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

// Control at an interior layer with zero control elsewhere.
TEST(Backprop, InteriorLayerMatchesFiniteDifferences) {
  auto params = small_params<2>();
  params.mu = params.lambda = 200.0;
  std::mt19937_64 rng(6);
  const auto s = random_cluster<2>(rng, params, 8);
  const int N = 4, layer = 2;
  ControlSequence<2> ctrl(N);
  ctrl[layer - 1] = MatField<2>(s.size());
  for (auto& M : ctrl[layer - 1]) M = random_mat<2>(rng, 0.02);
  const Tape<2> tape = record_segment<2>(s, ctrl, N, params);

  VecField<2> target = tape.final_state().x;
  for (auto& x : target) x += Vec<2>(0.001, -0.0005);
  const auto obj = Objective<2>::position(target);
  VecField<2> dL_dx;
  obj.gradient(tape.final_state(), params, dL_dx);
  const auto adjoint = backprop<2>(tape, dL_dx, layer).dL_dFctrl;

  StepWorkspace<2> ws;
  const auto fd = fd_gradient<2>(
      [&](const MatField<2>& trial) {
        ControlSequence<2> c = ctrl;
        c[layer - 1] = trial;
        return obj.value(simulate<2>(tape.state(layer - 1), c, layer, N, params, ws), params);
      },
      ctrl[layer - 1]);
  for (std::size_t p = 0; p < s.size(); ++p)
    for (int i = 0; i < 4; ++i)
      if (std::abs(fd[p](i)) > 1e-8) EXPECT_LT(test::rel_err(adjoint[p](i), fd[p](i)), 1e-4);
}

TEST(Backprop, ControlAndDeformationGradientsCoincideWithoutGate) {
  auto params = small_params<2>();
  params.gate = false;
  std::mt19937_64 rng(7);
  const auto s = random_cluster<2>(rng, params, 16);
  const int N = 3, layer = 2;
  ControlSequence<2> ctrl(N);
  ctrl[layer - 1] = MatField<2>(s.size());
  for (auto& M : ctrl[layer - 1]) M = random_mat<2>(rng, 0.02);
  const Tape<2> tape = record_segment<2>(s, ctrl, N, params);

  VecField<2> target = tape.final_state().x;
  for (auto& x : target) x += Vec<2>(0.002, 0.001);
  const auto obj = Objective<2>::position(target);

  // Same perturbation fed through the control and through F.
  StepWorkspace<2> ws;
  const Mat<2> delta = random_mat<2>(rng, 1e-3);
  ControlSequence<2> c2 = ctrl;
  for (auto& M : c2[layer - 1]) M += delta;
  const double via_ctrl = obj.value(simulate<2>(tape.state(layer - 1), c2, layer, N, params, ws), params);
  ParticleSet<2> shifted = tape.state(layer - 1);
  for (auto& F : shifted.F) F += delta;
  const double via_F = obj.value(simulate<2>(shifted, ctrl, layer, N, params, ws), params);
  EXPECT_NEAR(via_ctrl, via_F, 1e-15 * std::max(1.0, std::abs(via_ctrl)));

  VecField<2> dL_dx;
  obj.gradient(tape.final_state(), params, dL_dx);
  const auto g = backprop<2>(tape, dL_dx, layer);
  for (std::size_t p = 0; p < s.size(); ++p)
    EXPECT_LT((g.dL_dFctrl[p] - g.dL_dF_start[p]).norm(), 1e-12 * std::max(1.0, g.dL_dFctrl[p].norm()));
}

TEST(Backprop, LeavesTapeUntouchedAndRepeats) {
  auto params = small_params<3>();
  std::mt19937_64 rng(8);
  const auto s = random_cluster<3>(rng, params, 32);
  const Tape<3> tape = record_segment<3>(s, {}, 3, params);
  const ParticleSet<3> before = tape.final_state();
  VecField<3> seed(s.size());
  for (auto& v : seed) v = Vec<3>::Random();
  const auto a = backprop<3>(tape, seed, 1);
  const auto b = backprop<3>(tape, seed, 1);
  EXPECT_EQ(a.dL_dFctrl, b.dL_dFctrl);
  EXPECT_EQ(a.dL_dx_start, b.dL_dx_start);
  EXPECT_EQ(tape.final_state(), before);
}

TEST(FdGradient, ScalarOracle) {
  EXPECT_NEAR(fd_derivative([](double x) { return x * x; }, 1.0, 1e-5), 2.0, 1e-9);
  for (double h : {1e-1, 1e-3, 1e-6})
    EXPECT_NEAR(fd_derivative([](double x) { return 3.0 * x - 1.0; }, 0.7, h), 3.0, 1e-9);
  EXPECT_THROW(fd_derivative([](double x) { return x; }, 0.0, 0.0), Error);
}

TEST(FdGradient, MatrixFieldOracle) {
  MatField<2> X(2, Mat<2>::Zero());
  X[0] << 1, 2, 3, 4;
  X[1] << -1, 0.5, 0, 2;
  const auto loss = [](const MatField<2>& M) {
    double s = 0.0;
    for (const auto& m : M) s += m.squaredNorm();
    return s;
  };
  const auto g = fd_gradient<2>(loss, X, 1e-5);
  for (std::size_t p = 0; p < 2; ++p) EXPECT_LT((g[p] - 2.0 * X[p]).norm(), 1e-8);
}

TEST(TapeStats, CountsLiveSnapshots) {
  auto params = small_params<2>();
  std::mt19937_64 rng(9);
  const auto s = random_cluster<2>(rng, params, 4);
  const std::size_t base = TapeStats::live_states();
  {
    const Tape<2> tape = record_segment<2>(s, {}, 5, params);
    EXPECT_EQ(TapeStats::live_states(), base + 6);
  }
  EXPECT_EQ(TapeStats::live_states(), base);
}

}  // namespace
}  // namespace mpmorph
