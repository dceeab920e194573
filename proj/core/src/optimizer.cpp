#include "mpmorph/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "mpmorph/errors.hpp"
#include "mpmorph/log.hpp"

namespace mpmorph {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <int Dim>
double field_norm(const MatField<Dim>& g) {
  double s = 0.0;
  for (const Mat<Dim>& m : g) s += m.squaredNorm();
  return std::sqrt(s);
}

}  // namespace

std::vector<int> ControlSchedule::layers() const {
  std::vector<int> out;
  for (int n = 1; n <= N; n += delta_n) out.push_back(n);
  return out;
}

void ControlSchedule::validate() const {
  if (N < 1) throw ConfigError("schedule needs N >= 1");
  if (delta_n < 1 || delta_n > N) throw ConfigError("control period must lie in [1, N]");
  if (i_max < 1) throw ConfigError("i_max must be at least 1");
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
}

void MorphPlan::validate() const {
  if (passes < 1) throw ConfigError("passes must be at least 1");
  if (segment_len < 1) throw ConfigError("segment length must be at least 1");
  if (schedule.delta_n < 1) throw ConfigError("control period must be at least 1");
  if (schedule.i_max < 1) throw ConfigError("iterations must be at least 1");
  if (!(schedule.kappa > 0.0)) throw ConfigError("kappa must be positive");
  if (!(adam.alpha > 0.0) || !(adam.eps > 0.0)) throw ConfigError("Adam alpha and eps must be positive");
  if (adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 || adam.beta2 >= 1.0)
    throw ConfigError("Adam decay rates must lie in [0, 1)");
  if (max_halvings < 0) throw ConfigError("max_halvings must be non-negative");
}

PhaseTimes& PhaseTimes::operator+=(const PhaseTimes& o) {
  simulate += o.simulate;
  evaluate += o.evaluate;
  backprop += o.backprop;
  line_search += o.line_search;
  io += o.io;
  return *this;
}

template <int Dim>
AdamState<Dim>::AdamState(std::size_t particles, const AdamSettings& s)
    : m(particles, Mat<Dim>::Zero()), v(particles, Mat<Dim>::Zero()), settings(s) {}

template <int Dim>
MatField<Dim> AdamState<Dim>::update(const MatField<Dim>& g) {
  if (g.size() != m.size()) throw SizeMismatch("gradient size differs from Adam state");
  ++t;
  const double b1 = settings.beta1;
  const double b2 = settings.beta2;
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  MatField<Dim> direction(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    m[p] = b1 * m[p] + (1.0 - b1) * g[p];
    v[p] = b2 * v[p] + (1.0 - b2) * g[p].cwiseProduct(g[p]);
    const Mat<Dim> m_hat = m[p] / c1;
    const Mat<Dim> v_hat = v[p] / c2;
    direction[p] = -(m_hat.array() / (v_hat.array().sqrt() + settings.eps)).matrix();
  }
  return direction;
}

double compute_step_size(double L0, const std::function<double(double)>& loss_at, double alpha0,
                         int max_halvings) {
  if (!(alpha0 > 0.0)) throw Error("line search needs a positive initial step");
  double alpha = alpha0;
  for (int halvings = 0;; ++halvings) {
    double L = std::numeric_limits<double>::infinity();
    try {
      L = loss_at(alpha);
    } catch (const Error&) {
      // An infeasible trial (e.g. collapsed deformation) counts as an increase.
    }
    if (L <= L0) return alpha;
    if (halvings == max_halvings) break;
    alpha *= 0.5;
  }
  std::ostringstream msg;
  msg << "no non-increasing step after " << max_halvings << " halvings (alpha0 = " << alpha0 << ")";
  throw LineSearchFailed(msg.str());
}

double compute_step_size(double L0, const Eigen::VectorXd& x, const Eigen::VectorXd& dx,
                         const std::function<double(const Eigen::VectorXd&)>& loss, double alpha0,
                         int max_halvings) {
  return compute_step_size(
      L0, [&](double a) { return loss(x + a * dx); }, alpha0, max_halvings);
}

template <int Dim>
Segment<Dim>::Segment(ParticleSet<Dim> start, int n_steps, const SimParams<Dim>& params,
                      const Objective<Dim>& objective)
    : params_(params),
      objective_(objective),
      tape_(std::move(start), params, n_steps),
      controls_(static_cast<std::size_t>(n_steps)) {
  resimulate(1);
}

template <int Dim>
void Segment<Dim>::resimulate(int first_step) {
  const auto t0 = Clock::now();
  tape_.record_from(first_step, controls_);
  times_.simulate += seconds_since(t0);
}

template <int Dim>
double Segment<Dim>::loss() const {
  return objective_.value(tape_.final_state(), params_);
}

template <int Dim>
double Segment<Dim>::trial_loss(int layer, const MatField<Dim>& trial) {
  const std::size_t k = static_cast<std::size_t>(layer - 1);
  MatField<Dim> saved = std::move(controls_[k]);
  controls_[k] = trial;
  double L = 0.0;
  try {
    const ParticleSet<Dim> final_state =
        simulate<Dim>(tape_.state(layer - 1), controls_, layer, tape_.n_steps(), params_, ws_);
    L = objective_.value(final_state, params_);
  } catch (...) {
    controls_[k] = std::move(saved);
    throw;
  }
  controls_[k] = std::move(saved);
  return L;
}

template <int Dim>
LayerResult optimize_layer(Segment<Dim>& segment, int layer, AdamState<Dim>& adam, const MorphPlan& plan,
                           int pass, const TraceSink& sink) {
  if (layer < 1 || layer > segment.n_steps()) throw Error("optimize_layer: layer outside the segment");
  const std::size_t n = segment.tape().state(0).size();
  const std::size_t slot = static_cast<std::size_t>(layer - 1);
  MatField<Dim>& control = segment.controls()[slot];
  if (control.empty()) control.assign(n, Mat<Dim>::Zero());
  if (adam.m.size() != n) adam = AdamState<Dim>(n, plan.adam);

  PhaseTimes& times = segment.times();
  LayerResult result;
  double alpha = plan.adam.alpha;
  bool dirty = false;
  VecField<Dim> dL_dx;

  for (int iter = 0; iter < plan.schedule.i_max; ++iter) {
    if (dirty) {
      segment.resimulate(layer);
      dirty = false;
    }
    auto t0 = Clock::now();
    const double L = segment.objective().gradient(segment.tape().final_state(), segment.params(), dL_dx);
    times.evaluate += seconds_since(t0);
    if (!std::isfinite(L)) throw OptimizationError("non-finite loss at layer " + std::to_string(layer));

    t0 = Clock::now();
    const GradientBundle<Dim> bundle = backprop<Dim>(segment.tape(), dL_dx, layer);
    times.backprop += seconds_since(t0);
    const double gnorm = field_norm<Dim>(bundle.dL_dFctrl);

    TraceRecord rec{segment.index, pass, segment.global_offset + layer, iter + 1, L, gnorm, 0.0};
    if (gnorm < plan.schedule.kappa) {
      result.loss = L;
      if (sink) sink(rec);
      break;
    }

    const MatField<Dim> direction = adam.update(bundle.dL_dFctrl);
    t0 = Clock::now();
    MatField<Dim> trial(n);
    double accepted_loss = L;
    try {
      alpha = compute_step_size(
          L,
          [&](double a) {
            for (std::size_t p = 0; p < n; ++p) trial[p] = control[p] + a * direction[p];
            accepted_loss = segment.trial_loss(layer, trial);
            return accepted_loss;
          },
          alpha, plan.max_halvings);
      for (std::size_t p = 0; p < n; ++p) control[p] += alpha * direction[p];
      rec.alpha = alpha;
      rec.loss = accepted_loss;
      ++result.updates;
      dirty = true;
    } catch (const LineSearchFailed& e) {
      ++result.line_search_failures;
      alpha = plan.adam.alpha;
      rec.loss = L;
      log(LogLevel::kDebug, std::string("layer ") + std::to_string(layer) + ": " + e.what());
    }
    times.line_search += seconds_since(t0);
    result.loss = rec.loss;
    if (sink) sink(rec);
  }
  if (dirty) segment.resimulate(layer);
  return result;
}

template <int Dim>
std::vector<LayerResult> run_pass(Segment<Dim>& segment, const MorphPlan& plan, int pass,
                                  std::map<int, AdamState<Dim>>& moments, const TraceSink& sink) {
  ControlSchedule schedule = plan.schedule;
  schedule.N = segment.n_steps();
  schedule.delta_n = std::min(schedule.delta_n, schedule.N);
  std::vector<LayerResult> results;
  for (int layer : schedule.layers()) {
    AdamState<Dim>& adam = moments[layer];
    results.push_back(optimize_layer<Dim>(segment, layer, adam, plan, pass, sink));
  }
  return results;
}

template <int Dim>
double optimize_segment(Segment<Dim>& segment, const MorphPlan& plan, const TraceSink& sink, int* updates) {
  std::map<int, AdamState<Dim>> moments;
  for (int pass = 1; pass <= plan.passes; ++pass) {
    if (!plan.persist_moments) moments.clear();
    for (const LayerResult& r : run_pass<Dim>(segment, plan, pass, moments, sink))
      if (updates) *updates += r.updates;
  }
  return segment.loss();
}

template <int Dim>
ChainResult<Dim> chain_segments(const ParticleSet<Dim>& source, const Objective<Dim>& objective,
                                const MorphPlan& plan, int total_frames, const SimParams<Dim>& params,
                                const FrameSink<Dim>& frames, const TraceSink& trace) {
  plan.validate();
  params.validate();
  if (total_frames < 1) throw ConfigError("total_frames must be at least 1");

  ChainResult<Dim> result;
  result.initial_loss = objective.value(source, params);
  if (trace) trace(TraceRecord{0, 0, 0, 0, result.initial_loss, 0.0, 0.0});

  TapeStats::reset_peak();
  const std::size_t live_before = TapeStats::live_states();
  ParticleSet<Dim> state = source;
  int done = 0;
  int index = 1;
  while (done < total_frames) {
    const int len = std::min(plan.segment_len, total_frames - done);
    double seg_loss = 0.0;
    {
      Segment<Dim> segment(state, len, params, objective);
      segment.global_offset = done;
      segment.index = index;
      seg_loss = optimize_segment<Dim>(segment, plan, trace, &result.updates);

      const auto t0 = Clock::now();
      if (frames) {
        for (int k = 1; k <= len; ++k) {
          const ParticleSet<Dim>& s = segment.tape().state(k);
          FrameRecord<Dim> rec;
          rec.index = done + k;
          rec.positions = s.x;
          rec.loss = objective.particle_channel(s, params);
          frames(rec);
        }
      }
      segment.times().io += seconds_since(t0);
      result.times += segment.times();
      state = segment.tape().final_state();
    }
    std::ostringstream msg;
    msg << "segment " << index << " (frames " << done + 1 << "-" << done + len << "): loss " << seg_loss;
    log_info(msg.str());
    result.segment_losses.push_back(seg_loss);
    done += len;
    ++index;
  }
  result.peak_tape_states = TapeStats::peak_states() - live_before;
  result.final_loss = result.segment_losses.back();
  result.final_state = std::move(state);
  return result;
}

#define MPMORPH_INSTANTIATE(D)                                                                           \
  template struct AdamState<D>;                                                                         \
  template class Segment<D>;                                                                            \
  template LayerResult optimize_layer<D>(Segment<D>&, int, AdamState<D>&, const MorphPlan&, int,         \
                                         const TraceSink&);                                             \
  template std::vector<LayerResult> run_pass<D>(Segment<D>&, const MorphPlan&, int,                      \
                                                std::map<int, AdamState<D>>&, const TraceSink&);         \
  template double optimize_segment<D>(Segment<D>&, const MorphPlan&, const TraceSink&, int*);           \
  template ChainResult<D> chain_segments<D>(const ParticleSet<D>&, const Objective<D>&, const MorphPlan&, \
                                            int, const SimParams<D>&, const FrameSink<D>&,               \
                                            const TraceSink&);

MPMORPH_INSTANTIATE(2)
MPMORPH_INSTANTIATE(3)
#undef MPMORPH_INSTANTIATE

}  // namespace mpmorph
