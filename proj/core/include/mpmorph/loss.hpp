#pragma once

#include <span>
#include <string>
#include <vector>

#include "mpmorph/particles.hpp"
#include "mpmorph/sim_params.hpp"
#include "mpmorph/transfer.hpp"

namespace mpmorph {

enum class LossKind { kPosition, kMass, kLogMass };

std::string to_string(LossKind kind);
/// Accepts "position", "mass", "logmass" (also "log_mass"). Throws ConfigError.
LossKind parse_loss_kind(const std::string& name);

struct LossReport {
  double value = 0.0;
  LossKind kind = LossKind::kLogMass;
  /// 100 (1 - value / initial); filled in by callers that know the initial loss.
  double accuracy = 0.0;
};

/// 100 (1 - final / initial). A zero initial loss counts as fully converged.
double accuracy_percent(double initial, double final_value);

/// Nodal target masses on the simulation lattice.
template <int Dim>
struct TargetMassField {
  int res = 0;
  double dx = 0.0;
  std::vector<double> m_star;

  double total() const;
};

/// m_i* = sum_p w_ip m_p with the P2G kernel. Empty input yields zeros.
template <int Dim>
TargetMassField<Dim> rasterize_target(const VecField<Dim>& x, std::span<const double> m,
                                      const SimParams<Dim>& params);

/// L = sum_p 1/2 |x_p - x_p*|^2; grad_p = x_p - x_p*. Throws SizeMismatch.
template <int Dim>
LossReport position_loss(const VecField<Dim>& x, const VecField<Dim>& x_star, VecField<Dim>* grad = nullptr);

/// L = sum_i 1/2 (m_i - m_i*)^2. Throws LatticeMismatch.
LossReport mass_loss(std::span<const double> m, std::span<const double> m_star,
                     std::vector<double>* grad = nullptr);

/// L = sum_i 1/2 (ln(m_i + 1) - ln(m_i* + 1))^2,
/// dL/dm_i = (ln(m_i + 1) - ln(m_i* + 1)) / (m_i + 1). Throws NegativeMass.
LossReport log_mass_loss(std::span<const double> m, std::span<const double> m_star,
                         std::vector<double>* grad = nullptr);

/// Loss of a final particle state against a fixed target, with the chain
/// from nodal mass gradients to particle positions through the P2G weights.
template <int Dim>
class Objective {
 public:
  static Objective position(VecField<Dim> targets);
  /// mass_scale multiplies nodal masses (simulated and target) before the
  /// loss is evaluated; it sets where ln(m + 1) leaves its linear regime.
  static Objective mass(TargetMassField<Dim> target, double mass_scale = 1.0);
  static Objective log_mass(TargetMassField<Dim> target, double mass_scale = 1.0);
  static Objective make(LossKind kind, const VecField<Dim>& target_x, std::span<const double> target_m,
                        const SimParams<Dim>& params, double mass_scale = 1.0);

  LossKind kind() const { return kind_; }
  double mass_scale() const { return mass_scale_; }
  const TargetMassField<Dim>& target_field() const { return field_; }

  double value(const ParticleSet<Dim>& particles, const SimParams<Dim>& params) const;

  /// Returns the loss and writes dL/dx_p.
  double gradient(const ParticleSet<Dim>& particles, const SimParams<Dim>& params,
                  VecField<Dim>& dL_dx) const;

  /// Per-particle loss contribution scaled to [0, 1].
  std::vector<double> particle_channel(const ParticleSet<Dim>& particles, const SimParams<Dim>& params) const;

 private:
  double nodal(const ParticleSet<Dim>& particles, const SimParams<Dim>& params, StepWorkspace<Dim>& ws,
               std::vector<double>* grad) const;

  LossKind kind_ = LossKind::kLogMass;
  double mass_scale_ = 1.0;
  VecField<Dim> targets_;
  TargetMassField<Dim> field_;
};

}  // namespace mpmorph
