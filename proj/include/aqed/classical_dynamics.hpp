#pragma once

// Newton-Maxwell (Abraham) dynamics for N extended charges coupled to the
// discretized transverse field, with an exact free-field rotation splitting
// and runtime monitors for the a priori growth bounds.

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "aqed/errors.hpp"
#include "aqed/field_kernels.hpp"

namespace aqed {

struct ClassicalState {
  std::vector<Vec3> q;
  std::vector<Vec3> p;
  ModeField alpha;
  double t = 0.0;

  explicit ClassicalState(std::shared_ptr<const ModeGrid> grid) : alpha(std::move(grid)) {}
  std::size_t particles() const { return q.size(); }
  bool is_finite() const;
};

enum class Scheme { strang, rk4 };

struct ModelOptions {
  bool field_coupling = true;     // false: F[kappa] treated as zero in the particle-field terms
  bool coulomb = true;            // pairwise smeared Coulomb interaction
  std::optional<int> axis;        // collinear mode: q, p along this axis, only A^axis couples
};

struct SolverConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  Scheme scheme = Scheme::strang;
  int stride = 1;                 // sample every stride steps
  double sigma = 0.5;             // regularity index of the X^sigma monitor
};

struct Sample {
  double t = 0.0;
  std::vector<Vec3> q;
  std::vector<Vec3> p;
  std::vector<Vec3> ptilde;
  double energy = 0.0;
  double norm_h_sigma = 0.0;
  double norm_hdot_half = 0.0;
  double norm_x_sigma = 0.0;
  double sup_p = 0.0;
  double faraday_contraction = 0.0;  // max_j |sum_{l,m} pt^m pt^l F^{lm}(q_j)|
};

/// Fitted envelope of one monitored quantity. `linear` fits C (t+1), otherwise a constant.
struct Envelope {
  double constant = 0.0;
  bool linear = false;
  double worst_ratio = 0.0;       // max over samples of value / envelope
  bool violated = false;          // worst_ratio > 2
};

struct Monitors {
  Envelope x_sigma;
  Envelope sup_p;
  Envelope hdot_half;
  double energy_drift = 0.0;      // max |H(t) - H(0)| / (|H(0)| + 1)
  double faraday_contraction = 0.0;
};

struct Trajectory {
  std::vector<Sample> samples;
  Monitors monitors;
  ClassicalState final_state;
};

/// Raised when the state becomes non-finite; carries the last finite state.
class IntegrationAborted : public NumericalError {
 public:
  IntegrationAborted(const std::string& what, ClassicalState last_good)
      : NumericalError(what), last_good_(std::move(last_good)) {}
  const ClassicalState& last_good() const { return last_good_; }

 private:
  ClassicalState last_good_;
};

class ClassicalModel {
 public:
  ClassicalModel(std::shared_ptr<const FieldKernels> kernels, ModelOptions options = {});

  const FieldKernels& kernels() const { return *kernels_; }
  const ModelOptions& options() const { return options_; }

  /// Time derivative of (q, p, alpha) as a tangent vector stored in a ClassicalState.
  ClassicalState rhs(const ClassicalState& u) const;

  /// p_j - A_alpha(q_j), projected on the collinear axis when one is set.
  std::vector<Vec3> kinetic_momentum(const ClassicalState& u) const;
  double energy(const ClassicalState& u) const;
  /// Pairwise Coulomb force -sum_{k != j} grad V(q_j - q_k) on each particle.
  std::vector<Vec3> coulomb_force(const ClassicalState& u) const;
  double faraday_contraction(const ClassicalState& u) const;
  double norm_x_sigma(const ClassicalState& u, double sigma) const;

  ClassicalState step_strang(const ClassicalState& u, double dt) const;
  ClassicalState step_rk4(const ClassicalState& u, double dt) const;
  /// `steps` steps of signed size dt; negative dt runs the flow backwards.
  ClassicalState evolve(ClassicalState u, double dt, long steps, Scheme scheme) const;

  Trajectory integrate(const ClassicalState& u0, const SolverConfig& config) const;

  /// Rejects states inconsistent with the model (grid mismatch, off-axis data).
  void validate(const ClassicalState& u) const;

 private:
  ClassicalState vector_field(const ClassicalState& u, bool include_rotation) const;
  void rotate(ModeField& alpha, double dt) const;
  ClassicalState rk4(const ClassicalState& u, double dt, bool include_rotation) const;
  Sample sample(const ClassicalState& u, double sigma) const;

  std::shared_ptr<const FieldKernels> kernels_;
  ModelOptions options_;
  std::optional<SmearedCoulomb> coulomb_;
};

/// CSV with columns t, q*, p*, ptilde*, energy, norm_h_sigma, norm_hdot_half.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace aqed
