#pragma once

// Comparison functionals between a truncated quantum state and a classical
// Newton-Maxwell datum on the same kept modes: position, kinetic-momentum and
// field fluctuations, the one-photon reduced density matrix, observable
// errors, and finite ensembles.
//
// Mode amplitudes enter through the discrete convention of fock_quantum:
// the classical counterpart of hbar^{1/2} b_i is sqrt(w_i) alpha_i.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "aqed/classical_dynamics.hpp"
#include "aqed/fock_quantum.hpp"

namespace aqed {

struct BetaReport {
  double t = 0.0;
  double beta_a = 0.0;
  double beta_b = 0.0;
  double beta_b_tilde = 0.0;
  double beta_c = 0.0;
  double beta_c_shifted = 0.0;  // hbar |N^{1/2} W*(hbar^{-1/2} alpha) Psi|^2
  double rdm_distance = 0.0;
  double rdm_bound = 0.0;
  double leakage = 0.0;
  double energy_q = 0.0;
  double energy_c = 0.0;
};

/// sum_j |(x_j - q_j) Psi|^2
double beta_a(const PauliFierz& h, const QuantumState& s, const std::vector<double>& q);
/// sum_j |(-i hbar D_j - hbar^{1/2} A(x_j) - pt_j) Psi|^2 with pt_j the classical kinetic momentum.
double beta_b(const PauliFierz& h, const QuantumState& s, const std::vector<double>& ptilde);
/// sum_j |(-i hbar D_j - p_j) Psi|^2
double beta_b_tilde(const PauliFierz& h, const QuantumState& s, const std::vector<double>& p);

struct BetaC {
  double value = 0.0;      // sum_i |(hbar^{1/2} b_i - sqrt(w_i) alpha_i) Psi|^2
  double shifted = 0.0;    // hbar |N^{1/2} W*(hbar^{-1/2} alpha) Psi|^2, evaluated in a padded space
  double leakage = 0.0;    // norm the padded space failed to hold
};

/// Both forms of the field functional. Throws TruncationError when the
/// padded evaluation of the shifted form leaks more than `bound`.
BetaC beta_c(const PauliFierz& h, const QuantumState& s, const ModeField& alpha, double bound = 1e-6);

/// gamma_ij = hbar <Psi, b_j^* b_i Psi>; Tr gamma = hbar <N>.
Eigen::MatrixXcd one_photon_rdm(const PauliFierz& h, const QuantumState& s);
/// Trace norm of gamma - |a><a| with a_i = sqrt(w_i) alpha_i.
double trace_distance(const Eigen::MatrixXcd& gamma, const Eigen::VectorXcd& a);
/// Trace norm of a Hermitian matrix.
double trace_norm(const Eigen::MatrixXcd& m);
/// 3 beta_c + 6 |alpha| sqrt(beta_c), |alpha|^2 = sum_i w_i |alpha_i|^2.
double rdm_bound(double beta_c, const ModeField& alpha);

/// Scalar function with a certified Lipschitz constant. When `affine` is set,
/// f(x) = slope x + intercept and `fn` may be empty.
struct LipschitzFunction {
  std::function<double(double)> fn;
  double lipschitz = 0.0;
  bool affine = false;
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double x) const { return affine ? slope * x + intercept : fn(x); }
  static LipschitzFunction linear(double slope, double intercept = 0.0);
};

enum class ObservableKind { position, momentum, field };

struct ObservableError {
  double quantum = 0.0;    // <Psi, f(J) Psi>
  double classical = 0.0;  // f(J(t))
  double error = 0.0;
};

/// |<Psi, f(J) Psi> - f(J(t))| for J the position or momentum of particle j or
/// hbar^{1/2} Phi(g). `classical_value` is J(t); for the field pass 2 Re <g, alpha>.
ObservableError observable_error(const PauliFierz& h, const QuantumState& s, ObservableKind kind, int j,
                                 double classical_value, const LipschitzFunction& f,
                                 const ModeField* g = nullptr);

/// 2 Re sum_i w_i conj(g_i) alpha_i
double classical_field_observable(const ModeField& g, const ModeField& alpha);

struct EnsembleMember {
  double weight = 0.0;
  Eigen::MatrixXcd gamma;
  Eigen::VectorXcd classical;  // sqrt(w_i) alpha_i(t)
};

struct EnsembleRdm {
  Eigen::MatrixXcd gamma;
  Eigen::MatrixXcd target;
  double distance = 0.0;
  double mean_member_distance = 0.0;  // sum_s mu_s |gamma_s - |a_s><a_s||_1
};

/// Weights must be positive and sum to one within 1e-12.
EnsembleRdm ensemble_rdm(const std::vector<EnsembleMember>& members);

/// Every functional at once for a paired quantum and classical state.
BetaReport evaluate(const PauliFierz& h, const QuantumState& s, const ClassicalModel& model,
                    const ClassicalState& u);

}  // namespace aqed
