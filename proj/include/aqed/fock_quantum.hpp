#pragma once

// Truncated Pauli-Fierz model in the collinear reduction: N in {1, 2}
// particles on a periodic grid along one axis, tensored with a capped
// multimode Fock space over the kept modes of an explicit ModeGrid.
//
// Amplitude layout: psi[f + F * (g_1 + G * g_2)], with f the Fock index
// f = sum_i n_i (n_max + 1)^i and mode i = 2 * node + polarization.
// The discrete annihilator of mode i is b_i = sqrt(w_i) a(k_i), so the
// b_i satisfy canonical commutation relations below the cap.

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "aqed/errors.hpp"
#include "aqed/field_kernels.hpp"
#include "aqed/krylov.hpp"

namespace aqed {

using SparseOp = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

class FockBasis {
 public:
  FockBasis(int modes, int n_max);

  int modes() const { return modes_; }
  int n_max() const { return n_max_; }
  std::size_t size() const { return size_; }
  /// (n_max + 1)^mode, the index step of one quantum in that mode.
  std::size_t stride(int mode) const { return strides_[mode]; }
  int occupation(std::size_t index, int mode) const;
  std::size_t index(const std::vector<int>& occupations) const;
  int total(std::size_t index) const;

 private:
  int modes_;
  int n_max_;
  std::size_t size_;
  std::vector<std::size_t> strides_;
};

/// Periodic grid x_g = x_min + g h, h = (x_max - x_min) / G, g = 0..G-1.
class ParticleGrid {
 public:
  ParticleGrid(int points, double x_min, double x_max);

  int points() const { return points_; }
  double spacing() const { return h_; }
  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double x(int g) const { return x_min_ + g * h_; }

 private:
  int points_;
  double x_min_;
  double x_max_;
  double h_;
};

enum class Derivative { spectral, central };

struct QuantumOptions {
  double hbar = 0.1;
  int particles = 1;
  int axis = 0;
  bool field_coupling = true;
  bool coulomb = true;
  Derivative derivative = Derivative::spectral;
  std::size_t max_amplitudes = 5'000'000;
  double leakage_bound = 1e-6;
};

struct QuantumState {
  Eigen::VectorXcd psi;
  double hbar = 0.0;
  double t = 0.0;
  double leakage = 0.0;  // norm lost to the occupancy cap when the state was prepared
};

/// Per-mode discrete displacement beta_i = sqrt(w_i) f_i of a mode function f.
Eigen::VectorXcd discrete_amplitudes(const ModeField& f);

/// Matrix elements <m| exp(beta b* - conj(beta) b) |n> for m < rows, n < cols.
Eigen::MatrixXcd displacement_matrix(cplx beta, int rows, int cols);

/// Applies a (rows x n_max+1) matrix on one mode's occupation index. The
/// result lives on a basis whose cap for that mode is rows - 1; `levels`
/// holds the per-mode level counts of `in` and is updated.
Eigen::VectorXcd apply_on_mode(const Eigen::VectorXcd& in, std::vector<int>& levels,
                               std::size_t outer, int mode, const Eigen::MatrixXcd& m);

struct WeylResult {
  double leakage = 0.0;  // 1 - |P W(f) psi| / |psi| before renormalization
};

/// psi <- W(f) psi restricted to the truncated space and renormalized, with
/// W(f) = exp(a*(f) - a(f)) so that W*(f) a(g) W(f) = a(g) + <g, f>.
/// `beta` holds discrete amplitudes (see discrete_amplitudes). `outer` is the
/// number of particle-grid amplitudes per Fock block. Throws TruncationError
/// above `bound`.
WeylResult weyl_displace(const FockBasis& basis, const Eigen::VectorXcd& beta, Eigen::VectorXcd& psi,
                         std::size_t outer, double bound);

/// H = sum_j (-i hbar D_j - hbar^{1/2} A^axis(x_j))^2 + V(x_1 - x_2) + hbar sum_i |k_i| n_i.
class PauliFierz {
 public:
  PauliFierz(ParticleGrid grid, std::shared_ptr<const FieldKernels> kernels, int n_max,
             QuantumOptions options);

  const FockBasis& basis() const { return basis_; }
  const ParticleGrid& grid() const { return grid_; }
  const FieldKernels& kernels() const { return *kernels_; }
  const std::shared_ptr<const FieldKernels>& kernels_ptr() const { return kernels_; }
  const QuantumOptions& options() const { return options_; }
  double hbar() const { return options_.hbar; }
  int particles() const { return options_.particles; }
  std::size_t dimension() const { return dimension_; }
  /// Particle-grid amplitudes per Fock block, G^N.
  std::size_t outer() const { return outer_; }

  const SparseOp& ladder(int mode) const { return ladders_[mode]; }
  const Eigen::VectorXd& number_diagonal() const { return number_; }
  const Eigen::VectorXd& field_energy_diagonal() const { return field_energy_; }
  /// A^axis and E^axis operators on the Fock space at grid point g.
  const SparseOp& field_A(int g) const { return field_a_[g]; }
  const SparseOp& field_E(int g) const { return field_e_[g]; }
  /// Discrete derivative along the particle axis (real antisymmetric).
  const Eigen::MatrixXd& derivative() const { return derivative_; }
  /// Per-mode coefficients c_i(x) with A^axis(x) = sum_i c_i(x) b_i + h.c.
  Eigen::VectorXcd field_coefficients(double x) const;

  void apply(const Eigen::VectorXcd& psi, Eigen::VectorXcd& out) const;
  Eigen::VectorXcd apply(const Eigen::VectorXcd& psi) const;
  /// -i hbar D_j psi
  Eigen::VectorXcd apply_momentum(int j, const Eigen::VectorXcd& psi) const;
  /// (-i hbar D_j - hbar^{1/2} A(x_j)) psi
  Eigen::VectorXcd apply_kinetic(int j, const Eigen::VectorXcd& psi) const;
  /// A(x_j) psi
  Eigen::VectorXcd apply_field(int j, const Eigen::VectorXcd& psi) const;
  /// Fock operator tensored with the identity on the particle grid.
  Eigen::VectorXcd apply_fock(const SparseOp& op, const Eigen::VectorXcd& psi) const;
  /// x_j psi
  Eigen::VectorXcd apply_position(int j, const Eigen::VectorXcd& psi) const;
  /// Coulomb term V(x_1 - x_2) on the particle grid (zero for N = 1).
  const Eigen::VectorXd& coulomb_diagonal() const { return coulomb_; }

  /// Dense matrix; only for dimensions up to 4096.
  Eigen::MatrixXcd dense() const;
  /// max |H - H^dagger| from the dense matrix when small, otherwise from
  /// random probes |<x, H y> - conj(<y, H x>)| with unit vectors.
  double hermiticity_defect(unsigned long long seed = 1) const;

  /// Quantum Faraday tensor d_m A^l - d_l A^m at position x (3D, all components).
  SparseOp faraday(int l, int m, const Vec3& x) const;

  /// Grid index of the particle coordinate for amplitude column c (0-based particle j).
  int grid_index(std::size_t column, int j) const;

 private:
  SparseOp field_operator(const Eigen::VectorXcd& coefficients) const;
  void apply_derivative(int j, const Eigen::VectorXcd& psi, Eigen::VectorXcd& out) const;
  void add_field(int j, double scale, const Eigen::VectorXcd& psi, Eigen::VectorXcd& out) const;

  ParticleGrid grid_;
  std::shared_ptr<const FieldKernels> kernels_;
  QuantumOptions options_;
  FockBasis basis_;
  std::size_t outer_ = 0;
  std::size_t dimension_ = 0;
  std::vector<SparseOp> ladders_;
  std::vector<SparseOp> field_a_;
  std::vector<SparseOp> field_e_;
  Eigen::VectorXd number_;
  Eigen::VectorXd field_energy_;
  Eigen::VectorXd coulomb_;
  Eigen::MatrixXd derivative_;
};

/// Gaussian (pi hbar)^{-1/4} exp(-(x-q)^2/(2 hbar)) exp(i p (x-q)/hbar) per
/// particle, tensored with W(hbar^{-1/2} alpha0) Omega. q0 and p0 hold the
/// axis coordinates of each particle.
QuantumState initial_state(const PauliFierz& h, const std::vector<double>& q0,
                           const std::vector<double>& p0, const ModeField& alpha0);

struct PropagationStats {
  KrylovStats krylov;
  double norm_defect = 0.0;  // max | |psi| - 1 | over the steps
};

/// psi <- exp(-i t H / hbar) psi in steps of dt.
PropagationStats propagate(const PauliFierz& h, QuantumState& state, double t, double dt,
                           const KrylovOptions& options = {});

// Expectation values -------------------------------------------------------

double expect_position(const PauliFierz& h, const QuantumState& s, int j);
double expect_momentum(const PauliFierz& h, const QuantumState& s, int j);
double expect_kinetic(const PauliFierz& h, const QuantumState& s, int j);
double expect_number(const PauliFierz& h, const QuantumState& s);
double expect_energy(const PauliFierz& h, const QuantumState& s);
/// <Phi(g)> with Phi(g) = a(g) + a*(g) and a(g) = sum_i sqrt(w_i) conj(g_i) b_i.
double expect_field(const PauliFierz& h, const QuantumState& s, const ModeField& g);
/// <A^axis(x_j)> as an operator on the particle coordinate.
double expect_vector_potential(const PauliFierz& h, const QuantumState& s, int j);
/// Phi(g) on the Fock space.
SparseOp field_observable(const PauliFierz& h, const ModeField& g);

}  // namespace aqed
