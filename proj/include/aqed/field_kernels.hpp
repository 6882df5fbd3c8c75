#pragma once

// Classical field quantities of the Abraham model on a finite wave-vector
// quadrature: polarization frames, form factors, smeared potentials, the
// Faraday tensor, the smeared Coulomb interaction and weighted field norms.
//
// Conventions: c = e = 1, particle mass 1/2, Fourier transform with the
// (2 pi)^{-3/2} prefactor. A mode field alpha lives on a ModeGrid with two
// amplitudes per node, stored at index 2 * node + polarization.

#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "aqed/quadrature.hpp"

namespace aqed {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Vec3c = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;

struct Polarization {
  Vec3 e1;
  Vec3 e2;
  const Vec3& operator[](int lambda) const { return lambda == 0 ? e1 : e2; }
};

/// Transverse frame for wave-vector k: e1 = (z x khat)/|z x khat|, e2 = khat x e1.
/// Along the z axis e1 = (1,0,0). Throws DomainError for k = 0.
Polarization polarization_basis(const Vec3& k);

class ModeGrid {
 public:
  struct ProductSpec {
    int radial_order = 8;
    int polar_order = 6;
    int azimuthal_order = 8;
    double k_max = 1.0;
  };

  /// Gauss-Legendre in |k| on (0, k_max] times Gauss-Legendre in cos(theta)
  /// times the uniform rule in phi. The origin is never a node.
  static std::shared_ptr<const ModeGrid> product(const ProductSpec& spec);

  /// Explicit node list, e.g. the few modes kept by a Fock-space model.
  static std::shared_ptr<const ModeGrid> from_nodes(std::vector<Vec3> nodes,
                                                    std::vector<double> weights);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t mode_count() const { return 2 * nodes_.size(); }
  static std::size_t mode_index(std::size_t node, int lambda) { return 2 * node + lambda; }

  const Vec3& node(std::size_t i) const { return nodes_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  double k_norm(std::size_t i) const { return k_norms_[i]; }
  const Polarization& polarization(std::size_t i) const { return pols_[i]; }
  const Vec3& polarization(std::size_t i, int lambda) const { return pols_[i][lambda]; }

 private:
  ModeGrid(std::vector<Vec3> nodes, std::vector<double> weights);

  std::vector<Vec3> nodes_;
  std::vector<double> weights_;
  std::vector<double> k_norms_;
  std::vector<Polarization> pols_;
};

enum class CutoffFamily { sharp, gaussian, table, custom };

/// Radial profile F[kappa](|k|) of the charge distribution together with the
/// regularity index sigma in [1/2, 1].
class Cutoff {
 public:
  /// (2 pi)^{-3/2} on |k| <= lambda, zero outside.
  static Cutoff sharp(double lambda, double sigma);
  /// (2 pi)^{-3/2} exp(-|k|^2 / (2 lambda^2)).
  static Cutoff gaussian(double lambda, double sigma);
  /// Piecewise-linear radial table, zero beyond the last radius.
  static Cutoff table(std::vector<double> radii, std::vector<double> values, double sigma);
  /// Arbitrary profile of the wave-vector. Radial profiles are evaluated along +z;
  /// operations that need radial symmetry probe it and reject non-radial input.
  static Cutoff custom(std::function<double(const Vec3&)> profile, double sigma,
                       std::optional<double> support_radius = std::nullopt);

  double operator()(double r) const;
  double at(const Vec3& k) const;

  CutoffFamily family() const { return family_; }
  double lambda() const { return lambda_; }
  double sigma() const { return sigma_; }
  /// Radius beyond which the profile vanishes identically, if known.
  std::optional<double> support_radius() const { return support_; }
  /// Radius beyond which |F|^2 is negligible for quadrature purposes, if known.
  std::optional<double> effective_radius() const;
  /// Samples several directions per radius; exact for the shipped families.
  bool is_radial() const;

 private:
  Cutoff() = default;

  CutoffFamily family_ = CutoffFamily::sharp;
  double lambda_ = 1.0;
  double sigma_ = 0.5;
  std::optional<double> support_;
  std::vector<double> radii_;
  std::vector<double> values_;
  std::function<double(const Vec3&)> custom_;
};

class ModeField {
 public:
  explicit ModeField(std::shared_ptr<const ModeGrid> grid);
  ModeField(std::shared_ptr<const ModeGrid> grid, Eigen::VectorXcd amplitudes);

  const ModeGrid& grid() const { return *grid_; }
  const std::shared_ptr<const ModeGrid>& grid_ptr() const { return grid_; }

  Eigen::VectorXcd& amplitudes() { return amp_; }
  const Eigen::VectorXcd& amplitudes() const { return amp_; }
  cplx& operator()(std::size_t node, int lambda) { return amp_[ModeGrid::mode_index(node, lambda)]; }
  cplx operator()(std::size_t node, int lambda) const {
    return amp_[ModeGrid::mode_index(node, lambda)];
  }
  std::size_t size() const { return static_cast<std::size_t>(amp_.size()); }
  bool is_finite() const { return amp_.allFinite(); }

 private:
  std::shared_ptr<const ModeGrid> grid_;
  Eigen::VectorXcd amp_;
};

/// Vector-valued mode function, one complex 3-vector per amplitude index.
struct FormFactor {
  std::shared_ptr<const ModeGrid> grid;
  std::vector<Vec3c> values;

  /// Projection on a Cartesian axis as a scalar mode function.
  Eigen::VectorXcd component(int axis) const;
};

struct LocalField {
  Vec3 potential = Vec3::Zero();
  Mat3 gradient = Mat3::Zero();  // gradient(l, m) = d_m A^l
};

/// Grid plus cutoff with per-node coupling factors cached. Immutable and
/// safe to share between threads.
class FieldKernels {
 public:
  FieldKernels(std::shared_ptr<const ModeGrid> grid, Cutoff cutoff);

  const ModeGrid& grid() const { return *grid_; }
  const std::shared_ptr<const ModeGrid>& grid_ptr() const { return grid_; }
  const Cutoff& cutoff() const { return cutoff_; }

  /// F[kappa](k_i) / sqrt(2 |k_i|).
  double coupling(std::size_t node) const { return coupling_[node]; }

  /// G_x(k_i, lambda) = F[kappa](k_i)/sqrt(2|k_i|) eps_lambda(k_i) e^{-i k_i.x}.
  FormFactor form_factor(const Vec3& x) const;

  Vec3 vector_potential(const ModeField& alpha, const Vec3& x) const;
  Vec3 electric_field(const ModeField& alpha, const Vec3& x) const;
  LocalField local_field(const ModeField& alpha, const Vec3& x) const;
  /// F^{lm} = d_m A^l - d_l A^m.
  Mat3 faraday(const ModeField& alpha, const Vec3& x) const;

 private:
  void require_same_grid(const ModeField& alpha) const;

  std::shared_ptr<const ModeGrid> grid_;
  Cutoff cutoff_;
  std::vector<double> coupling_;
};

FormFactor form_factor(const Vec3& x, const FieldKernels& kernels);
Vec3 eval_A(const FieldKernels& kernels, const ModeField& alpha, const Vec3& x);
Vec3 eval_E(const FieldKernels& kernels, const ModeField& alpha, const Vec3& x);
Mat3 eval_faraday(const FieldKernels& kernels, const ModeField& alpha, const Vec3& x);

/// sqrt(sum_i w_i sum_lambda (1+|k_i|^2)^sigma |alpha|^2), or with |k_i|^{2 sigma}
/// when homogeneous.
double norm_h_sigma(const ModeField& alpha, double sigma, bool homogeneous = false);

struct AdmissibilityReport {
  double inverse_k_norm = 0.0;   // || |.|^{-1} F[kappa] ||_{L^2}
  double sigma_norm = 0.0;       // || |.|^{3/2 - sigma} F[kappa] ||_{L^2}
  bool inverse_k_finite = false;
  bool sigma_finite = false;
  double radius = 0.0;           // radial extent at which the integrals settled
  bool pass() const { return inverse_k_finite && sigma_finite; }
};

/// Regularity integrals of the cutoff profile, with a
/// ratio test on successive doublings of the radial domain. Throws
/// UnsupportedError for non-radial profiles.
AdmissibilityReport check_admissibility(const Cutoff& cutoff);

/// 4 pi int_0^R r^{2+power} |F(r)|^2 dr, i.e. || |.|^{power/2} F ||^2 on the ball of radius R.
double radial_moment(const Cutoff& cutoff, double power, double radius);

struct CoulombValue {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
};

/// Smeared Coulomb potential V = kappa * kappa * |.|^{-1}, evaluated from
/// F[V](k) = 4 pi |k|^{-2} |F[kappa]|^2 by radial quadrature with a j_0 kernel.
class SmearedCoulomb {
 public:
  /// Throws DomainError when the cutoff fails the admissibility check.
  explicit SmearedCoulomb(const Cutoff& cutoff);

  CoulombValue operator()(const Vec3& r) const;
  double value(double r) const;
  /// dV/dr at radius r.
  double radial_derivative(double r) const;
  /// (2 pi)^{-3/2} 4 pi || F[kappa] ||_{L^2}^2, an upper bound for the operator norm of the Hessian.
  double hessian_bound() const { return hessian_bound_; }
  /// || |.|^{-1} F[kappa] ||_{L^2}^2, an upper bound for sup |V|.
  double sup_bound() const { return sup_bound_; }

 private:
  QuadratureRule build_rule(double resolved_radius) const;
  template <typename Kernel>
  double integrate(double r, Kernel&& kernel) const;

  double effective_radius_ = 0.0;
  std::optional<double> support_;
  Cutoff cutoff_;
  QuadratureRule rule_;          // nodes k_n, weights w_n |F(k_n)|^2
  double resolved_radius_ = 0.0;
  double hessian_bound_ = 0.0;
  double sup_bound_ = 0.0;
};

CoulombValue coulomb(const Vec3& r, const Cutoff& cutoff);

}  // namespace aqed
