#pragma once

// Shared desk configurations for the unit and acceptance suites.

#include <cmath>
#include <memory>
#include <random>

#include "aqed/classical_dynamics.hpp"
#include "aqed/field_kernels.hpp"
#include "aqed/fock_quantum.hpp"

namespace aqed::testing {

inline std::shared_ptr<const FieldKernels> reference_kernels(double lambda = 1.0, double sigma = 0.5) {
  const auto grid = ModeGrid::product({8, 6, 8, lambda});
  return std::make_shared<const FieldKernels>(grid, Cutoff::sharp(lambda, sigma));
}

// Smooth initial field alpha(k) = a e^{-|k|^2} on both polarizations.
inline ModeField smooth_field(std::shared_ptr<const ModeGrid> grid, cplx a0, cplx a1) {
  ModeField alpha(grid);
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    const double g = std::exp(-grid->k_norm(i) * grid->k_norm(i));
    alpha(i, 0) = a0 * g;
    alpha(i, 1) = a1 * g;
  }
  return alpha;
}

// N = 1 particle at the origin with momentum (0.5, 0.2, -0.1), field 0.8 e^{-|k|^2}(1, i).
inline ClassicalState reference_state(const FieldKernels& kernels) {
  ClassicalState u(kernels.grid_ptr());
  u.q = {Vec3(0.0, 0.0, 0.0)};
  u.p = {Vec3(0.5, 0.2, -0.1)};
  u.alpha = smooth_field(kernels.grid_ptr(), 0.8, cplx(0.0, 0.8));
  return u;
}

// Max-norm distance between two states of the same shape.
inline double state_distance(const ClassicalState& a, const ClassicalState& b) {
  double d = (a.alpha.amplitudes() - b.alpha.amplitudes()).cwiseAbs().maxCoeff();
  for (std::size_t j = 0; j < a.q.size(); ++j) {
    d = std::max(d, (a.q[j] - b.q[j]).cwiseAbs().maxCoeff());
    d = std::max(d, (a.p[j] - b.p[j]).cwiseAbs().maxCoeff());
  }
  return d;
}

}  // namespace aqed::testing

namespace aqed::testing {

// One kept node (two polarization modes) with a generic wave-vector.
inline std::shared_ptr<const FieldKernels> single_node_kernels(double weight = 4.0) {
  const auto grid = ModeGrid::from_nodes({Vec3(0.55, 0.45, 0.6)}, {weight});
  return std::make_shared<const FieldKernels>(grid, Cutoff::sharp(1.0, 0.5));
}

inline PauliFierz small_model(double hbar, int points = 16, int n_max = 3, bool coupling = true,
                              Derivative derivative = Derivative::spectral) {
  QuantumOptions opts;
  opts.hbar = hbar;
  opts.field_coupling = coupling;
  opts.derivative = derivative;
  return PauliFierz(ParticleGrid(points, -4.0, 4.0), single_node_kernels(), n_max, opts);
}

inline ModeField mode_field(std::shared_ptr<const ModeGrid> grid, std::initializer_list<cplx> values) {
  ModeField f(std::move(grid));
  Eigen::Index i = 0;
  for (cplx v : values) f.amplitudes()[i++] = v;
  return f;
}

}  // namespace aqed::testing
