#include "aqed/beta_functionals.hpp"

#include <cmath>
#include <string>

namespace aqed {

namespace {

void require_state(const PauliFierz& h, const QuantumState& s, const char* who) {
  if (s.hbar != h.hbar()) throw DomainError(std::string(who) + ": state and run use different hbar");
  if (s.psi.size() != static_cast<Eigen::Index>(h.dimension()))
    throw DomainError(std::string(who) + ": state does not match the Hamiltonian");
}

void require_particles(const PauliFierz& h, const std::vector<double>& v, const char* who) {
  if (static_cast<int>(v.size()) != h.particles())
    throw DomainError(std::string(who) + ": one classical coordinate per particle required");
}

// |psi_c|^2 summed over the Fock index, one entry per particle-grid column.
Eigen::VectorXd column_weights(const PauliFierz& h, const Eigen::VectorXcd& psi) {
  const Eigen::Index f = static_cast<Eigen::Index>(h.basis().size());
  Eigen::Map<const Eigen::MatrixXcd> m(psi.data(), f, static_cast<Eigen::Index>(h.outer()));
  return m.colwise().squaredNorm().transpose();
}

}  // namespace

double beta_a(const PauliFierz& h, const QuantumState& s, const std::vector<double>& q) {
  require_state(h, s, "beta_a");
  require_particles(h, q, "beta_a");
  const Eigen::VectorXd w = column_weights(h, s.psi);
  double acc = 0.0;
  for (std::size_t c = 0; c < h.outer(); ++c)
    for (int j = 0; j < h.particles(); ++j) {
      const double d = h.grid().x(h.grid_index(c, j)) - q[j];
      acc += d * d * w[c];
    }
  return acc;
}

double beta_b(const PauliFierz& h, const QuantumState& s, const std::vector<double>& ptilde) {
  require_state(h, s, "beta_b");
  require_particles(h, ptilde, "beta_b");
  double acc = 0.0;
  for (int j = 0; j < h.particles(); ++j) acc += (h.apply_kinetic(j, s.psi) - ptilde[j] * s.psi).squaredNorm();
  return acc;
}

double beta_b_tilde(const PauliFierz& h, const QuantumState& s, const std::vector<double>& p) {
  require_state(h, s, "beta_b_tilde");
  require_particles(h, p, "beta_b_tilde");
  double acc = 0.0;
  for (int j = 0; j < h.particles(); ++j) acc += (h.apply_momentum(j, s.psi) - p[j] * s.psi).squaredNorm();
  return acc;
}

BetaC beta_c(const PauliFierz& h, const QuantumState& s, const ModeField& alpha, double bound) {
  require_state(h, s, "beta_c");
  if (alpha.grid_ptr().get() != &h.kernels().grid()) throw DomainError("beta_c: field lives on a different grid");
  const double hbar = h.hbar();
  const Eigen::VectorXcd a = discrete_amplitudes(alpha);
  const FockBasis& basis = h.basis();

  BetaC out;
  for (int i = 0; i < basis.modes(); ++i) {
    const Eigen::VectorXcd bi = h.apply_fock(h.ladder(i), s.psi);
    out.value += (std::sqrt(hbar) * bi - a[i] * s.psi).squaredNorm();
  }

  // hbar |N^{1/2} W*(beta) Psi|^2 with W* = W(-beta), in a space padded far
  // enough that the displaced truncated state stays inside it.
  const int cols = basis.n_max() + 1;
  std::vector<int> levels(basis.modes(), cols);
  Eigen::VectorXcd phi = s.psi;
  for (int i = 0; i < basis.modes(); ++i) {
    const cplx beta = a[i] / std::sqrt(hbar);
    if (beta == 0.0) continue;
    const double reach = std::pow(std::sqrt(static_cast<double>(cols)) + std::abs(beta), 2);
    const int rows = cols + static_cast<int>(std::ceil(reach + 8.0 * std::sqrt(reach + 1.0) + 10.0));
    phi = apply_on_mode(phi, levels, h.outer(), i, displacement_matrix(-beta, rows, cols));
  }
  std::size_t block = 1;
  for (int l : levels) block *= static_cast<std::size_t>(l);
  double number = 0.0;
  for (std::size_t idx = 0; idx < block; ++idx) {
    int n = 0;
    std::size_t rest = idx;
    for (int l : levels) {
      n += static_cast<int>(rest % static_cast<std::size_t>(l));
      rest /= static_cast<std::size_t>(l);
    }
    if (n == 0) continue;
    double mass = 0.0;
    for (std::size_t c = 0; c < h.outer(); ++c) mass += std::norm(phi[idx + block * c]);
    number += n * mass;
  }
  out.shifted = hbar * number;
  out.leakage = std::max(0.0, 1.0 - phi.norm() / s.psi.norm());
  if (out.leakage > bound)
    throw TruncationError("beta_c: padded Weyl leakage " + std::to_string(out.leakage) + " exceeds the bound",
                          out.leakage);
  return out;
}

Eigen::MatrixXcd one_photon_rdm(const PauliFierz& h, const QuantumState& s) {
  const int m = h.basis().modes();
  std::vector<Eigen::VectorXcd> b;
  b.reserve(m);
  for (int i = 0; i < m; ++i) b.push_back(h.apply_fock(h.ladder(i), s.psi));
  Eigen::MatrixXcd gamma(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) gamma(i, j) = h.hbar() * b[j].dot(b[i]);
  const double defect = (gamma - gamma.adjoint()).cwiseAbs().maxCoeff();
  if (defect > 1e-10) throw NumericalError("one_photon_rdm: gamma is not Hermitian (" + std::to_string(defect) + ")");
  return 0.5 * (gamma + gamma.adjoint());
}

double trace_norm(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().sum();
}

double trace_distance(const Eigen::MatrixXcd& gamma, const Eigen::VectorXcd& a) {
  if (gamma.rows() != a.size() || gamma.cols() != a.size())
    throw DomainError("trace_distance: dimension mismatch");
  return trace_norm(gamma - a * a.adjoint());
}

double rdm_bound(double beta_c, const ModeField& alpha) {
  const double norm = discrete_amplitudes(alpha).norm();
  return 3.0 * beta_c + 6.0 * norm * std::sqrt(std::max(beta_c, 0.0));
}

LipschitzFunction LipschitzFunction::linear(double slope, double intercept) {
  LipschitzFunction f;
  f.affine = true;
  f.slope = slope;
  f.intercept = intercept;
  f.lipschitz = std::abs(slope);
  return f;
}

double classical_field_observable(const ModeField& g, const ModeField& alpha) {
  if (g.grid_ptr() != alpha.grid_ptr()) throw DomainError("classical_field_observable: grid mismatch");
  return 2.0 * discrete_amplitudes(g).dot(discrete_amplitudes(alpha)).real();
}

ObservableError observable_error(const PauliFierz& h, const QuantumState& s, ObservableKind kind, int j,
                                 double classical_value, const LipschitzFunction& f, const ModeField* g) {
  require_state(h, s, "observable_error");
  if (!std::isfinite(f.lipschitz) || f.lipschitz < 0.0 || (!f.affine && !f.fn))
    throw DomainError("observable_error: function needs a certified Lipschitz constant");
  if (f.affine && f.lipschitz < std::abs(f.slope))
    throw DomainError("observable_error: Lipschitz constant below the slope");
  if (kind != ObservableKind::field && (j < 0 || j >= h.particles()))
    throw DomainError("observable_error: particle index out of range");

  const Eigen::Index fsize = static_cast<Eigen::Index>(h.basis().size());
  double quantum = 0.0;
  switch (kind) {
    case ObservableKind::position: {
      const Eigen::VectorXd w = column_weights(h, s.psi);
      for (std::size_t c = 0; c < h.outer(); ++c) quantum += f(h.grid().x(h.grid_index(c, j))) * w[c];
      break;
    }
    case ObservableKind::momentum: {
      // Diagonalize -i hbar D, then weigh f over the spectral measure of particle j.
      const Eigen::MatrixXcd p = cplx(0.0, -h.hbar()) * h.derivative().cast<cplx>();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(p);
      const Eigen::MatrixXcd v = eig.eigenvectors().conjugate();
      const Eigen::Index g = h.grid().points();
      const Eigen::Index inner = fsize * (j == 0 ? 1 : g);
      const Eigen::Index rest = s.psi.size() / (inner * g);
      Eigen::VectorXd mass = Eigen::VectorXd::Zero(g);
      for (Eigen::Index r = 0; r < rest; ++r) {
        Eigen::Map<const Eigen::MatrixXcd> block(s.psi.data() + inner * g * r, inner, g);
        mass += (block * v).colwise().squaredNorm().transpose();
      }
      for (Eigen::Index k = 0; k < g; ++k) quantum += f(eig.eigenvalues()[k]) * mass[k];
      break;
    }
    case ObservableKind::field: {
      if (g == nullptr) throw DomainError("observable_error: field observable needs a mode function");
      const SparseOp phi = field_observable(h, *g);
      const double scale = std::sqrt(h.hbar());
      if (f.affine) {
        quantum = f.slope * scale * s.psi.dot(h.apply_fock(phi, s.psi)).real() + f.intercept * s.psi.squaredNorm();
        break;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig{Eigen::MatrixXcd(phi)};
      Eigen::Map<const Eigen::MatrixXcd> m(s.psi.data(), fsize, static_cast<Eigen::Index>(h.outer()));
      const Eigen::VectorXd mass = (eig.eigenvectors().adjoint() * m).rowwise().squaredNorm();
      for (Eigen::Index k = 0; k < fsize; ++k) quantum += f(scale * eig.eigenvalues()[k]) * mass[k];
      break;
    }
  }
  ObservableError out;
  out.quantum = quantum;
  out.classical = f(classical_value);
  out.error = std::abs(out.quantum - out.classical);
  return out;
}

EnsembleRdm ensemble_rdm(const std::vector<EnsembleMember>& members) {
  if (members.empty()) throw DomainError("ensemble_rdm: empty ensemble");
  const Eigen::Index m = members.front().gamma.rows();
  double total = 0.0;
  for (const auto& s : members) {
    if (!(s.weight > 0.0)) throw DomainError("ensemble_rdm: weights must be positive");
    if (s.gamma.rows() != m || s.gamma.cols() != m || s.classical.size() != m)
      throw DomainError("ensemble_rdm: members live on different mode sets");
    total += s.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("ensemble_rdm: weights do not sum to one");

  EnsembleRdm out;
  out.gamma = Eigen::MatrixXcd::Zero(m, m);
  out.target = Eigen::MatrixXcd::Zero(m, m);
  for (const auto& s : members) {
    out.gamma += s.weight * s.gamma;
    out.target += s.weight * (s.classical * s.classical.adjoint());
    out.mean_member_distance += s.weight * trace_distance(s.gamma, s.classical);
  }
  out.distance = trace_norm(out.gamma - out.target);
  return out;
}

BetaReport evaluate(const PauliFierz& h, const QuantumState& s, const ClassicalModel& model,
                    const ClassicalState& u) {
  if (static_cast<int>(u.particles()) != h.particles())
    throw DomainError("evaluate: particle numbers differ");
  if (u.alpha.grid_ptr().get() != &h.kernels().grid()) throw DomainError("evaluate: runs use different mode sets");
  if (model.options().axis != h.options().axis || model.options().field_coupling != h.options().field_coupling ||
      (h.particles() > 1 && model.options().coulomb != h.options().coulomb))
    throw DomainError("evaluate: runs use different reductions");
  const int axis = h.options().axis;
  const std::vector<Vec3> pt = model.kinetic_momentum(u);
  std::vector<double> q, p, ptilde;
  for (std::size_t j = 0; j < u.particles(); ++j) {
    q.push_back(u.q[j][axis]);
    p.push_back(u.p[j][axis]);
    ptilde.push_back(pt[j][axis]);
  }

  BetaReport r;
  r.t = s.t;
  r.beta_a = beta_a(h, s, q);
  r.beta_b = beta_b(h, s, ptilde);
  r.beta_b_tilde = beta_b_tilde(h, s, p);
  const BetaC c = beta_c(h, s, u.alpha, h.options().leakage_bound);
  r.beta_c = c.value;
  r.beta_c_shifted = c.shifted;
  r.rdm_distance = trace_distance(one_photon_rdm(h, s), discrete_amplitudes(u.alpha));
  r.rdm_bound = rdm_bound(r.beta_c, u.alpha);
  r.leakage = std::max(s.leakage, c.leakage);
  r.energy_q = expect_energy(h, s);
  r.energy_c = model.energy(u);
  return r;
}

}  // namespace aqed
