#include "aqed/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Eigenvalues>

#include "aqed/errors.hpp"

namespace aqed {

using cplx = std::complex<double>;

KrylovExponential::KrylovExponential(KrylovOptions options) : options_(options) {
  if (options_.dimension < 2) throw DomainError("Krylov: subspace dimension must be >= 2");
  if (!(options_.tolerance > 0.0)) throw DomainError("Krylov: tolerance must be positive");
}

double KrylovExponential::try_step(const HermitianApply& h, double tau, const Eigen::VectorXcd& v,
                                   Eigen::VectorXcd& out, long& matvecs) const {
  const double beta = v.norm();
  if (beta == 0.0) {
    out = v;
    return 0.0;
  }
  const int m_max = std::min<int>(options_.dimension, static_cast<int>(v.size()));
  std::vector<Eigen::VectorXcd> basis;
  basis.reserve(m_max + 1);
  basis.push_back(v / beta);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(m_max);
  Eigen::VectorXd off(m_max);
  Eigen::VectorXcd w(v.size());
  Eigen::VectorXcd y;

  // exp(-i tau T_m) e_1 for the leading m x m block of the tridiagonal matrix.
  auto project = [&](int m) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      t(j, j) = diag[j];
      if (j + 1 < m) t(j, j + 1) = t(j + 1, j) = off[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
    const Eigen::MatrixXd& q = eig.eigenvectors();
    Eigen::VectorXcd phase(m);
    for (int j = 0; j < m; ++j) phase[j] = std::polar(1.0, -tau * eig.eigenvalues()[j]);
    y = q * phase.cwiseProduct(q.row(0).transpose().cast<cplx>());
  };

  int m = 0;
  double estimate = 0.0;
  while (m < m_max) {
    h(basis[m], w);
    ++matvecs;
    // Full reorthogonalization (twice) against the whole basis.
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j <= m; ++j) {
        const cplx c = basis[j].dot(w);
        if (j == m) diag[m] += c.real();
        w -= c * basis[j];
      }
    }
    const double next_norm = w.norm();
    off[m] = next_norm;
    ++m;
    if (next_norm <= 1e-14 * std::max(1.0, std::abs(diag[m - 1]))) {
      project(m);  // invariant subspace: the projection is exact
      estimate = 0.0;
      break;
    }
    // Saad's a posteriori estimate h_{m+1,m} |[exp(-i tau T_m)]_{m,1}|, relative to |v|.
    if (m >= 3 || m == m_max) {
      project(m);
      estimate = next_norm * std::abs(y[m - 1]);
      if (estimate <= options_.tolerance) break;
    }
    basis.push_back(w / next_norm);
  }

  out.setZero(v.size());
  for (int j = 0; j < m; ++j) out += (beta * y[j]) * basis[j];
  return estimate;
}

void KrylovExponential::apply(const HermitianApply& h, double tau, Eigen::VectorXcd& v,
                              KrylovStats& stats) const {
  if (tau == 0.0) return;
  Eigen::VectorXcd out;
  double remaining = tau;
  double piece = tau;
  int depth = 0;
  while (remaining != 0.0) {
    if (std::abs(piece) > std::abs(remaining)) piece = remaining;
    const double err = try_step(h, piece, v, out, stats.matvecs);
    if (!std::isfinite(err) || !out.allFinite()) throw NumericalError("Krylov: non-finite result");
    if (err > options_.tolerance) {
      if (++depth > options_.max_halvings)
        throw NumericalError("Krylov: step error stays above tolerance after repeated halving");
      piece *= 0.5;
      ++stats.halvings;
      continue;
    }
    stats.max_error_estimate = std::max(stats.max_error_estimate, err);
    v.swap(out);
    ++stats.substeps;
    remaining -= piece;
    if (std::abs(remaining) < 1e-15 * std::abs(tau)) remaining = 0.0;
  }
}

}  // namespace aqed
