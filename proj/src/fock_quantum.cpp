#include "aqed/fock_quantum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

namespace aqed {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kDenseLimit = 4096;

Eigen::MatrixXd spectral_derivative(int points, double length) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(points, points);
  for (int j = 0; j < points; ++j) {
    for (int k = 0; k < points; ++k) {
      if (j == k) continue;
      const int diff = j - k;
      const double sign = (diff % 2 == 0) ? 1.0 : -1.0;
      d(j, k) = (kPi / length) * sign / std::tan(kPi * diff / points);
    }
  }
  // Exact antisymmetry, independent of rounding in the cotangent.
  const Eigen::MatrixXd anti = 0.5 * (d - d.transpose());
  return anti;
}

Eigen::MatrixXd central_derivative(int points, double h) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(points, points);
  for (int j = 0; j < points; ++j) {
    d(j, (j + 1) % points) = 0.5 / h;
    d(j, (j + points - 1) % points) = -0.5 / h;
  }
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// FockBasis / ParticleGrid

FockBasis::FockBasis(int modes, int n_max) : modes_(modes), n_max_(n_max) {
  if (modes < 1) throw DomainError("FockBasis: at least one mode required");
  if (n_max < 1) throw DomainError("FockBasis: n_max must be >= 1");
  const double size = std::pow(static_cast<double>(n_max + 1), modes);
  if (size > 1e12) throw DimensionError("FockBasis: basis too large");
  strides_.resize(modes);
  std::size_t s = 1;
  for (int i = 0; i < modes; ++i) {
    strides_[i] = s;
    s *= static_cast<std::size_t>(n_max + 1);
  }
  size_ = s;
}

int FockBasis::occupation(std::size_t index, int mode) const {
  return static_cast<int>((index / strides_[mode]) % static_cast<std::size_t>(n_max_ + 1));
}

std::size_t FockBasis::index(const std::vector<int>& occupations) const {
  if (static_cast<int>(occupations.size()) != modes_) throw DomainError("FockBasis: wrong tuple length");
  std::size_t idx = 0;
  for (int i = 0; i < modes_; ++i) {
    if (occupations[i] < 0 || occupations[i] > n_max_) throw DomainError("FockBasis: occupation out of range");
    idx += static_cast<std::size_t>(occupations[i]) * strides_[i];
  }
  return idx;
}

int FockBasis::total(std::size_t index) const {
  int n = 0;
  for (int i = 0; i < modes_; ++i) n += occupation(index, i);
  return n;
}

ParticleGrid::ParticleGrid(int points, double x_min, double x_max)
    : points_(points), x_min_(x_min), x_max_(x_max), h_((x_max - x_min) / points) {
  if (points < 8) throw DomainError("ParticleGrid: at least 8 points required");
  if (!(x_max > x_min)) throw DomainError("ParticleGrid: empty extent");
}

// ---------------------------------------------------------------------------
// Displacements

Eigen::VectorXcd discrete_amplitudes(const ModeField& f) {
  const auto& grid = f.grid();
  Eigen::VectorXcd beta(f.size());
  for (std::size_t i = 0; i < grid.node_count(); ++i)
    for (int l = 0; l < 2; ++l) beta[ModeGrid::mode_index(i, l)] = std::sqrt(grid.weight(i)) * f(i, l);
  return beta;
}

Eigen::MatrixXcd displacement_matrix(cplx beta, int rows, int cols) {
  if (rows < 1 || cols < 1) throw DomainError("displacement_matrix: empty block");
  if (beta == 0.0) return Eigen::MatrixXcd::Identity(rows, cols);
  // Exponentiate the generator in a padded space whose edge the block never reaches.
  const double r = std::abs(beta);
  const double reach = std::pow(std::sqrt(static_cast<double>(cols)) + r, 2);
  const int dim = std::max(rows, cols) + static_cast<int>(std::ceil(reach + 12.0 * std::sqrt(reach + 1.0) + 30.0));
  // i (beta b* - conj(beta) b) is Hermitian; exp(X) = V exp(-i lambda) V^dagger.
  Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) {
    const double s = std::sqrt(static_cast<double>(n));
    gen(n, n - 1) = cplx(0.0, 1.0) * beta * s;
    gen(n - 1, n) = std::conj(gen(n, n - 1));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gen);
  const Eigen::MatrixXcd& v = eig.eigenvectors();
  Eigen::VectorXcd phase(dim);
  for (int j = 0; j < dim; ++j) phase[j] = std::polar(1.0, -eig.eigenvalues()[j]);
  return v.topRows(rows) * phase.asDiagonal() * v.topRows(cols).adjoint();
}

Eigen::VectorXcd apply_on_mode(const Eigen::VectorXcd& in, std::vector<int>& levels, std::size_t outer,
                               int mode, const Eigen::MatrixXcd& m) {
  if (m.cols() != levels[mode]) throw DomainError("apply_on_mode: matrix does not match the mode levels");
  std::size_t inner = 1;
  for (int i = 0; i < mode; ++i) inner *= static_cast<std::size_t>(levels[i]);
  std::size_t rest = outer;
  for (std::size_t i = mode + 1; i < levels.size(); ++i) rest *= static_cast<std::size_t>(levels[i]);
  const std::size_t lin = static_cast<std::size_t>(levels[mode]);
  const std::size_t lout = static_cast<std::size_t>(m.rows());
  if (in.size() != static_cast<Eigen::Index>(inner * lin * rest))
    throw DomainError("apply_on_mode: vector does not match the mode levels");
  Eigen::VectorXcd out(inner * lout * rest);
  const Eigen::MatrixXcd mt = m.transpose();
  for (std::size_t r = 0; r < rest; ++r) {
    Eigen::Map<const Eigen::MatrixXcd> src(in.data() + inner * lin * r, inner, lin);
    Eigen::Map<Eigen::MatrixXcd> dst(out.data() + inner * lout * r, inner, lout);
    dst.noalias() = src * mt;
  }
  levels[mode] = static_cast<int>(lout);
  return out;
}

WeylResult weyl_displace(const FockBasis& basis, const Eigen::VectorXcd& beta, Eigen::VectorXcd& psi,
                         std::size_t outer, double bound) {
  if (beta.size() != basis.modes()) throw DomainError("weyl_displace: one amplitude per mode required");
  if (!beta.allFinite()) throw DomainError("weyl_displace: non-finite amplitudes");
  const double before = psi.norm();
  if (before == 0.0) throw DomainError("weyl_displace: zero state");
  std::vector<int> levels(basis.modes(), basis.n_max() + 1);
  for (int i = 0; i < basis.modes(); ++i) {
    if (beta[i] == 0.0) continue;
    psi = apply_on_mode(psi, levels, outer, i, displacement_matrix(beta[i], basis.n_max() + 1, basis.n_max() + 1));
  }
  WeylResult result;
  const double after = psi.norm();
  result.leakage = std::max(0.0, 1.0 - after / before);
  if (result.leakage > bound)
    throw TruncationError("weyl_displace: truncation leakage " + std::to_string(result.leakage) +
                              " exceeds the bound; increase n_max",
                          result.leakage);
  psi *= before / after;
  return result;
}

// ---------------------------------------------------------------------------
// PauliFierz

PauliFierz::PauliFierz(ParticleGrid grid, std::shared_ptr<const FieldKernels> kernels, int n_max,
                       QuantumOptions options)
    : grid_(grid),
      kernels_(std::move(kernels)),
      options_(options),
      basis_(static_cast<int>(kernels_->grid().mode_count()), n_max) {
  if (options_.particles < 1 || options_.particles > 2)
    throw UnsupportedError("PauliFierz: only N = 1 or N = 2 particles are supported");
  if (options_.axis < 0 || options_.axis > 2) throw DomainError("PauliFierz: axis must be 0, 1 or 2");
  if (!(options_.hbar > 0.0)) throw DomainError("PauliFierz: hbar must be positive");
  const int gpts = grid_.points();
  const double amplitudes = std::pow(static_cast<double>(gpts), options_.particles) * static_cast<double>(basis_.size());
  if (amplitudes > static_cast<double>(options_.max_amplitudes))
    throw DimensionError("PauliFierz: " + std::to_string(static_cast<long long>(amplitudes)) +
                         " amplitudes exceed the cap of " + std::to_string(options_.max_amplitudes));
  outer_ = options_.particles == 1 ? gpts : static_cast<std::size_t>(gpts) * gpts;
  dimension_ = outer_ * basis_.size();

  const std::size_t fdim = basis_.size();
  const auto& modes = kernels_->grid();
  ladders_.reserve(basis_.modes());
  for (int i = 0; i < basis_.modes(); ++i) {
    std::vector<Eigen::Triplet<cplx>> trips;
    for (std::size_t f = 0; f < fdim; ++f) {
      const int n = basis_.occupation(f, i);
      if (n > 0) trips.emplace_back(f - basis_.stride(i), f, std::sqrt(static_cast<double>(n)));
    }
    SparseOp b(fdim, fdim);
    b.setFromTriplets(trips.begin(), trips.end());
    ladders_.push_back(std::move(b));
  }
  number_.resize(fdim);
  field_energy_.resize(fdim);
  for (std::size_t f = 0; f < fdim; ++f) {
    number_[f] = basis_.total(f);
    double e = 0.0;
    for (int i = 0; i < basis_.modes(); ++i) e += modes.k_norm(i / 2) * basis_.occupation(f, i);
    field_energy_[f] = e;
  }

  field_a_.reserve(gpts);
  field_e_.reserve(gpts);
  for (int g = 0; g < gpts; ++g) {
    const Eigen::VectorXcd c = field_coefficients(grid_.x(g));
    Eigen::VectorXcd ce(c.size());
    for (int i = 0; i < basis_.modes(); ++i) ce[i] = cplx(0.0, modes.k_norm(i / 2)) * c[i];
    field_a_.push_back(field_operator(c));
    field_e_.push_back(field_operator(ce));
  }

  if (options_.derivative == Derivative::spectral && gpts % 2 != 0)
    throw DomainError("PauliFierz: the spectral derivative needs an even number of grid points");
  derivative_ = options_.derivative == Derivative::spectral
                    ? spectral_derivative(gpts, gpts * grid_.spacing())
                    : central_derivative(gpts, grid_.spacing());

  coulomb_ = Eigen::VectorXd::Zero(outer_);
  if (options_.particles == 2 && options_.coulomb) {
    const SmearedCoulomb v(kernels_->cutoff());
    for (int g2 = 0; g2 < gpts; ++g2)
      for (int g1 = 0; g1 < gpts; ++g1) coulomb_[g1 + gpts * g2] = v.value(grid_.x(g1) - grid_.x(g2));
  }
}

Eigen::VectorXcd PauliFierz::field_coefficients(double x) const {
  const auto& modes = kernels_->grid();
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(basis_.modes());
  if (!options_.field_coupling) return c;
  const int a = options_.axis;
  for (std::size_t i = 0; i < modes.node_count(); ++i) {
    const cplx phase = std::polar(std::sqrt(modes.weight(i)) * kernels_->coupling(i), modes.node(i)[a] * x);
    for (int l = 0; l < 2; ++l) c[ModeGrid::mode_index(i, l)] = phase * modes.polarization(i, l)[a];
  }
  return c;
}

SparseOp PauliFierz::field_operator(const Eigen::VectorXcd& coefficients) const {
  SparseOp op(basis_.size(), basis_.size());
  for (int i = 0; i < basis_.modes(); ++i) {
    if (coefficients[i] == 0.0) continue;
    const SparseOp down = coefficients[i] * ladders_[i];
    const SparseOp up = std::conj(coefficients[i]) * SparseOp(ladders_[i].transpose());
    op += down + up;
  }
  op.makeCompressed();
  return op;
}

int PauliFierz::grid_index(std::size_t column, int j) const {
  const std::size_t g = static_cast<std::size_t>(grid_.points());
  return static_cast<int>(j == 0 ? column % g : column / g);
}

void PauliFierz::apply_derivative(int j, const Eigen::VectorXcd& psi, Eigen::VectorXcd& out) const {
  // D acts on a real operator index, so the product runs on interleaved
  // (re, im) rows as a real GEMM.
  const Eigen::Index f = static_cast<Eigen::Index>(basis_.size());
  const Eigen::Index g = grid_.points();
  out.resize(psi.size());
  const double* src = reinterpret_cast<const double*>(psi.data());
  double* dst = reinterpret_cast<double*>(out.data());
  if (options_.particles == 1 || j == 1) {
    const Eigen::Index rows = 2 * (options_.particles == 1 ? f : f * g);
    Eigen::Map<const Eigen::MatrixXd> in(src, rows, g);
    Eigen::Map<Eigen::MatrixXd> res(dst, rows, g);
    res.noalias() = in * derivative_.transpose();
    return;
  }
  for (Eigen::Index b = 0; b < g; ++b) {
    Eigen::Map<const Eigen::MatrixXd> in(src + 2 * f * g * b, 2 * f, g);
    Eigen::Map<Eigen::MatrixXd> res(dst + 2 * f * g * b, 2 * f, g);
    res.noalias() = in * derivative_.transpose();
  }
}

void PauliFierz::add_field(int j, double scale, const Eigen::VectorXcd& psi, Eigen::VectorXcd& out) const {
  if (!options_.field_coupling) return;
  const Eigen::Index f = static_cast<Eigen::Index>(basis_.size());
  for (std::size_t c = 0; c < outer_; ++c) {
    const auto& a = field_a_[grid_index(c, j)];
    out.segment(c * f, f).noalias() += scale * (a * psi.segment(c * f, f));
  }
}

Eigen::VectorXcd PauliFierz::apply_momentum(int j, const Eigen::VectorXcd& psi) const {
  Eigen::VectorXcd out;
  apply_derivative(j, psi, out);
  out *= cplx(0.0, -options_.hbar);
  return out;
}

Eigen::VectorXcd PauliFierz::apply_kinetic(int j, const Eigen::VectorXcd& psi) const {
  Eigen::VectorXcd out = apply_momentum(j, psi);
  add_field(j, -std::sqrt(options_.hbar), psi, out);
  return out;
}

Eigen::VectorXcd PauliFierz::apply_field(int j, const Eigen::VectorXcd& psi) const {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
  add_field(j, 1.0, psi, out);
  return out;
}

Eigen::VectorXcd PauliFierz::apply_fock(const SparseOp& op, const Eigen::VectorXcd& psi) const {
  const Eigen::Index f = static_cast<Eigen::Index>(basis_.size());
  Eigen::Map<const Eigen::MatrixXcd> src(psi.data(), f, static_cast<Eigen::Index>(outer_));
  Eigen::VectorXcd out(psi.size());
  Eigen::Map<Eigen::MatrixXcd> dst(out.data(), f, static_cast<Eigen::Index>(outer_));
  dst.noalias() = op * src;
  return out;
}

Eigen::VectorXcd PauliFierz::apply_position(int j, const Eigen::VectorXcd& psi) const {
  const Eigen::Index f = static_cast<Eigen::Index>(basis_.size());
  Eigen::VectorXcd out(psi.size());
  for (std::size_t c = 0; c < outer_; ++c) out.segment(c * f, f) = grid_.x(grid_index(c, j)) * psi.segment(c * f, f);
  return out;
}

void PauliFierz::apply(const Eigen::VectorXcd& psi, Eigen::VectorXcd& out) const {
  const Eigen::Index f = static_cast<Eigen::Index>(basis_.size());
  out.resize(psi.size());
  const Eigen::ArrayXd photons = options_.hbar * field_energy_.array();
  for (std::size_t c = 0; c < outer_; ++c)
    out.segment(c * f, f).array() = psi.segment(c * f, f).array() * (photons + coulomb_[c]).cast<cplx>();
  for (int j = 0; j < options_.particles; ++j) {
    const Eigen::VectorXcd pj = apply_kinetic(j, psi);
    out += apply_kinetic(j, pj);
  }
}

Eigen::VectorXcd PauliFierz::apply(const Eigen::VectorXcd& psi) const {
  Eigen::VectorXcd out;
  apply(psi, out);
  return out;
}

Eigen::MatrixXcd PauliFierz::dense() const {
  if (dimension_ > kDenseLimit) throw DimensionError("PauliFierz::dense: dimension too large");
  const Eigen::Index n = static_cast<Eigen::Index>(dimension_);
  Eigen::MatrixXcd h(n, n);
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
  Eigen::VectorXcd col;
  for (Eigen::Index k = 0; k < n; ++k) {
    e[k] = 1.0;
    apply(e, col);
    h.col(k) = col;
    e[k] = 0.0;
  }
  return h;
}

double PauliFierz::hermiticity_defect(unsigned long long seed) const {
  if (dimension_ <= kDenseLimit) {
    const Eigen::MatrixXcd h = dense();
    return (h - h.adjoint()).cwiseAbs().maxCoeff();
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto random_unit = [&] {
    Eigen::VectorXcd v(dimension_);
    for (auto& z : v) z = cplx(g(rng), g(rng));
    return Eigen::VectorXcd(v / v.norm());
  };
  double worst = 0.0;
  for (int probe = 0; probe < 4; ++probe) {
    const Eigen::VectorXcd x = random_unit();
    const Eigen::VectorXcd y = random_unit();
    worst = std::max(worst, std::abs(x.dot(apply(y)) - std::conj(y.dot(apply(x)))));
  }
  return worst;
}

SparseOp PauliFierz::faraday(int l, int m, const Vec3& x) const {
  if (l < 0 || l > 2 || m < 0 || m > 2) throw DomainError("faraday: component out of range");
  const auto& modes = kernels_->grid();
  Eigen::VectorXcd d = Eigen::VectorXcd::Zero(basis_.modes());
  if (options_.field_coupling) {
    for (std::size_t i = 0; i < modes.node_count(); ++i) {
      const Vec3& k = modes.node(i);
      const cplx c = std::polar(std::sqrt(modes.weight(i)) * kernels_->coupling(i), k.dot(x));
      for (int lam = 0; lam < 2; ++lam) {
        const Vec3& e = modes.polarization(i, lam);
        const cplx dml = cplx(0.0, k[m]) * c * e[l];
        const cplx dlm = cplx(0.0, k[l]) * c * e[m];
        d[ModeGrid::mode_index(i, lam)] = dml - dlm;
      }
    }
  }
  return field_operator(d);
}

// ---------------------------------------------------------------------------
// States and propagation

QuantumState initial_state(const PauliFierz& h, const std::vector<double>& q0, const std::vector<double>& p0,
                           const ModeField& alpha0) {
  const int n = h.particles();
  if (static_cast<int>(q0.size()) != n || static_cast<int>(p0.size()) != n)
    throw DomainError("initial_state: one position and momentum per particle required");
  if (alpha0.grid_ptr().get() != &h.kernels().grid())
    throw DomainError("initial_state: field lives on a different grid");
  const double hbar = h.hbar();
  const auto& grid = h.grid();
  const double width = std::sqrt(hbar / 2.0);
  const double nyquist = hbar * kPi / grid.spacing();
  for (int j = 0; j < n; ++j) {
    if (q0[j] - 6.0 * width < grid.x_min() || q0[j] + 6.0 * width > grid.x(grid.points() - 1))
      throw DomainError("initial_state: wave packet does not fit the grid (6 widths)");
    if (std::abs(p0[j]) + 6.0 * width > nyquist)
      throw DomainError("initial_state: momentum content exceeds the grid Nyquist limit");
  }

  const int g = grid.points();
  std::vector<Eigen::VectorXcd> packets;
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXcd phi(g);
    for (int k = 0; k < g; ++k) {
      const double d = grid.x(k) - q0[j];
      phi[k] = std::pow(kPi * hbar, -0.25) * std::exp(-d * d / (2.0 * hbar)) *
               std::polar(std::sqrt(grid.spacing()), p0[j] * d / hbar);
    }
    packets.push_back(phi / phi.norm());
  }
  const std::size_t f = h.basis().size();
  QuantumState s;
  s.hbar = hbar;
  s.psi = Eigen::VectorXcd::Zero(h.dimension());
  for (std::size_t c = 0; c < h.outer(); ++c) {
    cplx amp = packets[0][h.grid_index(c, 0)];
    if (n == 2) amp *= packets[1][h.grid_index(c, 1)];
    s.psi[c * f] = amp;
  }
  const Eigen::VectorXcd beta = discrete_amplitudes(alpha0) / std::sqrt(hbar);
  s.leakage = weyl_displace(h.basis(), beta, s.psi, h.outer(), h.options().leakage_bound).leakage;
  return s;
}

PropagationStats propagate(const PauliFierz& h, QuantumState& state, double t, double dt,
                           const KrylovOptions& options) {
  if (!(dt > 0.0)) throw DomainError("propagate: dt must be positive");
  if (!(t >= 0.0)) throw DomainError("propagate: t must be nonnegative");
  if (state.hbar != h.hbar()) throw DomainError("propagate: state and Hamiltonian use different hbar");
  const KrylovExponential krylov(options);
  const HermitianApply op = [&h](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) { h.apply(in, out); };
  PropagationStats stats;
  const long steps = static_cast<long>(std::ceil(t / dt - 1e-9));
  const double step = steps > 0 ? t / steps : 0.0;
  for (long n = 0; n < steps; ++n) {
    krylov.apply(op, step / h.hbar(), state.psi, stats.krylov);
    stats.norm_defect = std::max(stats.norm_defect, std::abs(state.psi.norm() - 1.0));
  }
  state.t += t;
  return stats;
}

// ---------------------------------------------------------------------------
// Expectations

double expect_position(const PauliFierz& h, const QuantumState& s, int j) {
  return s.psi.dot(h.apply_position(j, s.psi)).real();
}

double expect_momentum(const PauliFierz& h, const QuantumState& s, int j) {
  return s.psi.dot(h.apply_momentum(j, s.psi)).real();
}

double expect_kinetic(const PauliFierz& h, const QuantumState& s, int j) {
  return s.psi.dot(h.apply_kinetic(j, s.psi)).real();
}

double expect_number(const PauliFierz& h, const QuantumState& s) {
  const Eigen::Index f = static_cast<Eigen::Index>(h.basis().size());
  double acc = 0.0;
  for (std::size_t c = 0; c < h.outer(); ++c)
    acc += s.psi.segment(c * f, f).cwiseAbs2().dot(h.number_diagonal());
  return acc;
}

double expect_energy(const PauliFierz& h, const QuantumState& s) { return s.psi.dot(h.apply(s.psi)).real(); }

SparseOp field_observable(const PauliFierz& h, const ModeField& g) {
  if (g.grid_ptr().get() != &h.kernels().grid()) throw DomainError("field_observable: grid mismatch");
  const Eigen::VectorXcd gd = discrete_amplitudes(g);
  SparseOp op(h.basis().size(), h.basis().size());
  for (int i = 0; i < h.basis().modes(); ++i) {
    if (gd[i] == 0.0) continue;
    op += std::conj(gd[i]) * h.ladder(i) + gd[i] * SparseOp(h.ladder(i).transpose());
  }
  op.makeCompressed();
  return op;
}

double expect_field(const PauliFierz& h, const QuantumState& s, const ModeField& g) {
  return s.psi.dot(h.apply_fock(field_observable(h, g), s.psi)).real();
}

double expect_vector_potential(const PauliFierz& h, const QuantumState& s, int j) {
  return s.psi.dot(h.apply_field(j, s.psi)).real();
}

}  // namespace aqed
