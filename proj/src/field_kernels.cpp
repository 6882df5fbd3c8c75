#include "aqed/field_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aqed/errors.hpp"

namespace aqed {

namespace {

constexpr double kPi = std::numbers::pi;
const double kFourierNorm = std::pow(2.0 * kPi, -1.5);

// Composite Gauss-Legendre on [lo, hi] split at the support radius, with
// panels no wider than max_width.
QuadratureRule radial_rule(const Cutoff& cutoff, double lo, double hi, double max_width,
                           int order = 20) {
  std::vector<double> points;
  if (auto s = cutoff.support_radius(); s && *s > lo && *s < hi) points.push_back(*s);
  points.push_back(hi);
  QuadratureRule rule;
  for (double b : points) {
    const int panels = std::max(1, static_cast<int>(std::ceil((b - lo) / max_width)));
    rule = concatenate(rule, composite_gauss_legendre(panels, order, lo, b));
    lo = b;
  }
  return rule;
}

// Panel width resolving the profile's own length scale.
double profile_width(const Cutoff& cutoff) { return 0.125 * std::min(1.0, cutoff.lambda()); }

double shell_moment(const Cutoff& cutoff, double power, double lo, double hi) {
  const auto rule = radial_rule(cutoff, lo, hi, profile_width(cutoff));
  return 4.0 * kPi * rule.integrate([&](double r) {
    const double f = cutoff(r);
    return std::pow(r, 2.0 + power) * f * f;
  });
}

Vec3 unit_or_throw(const Vec3& k) {
  const double n = k.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("polarization_basis: zero wave-vector");
  return k / n;
}

}  // namespace

Polarization polarization_basis(const Vec3& k) {
  const Vec3 khat = unit_or_throw(k);
  const Vec3 zxk = Vec3::UnitZ().cross(khat);
  const double n = zxk.norm();
  Polarization pol;
  pol.e1 = n < 1e-8 ? Vec3::UnitX() : Vec3(zxk / n);
  pol.e2 = khat.cross(pol.e1);
  return pol;
}

// ---------------------------------------------------------------------------
// ModeGrid

ModeGrid::ModeGrid(std::vector<Vec3> nodes, std::vector<double> weights)
    : nodes_(std::move(nodes)), weights_(std::move(weights)) {
  if (nodes_.size() != weights_.size())
    throw DomainError("ModeGrid: node and weight counts differ");
  k_norms_.reserve(nodes_.size());
  pols_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!(weights_[i] > 0.0)) throw DomainError("ModeGrid: weights must be strictly positive");
    k_norms_.push_back(nodes_[i].norm());
    if (!(k_norms_.back() > 0.0)) throw DomainError("ModeGrid: node at the origin");
    pols_.push_back(polarization_basis(nodes_[i]));
  }
}

std::shared_ptr<const ModeGrid> ModeGrid::product(const ProductSpec& spec) {
  if (spec.radial_order < 1 || spec.polar_order < 1 || spec.azimuthal_order < 1)
    throw DomainError("ModeGrid::product: orders must be positive");
  if (!(spec.k_max > 0.0)) throw DomainError("ModeGrid::product: k_max must be positive");
  const auto radial = gauss_legendre(spec.radial_order, 0.0, spec.k_max);
  const auto polar = gauss_legendre(spec.polar_order, -1.0, 1.0);
  const double dphi = 2.0 * kPi / spec.azimuthal_order;

  std::vector<Vec3> nodes;
  std::vector<double> weights;
  for (std::size_t ir = 0; ir < radial.nodes.size(); ++ir) {
    const double r = radial.nodes[ir];
    for (std::size_t it = 0; it < polar.nodes.size(); ++it) {
      const double mu = polar.nodes[it];
      const double st = std::sqrt(std::max(0.0, 1.0 - mu * mu));
      for (int ip = 0; ip < spec.azimuthal_order; ++ip) {
        const double phi = (ip + 0.5) * dphi;
        nodes.emplace_back(r * st * std::cos(phi), r * st * std::sin(phi), r * mu);
        weights.push_back(radial.weights[ir] * r * r * polar.weights[it] * dphi);
      }
    }
  }
  return std::shared_ptr<const ModeGrid>(new ModeGrid(std::move(nodes), std::move(weights)));
}

std::shared_ptr<const ModeGrid> ModeGrid::from_nodes(std::vector<Vec3> nodes,
                                                     std::vector<double> weights) {
  return std::shared_ptr<const ModeGrid>(new ModeGrid(std::move(nodes), std::move(weights)));
}

// ---------------------------------------------------------------------------
// Cutoff

Cutoff Cutoff::sharp(double lambda, double sigma) {
  if (!(lambda > 0.0)) throw DomainError("Cutoff::sharp: lambda must be positive");
  Cutoff c;
  c.family_ = CutoffFamily::sharp;
  c.lambda_ = lambda;
  c.sigma_ = sigma;
  c.support_ = lambda;
  return c;
}

Cutoff Cutoff::gaussian(double lambda, double sigma) {
  if (!(lambda > 0.0)) throw DomainError("Cutoff::gaussian: lambda must be positive");
  Cutoff c;
  c.family_ = CutoffFamily::gaussian;
  c.lambda_ = lambda;
  c.sigma_ = sigma;
  return c;
}

Cutoff Cutoff::table(std::vector<double> radii, std::vector<double> values, double sigma) {
  if (radii.size() != values.size() || radii.size() < 2)
    throw DomainError("Cutoff::table: need at least two (radius, value) pairs");
  if (!std::is_sorted(radii.begin(), radii.end()) || radii.front() < 0.0)
    throw DomainError("Cutoff::table: radii must be nonnegative and sorted");
  Cutoff c;
  c.family_ = CutoffFamily::table;
  c.sigma_ = sigma;
  c.lambda_ = radii.back();
  c.support_ = radii.back();
  c.radii_ = std::move(radii);
  c.values_ = std::move(values);
  return c;
}

Cutoff Cutoff::custom(std::function<double(const Vec3&)> profile, double sigma,
                      std::optional<double> support_radius) {
  if (!profile) throw DomainError("Cutoff::custom: empty profile");
  Cutoff c;
  c.family_ = CutoffFamily::custom;
  c.sigma_ = sigma;
  c.custom_ = std::move(profile);
  c.support_ = support_radius;
  if (support_radius) c.lambda_ = *support_radius;
  return c;
}

double Cutoff::operator()(double r) const {
  switch (family_) {
    case CutoffFamily::sharp:
      return r <= lambda_ ? kFourierNorm : 0.0;
    case CutoffFamily::gaussian:
      return kFourierNorm * std::exp(-r * r / (2.0 * lambda_ * lambda_));
    case CutoffFamily::table: {
      if (r <= radii_.front()) return values_.front();
      if (r > radii_.back()) return 0.0;
      const auto it = std::upper_bound(radii_.begin(), radii_.end(), r);
      const std::size_t hi = std::min<std::size_t>(it - radii_.begin(), radii_.size() - 1);
      const std::size_t lo = hi - 1;
      const double s = (r - radii_[lo]) / (radii_[hi] - radii_[lo]);
      return values_[lo] + s * (values_[hi] - values_[lo]);
    }
    case CutoffFamily::custom:
      if (support_ && r > *support_) return 0.0;
      return custom_(Vec3(0.0, 0.0, r));
  }
  return 0.0;
}

double Cutoff::at(const Vec3& k) const {
  if (family_ == CutoffFamily::custom) {
    if (support_ && k.norm() > *support_) return 0.0;
    return custom_(k);
  }
  return (*this)(k.norm());
}

std::optional<double> Cutoff::effective_radius() const {
  switch (family_) {
    case CutoffFamily::sharp:
    case CutoffFamily::table:
      return support_;
    case CutoffFamily::gaussian:
      return 8.0 * lambda_;  // |F|^2 ~ e^{-64} beyond
    case CutoffFamily::custom:
      return support_;
  }
  return std::nullopt;
}

bool Cutoff::is_radial() const {
  if (family_ != CutoffFamily::custom) return true;
  const Vec3 dirs[] = {Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitZ(), Vec3(1, 1, 1).normalized(),
                       Vec3(-0.3, 0.8, 0.52).normalized()};
  for (double r : {0.05, 0.3, 0.9, 1.7, 4.0, 11.0}) {
    const double ref = at(Vec3(0.0, 0.0, r));
    for (const auto& d : dirs) {
      const double v = at(r * d);
      if (std::abs(v - ref) > 1e-12 * std::max(1.0, std::abs(ref))) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// ModeField / FormFactor

ModeField::ModeField(std::shared_ptr<const ModeGrid> grid)
    : grid_(std::move(grid)), amp_(Eigen::VectorXcd::Zero(grid_->mode_count())) {}

ModeField::ModeField(std::shared_ptr<const ModeGrid> grid, Eigen::VectorXcd amplitudes)
    : grid_(std::move(grid)), amp_(std::move(amplitudes)) {
  if (static_cast<std::size_t>(amp_.size()) != grid_->mode_count())
    throw DomainError("ModeField: amplitude count must be twice the node count");
}

Eigen::VectorXcd FormFactor::component(int axis) const {
  Eigen::VectorXcd out(values.size());
  for (std::size_t a = 0; a < values.size(); ++a) out[a] = values[a][axis];
  return out;
}

// ---------------------------------------------------------------------------
// FieldKernels

FieldKernels::FieldKernels(std::shared_ptr<const ModeGrid> grid, Cutoff cutoff)
    : grid_(std::move(grid)), cutoff_(std::move(cutoff)) {
  coupling_.reserve(grid_->node_count());
  for (std::size_t i = 0; i < grid_->node_count(); ++i) {
    const double k = grid_->k_norm(i);
    coupling_.push_back(cutoff_(k) / std::sqrt(2.0 * k));
  }
}

void FieldKernels::require_same_grid(const ModeField& alpha) const {
  if (alpha.grid_ptr() != grid_ && alpha.grid_ptr().get() != grid_.get())
    throw DomainError("field kernels: mode field lives on a different grid");
}

FormFactor FieldKernels::form_factor(const Vec3& x) const {
  FormFactor out{grid_, {}};
  out.values.resize(grid_->mode_count());
  for (std::size_t i = 0; i < grid_->node_count(); ++i) {
    const cplx phase = std::polar(coupling_[i], -grid_->node(i).dot(x));
    for (int l = 0; l < 2; ++l)
      out.values[ModeGrid::mode_index(i, l)] = phase * grid_->polarization(i, l).cast<cplx>();
  }
  return out;
}

Vec3 FieldKernels::vector_potential(const ModeField& alpha, const Vec3& x) const {
  require_same_grid(alpha);
  Vec3 acc = Vec3::Zero();
  for (std::size_t i = 0; i < grid_->node_count(); ++i) {
    const cplx s = grid_->weight(i) * coupling_[i] * std::polar(1.0, grid_->node(i).dot(x));
    const auto& pol = grid_->polarization(i);
    acc += (s * alpha(i, 0)).real() * pol.e1 + (s * alpha(i, 1)).real() * pol.e2;
  }
  return 2.0 * acc;
}

Vec3 FieldKernels::electric_field(const ModeField& alpha, const Vec3& x) const {
  require_same_grid(alpha);
  Vec3 acc = Vec3::Zero();
  for (std::size_t i = 0; i < grid_->node_count(); ++i) {
    const cplx s = grid_->weight(i) * coupling_[i] * grid_->k_norm(i) *
                   std::polar(1.0, grid_->node(i).dot(x));
    const auto& pol = grid_->polarization(i);
    acc += (s * alpha(i, 0)).imag() * pol.e1 + (s * alpha(i, 1)).imag() * pol.e2;
  }
  return -2.0 * acc;
}

LocalField FieldKernels::local_field(const ModeField& alpha, const Vec3& x) const {
  require_same_grid(alpha);
  LocalField out;
  for (std::size_t i = 0; i < grid_->node_count(); ++i) {
    const Vec3& k = grid_->node(i);
    const cplx s = grid_->weight(i) * coupling_[i] * std::polar(1.0, k.dot(x));
    const auto& pol = grid_->polarization(i);
    const cplx s1 = s * alpha(i, 0);
    const cplx s2 = s * alpha(i, 1);
    out.potential += s1.real() * pol.e1 + s2.real() * pol.e2;
    // d_m Re(s e^{ikx}) = -k_m Im(...)
    const Vec3 amp_im = s1.imag() * pol.e1 + s2.imag() * pol.e2;
    out.gradient.noalias() -= amp_im * k.transpose();
  }
  out.potential *= 2.0;
  out.gradient *= 2.0;
  return out;
}

Mat3 FieldKernels::faraday(const ModeField& alpha, const Vec3& x) const {
  const Mat3 g = local_field(alpha, x).gradient;
  return g - g.transpose();
}

FormFactor form_factor(const Vec3& x, const FieldKernels& kernels) { return kernels.form_factor(x); }
Vec3 eval_A(const FieldKernels& kernels, const ModeField& alpha, const Vec3& x) {
  return kernels.vector_potential(alpha, x);
}
Vec3 eval_E(const FieldKernels& kernels, const ModeField& alpha, const Vec3& x) {
  return kernels.electric_field(alpha, x);
}
Mat3 eval_faraday(const FieldKernels& kernels, const ModeField& alpha, const Vec3& x) {
  return kernels.faraday(alpha, x);
}

double norm_h_sigma(const ModeField& alpha, double sigma, bool homogeneous) {
  if (sigma < 0.0 || sigma > 1.0) throw DomainError("norm_h_sigma: sigma must lie in [0, 1]");
  const auto& grid = alpha.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    const double k = grid.k_norm(i);
    const double weight = homogeneous ? std::pow(k, 2.0 * sigma) : std::pow(1.0 + k * k, sigma);
    acc += grid.weight(i) * weight * (std::norm(alpha(i, 0)) + std::norm(alpha(i, 1)));
  }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Admissibility

double radial_moment(const Cutoff& cutoff, double power, double radius) {
  return shell_moment(cutoff, power, 0.0, radius);
}

namespace {

struct SeriesVerdict {
  double value = 0.0;
  bool finite = false;
};

// Ratio test on the increments of I(R_0 2^n).
SeriesVerdict settle(const std::vector<double>& partial) {
  const std::size_t n = partial.size();
  const double last = partial[n - 1];
  const double d_last = partial[n - 1] - partial[n - 2];
  const double d_prev = partial[n - 2] - partial[n - 3];
  if (!std::isfinite(last)) return {last, false};
  if (std::abs(d_last) <= 1e-13 * std::max(std::abs(last), 1e-300)) return {last, true};
  const double ratio = d_prev != 0.0 ? d_last / d_prev : 2.0;
  if (ratio >= 0.9 || ratio < 0.0) return {last, false};
  return {last + d_last * ratio / (1.0 - ratio), true};
}

}  // namespace

AdmissibilityReport check_admissibility(const Cutoff& cutoff) {
  if (!cutoff.is_radial())
    throw UnsupportedError("check_admissibility: non-radial cutoff profiles are not supported");
  const double r0 = cutoff.support_radius().value_or(cutoff.effective_radius().value_or(16.0));
  constexpr int kDoublings = 7;
  const double p1 = -2.0;
  const double p2 = 3.0 - 2.0 * cutoff.sigma();
  std::vector<double> inv_k{shell_moment(cutoff, p1, 0.0, r0)};
  std::vector<double> sig{shell_moment(cutoff, p2, 0.0, r0)};
  for (int n = 1; n < kDoublings; ++n) {
    const double lo = r0 * std::pow(2.0, n - 1);
    inv_k.push_back(inv_k.back() + shell_moment(cutoff, p1, lo, 2.0 * lo));
    sig.push_back(sig.back() + shell_moment(cutoff, p2, lo, 2.0 * lo));
  }
  const auto a = settle(inv_k);
  const auto b = settle(sig);
  AdmissibilityReport report;
  report.inverse_k_norm = std::sqrt(std::max(a.value, 0.0));
  report.sigma_norm = std::sqrt(std::max(b.value, 0.0));
  report.inverse_k_finite = a.finite;
  report.sigma_finite = b.finite;
  // Radius at which both partial integrals stopped moving.
  report.radius = r0 * std::pow(2.0, kDoublings - 1);
  for (int n = kDoublings - 1; n >= 1; --n) {
    const bool still_a = std::abs(inv_k[n] - inv_k[n - 1]) > 1e-13 * std::abs(inv_k.back());
    const bool still_b = std::abs(sig[n] - sig[n - 1]) > 1e-13 * std::abs(sig.back());
    if (still_a || still_b) break;
    report.radius = r0 * std::pow(2.0, n - 1);
  }
  if (report.sigma_finite && (cutoff.sigma() < 0.5 || cutoff.sigma() > 1.0)) report.sigma_finite = false;
  return report;
}

// ---------------------------------------------------------------------------
// Smeared Coulomb potential

namespace {

// (2 pi)^{-3/2} (4 pi)^2: inverse transform of 4 pi |k|^{-2} |F|^2 after the angular integral.
const double kCoulombPrefactor = kFourierNorm * 16.0 * kPi * kPi;
constexpr double kResolvedRadius = 48.0;

double bessel_j0(double x) {
  if (std::abs(x) < 0.05) {
    const double y = x * x;
    return 1.0 - y / 6.0 * (1.0 - y / 20.0 * (1.0 - y / 42.0));
  }
  return std::sin(x) / x;
}

double bessel_j1(double x) {
  if (std::abs(x) < 0.05) {
    const double y = x * x;
    return x / 3.0 * (1.0 - y / 10.0 * (1.0 - y / 28.0 * (1.0 - y / 54.0)));
  }
  return (std::sin(x) / x - std::cos(x)) / x;
}

}  // namespace

SmearedCoulomb::SmearedCoulomb(const Cutoff& cutoff) : cutoff_(cutoff) {
  const auto report = check_admissibility(cutoff);
  if (!report.pass()) throw DomainError("SmearedCoulomb: cutoff is not admissible");
  support_ = cutoff.support_radius();
  effective_radius_ = cutoff.effective_radius().value_or(report.radius);
  resolved_radius_ = kResolvedRadius;
  rule_ = build_rule(resolved_radius_);
  sup_bound_ = report.inverse_k_norm * report.inverse_k_norm;
  hessian_bound_ = kFourierNorm * 4.0 * kPi * radial_moment(cutoff, 0.0, effective_radius_);
}

QuadratureRule SmearedCoulomb::build_rule(double resolved_radius) const {
  // One panel per ~half oscillation period of j0(k r) at the resolved radius.
  const double width = std::min(effective_radius_ / 4.0, kPi / resolved_radius);
  auto rule = radial_rule(cutoff_, 0.0, effective_radius_, width);
  for (std::size_t n = 0; n < rule.nodes.size(); ++n) {
    const double f = cutoff_(rule.nodes[n]);
    rule.weights[n] *= f * f;
  }
  return rule;
}

template <typename Kernel>
double SmearedCoulomb::integrate(double r, Kernel&& kernel) const {
  if (r <= resolved_radius_) return rule_.integrate(kernel);
  return build_rule(2.0 * r).integrate(kernel);
}

double SmearedCoulomb::value(double r) const {
  r = std::abs(r);
  const double integral = integrate(r, [r](double k) { return bessel_j0(k * r); });
  return kCoulombPrefactor * integral;
}

double SmearedCoulomb::radial_derivative(double r) const {
  r = std::abs(r);
  if (r == 0.0) return 0.0;
  const double integral = integrate(r, [r](double k) { return k * bessel_j1(k * r); });
  return -kCoulombPrefactor * integral;
}

CoulombValue SmearedCoulomb::operator()(const Vec3& x) const {
  CoulombValue out;
  const double r = x.norm();
  out.value = value(r);
  if (r > 0.0) out.gradient = radial_derivative(r) / r * x;
  return out;
}

CoulombValue coulomb(const Vec3& r, const Cutoff& cutoff) { return SmearedCoulomb(cutoff)(r); }

}  // namespace aqed
