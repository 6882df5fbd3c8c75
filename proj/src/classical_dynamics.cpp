#include "aqed/classical_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace aqed {

namespace {

// y += a * x over all components of a tangent vector.
void axpy(ClassicalState& y, double a, const ClassicalState& x) {
  for (std::size_t j = 0; j < y.q.size(); ++j) {
    y.q[j] += a * x.q[j];
    y.p[j] += a * x.p[j];
  }
  y.alpha.amplitudes() += a * x.alpha.amplitudes();
}

ClassicalState zero_like(const ClassicalState& u) {
  ClassicalState out(u.alpha.grid_ptr());
  out.q.assign(u.q.size(), Vec3::Zero());
  out.p.assign(u.p.size(), Vec3::Zero());
  out.t = u.t;
  return out;
}

std::string describe(const ClassicalState& u) {
  std::ostringstream os;
  os << std::setprecision(6) << "t=" << u.t;
  for (std::size_t j = 0; j < u.q.size(); ++j)
    os << " q" << j << "=(" << u.q[j].transpose() << ") p" << j << "=(" << u.p[j].transpose() << ")";
  os << " |alpha|=" << u.alpha.amplitudes().norm();
  return os.str();
}

// Least-squares fit of value ~ C (t+1) (linear) or value ~ C over the first
// fifth of the samples, then the worst ratio over the whole run.
template <typename Get>
Envelope fit_envelope(const std::vector<Sample>& samples, bool linear, Get&& get) {
  Envelope env;
  env.linear = linear;
  if (samples.empty()) return env;
  const std::size_t head = std::max<std::size_t>(1, samples.size() / 5);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t s = 0; s < head; ++s) {
    const double basis = linear ? samples[s].t + 1.0 : 1.0;
    num += basis * get(samples[s]);
    den += basis * basis;
  }
  env.constant = num / den;
  for (const auto& s : samples) {
    const double bound = env.constant * (linear ? s.t + 1.0 : 1.0);
    const double v = get(s);
    const double ratio = bound > 0.0 ? v / bound : (v > 0.0 ? INFINITY : 0.0);
    env.worst_ratio = std::max(env.worst_ratio, ratio);
  }
  env.violated = env.worst_ratio > 2.0;
  return env;
}

}  // namespace

bool ClassicalState::is_finite() const {
  for (std::size_t j = 0; j < q.size(); ++j)
    if (!q[j].allFinite() || !p[j].allFinite()) return false;
  return alpha.is_finite() && std::isfinite(t);
}

ClassicalModel::ClassicalModel(std::shared_ptr<const FieldKernels> kernels, ModelOptions options)
    : kernels_(std::move(kernels)), options_(options) {
  if (options_.axis && (*options_.axis < 0 || *options_.axis > 2))
    throw DomainError("ClassicalModel: axis must be 0, 1 or 2");
  if (options_.coulomb) coulomb_.emplace(kernels_->cutoff());
}

void ClassicalModel::validate(const ClassicalState& u) const {
  if (u.particles() == 0) throw DomainError("classical state: at least one particle required");
  if (u.p.size() != u.q.size()) throw DomainError("classical state: q and p counts differ");
  if (u.alpha.grid_ptr().get() != &kernels_->grid())
    throw DomainError("classical state: field lives on a different grid");
  if (options_.axis) {
    for (std::size_t j = 0; j < u.q.size(); ++j) {
      for (int m = 0; m < 3; ++m) {
        if (m == *options_.axis) continue;
        if (u.q[j][m] != 0.0 || u.p[j][m] != 0.0)
          throw DomainError("classical state: collinear mode needs q and p along the axis");
      }
    }
  }
  if (!u.is_finite()) throw NumericalError("classical state: non-finite entries (" + describe(u) + ")");
}

std::vector<Vec3> ClassicalModel::kinetic_momentum(const ClassicalState& u) const {
  std::vector<Vec3> out(u.p);
  if (!options_.field_coupling) return out;
  for (std::size_t j = 0; j < u.q.size(); ++j) {
    const Vec3 a = kernels_->vector_potential(u.alpha, u.q[j]);
    if (options_.axis)
      out[j][*options_.axis] -= a[*options_.axis];
    else
      out[j] -= a;
  }
  return out;
}

std::vector<Vec3> ClassicalModel::coulomb_force(const ClassicalState& u) const {
  std::vector<Vec3> force(u.q.size(), Vec3::Zero());
  if (!coulomb_) return force;
  for (std::size_t j = 0; j < u.q.size(); ++j) {
    for (std::size_t k = j + 1; k < u.q.size(); ++k) {
      const Vec3 g = (*coulomb_)(u.q[j] - u.q[k]).gradient;
      force[j] -= g;
      force[k] += g;
    }
  }
  if (options_.axis) {
    for (auto& f : force) {
      const double keep = f[*options_.axis];
      f.setZero();
      f[*options_.axis] = keep;
    }
  }
  return force;
}

double ClassicalModel::energy(const ClassicalState& u) const {
  double e = 0.0;
  for (const auto& pt : kinetic_momentum(u)) e += pt.squaredNorm();
  if (coulomb_) {
    for (std::size_t j = 0; j < u.q.size(); ++j)
      for (std::size_t k = j + 1; k < u.q.size(); ++k) e += (*coulomb_)(u.q[j] - u.q[k]).value;
  }
  const auto& grid = kernels_->grid();
  for (std::size_t i = 0; i < grid.node_count(); ++i)
    e += grid.weight(i) * grid.k_norm(i) * (std::norm(u.alpha(i, 0)) + std::norm(u.alpha(i, 1)));
  return e;
}

double ClassicalModel::faraday_contraction(const ClassicalState& u) const {
  const auto pt = kinetic_momentum(u);
  double worst = 0.0;
  for (std::size_t j = 0; j < u.q.size(); ++j) {
    const Mat3 f = kernels_->faraday(u.alpha, u.q[j]);
    worst = std::max(worst, std::abs(pt[j].dot(f * pt[j])));
  }
  return worst;
}

double ClassicalModel::norm_x_sigma(const ClassicalState& u, double sigma) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < u.q.size(); ++j) acc += u.q[j].squaredNorm() + u.p[j].squaredNorm();
  const double field = norm_h_sigma(u.alpha, sigma);
  return std::sqrt(acc + field * field);
}

ClassicalState ClassicalModel::vector_field(const ClassicalState& u, bool include_rotation) const {
  const auto& grid = kernels_->grid();
  ClassicalState du = zero_like(u);
  const auto force = coulomb_force(u);
  for (std::size_t j = 0; j < u.q.size(); ++j) du.p[j] = force[j];

  if (!options_.field_coupling) {
    for (std::size_t j = 0; j < u.q.size(); ++j) du.q[j] = 2.0 * u.p[j];
  } else {
    for (std::size_t j = 0; j < u.q.size(); ++j) {
      const LocalField local = kernels_->local_field(u.alpha, u.q[j]);
      Vec3 pt = u.p[j] - local.potential;
      if (options_.axis) {
        const int a = *options_.axis;
        const double pa = u.p[j][a] - local.potential[a];
        pt.setZero();
        pt[a] = pa;
        du.p[j][a] += 2.0 * pa * local.gradient(a, a);
      } else {
        // 2 sum_l pt^l grad A^l, with gradient(l, m) = d_m A^l.
        du.p[j] += 2.0 * local.gradient.transpose() * pt;
      }
      du.q[j] = 2.0 * pt;

      // alpha source: 2 i c_i e^{-i k.q} eps_lambda . pt
      for (std::size_t i = 0; i < grid.node_count(); ++i) {
        const cplx phase = std::polar(2.0 * kernels_->coupling(i), -grid.node(i).dot(u.q[j]));
        for (int l = 0; l < 2; ++l)
          du.alpha(i, l) += cplx(0.0, 1.0) * phase * grid.polarization(i, l).dot(pt);
      }
    }
  }
  if (include_rotation) {
    for (std::size_t i = 0; i < grid.node_count(); ++i)
      for (int l = 0; l < 2; ++l) du.alpha(i, l) += cplx(0.0, -grid.k_norm(i)) * u.alpha(i, l);
  }
  return du;
}

ClassicalState ClassicalModel::rhs(const ClassicalState& u) const {
  if (!u.is_finite()) throw NumericalError("rhs: non-finite state (" + describe(u) + ")");
  return vector_field(u, true);
}

void ClassicalModel::rotate(ModeField& alpha, double dt) const {
  const auto& grid = kernels_->grid();
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    const cplx phase = std::polar(1.0, -dt * grid.k_norm(i));
    alpha(i, 0) *= phase;
    alpha(i, 1) *= phase;
  }
}

ClassicalState ClassicalModel::rk4(const ClassicalState& u, double dt, bool include_rotation) const {
  const auto k1 = vector_field(u, include_rotation);
  ClassicalState y = u;
  axpy(y, 0.5 * dt, k1);
  const auto k2 = vector_field(y, include_rotation);
  y = u;
  axpy(y, 0.5 * dt, k2);
  const auto k3 = vector_field(y, include_rotation);
  y = u;
  axpy(y, dt, k3);
  const auto k4 = vector_field(y, include_rotation);
  ClassicalState out = u;
  axpy(out, dt / 6.0, k1);
  axpy(out, dt / 3.0, k2);
  axpy(out, dt / 3.0, k3);
  axpy(out, dt / 6.0, k4);
  out.t = u.t + dt;
  return out;
}

ClassicalState ClassicalModel::step_strang(const ClassicalState& u, double dt) const {
  if (!(dt > 0.0)) throw DomainError("step_strang: dt must be positive");
  return evolve(u, dt, 1, Scheme::strang);
}

ClassicalState ClassicalModel::step_rk4(const ClassicalState& u, double dt) const {
  if (!(dt > 0.0)) throw DomainError("step_rk4: dt must be positive");
  return evolve(u, dt, 1, Scheme::rk4);
}

ClassicalState ClassicalModel::evolve(ClassicalState u, double dt, long steps, Scheme scheme) const {
  if (dt == 0.0 || !std::isfinite(dt)) throw DomainError("evolve: dt must be finite and nonzero");
  for (long n = 0; n < steps; ++n) {
    if (scheme == Scheme::rk4) {
      u = rk4(u, dt, true);
    } else {
      rotate(u.alpha, 0.5 * dt);
      u = rk4(u, dt, false);
      rotate(u.alpha, 0.5 * dt);
    }
  }
  return u;
}

Sample ClassicalModel::sample(const ClassicalState& u, double sigma) const {
  Sample s;
  s.t = u.t;
  s.q = u.q;
  s.p = u.p;
  s.ptilde = kinetic_momentum(u);
  s.energy = energy(u);
  s.norm_h_sigma = norm_h_sigma(u.alpha, sigma);
  s.norm_hdot_half = norm_h_sigma(u.alpha, 0.5, true);
  s.norm_x_sigma = norm_x_sigma(u, sigma);
  for (const auto& p : u.p) s.sup_p = std::max(s.sup_p, p.norm());
  s.faraday_contraction = faraday_contraction(u);
  return s;
}

Trajectory ClassicalModel::integrate(const ClassicalState& u0, const SolverConfig& config) const {
  if (!(config.dt > 0.0)) throw DomainError("integrate: dt must be positive");
  if (!(config.t_end >= 0.0)) throw DomainError("integrate: t_end must be nonnegative");
  if (config.stride < 1) throw DomainError("integrate: stride must be >= 1");
  validate(u0);

  const long steps = std::lround(config.t_end / config.dt);
  Trajectory traj{{}, {}, u0};
  ClassicalState u = u0;
  traj.samples.push_back(sample(u, config.sigma));
  for (long n = 1; n <= steps; ++n) {
    ClassicalState next = evolve(u, config.dt, 1, config.scheme);
    next.t = u0.t + n * config.dt;
    if (!next.is_finite())
      throw IntegrationAborted("integrate: non-finite state after step " + std::to_string(n) +
                                   "; last good state " + describe(u),
                               u);
    u = std::move(next);
    if (n % config.stride == 0 || n == steps) traj.samples.push_back(sample(u, config.sigma));
  }
  traj.final_state = u;

  auto& mon = traj.monitors;
  mon.x_sigma = fit_envelope(traj.samples, true, [](const Sample& s) { return s.norm_x_sigma; });
  mon.sup_p = fit_envelope(traj.samples, false, [](const Sample& s) { return s.sup_p; });
  mon.hdot_half = fit_envelope(traj.samples, false, [](const Sample& s) { return s.norm_hdot_half; });
  const double e0 = traj.samples.front().energy;
  for (const auto& s : traj.samples) {
    mon.energy_drift = std::max(mon.energy_drift, std::abs(s.energy - e0) / (std::abs(e0) + 1.0));
    mon.faraday_contraction = std::max(mon.faraday_contraction, s.faraday_contraction);
  }
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  const std::size_t n = trajectory.samples.empty() ? 0 : trajectory.samples.front().q.size();
  static const char* axes = "xyz";
  out << "t";
  for (const char* name : {"q", "p", "ptilde"})
    for (std::size_t j = 0; j < n; ++j)
      for (int m = 0; m < 3; ++m) out << ',' << name << j + 1 << '_' << axes[m];
  out << ",energy,norm_h_sigma,norm_hdot_half\n";
  out << std::setprecision(17);
  for (const auto& s : trajectory.samples) {
    out << s.t;
    for (const auto* vecs : {&s.q, &s.p, &s.ptilde})
      for (const auto& v : *vecs)
        for (int m = 0; m < 3; ++m) out << ',' << v[m];
    out << ',' << s.energy << ',' << s.norm_h_sigma << ',' << s.norm_hdot_half << '\n';
  }
}

}  // namespace aqed
