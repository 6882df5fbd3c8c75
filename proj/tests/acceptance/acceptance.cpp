// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: acceptance [desk.ini]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aqed/beta_functionals.hpp"
#include "aqed/harness.hpp"
#include "support/reference.hpp"

using namespace aqed;
using namespace aqed::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  double seconds = 0.0;
};

struct Checks {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what, double value, double limit) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << " " << value << (ok ? " <= " : " > ") << limit;
  }
  void at_least(double value, double floor, const std::string& what) {
    if (!(value >= floor)) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << " " << value << (value >= floor ? " >= " : " < ") << floor;
  }
  void flag(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? " ok" : " failed");
  }
  void note(const std::string& what) { detail << (detail.tellp() > 0 ? "; " : "") << what; }
};

template <typename F>
Outcome timed(double limit_seconds, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  Checks c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.pass = false;
    c.note(std::string("threw: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_seconds > 0.0) c.require(secs <= limit_seconds, "runtime s", secs, limit_seconds);
  return {c.pass, c.detail.str(), secs};
}

// Per-state invariants gathered over every quantum run of the suite.
struct StateTally {
  long states = 0;
  double two_formula_excess = -1e300;  // max |beta_c - shifted| - (1e-10 + leakage)
  double trace_defect = 0.0;            // max |Tr gamma - hbar <N>|
  double min_eigenvalue = 1e300;
  double rdm_excess = -1e300;           // max distance - (3 beta_c + 6 |a| sqrt(beta_c))

  void observe(const PauliFierz& h, const QuantumState& s, const Eigen::VectorXcd& a, const BetaReport& r) {
    ++states;
    two_formula_excess = std::max(two_formula_excess, std::abs(r.beta_c - r.beta_c_shifted) - (1e-10 + r.leakage));

    const Eigen::MatrixXcd gamma = one_photon_rdm(h, s);
    trace_defect = std::max(trace_defect, std::abs(gamma.trace().real() - h.hbar() * expect_number(h, s)));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gamma, Eigen::EigenvaluesOnly);
    min_eigenvalue = std::min(min_eigenvalue, eig.eigenvalues().minCoeff());

    // trace norm from the spectrum of the Hermitian difference
    const Eigen::MatrixXcd diff = gamma - a * a.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> de(diff, Eigen::EigenvaluesOnly);
    const double distance = de.eigenvalues().cwiseAbs().sum();
    const double bound = 3.0 * r.beta_c + 6.0 * a.norm() * std::sqrt(std::max(r.beta_c, 0.0));
    rdm_excess = std::max(rdm_excess, distance - bound);
  }
};

// 1 ---------------------------------------------------------------------------

Outcome kernel_identities() {
  return timed(1.0, [](Checks& c) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double completeness = 0.0, transverse = 0.0;
    for (int n = 0; n < 1000; ++n) {
      const Vec3 k(u(rng), u(rng), u(rng));
      const auto pol = polarization_basis(k);
      const Vec3 kh = k.normalized();
      const Mat3 sum = pol.e1 * pol.e1.transpose() + pol.e2 * pol.e2.transpose() + kh * kh.transpose();
      completeness = std::max(completeness, (sum - Mat3::Identity()).cwiseAbs().maxCoeff());
      transverse = std::max({transverse, std::abs(k.dot(pol.e1)), std::abs(k.dot(pol.e2))});
    }
    c.require(completeness <= 1e-12, "completeness", completeness, 1e-12);
    c.require(transverse <= 1e-12, "k.eps", transverse, 1e-12);

    const auto kernels = reference_kernels();
    const ModeField alpha = smooth_field(kernels->grid_ptr(), cplx(0.7, -0.2), cplx(0.1, 0.9));
    double antisym = 0.0;
    std::uniform_real_distribution<double> ux(-2.0, 2.0);
    for (int n = 0; n < 20; ++n) {
      const Vec3 x(ux(rng), ux(rng), ux(rng));
      const Mat3 f = eval_faraday(*kernels, alpha, x);
      antisym = std::max(antisym, (f + f.transpose()).cwiseAbs().maxCoeff());
    }
    c.require(antisym == 0.0, "F+F^T", antisym, 0.0);

    const Vec3 x(0.2, 0.5, -0.3);
    const Mat3 f = eval_faraday(*kernels, alpha, x);
    auto fd = [&](double h) {
      Mat3 j;
      for (int m = 0; m < 3; ++m) {
        const Vec3 e = h * Vec3::Unit(m);
        j.col(m) = (eval_A(*kernels, alpha, x + e) - eval_A(*kernels, alpha, x - e)) / (2 * h);
      }
      return (Mat3(j - j.transpose()) - f).norm();
    };
    double worst = 1e300;
    for (double h : {0.2, 0.1, 0.05}) worst = std::min(worst, std::log2(fd(h) / fd(h / 2)));
    c.at_least(worst, 1.9, "FD order");
  });
}

// 2 ---------------------------------------------------------------------------

// Composite Simpson on [0, kmax]; panels must be even.
double simpson(const std::function<double(double)>& g, double kmax, int panels) {
  const double h = kmax / panels;
  double acc = g(0.0) + g(kmax);
  for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * g(i * h);
  return acc * h / 3.0;
}

double j0(double x) { return std::abs(x) < 1e-4 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }
double j0_prime(double x) {
  return std::abs(x) < 1e-3 ? -x / 3.0 + x * x * x / 30.0 : (x * std::cos(x) - std::sin(x)) / (x * x);
}

Outcome coulomb_module() {
  return timed(5.0, [](Checks& c) {
    const double pre = std::pow(2.0 * M_PI, -1.5) * 16.0 * M_PI * M_PI;
    const double f0 = std::pow(2.0 * M_PI, -1.5);
    struct Family {
      const char* name;
      Cutoff cutoff;
      std::function<double(double)> f2;
      double kmax;
    };
    const std::vector<Family> families{
        {"sharp", Cutoff::sharp(1.0, 0.5), [=](double) { return f0 * f0; }, 1.0},
        {"gaussian", Cutoff::gaussian(1.0, 0.5), [=](double k) { return f0 * f0 * std::exp(-k * k); }, 12.0},
    };
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    for (const auto& fam : families) {
      const SmearedCoulomb v(fam.cutoff);
      const double g0 = v(Vec3::Zero()).gradient.norm();
      c.require(g0 <= 1e-12, std::string(fam.name) + " |grad V(0)|", g0, 1e-12);

      double dv = 0.0, dg = 0.0;
      for (double r : {0.0, 0.05, 0.3, 1.0, 1.7, 3.0, 5.5, 8.0, 13.0, 20.0}) {
        const double ov = pre * simpson([&](double k) { return fam.f2(k) * j0(k * r); }, fam.kmax, 200000);
        const double od = pre * simpson([&](double k) { return fam.f2(k) * k * j0_prime(k * r); }, fam.kmax, 200000);
        dv = std::max(dv, std::abs(v.value(r) - ov));
        dg = std::max(dg, std::abs(v.radial_derivative(r) - od));
      }
      for (int n = 0; n < 20; ++n) {
        const Vec3 x(u(rng), u(rng), u(rng));
        const double r = x.norm();
        const double od = pre * simpson([&](double k) { return fam.f2(k) * k * j0_prime(k * r); }, fam.kmax, 200000);
        const auto cv = v(x);
        dg = std::max(dg, (cv.gradient - od * x / r).cwiseAbs().maxCoeff());
      }
      c.require(dv <= 1e-8, std::string(fam.name) + " V vs oracle", dv, 1e-8);
      c.require(dg <= 1e-8, std::string(fam.name) + " grad V vs oracle", dg, 1e-8);

      double sup = 0.0;
      std::uniform_real_distribution<double> ball(-10.0, 10.0);
      for (int n = 0; n < 100; ++n) sup = std::max(sup, std::abs(v(Vec3(ball(rng), ball(rng), ball(rng))).value));
      sup = std::max(sup, std::abs(v.value(0.0)));
      c.require(sup <= v.sup_bound(), std::string(fam.name) + " sup|V|", sup, v.sup_bound());
    }
  });
}

// 3 ---------------------------------------------------------------------------

Outcome classical_integrator() {
  return timed(60.0, [](Checks& c) {
    const auto kernels = reference_kernels(1.0, 0.5);
    const ClassicalModel model(kernels);
    const ClassicalState u0 = reference_state(*kernels);

    std::vector<ClassicalState> finals;
    std::vector<double> constants;
    for (double dt : {2e-3, 1e-3, 5e-4}) {
      SolverConfig cfg;
      cfg.dt = dt;
      cfg.t_end = 5.0;
      cfg.stride = static_cast<int>(std::lround(0.01 / dt));
      cfg.sigma = 0.5;
      const Trajectory tr = model.integrate(u0, cfg);
      if (dt == 1e-3) {
        const double h0 = tr.samples.front().energy;
        double drift = 0.0, contraction = 0.0;
        for (const auto& s : tr.samples) {
          drift = std::max(drift, std::abs(s.energy - h0) / std::abs(h0));
          contraction = std::max(contraction, s.faraday_contraction);
        }
        c.require(drift <= 1e-6, "energy drift", drift, 1e-6);
        c.require(contraction <= 1e-10, "Faraday contraction", contraction, 1e-10);
        c.require(!tr.monitors.x_sigma.violated, "X^sigma envelope ratio", tr.monitors.x_sigma.worst_ratio, 2.0);
      }
      constants.push_back(tr.monitors.x_sigma.constant);
      finals.push_back(tr.final_state);
    }
    const double order = std::log2(state_distance(finals[0], finals[1]) / state_distance(finals[1], finals[2]));
    c.at_least(order, 1.9, "Richardson order");
    double spread = 0.0;
    for (double k : constants) spread = std::max(spread, std::abs(k / constants[1] - 1.0));
    c.require(spread <= 0.2, "X^sigma C spread", spread, 0.2);
  });
}

// 4 ---------------------------------------------------------------------------

PauliFierz desk_model(double hbar, bool coupling) {
  QuantumOptions o;
  o.hbar = hbar;
  o.field_coupling = coupling;
  const auto grid = ModeGrid::from_nodes({Vec3(0.55, 0.45, 0.6)}, {4.0 * M_PI / 3.0});
  const auto kernels = std::make_shared<const FieldKernels>(grid, Cutoff::sharp(1.0, 0.5));
  return PauliFierz(ParticleGrid(128, -6.0, 6.0), kernels, 8, o);
}

double poisson(double mu, int n) { return std::exp(-mu + n * std::log(mu) - std::lgamma(n + 1.0)); }

Outcome fock_layer(StateTally& tally) {
  return timed(60.0, [&](Checks& c) {
    const auto small = small_model(1.0, 8, 8);
    const auto& b = small.basis();
    double ccr = 0.0;
    for (int i = 0; i < b.modes(); ++i)
      for (int j = 0; j < b.modes(); ++j) {
        const Eigen::MatrixXcd bi = Eigen::MatrixXcd(small.ladder(i));
        const Eigen::MatrixXcd bj = Eigen::MatrixXcd(small.ladder(j));
        const Eigen::MatrixXcd comm = bi * bj.adjoint() - bj.adjoint() * bi;
        const Eigen::MatrixXcd cc = bi * bj - bj * bi;
        for (std::size_t f = 0; f < b.size(); ++f) {
          bool below = true;
          for (int m = 0; m < b.modes(); ++m) below = below && b.occupation(f, m) < b.n_max();
          if (!below) continue;
          Eigen::VectorXcd e = Eigen::VectorXcd::Zero(b.size());
          e[f] = 1.0;
          ccr = std::max({ccr, (comm * e - (i == j ? 1.0 : 0.0) * e).norm(), (cc * e).norm()});
        }
      }
    c.require(ccr <= 1e-14, "CCR defect", ccr, 1e-14);

    // Coherent states on the default basis, one mode and split over two.
    const auto& grid = small.kernels().grid_ptr();
    const double w = small.kernels().grid().weight(0);
    double worst_leak = 0.0, stats = -1e300;
    for (double norm2 : {0.5, 1.0, 2.0})
      for (bool split : {false, true}) {
        const double a = std::sqrt((split ? norm2 / 2 : norm2) / w);
        const ModeField f = mode_field(grid, {a, split ? cplx(0.0, a) : 0.0});
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(b.size());
        psi[0] = 1.0;
        const double leak = weyl_displace(b, discrete_amplitudes(f), psi, 1, 1.0).leakage;
        worst_leak = std::max(worst_leak, leak);
        const double mu0 = split ? norm2 / 2 : norm2, mu1 = split ? norm2 / 2 : 0.0;
        for (std::size_t k = 0; k < b.size(); ++k) {
          const int n0 = b.occupation(k, 0), n1 = b.occupation(k, 1);
          const double oracle = poisson(mu0, n0) * (mu1 > 0 ? poisson(mu1, n1) : (n1 == 0 ? 1.0 : 0.0));
          stats = std::max(stats, std::abs(std::norm(psi[k]) - oracle) - 2.0 * leak);
        }
      }
    c.require(stats <= 1e-14, "Poisson mismatch beyond 2 leakage", stats, 1e-14);
    c.require(worst_leak <= 1e-6, "leakage at |f|^2 <= 2", worst_leak, 1e-6);

    // Free evolution keeps the coherent state coherent.
    const double hbar = 0.1;
    const auto h = desk_model(hbar, false);
    const double a0 = std::sqrt(0.75 * hbar / h.kernels().grid().weight(0));
    const ModeField alpha0 = mode_field(h.kernels().grid_ptr(), {a0, cplx(0.0, a0)});
    QuantumState s = initial_state(h, {0.5}, {0.25}, alpha0);
    const double k = h.kernels().grid().k_norm(0);
    double ratio = 0.0;
    for (int n = 0; n <= 8; ++n) {
      if (n > 0) propagate(h, s, 0.25, 0.01);
      const double t = 0.25 * n;
      ModeField alpha(alpha0.grid_ptr(), alpha0.amplitudes() * std::exp(cplx(0.0, -k * t)));
      const BetaC bc = beta_c(h, s, alpha);
      ratio = std::max(ratio, bc.value / s.leakage);
      BetaReport r;
      r.beta_c = bc.value;
      r.beta_c_shifted = bc.shifted;
      r.leakage = s.leakage;
      tally.observe(h, s, discrete_amplitudes(alpha), r);
    }
    c.require(ratio <= 10.0, "coherent beta_c / leakage", ratio, 10.0);
    std::ostringstream leak;
    leak << "coherent leakage " << s.leakage;
    c.note(leak.str());
  });
}

// 5 ---------------------------------------------------------------------------

Outcome beta_consistency(const StateTally& tally, const std::vector<double>& sweep) {
  return timed(0.0, [&](Checks& c) {
    c.require(tally.two_formula_excess <= 0.0, "two-formula excess over 1e-10 + leakage", tally.two_formula_excess, 0.0);
    c.note(std::to_string(tally.states) + " states");
    double moment = 0.0, axis = 0.0;
    for (double hbar : sweep) {
      const auto h = desk_model(hbar, true);
      const ModeField alpha0 = mode_field(h.kernels().grid_ptr(), {0.08, cplx(0.0, 0.06)});
      const QuantumState s = initial_state(h, {0.5}, {0.25}, alpha0);
      const double ba = beta_a(h, s, {0.5});
      const double bt = beta_b_tilde(h, s, {0.25});
      moment = std::max({moment, std::abs(ba / (hbar / 2) - 1.0), std::abs(bt / (hbar / 2) - 1.0)});

      const double mx = expect_position(h, s, 0), mp = expect_momentum(h, s, 0);
      for (double q : {-1.0, 0.3, 2.0}) {
        axis = std::max(axis, std::abs(beta_a(h, s, {q}) - (beta_a(h, s, {mx}) + (q - mx) * (q - mx))));
        axis = std::max(axis, std::abs(beta_b_tilde(h, s, {q}) - (beta_b_tilde(h, s, {mp}) + (q - mp) * (q - mp))));
      }
    }
    c.require(moment <= 1e-6, "Gaussian moments relative", moment, 1e-6);
    c.require(axis <= 1e-10, "parallel axis", axis, 1e-10);
  });
}

// 6 ---------------------------------------------------------------------------

Outcome rdm(const StateTally& tally) {
  return timed(0.0, [&](Checks& c) {
    c.at_least(double(tally.states), 1.0, "states");
    c.require(tally.trace_defect <= 1e-12, "|Tr gamma - hbar <N>|", tally.trace_defect, 1e-12);
    c.require(tally.min_eigenvalue >= -1e-10, "-min eig gamma", -tally.min_eigenvalue, 1e-10);
    c.require(tally.rdm_excess <= 0.0, "distance - bound", tally.rdm_excess, 0.0);
  });
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path desk = argc > 1 ? argv[1] : std::filesystem::path(AQED_CONFIG_DIR) / "desk.ini";

  StateTally tally;
  std::vector<Outcome> out(8);
  out[0] = kernel_identities();
  out[1] = coulomb_module();
  out[2] = classical_integrator();
  out[3] = fock_layer(tally);

  RateStudy study;
  RunConfig config;
  out[6] = timed(900.0, [&](Checks& c) {
    config = load_config(desk);
    study = rate_study(config, [&](const PauliFierz& h, const QuantumState& s, const ClassicalState& u,
                                   const BetaReport& r) { tally.observe(h, s, discrete_amplitudes(u.alpha), r); });
    c.flag(study.beta_pass, "beta/hbar halving ratios in [1/2, 2]");
    c.flag(study.observable_pass, "tanh error / sqrt(hbar) ratios in [1/2, 2]");
    for (std::size_t i = 0; i < study.hbar.size(); ++i) {
      std::ostringstream row;
      row << "hbar " << study.hbar[i] << ":";
      for (std::size_t k = 0; k < study.checkpoints.size(); ++k)
        row << " beta/hbar(" << study.checkpoints[k] << ")=" << study.ratio[i][k];
      c.note(row.str());
    }
  });
  out[4] = beta_consistency(tally, config.quantum.hbar.empty() ? std::vector<double>{0.4, 0.2, 0.1, 0.05}
                                                                : config.quantum.hbar);
  out[5] = rdm(tally);
  out[7] = timed(0.0, [&](Checks& c) {
    c.flag(study.has_ensemble, "ensemble configured");
    double excess = -1e300;
    for (const auto& p : study.ensemble) excess = std::max(excess, p.distance - p.mean_member_distance);
    c.require(study.ensemble_triangle_pass, "mixture distance - member average", excess, 1e-12);
    c.flag(study.ensemble_envelope_pass, "envelope ratios in [1/2, 2]");
  });

  bool all = true;
  for (std::size_t i = 0; i < out.size(); ++i) {
    all = all && out[i].pass;
    std::printf("criterion %zu: %s (%.2f s) %s\n", i + 1, out[i].pass ? "PASS" : "FAIL", out[i].seconds,
                out[i].detail.c_str());
  }
  return all ? 0 : 1;
}
