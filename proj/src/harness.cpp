#include "aqed/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace aqed {

using nlohmann::json;

namespace {

std::ostream& log_of(const CommandOptions& o) { return o.log ? *o.log : std::cout; }

long sample_count(const RunSpec& run) { return std::lround(run.t_end / run.sample_interval); }
long steps_per_sample(const RunSpec& run) { return std::lround(run.sample_interval / run.dt); }

std::string hbar_tag(double hbar) {
  std::ostringstream s;
  s << hbar;
  return s.str();
}

std::ofstream open_output(const CommandOptions& o, const std::string& name) {
  std::filesystem::create_directories(o.out);
  std::ofstream out(o.out / name);
  if (!out) throw std::runtime_error("cannot write " + (o.out / name).string());
  return out;
}

void write_json(const CommandOptions& o, const std::string& name, const json& j) {
  auto out = open_output(o, name);
  out << j.dump(2) << '\n';
}

double beta_total(const BetaReport& r) { return r.beta_a + r.beta_b + r.beta_c; }

std::size_t row_index(const PairedRun& run, double t) {
  for (std::size_t i = 0; i < run.rows.size(); ++i)
    if (std::abs(run.rows[i].t - t) < 1e-9) return i;
  throw NumericalError("no sample at checkpoint t = " + std::to_string(t));
}

json report_json(const BetaReport& r) {
  return {{"t", r.t},
          {"beta_a", r.beta_a},
          {"beta_b", r.beta_b},
          {"beta_b_tilde", r.beta_b_tilde},
          {"beta_c", r.beta_c},
          {"beta_c_shifted", r.beta_c_shifted},
          {"rdm_distance", r.rdm_distance},
          {"rdm_bound", r.rdm_bound},
          {"leakage", r.leakage},
          {"energy_q", r.energy_q},
          {"energy_c", r.energy_c}};
}

json fit_json(const EnvelopeFit& f) {
  return {{"C", std::exp(f.log_c)}, {"c", f.rate}, {"max_residual", f.max_residual}, {"envelope_C", f.envelope_c}};
}

json envelope_json(const Envelope& e) {
  return {{"constant", e.constant}, {"linear", e.linear}, {"worst_ratio", e.worst_ratio}, {"violated", e.violated}};
}

PauliFierz make_quantum(const RunConfig& c, const Setup& setup, double hbar) {
  const auto& q = c.quantum;
  return PauliFierz(ParticleGrid(q.points, q.x_min, q.x_max), setup.kernels, q.n_max, c.quantum_options(hbar));
}

std::vector<double> axis_coordinates(const std::vector<Vec3>& v, int axis) {
  std::vector<double> out;
  for (const auto& x : v) out.push_back(x[axis]);
  return out;
}

ClassicalState paired_classical(const RunConfig& c, const Setup& setup, const PairedOptions& o) {
  ClassicalState u = c.initial_classical(setup.kernels->grid_ptr(), o.field_scale);
  const int axis = c.particles.axis;
  for (std::size_t j = 0; j < o.q0.size(); ++j) u.q[j][axis] = o.q0[j];
  for (std::size_t j = 0; j < o.p0.size(); ++j) u.p[j][axis] = o.p0[j];
  return u;
}

std::vector<PairedOptions> member_options(const RunConfig& c, bool keep_rdm) {
  std::vector<PairedOptions> out;
  for (const auto& m : c.ensemble) out.push_back({keep_rdm, m.q0, m.p0, m.field_scale, {}});
  return out;
}

// Builds every quantum model and initial state once so that precondition
// failures surface before any propagation.
void validate_quantum(const RunConfig& c, const Setup& setup) {
  if (!c.has_quantum) throw ConfigError("this command needs a [quantum] section");
  std::vector<PairedOptions> all{PairedOptions{}};
  for (const auto& m : member_options(c, false)) all.push_back(m);
  for (double hbar : c.quantum.hbar) {
    const PauliFierz h = make_quantum(c, setup, hbar);
    for (const auto& o : all) {
      const ClassicalState u = paired_classical(c, setup, o);
      setup.model.validate(u);
      initial_state(h, axis_coordinates(u.q, c.particles.axis), axis_coordinates(u.p, c.particles.axis), u.alpha);
    }
  }
}

void note(PairedRun& run, bool ok, const std::string& what, double t) {
  if (ok) return;
  if (run.invariant_violations++ == 0) run.first_violation = what + " at t = " + std::to_string(t);
}

}  // namespace

Setup make_setup(const RunConfig& config) {
  auto kernels = std::make_shared<const FieldKernels>(config.grid.build(), config.cutoff.build());
  ClassicalModel model(kernels, config.model_options());
  return {kernels, std::move(model)};
}

PairedRun run_paired(const RunConfig& config, const Setup& setup, double hbar, const PairedOptions& options) {
  const auto& qs = config.quantum;
  const int axis = config.particles.axis;
  const PauliFierz h = make_quantum(config, setup, hbar);
  ClassicalState u = paired_classical(config, setup, options);
  setup.model.validate(u);
  QuantumState s = initial_state(h, axis_coordinates(u.q, axis), axis_coordinates(u.p, axis), u.alpha);

  const KrylovOptions krylov{.dimension = qs.krylov_dimension, .tolerance = qs.krylov_tolerance};
  const LipschitzFunction tanh_f{[](double x) { return std::tanh(x); }, 1.0};
  const long samples = sample_count(config.run);
  const long steps = steps_per_sample(config.run);

  PairedRun run;
  run.hbar = hbar;
  for (long k = 0; k <= samples; ++k) {
    const double t = k * config.run.sample_interval;
    if (k > 0) {
      const auto stats = propagate(h, s, config.run.sample_interval, qs.dt, krylov);
      run.propagation.krylov.substeps += stats.krylov.substeps;
      run.propagation.krylov.matvecs += stats.krylov.matvecs;
      run.propagation.krylov.halvings += stats.krylov.halvings;
      run.propagation.krylov.max_error_estimate =
          std::max(run.propagation.krylov.max_error_estimate, stats.krylov.max_error_estimate);
      run.propagation.norm_defect = std::max(run.propagation.norm_defect, stats.norm_defect);
      u = setup.model.evolve(u, config.run.dt, steps, config.run.scheme);
      if (!u.is_finite()) throw NumericalError("classical state became non-finite at t = " + std::to_string(t));
    }
    s.t = t;
    BetaReport r = evaluate(h, s, setup.model, u);
    r.t = t;

    const Eigen::MatrixXcd gamma = one_photon_rdm(h, s);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gamma, Eigen::EigenvaluesOnly);
    const double obs = observable_error(h, s, ObservableKind::position, 0, u.q[0][axis], tanh_f).error;

    for (double b : {r.beta_a, r.beta_b, r.beta_b_tilde, r.beta_c})
      note(run, std::isfinite(b) && b >= 0.0, "negative or non-finite beta", t);
    note(run, std::abs(r.beta_c - r.beta_c_shifted) <= 1e-10 + r.leakage, "beta_c formulas disagree", t);
    note(run, r.rdm_distance <= r.rdm_bound + 1e-12, "rdm distance above 3 beta_c + 6 |alpha| sqrt(beta_c)", t);
    note(run, std::abs(gamma.trace().real() - hbar * expect_number(h, s)) <= 1e-12, "Tr gamma differs from hbar <N>", t);
    note(run, eig.eigenvalues().minCoeff() >= -1e-10, "gamma not positive", t);
    note(run, obs <= std::sqrt(r.beta_a) + 1e-12, "observable error above L sqrt(beta_a)", t);

    if (options.observer) options.observer(h, s, u, r);
    run.rows.push_back(r);
    run.observable_error.push_back(obs);
    if (options.keep_rdm) {
      run.gamma.push_back(gamma);
      run.classical.push_back(discrete_amplitudes(u.alpha));
    }
  }
  return run;
}

EnvelopeFit fit_gaussian_growth(const std::vector<double>& t, const std::vector<double>& y,
                                const std::vector<double>& scale) {
  const Eigen::Index n = static_cast<Eigen::Index>(t.size());
  if (n == 0 || y.size() != t.size() || scale.size() != t.size()) throw DomainError("fit: mismatched samples");
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(y[i] > 0.0) || !(scale[i] > 0.0)) throw DomainError("fit: values must be positive");
    a(i, 0) = 1.0;
    a(i, 1) = t[i] * t[i];
    b[i] = std::log(y[i] / scale[i]);
  }
  EnvelopeFit f;
  const bool spread = (a.col(1).array() - a(0, 1)).abs().maxCoeff() > 0.0;
  if (spread) {
    const Eigen::Vector2d x = a.colPivHouseholderQr().solve(b);
    f.log_c = x[0];
    f.rate = x[1];
  } else {
    f.log_c = b.mean();
  }
  const Eigen::VectorXd res = b - a * Eigen::Vector2d(f.log_c, f.rate);
  f.max_residual = res.cwiseAbs().maxCoeff();
  f.envelope_c = std::exp(f.log_c + res.maxCoeff());
  return f;
}

bool ratios_within(const std::vector<double>& values, double lo, double hi) {
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    if (!(values[i + 1] > 0.0)) return false;
    const double r = values[i] / values[i + 1];
    if (!(r >= lo && r <= hi)) return false;
  }
  return true;
}

bool RateStudy::pass() const {
  return beta_pass && observable_pass && invariants_pass && ensemble_triangle_pass && ensemble_envelope_pass;
}

RateStudy rate_study(const RunConfig& config, const PairObserver& observer) {
  const Setup setup = make_setup(config);
  validate_quantum(config, setup);
  RateStudy study;
  study.hbar = config.quantum.hbar;
  for (double t : config.run.checkpoints)
    if (t <= config.run.t_end + 1e-12) study.checkpoints.push_back(t);
  if (study.checkpoints.empty()) throw ConfigError("no checkpoint lies within t_end");

  std::vector<double> all_t, all_y, all_scale;
  study.invariants_pass = true;
  for (double hbar : study.hbar) {
    PairedOptions base;
    base.observer = observer;
    PairedRun run = run_paired(config, setup, hbar, base);
    std::vector<double> ratio, obs;
    for (double t : study.checkpoints) {
      const std::size_t i = row_index(run, t);
      ratio.push_back(beta_total(run.rows[i]) / hbar);
      obs.push_back(run.observable_error[i]);
    }
    std::vector<double> t, y, scale;
    const double beta0 = beta_total(run.rows.front());
    for (const auto& r : run.rows) {
      t.push_back(r.t);
      y.push_back(beta_total(r));
      scale.push_back(beta0 + hbar);
    }
    study.fits.push_back(fit_gaussian_growth(t, y, scale));
    all_t.insert(all_t.end(), t.begin(), t.end());
    all_y.insert(all_y.end(), y.begin(), y.end());
    all_scale.insert(all_scale.end(), scale.begin(), scale.end());
    study.invariants_pass = study.invariants_pass && run.invariant_violations == 0;
    study.ratio.push_back(ratio);
    study.observable.push_back(obs);
    study.runs.push_back(std::move(run));
  }
  study.joint_fit = fit_gaussian_growth(all_t, all_y, all_scale);

  // Across each hbar-halving the beta ratio stays within a factor 2, and the
  // observable error shrinks like hbar^{1/2} within a factor 2.
  study.beta_pass = true;
  study.observable_pass = true;
  for (std::size_t c = 0; c < study.checkpoints.size(); ++c) {
    std::vector<double> ratio_col, scaled_obs;
    for (std::size_t i = 0; i < study.hbar.size(); ++i) {
      ratio_col.push_back(study.ratio[i][c]);
      scaled_obs.push_back(study.observable[i][c] / std::sqrt(study.hbar[i]));
    }
    study.beta_pass = study.beta_pass && ratios_within(ratio_col, 0.5, 2.0);
    study.observable_pass = study.observable_pass && ratios_within(scaled_obs, 0.5, 2.0);
  }

  study.has_ensemble = !config.ensemble.empty();
  if (study.has_ensemble) {
    auto members = member_options(config, true);
    for (auto& m : members) m.observer = observer;
    std::vector<std::vector<double>> scaled(study.checkpoints.size());
    for (double hbar : study.hbar) {
      std::vector<PairedRun> runs;
      for (const auto& m : members) {
        runs.push_back(run_paired(config, setup, hbar, m));
        study.invariants_pass = study.invariants_pass && runs.back().invariant_violations == 0;
      }
      for (std::size_t c = 0; c < study.checkpoints.size(); ++c) {
        std::vector<EnsembleMember> list;
        for (std::size_t s = 0; s < runs.size(); ++s) {
          const std::size_t i = row_index(runs[s], study.checkpoints[c]);
          list.push_back({config.ensemble[s].weight, runs[s].gamma[i], runs[s].classical[i]});
        }
        const EnsembleRdm e = ensemble_rdm(list);
        EnsemblePoint p{hbar, study.checkpoints[c], e.distance, e.mean_member_distance,
                        e.distance / std::min(std::sqrt(hbar), hbar)};
        study.ensemble_triangle_pass = study.ensemble_triangle_pass && p.distance <= p.mean_member_distance + 1e-12;
        scaled[c].push_back(p.scaled);
        study.ensemble.push_back(p);
      }
    }
    for (const auto& col : scaled) study.ensemble_envelope_pass = study.ensemble_envelope_pass && ratios_within(col, 0.5, 2.0);
  }
  return study;
}

// ---------------------------------------------------------------------------
// Diagnostics

std::vector<DiagnosticCheck> diagnostics(const RunConfig& config, std::uint64_t seed) {
  std::vector<DiagnosticCheck> out;
  auto add = [&](std::string name, double value, double tol, bool less_equal = true) {
    out.push_back({std::move(name), value, tol, less_equal ? value <= tol : value >= tol});
  };
  const Setup setup = make_setup(config);
  const FieldKernels& kernels = *setup.kernels;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  double completeness = 0.0;
  double transversality = 0.0;
  for (int n = 0; n < 1000; ++n) {
    Vec3 k(normal(rng), normal(rng), normal(rng));
    const Polarization e = polarization_basis(k);
    const Vec3 kh = k.normalized();
    const Mat3 sum = e.e1 * e.e1.transpose() + e.e2 * e.e2.transpose();
    completeness = std::max(completeness, (sum - (Mat3::Identity() - kh * kh.transpose())).cwiseAbs().maxCoeff());
    transversality = std::max({transversality, std::abs(k.dot(e.e1)) / k.norm(), std::abs(k.dot(e.e2)) / k.norm()});
  }
  add("polarization completeness", completeness, 1e-12);
  add("transversality k.eps", transversality, 1e-12);

  ModeField alpha = config.field.build(kernels.grid_ptr());
  if (config.field.profile == "zero")
    for (auto& z : alpha.amplitudes()) z = cplx(normal(rng), normal(rng));
  double divergence = 0.0;
  double antisymmetry = 0.0;
  for (int n = 0; n < 16; ++n) {
    const Vec3 x(normal(rng), normal(rng), normal(rng));
    const LocalField lf = kernels.local_field(alpha, x);
    divergence = std::max(divergence, std::abs(lf.gradient.trace()) / (1.0 + lf.gradient.cwiseAbs().maxCoeff()));
    const Mat3 f = kernels.faraday(alpha, x);
    antisymmetry = std::max(antisymmetry, (f + f.transpose()).cwiseAbs().maxCoeff());
  }
  add("Coulomb gauge div A", divergence, 1e-12);
  add("Faraday antisymmetry", antisymmetry, 0.0);

  const AdmissibilityReport adm = check_admissibility(kernels.cutoff());
  add("cutoff admissible", adm.pass() ? 1.0 : 0.0, 1.0, false);

  const SolverConfig solver{config.run.dt, config.run.t_end, config.run.scheme, config.run.stride, config.run.sigma};
  const Trajectory traj = setup.model.integrate(config.initial_classical(kernels.grid_ptr()), solver);
  add("classical energy drift", traj.monitors.energy_drift, 1e-6);
  add("Faraday contraction", traj.monitors.faraday_contraction, 1e-10);
  const bool monitors_ok =
      !traj.monitors.x_sigma.violated && !traj.monitors.sup_p.violated && !traj.monitors.hdot_half.violated;
  add("a priori growth monitors", monitors_ok ? 1.0 : 0.0, 1.0, false);

  if (!config.has_quantum) return out;
  validate_quantum(config, setup);
  const double hbar = config.quantum.hbar.front();
  const PauliFierz h = make_quantum(config, setup, hbar);

  const auto& basis = h.basis();
  double ccr = 0.0;
  for (int i = 0; i < basis.modes(); ++i)
    for (int j = 0; j < basis.modes(); ++j) {
      const SparseOp bi = h.ladder(i);
      const SparseOp bj_dag = SparseOp(h.ladder(j).adjoint());
      const SparseOp comm = SparseOp(bi * bj_dag) - SparseOp(bj_dag * bi);
      for (std::size_t f = 0; f < basis.size(); ++f) {
        bool below = true;
        for (int m = 0; m < basis.modes(); ++m) below = below && basis.occupation(f, m) < basis.n_max();
        if (!below) continue;
        for (SparseOp::InnerIterator it(comm, static_cast<Eigen::Index>(f)); it; ++it) {
          const double expect = (i == j && it.col() == static_cast<Eigen::Index>(f)) ? 1.0 : 0.0;
          ccr = std::max(ccr, std::abs(it.value() - expect));
        }
        if (i == j && comm.coeff(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(f)) == 0.0) ccr = 1.0;
      }
    }
  add("CCR below the cap", ccr, 1e-14);
  add("Hamiltonian Hermiticity", h.hermiticity_defect(seed), 1e-12);

  RunConfig brief = config;
  brief.run.t_end = config.run.sample_interval * std::min(2L, sample_count(config.run));
  const PairedRun run = run_paired(brief, setup, hbar);
  double two_formula = 0.0;
  double rdm = -1.0;
  for (const auto& r : run.rows) {
    two_formula = std::max(two_formula, std::abs(r.beta_c - r.beta_c_shifted) - r.leakage);
    rdm = std::max(rdm, r.rdm_distance - r.rdm_bound);
  }
  add("beta_c two formulas", two_formula, 1e-10);
  add("rdm distance - bound", rdm, 1e-12);
  add("functional invariant violations", static_cast<double>(run.invariant_violations), 0.0);
  const double e0 = run.rows.front().energy_q;
  add("quantum energy drift", std::abs(run.rows.back().energy_q - e0) / (std::abs(e0) + 1.0), 1e-6);
  add("quantum norm defect", run.propagation.norm_defect, 1e-9);
  return out;
}

// ---------------------------------------------------------------------------
// Output

void write_beta_csv(std::ostream& out, const std::vector<BetaReport>& rows) {
  out << "# abraham-qed beta v1; natural units c = e = 1, particle mass 1/2; "
         "beta_a [length^2], beta_b beta_b_tilde [momentum^2], beta_c rdm_* [field norm^2], energy [energy]\n";
  out << "t,beta_a,beta_b,beta_b_tilde,beta_c,rdm_distance,rdm_bound,leakage,energy_q,energy_c\n";
  out << std::setprecision(17);
  for (const auto& r : rows)
    out << r.t << ',' << r.beta_a << ',' << r.beta_b << ',' << r.beta_b_tilde << ',' << r.beta_c << ','
        << r.rdm_distance << ',' << r.rdm_bound << ',' << r.leakage << ',' << r.energy_q << ',' << r.energy_c << '\n';
}

// ---------------------------------------------------------------------------
// Commands

int cmd_check_cutoff(const RunConfig& config, const CommandOptions& options) {
  const Cutoff cutoff = config.cutoff.build();
  const AdmissibilityReport r = check_admissibility(cutoff);
  auto& log = log_of(options);
  log << std::setprecision(10);
  log << "cutoff " << config.cutoff.family << " lambda=" << config.cutoff.lambda << " sigma=" << config.cutoff.sigma
      << '\n';
  log << "  || |k|^-1 F ||            " << r.inverse_k_norm << (r.inverse_k_finite ? "" : "  (diverges)") << '\n';
  log << "  || |k|^(3/2-sigma) F ||   " << r.sigma_norm << (r.sigma_finite ? "" : "  (diverges)") << '\n';
  log << "  settled at radius         " << r.radius << '\n';
  log << (r.pass() ? "ADMISSIBLE" : "NOT ADMISSIBLE") << '\n';
  write_json(options, "check_cutoff.json",
             {{"schema", "abraham-qed/check_cutoff/v1"},
              {"family", config.cutoff.family},
              {"lambda", config.cutoff.lambda},
              {"sigma", config.cutoff.sigma},
              {"inverse_k_norm", r.inverse_k_norm},
              {"inverse_k_finite", r.inverse_k_finite},
              {"sigma_norm", r.sigma_norm},
              {"sigma_finite", r.sigma_finite},
              {"radius", r.radius},
              {"admissible", r.pass()}});
  return r.pass() ? kExitPass : kExitFail;
}

int cmd_simulate_classical(const RunConfig& config, const CommandOptions& options) {
  const Setup setup = make_setup(config);
  const ClassicalState u0 = config.initial_classical(setup.kernels->grid_ptr());
  setup.model.validate(u0);
  const SolverConfig solver{config.run.dt, config.run.t_end, config.run.scheme, config.run.stride, config.run.sigma};
  const Trajectory traj = setup.model.integrate(u0, solver);
  {
    auto out = open_output(options, "trajectory.csv");
    out << "# abraham-qed trajectory v1; natural units c = e = 1, particle mass 1/2\n";
    write_trajectory_csv(out, traj);
  }
  const auto& m = traj.monitors;
  const bool ok = !m.x_sigma.violated && !m.sup_p.violated && !m.hdot_half.violated;
  write_json(options, "summary.json",
             {{"schema", "abraham-qed/simulate_classical/v1"},
              {"samples", traj.samples.size()},
              {"energy_initial", traj.samples.front().energy},
              {"energy_final", traj.samples.back().energy},
              {"energy_drift", m.energy_drift},
              {"faraday_contraction", m.faraday_contraction},
              {"monitors", {{"x_sigma", envelope_json(m.x_sigma)},
                            {"sup_p", envelope_json(m.sup_p)},
                            {"hdot_half", envelope_json(m.hdot_half)}}},
              {"pass", ok}});
  auto& log = log_of(options);
  log << std::setprecision(6) << "samples " << traj.samples.size() << ", energy drift " << m.energy_drift
      << ", Faraday contraction " << m.faraday_contraction << '\n';
  log << "monitors " << (ok ? "within envelopes" : "VIOLATED") << '\n';
  return ok ? kExitPass : kExitFail;
}

int cmd_simulate_quantum(const RunConfig& config, const CommandOptions& options) {
  const Setup setup = make_setup(config);
  validate_quantum(config, setup);
  auto& log = log_of(options);
  json runs = json::array();
  bool ok = true;
  for (double hbar : config.quantum.hbar) {
    const PairedRun run = run_paired(config, setup, hbar);
    {
      auto out = open_output(options, "beta_hbar_" + hbar_tag(hbar) + ".csv");
      write_beta_csv(out, run.rows);
    }
    json rows = json::array();
    for (const auto& r : run.rows) rows.push_back(report_json(r));
    runs.push_back({{"hbar", hbar},
                    {"rows", rows},
                    {"observable_error_tanh_position", run.observable_error},
                    {"krylov_substeps", run.propagation.krylov.substeps},
                    {"krylov_matvecs", run.propagation.krylov.matvecs},
                    {"norm_defect", run.propagation.norm_defect},
                    {"invariant_violations", run.invariant_violations},
                    {"first_violation", run.first_violation}});
    ok = ok && run.invariant_violations == 0;
    const auto& last = run.rows.back();
    log << std::setprecision(6) << "hbar " << hbar << ": t=" << last.t << " beta_a=" << last.beta_a
        << " beta_b=" << last.beta_b << " beta_c=" << last.beta_c << " rdm=" << last.rdm_distance << " <= "
        << last.rdm_bound << (run.invariant_violations ? "  violations: " + run.first_violation : "") << '\n';
  }
  write_json(options, "summary.json", {{"schema", "abraham-qed/simulate_quantum/v1"}, {"runs", runs}, {"pass", ok}});
  return ok ? kExitPass : kExitFail;
}

int cmd_rate_study(const RunConfig& config, const CommandOptions& options) {
  const RateStudy study = rate_study(config);
  auto& log = log_of(options);
  {
    auto out = open_output(options, "rate_study.csv");
    out << "# abraham-qed rate_study v1; natural units c = e = 1, particle mass 1/2\n";
    out << "hbar,t,beta_a,beta_b,beta_c,beta_total,beta_total_over_hbar,observable_error\n" << std::setprecision(17);
    for (const auto& run : study.runs)
      for (std::size_t i = 0; i < run.rows.size(); ++i) {
        const auto& r = run.rows[i];
        out << run.hbar << ',' << r.t << ',' << r.beta_a << ',' << r.beta_b << ',' << r.beta_c << ','
            << beta_total(r) << ',' << beta_total(r) / run.hbar << ',' << run.observable_error[i] << '\n';
      }
  }
  for (const auto& run : study.runs) {
    auto out = open_output(options, "beta_hbar_" + hbar_tag(run.hbar) + ".csv");
    write_beta_csv(out, run.rows);
  }

  json per_hbar = json::array();
  for (std::size_t i = 0; i < study.hbar.size(); ++i)
    per_hbar.push_back({{"hbar", study.hbar[i]},
                        {"ratio_at_checkpoints", study.ratio[i]},
                        {"observable_error_at_checkpoints", study.observable[i]},
                        {"fit", fit_json(study.fits[i])},
                        {"invariant_violations", study.runs[i].invariant_violations}});
  json ensemble = json::array();
  for (const auto& p : study.ensemble)
    ensemble.push_back({{"hbar", p.hbar},
                        {"t", p.t},
                        {"distance", p.distance},
                        {"mean_member_distance", p.mean_member_distance},
                        {"distance_over_min_sqrt_hbar_hbar", p.scaled}});
  write_json(options, "rate_study.json",
             {{"schema", "abraham-qed/rate_study/v1"},
              {"checkpoints", study.checkpoints},
              {"per_hbar", per_hbar},
              {"joint_fit", fit_json(study.joint_fit)},
              {"beta_pass", study.beta_pass},
              {"observable_pass", study.observable_pass},
              {"invariants_pass", study.invariants_pass},
              {"ensemble", ensemble},
              {"ensemble_triangle_pass", study.ensemble_triangle_pass},
              {"ensemble_envelope_pass", study.ensemble_envelope_pass},
              {"verdict", study.pass() ? "PASS" : "FAIL"}});

  log << std::setprecision(5) << "hbar      ";
  for (double t : study.checkpoints) log << "  beta/hbar(t=" << t << ")";
  log << '\n';
  for (std::size_t i = 0; i < study.hbar.size(); ++i) {
    log << std::setw(8) << study.hbar[i] << "  ";
    for (double r : study.ratio[i]) log << std::setw(18) << r;
    log << '\n';
  }
  log << "fit beta <= C exp(c t^2) (beta0 + hbar): C=" << std::exp(study.joint_fit.log_c)
      << " c=" << study.joint_fit.rate << " max residual " << study.joint_fit.max_residual << '\n';
  log << "beta ratios " << (study.beta_pass ? "within" : "OUTSIDE") << " factor 2; observable errors "
      << (study.observable_pass ? "within" : "OUTSIDE") << " factor 2 of sqrt(hbar) scaling; invariants "
      << (study.invariants_pass ? "hold" : "VIOLATED") << '\n';
  if (study.has_ensemble)
    log << "ensemble: triangle " << (study.ensemble_triangle_pass ? "holds" : "FAILS") << ", min(sqrt(hbar), hbar) envelope "
        << (study.ensemble_envelope_pass ? "stable" : "UNSTABLE") << '\n';
  log << "verdict " << (study.pass() ? "PASS" : "FAIL") << '\n';
  return study.pass() ? kExitPass : kExitFail;
}

int cmd_diagnostics(const RunConfig& config, const CommandOptions& options) {
  const auto checks = diagnostics(config, options.seed);
  auto& log = log_of(options);
  json list = json::array();
  bool ok = true;
  log << std::left << std::setw(34) << "check" << std::setw(16) << "value" << std::setw(12) << "tolerance"
      << "result\n";
  for (const auto& c : checks) {
    log << std::left << std::setw(34) << c.name << std::setw(16) << std::setprecision(6) << c.value << std::setw(12)
        << c.tolerance << (c.pass ? "PASS" : "FAIL") << '\n';
    list.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass}});
    ok = ok && c.pass;
  }
  log << std::right;
  write_json(options, "diagnostics.json",
             {{"schema", "abraham-qed/diagnostics/v1"}, {"seed", options.seed}, {"checks", list}, {"pass", ok}});
  return ok ? kExitPass : kExitFail;
}

int run_command(const std::string& command, const std::filesystem::path& config_path, const CommandOptions& options) {
  auto fail = [&](const std::string& kind, const std::string& what, const json& extra) {
    std::cerr << "numerical failure: " << what << '\n';
    try {
      json dump = {{"schema", "abraham-qed/failure/v1"}, {"command", command}, {"kind", kind}, {"message", what}};
      dump.update(extra);
      write_json(options, "failure.json", dump);
    } catch (const std::exception&) {
    }
    return kExitNumerical;
  };
  try {
    const RunConfig config = load_config(config_path);
    if (command == "check_cutoff") return cmd_check_cutoff(config, options);
    if (command == "simulate_classical") return cmd_simulate_classical(config, options);
    if (command == "simulate_quantum") return cmd_simulate_quantum(config, options);
    if (command == "rate_study") return cmd_rate_study(config, options);
    if (command == "diagnostics") return cmd_diagnostics(config, options);
    std::cerr << "unknown command '" << command << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << config_path.string() << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << config_path.string() << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << config_path.string() << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnsupportedError& e) {
    std::cerr << config_path.string() << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const IntegrationAborted& e) {
    const auto& u = e.last_good();
    json q = json::array();
    json p = json::array();
    for (std::size_t j = 0; j < u.particles(); ++j) {
      q.push_back({u.q[j][0], u.q[j][1], u.q[j][2]});
      p.push_back({u.p[j][0], u.p[j][1], u.p[j][2]});
    }
    return fail("integration_aborted", e.what(), {{"last_good", {{"t", u.t}, {"q", q}, {"p", p}}}});
  } catch (const TruncationError& e) {
    return fail("truncation", e.what(), {{"leakage", e.leakage()}});
  } catch (const NumericalError& e) {
    return fail("numerical", e.what(), json::object());
  }
}

}  // namespace aqed
