#pragma once

// Orchestration behind the abraham-qed command line: paired quantum and
// classical runs, the hbar sweep, diagnostics, and their CSV/JSON output.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aqed/beta_functionals.hpp"
#include "aqed/config.hpp"

namespace aqed {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct CommandOptions {
  std::filesystem::path out = ".";
  std::uint64_t seed = 1;
  std::ostream* log = nullptr;  // stdout when null
};

/// Shared model objects of one configuration.
struct Setup {
  std::shared_ptr<const FieldKernels> kernels;
  ClassicalModel model;
};
Setup make_setup(const RunConfig& config);

struct PairedRun {
  double hbar = 0.0;
  std::vector<BetaReport> rows;
  std::vector<double> observable_error;      // tanh of particle 1's position, per row
  std::vector<Eigen::MatrixXcd> gamma;       // kept only when requested
  std::vector<Eigen::VectorXcd> classical;   // sqrt(w) alpha(t), alongside gamma
  PropagationStats propagation;
  long invariant_violations = 0;
  std::string first_violation;
};

/// Sees every sampled state pair; used by external invariant checks.
using PairObserver = std::function<void(const PauliFierz&, const QuantumState&, const ClassicalState&, const BetaReport&)>;

struct PairedOptions {
  bool keep_rdm = false;
  std::vector<double> q0;        // overrides of the configured particle data (ensemble members)
  std::vector<double> p0;
  double field_scale = 1.0;
  PairObserver observer;
};

/// Propagates Psi_t and u(t) side by side on the configured kept modes,
/// sampling every run.sample_interval up to run.t_end, and spot-checks
/// every sample against the functional invariants.
PairedRun run_paired(const RunConfig& config, const Setup& setup, double hbar, const PairedOptions& options = {});

struct EnvelopeFit {
  double log_c = 0.0;      // ln C
  double rate = 0.0;       // c
  double max_residual = 0.0;
  double envelope_c = 0.0; // smallest C making the bound hold at every sample with the fitted c
};

/// Least-squares fit of ln(y / scale) = ln C + c t^2.
EnvelopeFit fit_gaussian_growth(const std::vector<double>& t, const std::vector<double>& y,
                                const std::vector<double>& scale);

struct EnsemblePoint {
  double hbar = 0.0;
  double t = 0.0;
  double distance = 0.0;
  double mean_member_distance = 0.0;
  double scaled = 0.0;  // distance / min(hbar^{1/2}, hbar)
};

struct RateStudy {
  std::vector<double> hbar;
  std::vector<double> checkpoints;
  std::vector<PairedRun> runs;
  std::vector<std::vector<double>> ratio;       // [hbar][checkpoint] beta(t*) / hbar
  std::vector<std::vector<double>> observable;  // [hbar][checkpoint] tanh-of-position error
  std::vector<EnvelopeFit> fits;                 // per hbar
  EnvelopeFit joint_fit;
  bool beta_pass = false;
  bool observable_pass = false;
  bool invariants_pass = false;
  std::vector<EnsemblePoint> ensemble;
  bool ensemble_triangle_pass = true;
  bool ensemble_envelope_pass = true;
  bool has_ensemble = false;

  bool pass() const;
};

/// Successive-halving ratios a_i / a_{i+1} all within [lo, hi].
bool ratios_within(const std::vector<double>& values, double lo, double hi);

RateStudy rate_study(const RunConfig& config, const PairObserver& observer = {});

struct DiagnosticCheck {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};
std::vector<DiagnosticCheck> diagnostics(const RunConfig& config, std::uint64_t seed);

int cmd_check_cutoff(const RunConfig& config, const CommandOptions& options);
int cmd_simulate_classical(const RunConfig& config, const CommandOptions& options);
int cmd_simulate_quantum(const RunConfig& config, const CommandOptions& options);
int cmd_rate_study(const RunConfig& config, const CommandOptions& options);
int cmd_diagnostics(const RunConfig& config, const CommandOptions& options);

/// Loads the config and runs a subcommand, mapping failures to exit codes:
/// 2 for configuration errors, 3 for numerical failures (with failure.json).
int run_command(const std::string& command, const std::filesystem::path& config_path, const CommandOptions& options);

/// Beta CSV: a version/units comment line, then the column header.
void write_beta_csv(std::ostream& out, const std::vector<BetaReport>& rows);

}  // namespace aqed
