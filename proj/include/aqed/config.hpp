#pragma once

// Run configuration: a flat sectioned key = value file.
//
//   # comment            ; comment
//   [section]
//   key = value          values may carry trailing comments
//
// Every key read is recorded so unknown keys can be reported with their line.

#include <complex>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aqed/classical_dynamics.hpp"
#include "aqed/field_kernels.hpp"
#include "aqed/fock_quantum.hpp"

namespace aqed {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class IniDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static IniDocument parse(const std::string& text);
  static IniDocument load(const std::filesystem::path& path);

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;
  const Entry* find(const std::string& section, const std::string& key) const;
  /// Keys of a section in file order.
  std::vector<std::string> keys(const std::string& section) const;

  std::string text(const std::string& section, const std::string& key,
                   std::optional<std::string> fallback = std::nullopt) const;
  double number(const std::string& section, const std::string& key, std::optional<double> fallback = std::nullopt) const;
  long integer(const std::string& section, const std::string& key, std::optional<long> fallback = std::nullopt) const;
  bool flag(const std::string& section, const std::string& key, std::optional<bool> fallback = std::nullopt) const;
  std::vector<double> numbers(const std::string& section, const std::string& key,
                              std::optional<std::vector<double>> fallback = std::nullopt) const;

  /// Throws ConfigError on the first key that was never read.
  void reject_unused() const;

 private:
  const Entry& require(const std::string& section, const std::string& key) const;

  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::map<std::string, std::vector<std::string>> order_;
  std::map<std::string, int> section_lines_;
  mutable std::map<std::string, std::map<std::string, bool>> used_;
};

/// Whitespace separated numbers; ConfigError with `line` on junk.
std::vector<double> parse_numbers(const std::string& text, int line);

struct CutoffSpec {
  std::string family = "sharp";
  double lambda = 1.0;
  double sigma = 0.5;
  std::vector<double> radii;
  std::vector<double> values;

  Cutoff build() const;
};

struct GridSpec {
  // product grid
  int radial = 8;
  int polar = 6;
  int azimuthal = 8;
  double k_max = 1.0;
  // explicit kept modes (take precedence when non-empty)
  std::vector<Vec3> nodes;
  std::vector<double> weights;

  std::shared_ptr<const ModeGrid> build() const;
};

struct FieldSpec {
  std::string profile = "zero";       // zero | gaussian | values
  std::complex<double> a0 = 0.0;      // gaussian: a_lambda e^{-|k|^2 / width^2}
  std::complex<double> a1 = 0.0;
  double width = 1.0;
  std::vector<std::complex<double>> values;  // one per mode index

  ModeField build(std::shared_ptr<const ModeGrid> grid, double scale = 1.0) const;
};

struct ParticleSpec {
  int count = 1;
  bool collinear = true;
  int axis = 0;
  std::vector<Vec3> q0;
  std::vector<Vec3> p0;
};

struct QuantumSpec {
  std::vector<double> hbar;
  int n_max = 8;
  int points = 128;
  double x_min = -6.0;
  double x_max = 6.0;
  Derivative derivative = Derivative::spectral;
  double dt = 0.01;
  int krylov_dimension = 20;
  double krylov_tolerance = 1e-10;
  std::size_t max_amplitudes = 5'000'000;
  double leakage_bound = 1e-6;
};

struct RunSpec {
  double dt = 1e-3;
  double t_end = 1.0;
  int stride = 1;
  double sample_interval = 0.1;
  Scheme scheme = Scheme::strang;
  double sigma = 0.5;
  std::vector<double> checkpoints{0.5, 1.0, 2.0};
};

struct EnsembleMemberSpec {
  double weight = 0.0;
  std::vector<double> q0;  // axis coordinates
  std::vector<double> p0;
  double field_scale = 1.0;
  int line = 0;
};

struct RunConfig {
  CutoffSpec cutoff;
  GridSpec grid;
  ParticleSpec particles;
  FieldSpec field;
  bool coupling = true;
  bool coulomb = true;
  QuantumSpec quantum;
  bool has_quantum = false;
  RunSpec run;
  std::vector<EnsembleMemberSpec> ensemble;

  ModelOptions model_options() const;
  QuantumOptions quantum_options(double hbar) const;
  ClassicalState initial_classical(const std::shared_ptr<const ModeGrid>& grid, double field_scale = 1.0) const;
};

/// Reads and validates; throws ConfigError with the offending line.
RunConfig load_config(const IniDocument& doc);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace aqed
