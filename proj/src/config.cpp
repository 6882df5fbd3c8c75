#include "aqed/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace aqed {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
  const auto pos = s.find_first_of("#;");
  return pos == std::string::npos ? s : s.substr(0, pos);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, sep)) out.push_back(trim(part));
  return out;
}

}  // namespace

std::vector<double> parse_numbers(const std::string& text, int line) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || !std::isfinite(v)) throw ConfigError("not a number: '" + token + "'", line);
    out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// IniDocument

IniDocument IniDocument::parse(const std::string& text) {
  IniDocument doc;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("unterminated section header", line);
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError("empty section name", line);
      if (doc.section_lines_.count(section)) throw ConfigError("duplicate section [" + section + "]", line);
      doc.section_lines_[section] = line;
      doc.sections_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line);
    if (section.empty()) throw ConfigError("key outside of any section", line);
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("empty key", line);
    auto& entries = doc.sections_[section];
    if (entries.count(key)) throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line);
    entries[key] = {trim(s.substr(eq + 1)), line};
    doc.order_[section].push_back(key);
  }
  return doc;
}

IniDocument IniDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool IniDocument::has_section(const std::string& section) const { return sections_.count(section) > 0; }

bool IniDocument::has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

const IniDocument::Entry* IniDocument::find(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto e = s->second.find(key);
  if (e == s->second.end()) return nullptr;
  used_[section][key] = true;
  return &e->second;
}

std::vector<std::string> IniDocument::keys(const std::string& section) const {
  const auto it = order_.find(section);
  return it == order_.end() ? std::vector<std::string>{} : it->second;
}

const IniDocument::Entry& IniDocument::require(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (e == nullptr) {
    const auto s = section_lines_.find(section);
    throw ConfigError("missing key '" + key + "' in [" + section + "]", s == section_lines_.end() ? 0 : s->second);
  }
  return *e;
}

std::string IniDocument::text(const std::string& section, const std::string& key,
                              std::optional<std::string> fallback) const {
  if (fallback && !has(section, key)) return *fallback;
  return require(section, key).value;
}

double IniDocument::number(const std::string& section, const std::string& key, std::optional<double> fallback) const {
  if (fallback && !has(section, key)) return *fallback;
  const Entry& e = require(section, key);
  const auto v = parse_numbers(e.value, e.line);
  if (v.size() != 1) throw ConfigError("'" + key + "' expects one number", e.line);
  return v[0];
}

long IniDocument::integer(const std::string& section, const std::string& key, std::optional<long> fallback) const {
  if (fallback && !has(section, key)) return *fallback;
  const Entry& e = require(section, key);
  const double v = number(section, key);
  if (v != std::floor(v) || std::abs(v) > 1e15) throw ConfigError("'" + key + "' expects an integer", e.line);
  return static_cast<long>(v);
}

bool IniDocument::flag(const std::string& section, const std::string& key, std::optional<bool> fallback) const {
  if (fallback && !has(section, key)) return *fallback;
  const Entry& e = require(section, key);
  if (e.value == "true" || e.value == "on" || e.value == "yes" || e.value == "1") return true;
  if (e.value == "false" || e.value == "off" || e.value == "no" || e.value == "0") return false;
  throw ConfigError("'" + key + "' expects true or false", e.line);
}

std::vector<double> IniDocument::numbers(const std::string& section, const std::string& key,
                                         std::optional<std::vector<double>> fallback) const {
  if (fallback && !has(section, key)) return *fallback;
  const Entry& e = require(section, key);
  return parse_numbers(e.value, e.line);
}

void IniDocument::reject_unused() const {
  int first = 0;
  std::string what;
  for (const auto& [section, entries] : sections_)
    for (const auto& [key, entry] : entries) {
      const auto s = used_.find(section);
      const bool used = s != used_.end() && s->second.count(key);
      if (!used && (first == 0 || entry.line < first)) {
        first = entry.line;
        what = "unknown key '" + key + "' in [" + section + "]";
      }
    }
  if (first > 0) throw ConfigError(what, first);
}

// ---------------------------------------------------------------------------
// Specs

Cutoff CutoffSpec::build() const {
  if (family == "sharp") return Cutoff::sharp(lambda, sigma);
  if (family == "gaussian") return Cutoff::gaussian(lambda, sigma);
  if (family == "table") return Cutoff::table(radii, values, sigma);
  throw ConfigError("unknown cutoff family '" + family + "'");
}

std::shared_ptr<const ModeGrid> GridSpec::build() const {
  if (!nodes.empty()) return ModeGrid::from_nodes(nodes, weights);
  return ModeGrid::product({radial, polar, azimuthal, k_max});
}

ModeField FieldSpec::build(std::shared_ptr<const ModeGrid> grid, double scale) const {
  ModeField alpha(grid);
  if (profile == "gaussian") {
    for (std::size_t i = 0; i < grid->node_count(); ++i) {
      const double g = std::exp(-std::pow(grid->k_norm(i) / width, 2));
      alpha(i, 0) = scale * a0 * g;
      alpha(i, 1) = scale * a1 * g;
    }
  } else if (profile == "values") {
    if (values.size() != alpha.size())
      throw ConfigError("[field] values: " + std::to_string(values.size()) + " amplitudes given, " +
                        std::to_string(alpha.size()) + " modes kept");
    for (std::size_t i = 0; i < values.size(); ++i) alpha.amplitudes()[i] = scale * values[i];
  }
  return alpha;
}

ModelOptions RunConfig::model_options() const {
  ModelOptions o;
  o.field_coupling = coupling;
  o.coulomb = coulomb;
  if (particles.collinear) o.axis = particles.axis;
  return o;
}

QuantumOptions RunConfig::quantum_options(double hbar) const {
  QuantumOptions o;
  o.hbar = hbar;
  o.particles = particles.count;
  o.axis = particles.axis;
  o.field_coupling = coupling;
  o.coulomb = coulomb;
  o.derivative = quantum.derivative;
  o.max_amplitudes = quantum.max_amplitudes;
  o.leakage_bound = quantum.leakage_bound;
  return o;
}

ClassicalState RunConfig::initial_classical(const std::shared_ptr<const ModeGrid>& grid, double field_scale) const {
  ClassicalState u(grid);
  u.q = particles.q0;
  u.p = particles.p0;
  u.alpha = field.build(grid, field_scale);
  return u;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

std::complex<double> parse_complex(const IniDocument& doc, const std::string& section, const std::string& key) {
  const auto* e = doc.find(section, key);
  if (e == nullptr) return 0.0;
  const auto v = parse_numbers(e->value, e->line);
  if (v.size() != 2) throw ConfigError("'" + key + "' expects 're im'", e->line);
  return {v[0], v[1]};
}

int line_of(const IniDocument& doc, const std::string& section, const std::string& key) {
  const auto* e = doc.find(section, key);
  return e ? e->line : 0;
}

std::vector<Vec3> particle_vectors(const IniDocument& doc, const std::string& key, const ParticleSpec& spec) {
  const auto v = doc.numbers("particles", key);
  const int line = line_of(doc, "particles", key);
  std::vector<Vec3> out;
  if (spec.collinear) {
    if (static_cast<int>(v.size()) != spec.count)
      throw ConfigError("'" + key + "' expects one axis coordinate per particle", line);
    for (double x : v) {
      Vec3 a = Vec3::Zero();
      a[spec.axis] = x;
      out.push_back(a);
    }
  } else {
    if (static_cast<int>(v.size()) != 3 * spec.count)
      throw ConfigError("'" + key + "' expects three coordinates per particle", line);
    for (int j = 0; j < spec.count; ++j) out.emplace_back(v[3 * j], v[3 * j + 1], v[3 * j + 2]);
  }
  return out;
}

template <typename F>
auto checked(int line, F&& build) {
  try {
    return build();
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), line);
  } catch (const UnsupportedError& e) {
    throw ConfigError(e.what(), line);
  }
}

}  // namespace

RunConfig load_config(const IniDocument& doc) {
  RunConfig c;

  // [cutoff]
  c.cutoff.family = doc.text("cutoff", "family", "sharp");
  c.cutoff.lambda = doc.number("cutoff", "lambda", 1.0);
  c.cutoff.sigma = doc.number("cutoff", "sigma", 0.5);
  if (c.cutoff.family == "table") {
    c.cutoff.radii = doc.numbers("cutoff", "radii");
    c.cutoff.values = doc.numbers("cutoff", "values");
  }
  const int cutoff_line = line_of(doc, "cutoff", "family");
  if (!(c.cutoff.sigma >= 0.5 && c.cutoff.sigma <= 1.0))
    throw ConfigError("sigma must lie in [1/2, 1]", line_of(doc, "cutoff", "sigma"));
  checked(cutoff_line, [&] { return c.cutoff.build(); });

  // [grid] / [modes]
  c.grid.radial = static_cast<int>(doc.integer("grid", "radial", 8));
  c.grid.polar = static_cast<int>(doc.integer("grid", "polar", 6));
  c.grid.azimuthal = static_cast<int>(doc.integer("grid", "azimuthal", 8));
  c.grid.k_max = doc.number("grid", "k_max", c.cutoff.lambda);
  for (const auto& key : doc.keys("modes")) {
    const auto* e = doc.find("modes", key);
    if (key.rfind("node", 0) != 0) throw ConfigError("[modes] keys are node0, node1, ...", e->line);
    const auto v = parse_numbers(e->value, e->line);
    if (v.size() != 4) throw ConfigError("mode node expects 'kx ky kz weight'", e->line);
    c.grid.nodes.emplace_back(v[0], v[1], v[2]);
    c.grid.weights.push_back(v[3]);
  }
  const int grid_line = doc.keys("modes").empty() ? line_of(doc, "grid", "radial") : line_of(doc, "modes", doc.keys("modes").front());
  checked(grid_line, [&] { return c.grid.build(); });

  // [particles]
  c.particles.count = static_cast<int>(doc.integer("particles", "count", 1));
  if (c.particles.count < 1 || c.particles.count > 2)
    throw ConfigError("particle count must be 1 or 2", line_of(doc, "particles", "count"));
  c.particles.collinear = doc.flag("particles", "collinear", true);
  c.particles.axis = static_cast<int>(doc.integer("particles", "axis", 0));
  if (c.particles.axis < 0 || c.particles.axis > 2) throw ConfigError("axis must be 0, 1 or 2", line_of(doc, "particles", "axis"));
  c.particles.q0 = particle_vectors(doc, "q0", c.particles);
  c.particles.p0 = particle_vectors(doc, "p0", c.particles);

  // [field]
  c.field.profile = doc.text("field", "profile", "zero");
  const int field_line = line_of(doc, "field", "profile");
  if (c.field.profile == "gaussian") {
    c.field.a0 = parse_complex(doc, "field", "a0");
    c.field.a1 = parse_complex(doc, "field", "a1");
    c.field.width = doc.number("field", "width", 1.0);
    if (!(c.field.width > 0.0)) throw ConfigError("width must be positive", line_of(doc, "field", "width"));
  } else if (c.field.profile == "values") {
    const auto v = doc.numbers("field", "values");
    if (v.size() % 2 != 0) throw ConfigError("values expects 're im' pairs", line_of(doc, "field", "values"));
    for (std::size_t i = 0; i < v.size(); i += 2) c.field.values.emplace_back(v[i], v[i + 1]);
  } else if (c.field.profile != "zero") {
    throw ConfigError("unknown field profile '" + c.field.profile + "'", field_line);
  }
  if (c.field.profile == "values") {
    try {
      c.field.build(c.grid.build());
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), line_of(doc, "field", "values"));
    }
  }

  // [physics]
  c.coupling = doc.flag("physics", "coupling", true);
  c.coulomb = doc.flag("physics", "coulomb", true);

  // [run]
  c.run.dt = doc.number("run", "dt", 1e-3);
  c.run.t_end = doc.number("run", "t_end", 1.0);
  c.run.stride = static_cast<int>(doc.integer("run", "stride", 1));
  c.run.sample_interval = doc.number("run", "sample_interval", 0.1);
  c.run.sigma = doc.number("run", "sigma", c.cutoff.sigma);
  c.run.checkpoints = doc.numbers("run", "checkpoints", std::vector<double>{0.5, 1.0, 2.0});
  const std::string scheme = doc.text("run", "scheme", "strang");
  if (scheme == "strang") c.run.scheme = Scheme::strang;
  else if (scheme == "rk4") c.run.scheme = Scheme::rk4;
  else throw ConfigError("scheme must be strang or rk4", line_of(doc, "run", "scheme"));
  if (!(c.run.dt > 0.0)) throw ConfigError("dt must be positive", line_of(doc, "run", "dt"));
  if (!(c.run.t_end > 0.0)) throw ConfigError("t_end must be positive", line_of(doc, "run", "t_end"));
  if (c.run.stride < 1) throw ConfigError("stride must be at least 1", line_of(doc, "run", "stride"));
  const double per_sample = c.run.sample_interval / c.run.dt;
  if (!(c.run.sample_interval > 0.0) || std::abs(per_sample - std::round(per_sample)) > 1e-9 * per_sample)
    throw ConfigError("sample_interval must be a positive multiple of dt", line_of(doc, "run", "sample_interval"));
  for (double t : c.run.checkpoints) {
    const double k = t / c.run.sample_interval;
    if (!(t > 0.0) || std::abs(k - std::round(k)) > 1e-9 * std::max(k, 1.0))
      throw ConfigError("checkpoints must be positive multiples of sample_interval", line_of(doc, "run", "checkpoints"));
  }

  // [quantum]
  c.has_quantum = doc.has_section("quantum");
  if (c.has_quantum) {
    auto& q = c.quantum;
    q.hbar = doc.numbers("quantum", "hbar");
    const int hbar_line = line_of(doc, "quantum", "hbar");
    if (q.hbar.empty()) throw ConfigError("hbar list is empty", hbar_line);
    for (double h : q.hbar)
      if (!(h > 0.0)) throw ConfigError("hbar must be positive", hbar_line);
    q.n_max = static_cast<int>(doc.integer("quantum", "n_max", 8));
    q.points = static_cast<int>(doc.integer("quantum", "points", 128));
    q.x_min = doc.number("quantum", "x_min", -6.0);
    q.x_max = doc.number("quantum", "x_max", 6.0);
    const std::string d = doc.text("quantum", "derivative", "spectral");
    if (d == "spectral") q.derivative = Derivative::spectral;
    else if (d == "central") q.derivative = Derivative::central;
    else throw ConfigError("derivative must be spectral or central", line_of(doc, "quantum", "derivative"));
    q.dt = doc.number("quantum", "dt", 0.01);
    q.krylov_dimension = static_cast<int>(doc.integer("quantum", "krylov_dimension", 20));
    q.krylov_tolerance = doc.number("quantum", "krylov_tolerance", 1e-10);
    q.max_amplitudes = static_cast<std::size_t>(doc.integer("quantum", "max_amplitudes", 5'000'000));
    q.leakage_bound = doc.number("quantum", "leakage_bound", 1e-6);
    if (!(q.dt > 0.0)) throw ConfigError("dt must be positive", line_of(doc, "quantum", "dt"));
    if (q.n_max < 1) throw ConfigError("n_max must be at least 1", line_of(doc, "quantum", "n_max"));
    if (q.krylov_dimension < 2) throw ConfigError("krylov_dimension must be at least 2", line_of(doc, "quantum", "krylov_dimension"));
    if (!c.particles.collinear)
      throw ConfigError("quantum runs need the collinear reduction", line_of(doc, "particles", "collinear"));
    if (c.grid.nodes.empty()) throw ConfigError("quantum runs need an explicit [modes] list", doc.has_section("quantum") ? hbar_line : 0);
    if (q.points < 4 || q.points % 2 != 0 || !(q.x_max > q.x_min))
      throw ConfigError("particle grid needs an even number of points >= 4 on x_min < x_max", line_of(doc, "quantum", "points"));

    // Size check before anything is allocated.
    const double modes = 2.0 * c.grid.nodes.size();
    const double amplitudes = std::pow(q.n_max + 1.0, modes) * std::pow(static_cast<double>(q.points), c.particles.count);
    if (amplitudes > static_cast<double>(q.max_amplitudes))
      throw ConfigError("quantum state would hold " + std::to_string(static_cast<long long>(amplitudes)) +
                            " amplitudes, above the cap of " + std::to_string(q.max_amplitudes),
                        line_of(doc, "quantum", "n_max"));
  }

  // [ensemble]
  double total = 0.0;
  for (const auto& key : doc.keys("ensemble")) {
    const auto* e = doc.find("ensemble", key);
    if (key.rfind("member", 0) != 0) throw ConfigError("[ensemble] keys are member0, member1, ...", e->line);
    const auto parts = split(e->value, '|');
    if (parts.size() != 4) throw ConfigError("member expects 'weight | q0 | p0 | field_scale'", e->line);
    EnsembleMemberSpec m;
    m.line = e->line;
    const auto w = parse_numbers(parts[0], e->line);
    m.q0 = parse_numbers(parts[1], e->line);
    m.p0 = parse_numbers(parts[2], e->line);
    const auto s = parse_numbers(parts[3], e->line);
    if (w.size() != 1 || s.size() != 1) throw ConfigError("member weight and field_scale are single numbers", e->line);
    if (!(w[0] > 0.0)) throw ConfigError("member weight must be positive", e->line);
    if (static_cast<int>(m.q0.size()) != c.particles.count || static_cast<int>(m.p0.size()) != c.particles.count)
      throw ConfigError("member needs one q0 and p0 per particle", e->line);
    m.weight = w[0];
    m.field_scale = s[0];
    total += m.weight;
    c.ensemble.push_back(m);
  }
  if (!c.ensemble.empty() && std::abs(total - 1.0) > 1e-12)
    throw ConfigError("ensemble weights sum to " + std::to_string(total) + ", not 1", c.ensemble.front().line);

  doc.reject_unused();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) { return load_config(IniDocument::load(path)); }

}  // namespace aqed
