#include "magdmc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace magdmc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, const std::string& seps) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string::npos) {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

std::string fmt_double(double v) {
  // Shortest text that reads back to the same double.
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

class Reader {
 public:
  explicit Reader(const ConfigMap& values) : values_(values) {}

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  template <class T>
  T integer(const std::string& key, T fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    T v{};
    const std::string& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      errors.push_back(key + ": expected an integer, got '" + s + "'");
      return fallback;
    }
    return v;
  }

  double real(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t idx = 0;
      double v = std::stod(it->second, &idx);
      if (idx != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      errors.push_back(key + ": expected a number, got '" + it->second + "'");
      return fallback;
    }
  }

  bool boolean(const std::string& key, bool fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string s = it->second;
    std::transform(s.begin(), s.end(), s.begin(), ::tolower);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    errors.push_back(key + ": expected a boolean, got '" + it->second + "'");
    return fallback;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  void reject_unknown() {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) errors.push_back("unknown configuration key '" + k + "'");
  }

  std::vector<std::string> errors;

 private:
  const ConfigMap& values_;
  std::set<std::string> used_;
};

std::string occupations_text(const std::vector<Occupation>& occ) {
  std::string s;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(occ[i].m) + ":" + std::to_string(occ[i].nu_z);
  }
  return s;
}

std::string schedule_text(const std::vector<StageSpec>& schedule) {
  std::string s;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& st = schedule[i];
    if (i) s += ' ';
    s += to_string(st.kind) + ":" + std::to_string(st.n_blocks) + ":" + std::to_string(st.steps_per_block) +
         ":" + std::to_string(st.equilibration_blocks);
  }
  return s;
}

}  // namespace

std::string to_string(StageKind kind) {
  switch (kind) {
    case StageKind::Vqmc: return "vqmc";
    case StageKind::Fpdqmc: return "fpdqmc";
    case StageKind::Rpdqmc: return "rpdqmc";
  }
  return "?";
}

StageKind stage_kind_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "vqmc") return StageKind::Vqmc;
  if (s == "fpdqmc") return StageKind::Fpdqmc;
  if (s == "rpdqmc") return StageKind::Rpdqmc;
  throw std::invalid_argument("unknown stage '" + name + "' (expected vqmc, fpdqmc or rpdqmc)");
}

std::string OutputPaths::resolve(const std::string& name) const {
  if (name.empty() || name.front() == '/' || dir.empty() || dir == ".") return name;
  return dir + "/" + name;
}

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& v : violations) msg += "\n  - " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap values;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> errors;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  if (!errors.empty()) throw ConfigError(errors);
  return values;
}

std::vector<Occupation> default_ground_occupations(int n_electrons) {
  std::vector<Occupation> occ;
  occ.reserve(std::max(n_electrons, 0));
  for (int m = 0; m < n_electrons; ++m) occ.push_back({m, 0});
  return occ;
}

std::vector<StageSpec> default_schedule() {
  return {{StageKind::Vqmc, 100, 200, 20}, {StageKind::Fpdqmc, 300, 200, 60}, {StageKind::Rpdqmc, 300, 200, 60}};
}

RunConfig resolve_config(const ConfigMap& values) {
  Reader rd(values);
  RunConfig cfg;
  auto& errors = rd.errors;

  cfg.z = rd.integer<int>("z", 0);
  if (cfg.z < 1) errors.push_back("z: nuclear charge must be a positive integer");
  cfg.n_electrons = rd.integer<int>("n_electrons", cfg.z);
  cfg.allow_anion = rd.boolean("allow_anion", false);
  if (cfg.n_electrons < 1) errors.push_back("n_electrons: must be at least 1");
  if (cfg.n_electrons > cfg.z && cfg.z >= 1 && !cfg.allow_anion)
    errors.push_back("n_electrons: N > Z requires allow_anion = true");

  const bool has_b = rd.has("b_tesla"), has_beta = rd.has("beta");
  double b = rd.real("b_tesla", 0.0), beta = rd.real("beta", 0.0);
  if (has_b && has_beta) {
    errors.push_back("give either b_tesla or beta, not both");
  } else if (!has_b && !has_beta) {
    errors.push_back("b_tesla: magnetic field is required (or beta)");
  } else {
    try {
      cfg.field = has_b ? FieldStrength::from_tesla(b) : FieldStrength::from_beta(beta);
    } catch (const DomainError& e) {
      errors.push_back(std::string(has_b ? "b_tesla: " : "beta: ") + e.what());
    }
  }

  const std::string occ = rd.text("occupations", "default");
  if (occ == "default") {
    cfg.occupations = default_ground_occupations(std::max(cfg.n_electrons, 0));
  } else {
    for (const auto& tok : split(occ, " ,\t")) {
      auto parts = split(tok, ":");
      int m = -1, nu = -1;
      if (parts.size() == 2) {
        std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), m);
        std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), nu);
      }
      if (m < 0 || nu < 0) {
        errors.push_back("occupations: bad entry '" + tok + "' (expected m:nu_z with non-negative integers)");
        continue;
      }
      cfg.occupations.push_back({m, nu});
    }
  }
  if (static_cast<int>(cfg.occupations.size()) != cfg.n_electrons)
    errors.push_back("occupations: " + std::to_string(cfg.occupations.size()) + " entries for " +
                     std::to_string(cfg.n_electrons) + " electrons");
  {
    std::set<Occupation> seen;
    for (const auto& o : cfg.occupations)
      if (!seen.insert(o).second)
        errors.push_back("occupations: Pauli violation, (m=" + std::to_string(o.m) + ", nu_z=" +
                         std::to_string(o.nu_z) + ") occupied twice");
  }

  cfg.n_walkers = rd.integer<int>("n_walkers", cfg.n_walkers);
  if (cfg.n_walkers < 1) errors.push_back("n_walkers: must be at least 1");
  cfg.dtau = rd.real("dtau", cfg.dtau);
  if (!(cfg.dtau > 0.0)) errors.push_back("dtau: time step must be positive");

  const std::string sched = rd.text("schedule", "default");
  if (sched == "default") {
    cfg.schedule = default_schedule();
  } else {
    for (const auto& tok : split(sched, " ,\t")) {
      auto parts = split(tok, ":");
      if (parts.size() < 3 || parts.size() > 4) {
        errors.push_back("schedule: bad entry '" + tok + "' (expected stage:blocks:steps[:equilibration])");
        continue;
      }
      StageSpec st;
      try {
        st.kind = stage_kind_from_string(parts[0]);
        st.n_blocks = std::stoi(parts[1]);
        st.steps_per_block = std::stoi(parts[2]);
        st.equilibration_blocks = parts.size() == 4 ? std::stoi(parts[3]) : st.n_blocks / 5;
      } catch (const std::exception& e) {
        errors.push_back("schedule: bad entry '" + tok + "': " + e.what());
        continue;
      }
      cfg.schedule.push_back(st);
    }
  }
  if (cfg.schedule.empty()) errors.push_back("schedule: at least one stage is required");
  for (const auto& st : cfg.schedule) {
    if (st.n_blocks < 1 || st.steps_per_block < 1)
      errors.push_back("schedule: stage " + to_string(st.kind) + " needs positive block and step counts");
    if (st.equilibration_blocks < 0 || st.equilibration_blocks >= st.n_blocks)
      errors.push_back("schedule: stage " + to_string(st.kind) + " needs 0 <= equilibration_blocks < n_blocks");
  }

  cfg.seed = rd.integer<std::uint64_t>("seed", cfg.seed);
  cfg.spin_zeeman_included = rd.boolean("spin_zeeman", true);

  auto& hf = cfg.hf;
  hf.spline_degree = rd.integer<int>("hf.degree", hf.spline_degree);
  hf.elements_per_side = rd.integer<int>("hf.elements_per_side", hf.elements_per_side);
  hf.half_width = rd.real("hf.half_width", hf.half_width);
  hf.first_element = rd.real("hf.first_element", hf.first_element);
  hf.quad_points = rd.integer<int>("hf.quad_points", hf.quad_points);
  hf.damping = rd.real("hf.damping", hf.damping);
  hf.max_iterations = rd.integer<int>("hf.max_iterations", hf.max_iterations);
  hf.energy_tol = rd.real("hf.energy_tol", hf.energy_tol);
  hf.orbital_tol = rd.real("hf.orbital_tol", hf.orbital_tol);
  if (hf.spline_degree < 2 || hf.spline_degree > 9) errors.push_back("hf.degree: must be in [2, 9]");
  if (hf.elements_per_side < 2) errors.push_back("hf.elements_per_side: must be at least 2");
  if (hf.half_width < 0.0 || hf.first_element < 0.0) errors.push_back("hf.half_width/first_element: must be >= 0");
  if (hf.quad_points < 2 || hf.quad_points > 20) errors.push_back("hf.quad_points: must be in [2, 20]");
  if (hf.damping < 0.0 || hf.damping >= 1.0) errors.push_back("hf.damping: must be in [0, 1)");
  if (hf.max_iterations < 1) errors.push_back("hf.max_iterations: must be positive");

  auto& q = cfg.qmc;
  q.vqmc_dtau = rd.real("qmc.vqmc_dtau", q.vqmc_dtau);
  const std::string moves = rd.text("qmc.vqmc_moves", "all");
  if (moves == "all") q.vqmc_moves = MoveMode::AllElectron;
  else if (moves == "single") q.vqmc_moves = MoveMode::SingleElectron;
  else errors.push_back("qmc.vqmc_moves: expected 'all' or 'single'");
  q.accept_reject = rd.boolean("qmc.accept_reject", q.accept_reject);
  q.population_gain = rd.real("qmc.population_gain", q.population_gain);
  q.checkpoint_interval = rd.integer<int>("qmc.checkpoint_interval", q.checkpoint_interval);
  q.pre_equilibration_steps = rd.integer<int>("qmc.pre_equilibration_steps", q.pre_equilibration_steps);
  if (q.vqmc_dtau < 0.0) errors.push_back("qmc.vqmc_dtau: must be >= 0");
  if (q.population_gain < 0.0) errors.push_back("qmc.population_gain: must be >= 0");
  if (q.checkpoint_interval < 0) errors.push_back("qmc.checkpoint_interval: must be >= 0");
  if (q.pre_equilibration_steps < 0) errors.push_back("qmc.pre_equilibration_steps: must be >= 0");

  auto& o = cfg.out;
  o.dir = rd.text("out.dir", o.dir);
  o.orbitals = rd.text("out.orbitals", o.orbitals);
  o.trace = rd.text("out.trace", o.trace);
  o.summary = rd.text("out.summary", o.summary);
  o.checkpoint = rd.text("out.checkpoint", o.checkpoint);
  o.manifest = rd.text("out.manifest", o.manifest);

  rd.reject_unknown();
  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

RunConfig validate_config(const std::string& text) { return resolve_config(parse_config_text(text)); }

RunConfig load_config_file(const std::string& path, const ConfigMap& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read configuration file '" + path + "'"});
  std::stringstream ss;
  ss << in.rdbuf();
  ConfigMap values = parse_config_text(ss.str());
  for (const auto& [k, v] : overrides) values[k] = v;
  return resolve_config(values);
}

namespace {

std::string physics_text(const RunConfig& c, bool hf_only) {
  std::ostringstream s;
  s << "z = " << c.z << "\n"
    << "n_electrons = " << c.n_electrons << "\n"
    << "beta = " << fmt_double(c.field.beta()) << "\n"
    << "occupations = " << occupations_text(c.occupations) << "\n"
    << "spin_zeeman = " << (c.spin_zeeman_included ? "true" : "false") << "\n"
    << "allow_anion = " << (c.allow_anion ? "true" : "false") << "\n"
    << "hf.degree = " << c.hf.spline_degree << "\n"
    << "hf.elements_per_side = " << c.hf.elements_per_side << "\n"
    << "hf.half_width = " << fmt_double(c.hf.half_width) << "\n"
    << "hf.first_element = " << fmt_double(c.hf.first_element) << "\n"
    << "hf.quad_points = " << c.hf.quad_points << "\n"
    << "hf.damping = " << fmt_double(c.hf.damping) << "\n"
    << "hf.max_iterations = " << c.hf.max_iterations << "\n"
    << "hf.energy_tol = " << fmt_double(c.hf.energy_tol) << "\n"
    << "hf.orbital_tol = " << fmt_double(c.hf.orbital_tol) << "\n";
  if (hf_only) return s.str();
  s << "n_walkers = " << c.n_walkers << "\n"
    << "dtau = " << fmt_double(c.dtau) << "\n"
    << "schedule = " << schedule_text(c.schedule) << "\n"
    << "seed = " << c.seed << "\n"
    << "qmc.vqmc_dtau = " << fmt_double(c.qmc.vqmc_dtau) << "\n"
    << "qmc.vqmc_moves = " << (c.qmc.vqmc_moves == MoveMode::AllElectron ? "all" : "single") << "\n"
    << "qmc.accept_reject = " << (c.qmc.accept_reject ? "true" : "false") << "\n"
    << "qmc.population_gain = " << fmt_double(c.qmc.population_gain) << "\n"
    << "qmc.checkpoint_interval = " << c.qmc.checkpoint_interval << "\n"
    << "qmc.pre_equilibration_steps = " << c.qmc.pre_equilibration_steps << "\n";
  return s.str();
}

}  // namespace

std::string print_config(const RunConfig& c) {
  std::ostringstream s;
  s << "# resolved configuration; b_tesla = " << fmt_double(c.field.b_tesla()) << "\n"
    << physics_text(c, false) << "out.dir = " << c.out.dir << "\n"
    << "out.orbitals = " << c.out.orbitals << "\n"
    << "out.trace = " << c.out.trace << "\n"
    << "out.summary = " << c.out.summary << "\n"
    << "out.checkpoint = " << c.out.checkpoint << "\n"
    << "out.manifest = " << c.out.manifest << "\n";
  return s.str();
}

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys = {
      {"z", "nuclear charge Z"},
      {"n_electrons", "electron count N (default Z)"},
      {"b_tesla", "magnetic field in tesla"},
      {"beta", "field in atomic units B/B0 (alternative to b_tesla)"},
      {"occupations", "'default' or list of m:nu_z pairs"},
      {"n_walkers", "target walker population"},
      {"dtau", "imaginary time step (a.u.)"},
      {"schedule", "'default' or list of stage:blocks:steps[:equilibration]"},
      {"seed", "master RNG seed"},
      {"spin_zeeman", "include the spin term, which cancels the Landau zero-point energy"},
      {"allow_anion", "permit N > Z"},
      {"hf.degree", "B-spline polynomial degree"},
      {"hf.elements_per_side", "finite elements on each half of the domain"},
      {"hf.half_width", "longitudinal half-width in bohr (0 = automatic)"},
      {"hf.first_element", "width of the innermost element (0 = automatic)"},
      {"hf.quad_points", "Gauss points per element"},
      {"hf.damping", "fraction of the previous mean field kept each SCF iteration"},
      {"hf.max_iterations", "SCF iteration limit"},
      {"hf.energy_tol", "SCF energy convergence threshold (hartree)"},
      {"hf.orbital_tol", "SCF orbital convergence threshold (L2)"},
      {"qmc.vqmc_dtau", "VQMC proposal time step (0 = dtau)"},
      {"qmc.vqmc_moves", "'all' or 'single' electron VQMC moves"},
      {"qmc.accept_reject", "Metropolis accept/reject inside DQMC"},
      {"qmc.population_gain", "population feedback gain g"},
      {"qmc.checkpoint_interval", "blocks between checkpoints (0 = never)"},
      {"qmc.pre_equilibration_steps", "Metropolis steps applied to fresh walkers"},
      {"out.dir", "output directory"},
      {"out.orbitals", "orbital file name"},
      {"out.trace", "per-block trace CSV name"},
      {"out.summary", "summary record name"},
      {"out.checkpoint", "checkpoint file name"},
      {"out.manifest", "run manifest name"},
  };
  return keys;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t config_hash(const RunConfig& c) { return fnv1a(physics_text(c, false)); }
std::uint64_t hf_hash(const RunConfig& c) { return fnv1a(physics_text(c, true)); }

}  // namespace magdmc
