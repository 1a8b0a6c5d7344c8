#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "magdmc/units.hpp"

namespace magdmc {

/// One spin-polarized electron in the lowest Landau level: magnetic quantum
/// number m and longitudinal excitation (node count) nu_z.
struct Occupation {
  int m = 0;
  int nu_z = 0;
  friend bool operator==(const Occupation&, const Occupation&) = default;
  friend auto operator<=>(const Occupation&, const Occupation&) = default;
};

enum class StageKind { Vqmc, Fpdqmc, Rpdqmc };

std::string to_string(StageKind kind);
StageKind stage_kind_from_string(const std::string& name);

struct StageSpec {
  StageKind kind = StageKind::Vqmc;
  int n_blocks = 0;
  int steps_per_block = 0;
  int equilibration_blocks = 0;
};

enum class MoveMode { AllElectron, SingleElectron };

struct HfSettings {
  int spline_degree = 5;
  int elements_per_side = 30;
  double half_width = 0.0;     // 0: 60/sqrt(beta) + 30/Z
  double first_element = 0.0;  // 0: 0.05 * min(1/sqrt(beta), 1/Z)
  int quad_points = 10;
  double damping = 0.3;
  int max_iterations = 400;
  double energy_tol = 1e-9;
  double orbital_tol = 1e-7;
};

struct QmcSettings {
  double vqmc_dtau = 0.0;  // 0: use the run dtau
  MoveMode vqmc_moves = MoveMode::AllElectron;
  bool accept_reject = true;
  double population_gain = 0.1;
  int checkpoint_interval = 10;
  int pre_equilibration_steps = 50;
};

struct OutputPaths {
  std::string dir = ".";
  std::string orbitals = "orbitals.txt";
  std::string trace = "trace.csv";
  std::string summary = "summary.json";
  std::string checkpoint = "checkpoint.bin";
  std::string manifest = "manifest.json";

  std::string resolve(const std::string& name) const;
};

struct RunConfig {
  int z = 1;
  int n_electrons = 1;
  FieldStrength field = FieldStrength::from_beta(1.0);
  std::vector<Occupation> occupations;
  int n_walkers = 500;
  double dtau = 1e-4;
  std::vector<StageSpec> schedule;
  std::uint64_t seed = 1;
  bool spin_zeeman_included = true;
  bool allow_anion = false;
  HfSettings hf;
  QmcSettings qmc;
  OutputPaths out;

  double vqmc_dtau() const { return qmc.vqmc_dtau > 0.0 ? qmc.vqmc_dtau : dtau; }
};

/// Thrown by validation; carries every violation found, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

using ConfigMap = std::map<std::string, std::string>;

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are
/// rejected at validation time, not here.
ConfigMap parse_config_text(const std::string& text);

/// Builds a RunConfig from key/value pairs, enforcing all invariants.
RunConfig resolve_config(const ConfigMap& values);

/// parse_config_text + resolve_config.
RunConfig validate_config(const std::string& text);

RunConfig load_config_file(const std::string& path, const ConfigMap& overrides = {});

/// Canonical, fully resolved key/value text. Feeding it back through
/// validate_config reproduces the same configuration.
std::string print_config(const RunConfig& config);

struct ConfigKey {
  std::string name;
  std::string help;
};
const std::vector<ConfigKey>& config_schema();

std::vector<Occupation> default_ground_occupations(int n_electrons);

/// Schedule matching the three-stage flow: VQMC, FPDQMC, RPDQMC.
std::vector<StageSpec> default_schedule();

/// Hash of every field that affects results (output paths excluded).
std::uint64_t config_hash(const RunConfig& config);
/// Hash of the fields that determine the Hartree-Fock orbitals only.
std::uint64_t hf_hash(const RunConfig& config);

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t fnv1a(const std::string& s);
std::string hex64(std::uint64_t v);

}  // namespace magdmc
