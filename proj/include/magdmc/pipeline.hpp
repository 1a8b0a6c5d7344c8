#pragma once

#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "magdmc/config.hpp"
#include "magdmc/hf.hpp"
#include "magdmc/qmc.hpp"

namespace magdmc {

inline constexpr const char* kVersion = "0.3.0";

/// Kernel cache directory: $MAGDMC_CACHE_DIR, else <out.dir>/cache.
std::string default_cache_dir(const RunConfig& config);

struct OrbitalSource {
  std::shared_ptr<const KernelTable> kernels;  // null when orbitals came from file
  OrbitalSet orbitals;
  bool kernel_cache_hit = false;
  bool loaded_from_file = false;
  double kernel_seconds = 0.0;
  double scf_seconds = 0.0;
};

std::shared_ptr<const KernelTable> obtain_kernels(const RunConfig& config, const std::string& cache_dir,
                                                  bool* cache_hit = nullptr);
/// Reuses out.orbitals when it exists and carries this configuration's HF
/// hash; otherwise builds kernels, runs the SCF and writes the file.
OrbitalSource obtain_orbitals(const RunConfig& config, const std::string& cache_dir, bool reuse_file = true,
                              bool write_file = true);

enum class StageSelection { All, VqmcOnly, FpdqmcOnly, RpdqmcOnly };
StageSelection stage_selection_from_string(const std::string& s);

struct PipelineOptions {
  std::string cache_dir;      // empty: default_cache_dir
  bool resume = false;        // continue from out.checkpoint when present
  StageSelection stages = StageSelection::All;
  int stop_after_blocks = -1; // stop (as if killed) after this many blocks; checkpoint first
  bool write_outputs = true;
  std::function<void(const BlockStats&)> on_block;
  std::ostream* log = nullptr;
};

struct PipelineResult {
  EnergyValue e_hf;
  std::vector<StageResult> stages;  // one per schedule entry (skipped stages have no blocks)
  bool complete = false;
  bool interrupted = false;
  std::string failure;              // non-empty: the stage that failed and why
  double final_energy = 0.0, final_sigma = 0.0, final_error = 0.0;
  int final_stage = -1;
  std::map<std::string, double> timings;
  std::vector<std::string> warnings;
  std::vector<std::string> artifacts;
  bool resumed = false;
};

/// HF (or orbital file), VQMC, FPDQMC and RPDQMC per the schedule, carrying
/// the walker population across stages.
PipelineResult run_pipeline(const RunConfig& config, const PipelineOptions& options = {});
/// Same, with orbitals supplied by the caller.
PipelineResult run_pipeline(const RunConfig& config, const OrbitalSet& orbitals, const PipelineOptions& options);

// Files.

struct CheckpointState {
  std::uint64_t config_hash = 0;
  double e_hf = 0.0;
  std::size_t stage = 0;  // index of the schedule entry in progress
  std::vector<StageResult> stages;
  PopulationControl control;
  BranchContext ctx;
  Population population;  // evals not stored; recomputed on load
};

void save_checkpoint(const std::string& path, const CheckpointState& state);
CheckpointState load_checkpoint(const std::string& path, const GuidingFunction& psi, std::uint64_t expected_hash);

void write_trace(const std::string& path, std::uint64_t config_hash, double e_hf, const std::vector<StageResult>& stages);

struct TraceRow {
  std::string stage;
  int block = 0;
  bool equilibration = false;
  double e_block = 0.0, e_average = 0.0, sigma = 0.0, acceptance = 0.0, population = 0.0, e_t = 0.0;
  double rp_signal = 1.0;
};
struct Trace {
  std::uint64_t config_hash = 0;
  double e_hf = 0.0;
  bool has_hf = false;
  std::vector<TraceRow> rows;
};
Trace read_trace(const std::string& path, std::uint64_t expected_hash = 0);

struct ReferenceLine {
  std::string label;
  double kev = 0.0;
};
/// `label value_kev` per line, '#' comments.
std::vector<ReferenceLine> read_reference_lines(const std::string& path);

/// Writes <prefix>.dat (global block, stage, E_B, <E_B>, E_T in keV) and
/// <prefix>_refs.dat (reference lines, highest energy first). Returns rows written.
std::size_t export_trace(const Trace& trace, const std::vector<ReferenceLine>& refs, const std::string& prefix);

std::string summary_json(const RunConfig& config, const PipelineResult& result);
std::string manifest_json(const RunConfig& config, const PipelineResult& result, const std::string& config_path);

}  // namespace magdmc
