#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "magdmc/config.hpp"
#include "magdmc/guiding.hpp"

namespace magdmc {

class QmcError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// Stream splitting. Walker k of the initial population is seeded with
/// seed_seq{seed_lo, seed_hi, k, 0}; a branching child with
/// seed_seq{seed_lo, seed_hi, step, birth + 1, 1}, where step is the global
/// step counter and birth a running count of births in the run. Streams do
/// not depend on how walkers are distributed over threads.
Rng make_walker_rng(std::uint64_t seed, std::uint64_t index);
Rng make_child_rng(std::uint64_t seed, std::uint64_t step, std::uint64_t birth);

struct Walker {
  Configuration R;
  double weight = 1.0;
  double phase = 0.0;  // released-phase angle, unwrapped
  int age = 0;
  GuidingEval eval;    // cached at R
  Rng rng;
};
using Population = std::vector<Walker>;

struct StepLaw {
  double dtau = 1e-4;
  bool accept_reject = true;
  MoveMode moves = MoveMode::AllElectron;
};

struct BlockStats {
  StageKind stage = StageKind::Vqmc;
  int block = 0;
  bool equilibration = false;
  double e_block = 0.0;     // E_B, hartree
  double e_fixed_phase = 0.0;  // fixed-phase estimator (equals E_B outside RPDQMC)
  double e_average = 0.0;   // <E_B> over post-equilibration blocks so far (NaN before)
  double sigma = 0.0;       // std of those block energies
  double acceptance = 0.0;
  double population = 0.0;  // mean over the block's steps
  double e_t = 0.0;         // offset in force during the block
  double im_energy = 0.0;   // weighted mean of Im E_L
  double rp_signal = 1.0;   // |sum w e^{i theta}| / sum w; 1 outside RPDQMC
  long clamp_events = 0;
};

/// Draws the transverse position of a Landau electron exactly from |Phi_m|^2.
void sample_transverse(int m, double gamma, Rng& rng, double& rho, double& phi);

/// Inverse-CDF sampler for |f_nu|^2 tabulated on a fine grid.
class LongitudinalSampler {
 public:
  explicit LongitudinalSampler(const LongitudinalSet& orbitals, int points = 20001);
  double sample(std::size_t nu, double u) const;

 private:
  std::vector<double> z_;
  std::vector<std::vector<double>> cdf_;
};

/// Initial population, walker k standing on electron-to-orbital assignment
/// i -> nu = i, then pre-equilibrated by `pre_steps` VQMC steps.
Population init_walkers(const GuidingFunction& psi, int n_walkers, std::uint64_t seed, const StepLaw& law,
                        int pre_steps = 0);

struct MoveCounts {
  long accepted = 0;
  long proposed = 0;
};

/// One drift-diffusion move of a walker under |Psi_G|^2, Metropolis-Hastings
/// corrected when law.accept_reject. Updates w.R and w.eval.
void move_walker(const GuidingFunction& psi, Walker& w, const StepLaw& law, MoveCounts& counts);

/// Fixed-number Metropolis block (weights stay 1).
BlockStats vqmc_block(Population& pop, const GuidingFunction& psi, int steps, const StepLaw& law);

struct PopulationControl {
  double e_t = 0.0;
  double target = 500.0;
  double gain = 0.1;
  double block_time = 0.02;      // steps_per_block * dtau
  std::deque<double> recent;     // latest block energies, for the clamp
  std::size_t history = 20;
};

struct StepTally {
  cplx num{0.0, 0.0};  // sum w e^{i theta} conj(E_L)
  cplx den{0.0, 0.0};  // sum w e^{i theta}
  double weight = 0.0; // sum w
  double fp_num = 0.0; // sum w Re E_L
  double im_num = 0.0; // sum w Im E_L
  long clamps = 0;
  MoveCounts moves;
};

/// Moves every walker, multiplies its weight by
/// exp(-dtau (Re E_L(R) + Re E_L(R')) / 2 + dtau E_T) and, when
/// `release_phase`, advances its angle by -dtau (Im E_L(R) + Im E_L(R')) / 2.
StepTally fp_step(Population& pop, const GuidingFunction& psi, const StepLaw& law, double e_t,
                  bool release_phase = false);

struct BranchContext {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t births = 0;  // running counter, advanced by branch()
  double target = 500.0;
};

/// floor(w + u) copies of every walker, weights reset to 1.
void branch(Population& pop, BranchContext& ctx);

/// E_T <- E_best + (g / block_time) ln(W0 / W), clamped to the spread of
/// recent block energies. Returns the new offset.
double update_offset(PopulationControl& control, double e_best, double population);

/// Block of FP or RP diffusion steps, branching after every step.
BlockStats dqmc_block(Population& pop, const GuidingFunction& psi, int steps, const StepLaw& law,
                      PopulationControl& control, BranchContext& ctx, bool release_phase);

struct StageResult {
  StageSpec spec;
  double dtau = 0.0;
  std::vector<BlockStats> blocks;
  double energy = 0.0;  // <E_B> over post-equilibration blocks used
  double sigma = 0.0;   // std of those block energies
  double error = 0.0;   // standard error of <E_B>, reblocked
  int used_blocks = 0;
  bool signal_lost = false;
  int signal_lost_block = -1;
  long clamp_events = 0;
  double acceptance = 0.0;
  double mean_population = 0.0;
  bool complete = false;
};

/// Recomputes energy / sigma / error from the block list.
void finalize_stage(StageResult& result);

/// Standard error of the mean from pairwise reblocking: the largest estimate
/// over levels that still hold at least eight blocks.
double reblocked_error(const std::vector<double>& x);
double mean_of(const std::vector<double>& x);
double std_of(const std::vector<double>& x);

/// Called after every block; returning false stops the stage early.
using BlockHook = std::function<bool(const StageResult&)>;

/// Runs (or continues) a stage from result.blocks.size() to spec.n_blocks.
/// Diffusion stages update E_T after each block from the running
/// fixed-phase average. Sets result.complete when the schedule is done.
void run_stage(StageResult& result, Population& pop, const GuidingFunction& psi, const StepLaw& law,
               PopulationControl& control, BranchContext& ctx, const BlockHook& hook = {});

/// Released-phase stage run from an FP-equilibrated population.
StageResult rp_stage(Population& pop, const GuidingFunction& psi, const StageSpec& spec, const StepLaw& law,
                     PopulationControl& control, BranchContext& ctx);

/// Running <E_B>, sigma of the post-equilibration, non-excluded blocks of a stage.
void fill_running(StageResult& result, BlockStats& b);

inline constexpr double kRpSignalFloor = 0.1;
inline constexpr double kWeightMin = 1e-12;
inline constexpr double kWeightMax = 1e12;
inline constexpr double kPopulationAbortFactor = 10.0;

}  // namespace magdmc
