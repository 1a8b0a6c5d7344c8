#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "magdmc/bspline.hpp"
#include "magdmc/config.hpp"
#include "magdmc/kernel_table.hpp"
#include "magdmc/units.hpp"

namespace magdmc {

struct LongitudinalOrbital {
  int m = 0;
  int nu_z = 0;
  double eigenvalue = 0.0;
  Eigen::VectorXd coeffs;
};

struct ScfRecord {
  int iteration = 0;
  double energy = 0.0;
  double delta_energy = 0.0;
  double orbital_change = 0.0;
  double damping = 0.0;
};

struct HfEnergyParts {
  double kinetic = 0.0;
  double nuclear = 0.0;
  double hartree = 0.0;
  double exchange = 0.0;
  double transverse = 0.0;  // N gamma / 2, lowest Landau level
  double spin = 0.0;        // -N gamma / 2 when the spin term is included
  double total() const { return kinetic + nuclear + hartree - exchange + transverse + spin; }
};

/// Converged adiabatic-approximation orbitals: Landau state m times a
/// longitudinal B-spline expansion f(z) per electron.
struct OrbitalSet {
  double beta = 1.0;  // B / B0; the Landau factors use gamma = 2 beta
  double charge = 1.0;
  bool spin_zeeman_included = true;
  SplineBasis basis;
  std::vector<LongitudinalOrbital> orbitals;
  HfEnergyParts parts;
  EnergyValue e_hf;
  std::vector<ScfRecord> log;
  std::uint64_t source_hash = 0;

  std::size_t size() const { return orbitals.size(); }
};

struct LongitudinalValue {
  double f = 0.0, df = 0.0, d2f = 0.0;
};

/// f_nu(z) and its first two derivatives; zero outside the spline domain.
LongitudinalValue eval_longitudinal(const OrbitalSet& set, std::size_t nu, double z);

/// Outer Gauss points of every element plus, for each outer point p, a
/// second rule on its own element split at z_p. The pair kernels have a
/// cusp at zero separation; splitting there keeps the inner integrals exact
/// to quadrature order.
class FemGrid {
 public:
  struct Point {
    double z = 0.0, w = 0.0;
    SplineEval basis;
  };

  FemGrid(const SplineBasis& basis, int points_per_element);

  const SplineBasis& basis() const { return basis_; }
  const std::vector<Point>& outer() const { return outer_; }
  const std::vector<Point>& split(std::size_t p) const { return split_[p]; }
  std::size_t element(std::size_t p) const { return p / per_element_; }
  std::size_t per_element() const { return per_element_; }

  /// Values of sum_a c_a B_a at a point.
  static double combine(const Point& pt, const Eigen::VectorXd& c, std::size_t n);

 private:
  SplineBasis basis_;
  std::size_t per_element_;
  std::vector<Point> outer_;
  std::vector<std::vector<Point>> split_;
};

struct ChannelSolution {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd vectors;  // columns, S-orthonormal
  double max_residual = 0.0;
};

class ScfError : public std::runtime_error {
 public:
  ScfError(const std::string& what, std::vector<ScfRecord> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<ScfRecord>& history() const { return history_; }

 private:
  std::vector<ScfRecord> history_;
};

/// Galerkin discretization of the longitudinal Hartree-Fock problem.
class LongitudinalProblem {
 public:
  LongitudinalProblem(const SplineBasis& basis, int points_per_element, std::shared_ptr<const KernelTable> kernels);

  const FemGrid& grid() const { return grid_; }
  const SplineBasis& basis() const { return grid_.basis(); }
  std::size_t size() const { return n_; }
  const Eigen::MatrixXd& overlap() const { return overlap_; }
  const Eigen::MatrixXd& kinetic() const { return kinetic_; }
  const Eigen::MatrixXd& nuclear(int m) const;
  const KernelTable& kernels() const { return *kernels_; }

  /// <B_a | V | B_b> for an arbitrary local potential.
  Eigen::MatrixXd local_potential(const std::function<double(double)>& v) const;

  /// Lowest eigenpairs of (T + V_m + mean_field) c = eps S c.
  ChannelSolution solve_channel(int m, const Eigen::MatrixXd* mean_field = nullptr) const;
  /// Same, with an explicit one-body matrix replacing T + V_m.
  ChannelSolution solve(const Eigen::MatrixXd& hamiltonian) const;

  /// Direct minus exchange mean field acting on channel m, generated by all orbitals.
  Eigen::MatrixXd mean_field(int m, const std::vector<LongitudinalOrbital>& orbitals) const;
  Eigen::MatrixXd direct_matrix(int m, const std::vector<LongitudinalOrbital>& orbitals) const;
  Eigen::MatrixXd exchange_matrix(int m, const std::vector<LongitudinalOrbital>& orbitals) const;

  HfEnergyParts energy(const std::vector<LongitudinalOrbital>& orbitals, double beta, bool spin_zeeman) const;

  /// Sign changes of f over the domain, ignoring values below 1e-6 of the maximum.
  int count_nodes(const Eigen::VectorXd& c) const;

 private:
  struct PairKernel {
    Eigen::MatrixXd outer;  // K(z_p - z_q)
    Eigen::MatrixXd split;  // K(z_p - z_s), s in split(p)
  };
  const PairKernel& pair_kernel(bool exchange, int m, int mp) const;
  std::vector<double> values_at_outer(const Eigen::VectorXd& c) const;

  FemGrid grid_;
  std::size_t n_;
  std::shared_ptr<const KernelTable> kernels_;
  Eigen::MatrixXd overlap_, kinetic_;
  std::map<int, Eigen::MatrixXd> nuclear_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::tuple<bool, int, int>, PairKernel> pair_cache_;
};

/// Builds the spline basis the SCF uses for a configuration.
SplineBasis hf_basis(const RunConfig& config);
double hf_half_width(const RunConfig& config);
KernelGridSpec kernel_grid_for(const RunConfig& config);

std::vector<int> occupied_channels(const std::vector<Occupation>& occupations);

/// Self-consistent longitudinal Hartree-Fock.
OrbitalSet scf(const RunConfig& config, std::shared_ptr<const KernelTable> kernels);

/// Total energy functional for a set of orbitals (double counting removed).
EnergyValue hf_total_energy(const OrbitalSet& orbitals, const KernelTable& kernels, int points_per_element = 10);

/// Text orbital file; see docs/file-formats.md.
void write_orbital_file(const std::string& path, const OrbitalSet& set);
OrbitalSet read_orbital_file(const std::string& path, std::uint64_t expected_hash = 0);

}  // namespace magdmc
