#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "magdmc/guiding.hpp"

// Brute-force reference implementations for tests. Nothing here calls the
// production kernel, spline or quadrature code.
namespace magdmc::oracle {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// exp(x^2) erfc(x), accurate for all x >= 0.
double erfcx(double x);

/// Closed form of the m = 0 nuclear kernel:
///   -Z sqrt(pi gamma / 2) exp(gamma z^2 / 2) erfc(sqrt(gamma / 2) |z|).
double nuclear_kernel_m0(double gamma, double charge, double z);

/// D_00(zeta) from a composite Simpson rule on the relative-coordinate
/// integral (gamma / 2) \int rho exp(-gamma rho^2 / 4) / sqrt(rho^2 + zeta^2) drho.
double direct_kernel_00(double gamma, double zeta, int intervals = 200000);

/// |Phi_m(rho)|^2, written out independently of the production code.
double landau_density(int m, double gamma, double rho);

struct McEstimate {
  double value = 0.0;
  double error = 0.0;  // one standard error
};

/// Direct kernel D_mm'(zeta): both transverse positions drawn exactly from
/// their Landau densities, averaging 1 / |r1 - r2|.
McEstimate mc_integral_kernel(double gamma, int m, int mp, double zeta, long n_samples, std::uint64_t seed);

/// Exchange kernel X_mm'(zeta) by importance sampling from the mixture
/// (|Phi_m|^2 + |Phi_m'|^2) / 2 for each transverse position.
McEstimate mc_exchange_kernel(double gamma, int m, int mp, double zeta, long n_samples, std::uint64_t seed);

struct GridEigenProblem {
  std::function<double(double)> potential;
  double lower = -1.0, upper = 1.0;  // Dirichlet walls
  int points = 20001;                // interior + boundary points of the coarse grid
  int n_eigen = 1;
};

struct GridEigenResult {
  std::vector<double> eigenvalues;   // Richardson-extrapolated
  std::vector<double> error;         // |fine - extrapolated|
  std::vector<double> coarse, fine;  // raw values on h and h/2
  std::vector<double> z;             // fine grid (interior)
  std::vector<std::vector<double>> vectors;  // fine grid, sum v^2 h = 1
};

/// Second-order finite differences for -1/2 d^2/dz^2 + V on a uniform grid,
/// solved on spacings h and h/2 by Sturm bisection and inverse iteration.
GridEigenResult grid_eigensolve(const GridEigenProblem& problem);

/// Normalized Gaussians (a/pi)^(1/4) exp(-a z^2 / 2), one per listed m.
class GaussianOrbitals final : public LongitudinalSet {
 public:
  GaussianOrbitals(std::vector<int> m, std::vector<double> exponents);
  std::size_t size() const override { return m_.size(); }
  int m(std::size_t nu) const override { return m_[nu]; }
  void eval_all(double z, LongitudinalValue* out) const override;
  double lower() const override { return -extent_; }
  double upper() const override { return extent_; }

 private:
  std::vector<int> m_;
  std::vector<double> a_;
  double extent_ = 0.0;
};

/// One electron in the lowest Landau level of field gamma, bound along z by
/// 1/2 omega^2 z^2 (no nucleus, no Jastrow). The exact ground state is
/// Phi_0 x exp(-omega z^2 / 2) with E = gamma / 2 + omega / 2, minus gamma / 2
/// with the spin term. `jitter` scales the guiding Gaussian exponent by
/// (1 + jitter).
struct SeparableTest {
  double exact_energy = 0.0;
  GuidingFunction guiding;
};
SeparableTest separable_test_hamiltonian(double gamma, double omega, double jitter = 0.0,
                                         bool spin_zeeman = false);

}  // namespace magdmc::oracle
