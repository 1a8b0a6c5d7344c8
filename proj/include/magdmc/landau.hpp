#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace magdmc {

// Throughout this header `gamma` is the field in Hartree atomic units
// (FieldStrength::gamma(), i.e. 2 beta).

/// Lowest-Landau-level state with magnetic quantum number m:
///   Phi_m(rho, phi) = N_m rho^m exp(-i m phi) exp(-gamma rho^2 / 4),
///   N_m = sqrt(gamma^(m+1) / (2^(m+1) pi m!)).
struct LandauOrbital {
  int m = 0;
  double gamma = 1.0;
};

double landau_norm(int m, double gamma);
double log_landau_norm(int m, double gamma);
std::complex<double> eval_transverse(const LandauOrbital& orbital, double rho, double phi);
/// <rho^2> = 2 (m + 1) / gamma.
inline double landau_rho2_mean(int m, double gamma) { return 2.0 * (m + 1) / gamma; }

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KernelValue {
  double value = 0.0;
  double derivative = 0.0;  // d/dz, one-sided (z -> 0+) at the origin
};

/// Effective 1D nuclear attraction seen by an electron in Phi_m:
///   V_m(z) = -Z \int |Phi_m|^2 / sqrt(rho^2 + z^2) d^2rho.
/// The azimuthal integral is trivial; the radial one is done by adaptive
/// Gauss-Kronrod after substituting u = gamma rho^2 / 2 = s^2.
KernelValue nuclear_kernel(double gamma, int m, double charge, double z, double rel_tol = 1e-12);

/// Direct electron-electron kernel between densities |Phi_m|^2 and |Phi_m'|^2
/// separated by zeta along the field:
///   D(zeta) = \int_0^inf dk F_m(k) F_m'(k) exp(-k |zeta|),
///   F_m(k) = exp(-t) L_m(t), t = k^2 / (2 gamma),
/// the angular part of the 2D Fourier transform of 1/r being done analytically.
KernelValue direct_kernel(double gamma, int m, int mp, double zeta, double rel_tol = 1e-12);

/// Exchange kernel built from the mixed density Phi_m^* Phi_m':
///   X(zeta) = \int_0^inf dk |F_mm'(k)|^2 exp(-k |zeta|),
///   |F_mm'|^2 = (n<! / n>!) t^|m-m'| [L_n<^(|m-m'|)(t)]^2 exp(-2t).
/// The azimuthal phase of the mixed density cancels in |F|^2, so this is
/// again a 1D integral. X_mm = D_mm.
KernelValue exchange_kernel(double gamma, int m, int mp, double zeta, double rel_tol = 1e-12);

}  // namespace magdmc
