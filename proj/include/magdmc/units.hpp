#pragma once

#include <stdexcept>

namespace magdmc {

/// Field unit B0 in tesla for beta = B / B0. This is twice the Hartree
/// atomic unit of field, so the cyclotron field entering the Hamiltonian
/// (in hartree, bohr) is gamma = 2 beta.
inline constexpr double kFieldUnitTesla = 4.701e5;
inline constexpr double kGammaPerBeta = 2.0;

/// 1 hartree in eV. All energies are carried in hartree internally.
inline constexpr double kHartreeEv = 27.211386;
inline constexpr double kHartreeKev = kHartreeEv * 1e-3;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Magnetic field strength; beta and b_tesla are derived from a single stored value.
class FieldStrength {
 public:
  static FieldStrength from_beta(double beta);
  static FieldStrength from_tesla(double b_tesla);

  double beta() const { return beta_; }
  /// Field in Hartree atomic units: Landau gap, Larmor scale 1/sqrt(gamma).
  double gamma() const { return kGammaPerBeta * beta_; }
  double b_tesla() const { return beta_ * kFieldUnitTesla; }

 private:
  explicit FieldStrength(double beta) : beta_(beta) {}
  double beta_;
};

FieldStrength beta_from_tesla(double b_tesla);

inline double hartree_to_kev(double e) { return e * kHartreeKev; }
inline double kev_to_hartree(double e) { return e / kHartreeKev; }

struct EnergyValue {
  double hartree = 0.0;
  double kev() const { return hartree_to_kev(hartree); }
  static EnergyValue from_kev(double kev) { return {kev_to_hartree(kev)}; }
};

}  // namespace magdmc
