#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "magdmc/hf.hpp"

namespace magdmc {

using cplx = std::complex<double>;

/// N electron positions, stored flat as (x0, y0, z0, x1, ...), bohr.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(std::size_t n) : c_(3 * n, 0.0) {}

  std::size_t size() const { return c_.size() / 3; }
  std::vector<double>& coords() { return c_; }
  const std::vector<double>& coords() const { return c_; }

  double x(std::size_t i) const { return c_[3 * i]; }
  double y(std::size_t i) const { return c_[3 * i + 1]; }
  double z(std::size_t i) const { return c_[3 * i + 2]; }
  double rho(std::size_t i) const { return std::hypot(x(i), y(i)); }
  double phi(std::size_t i) const { return std::atan2(y(i), x(i)); }
  double r(std::size_t i) const { return std::sqrt(x(i) * x(i) + y(i) * y(i) + z(i) * z(i)); }
  double distance(std::size_t i, std::size_t j) const;

  void set(std::size_t i, double x, double y, double z);
  void set_cylindrical(std::size_t i, double rho, double phi, double z);

 private:
  std::vector<double> c_;
};

/// Longitudinal factors f_nu(z) of the guiding orbitals together with the
/// Landau quantum number each one is paired with.
class LongitudinalSet {
 public:
  virtual ~LongitudinalSet() = default;
  virtual std::size_t size() const = 0;
  virtual int m(std::size_t nu) const = 0;
  /// f, f', f'' of every orbital at z.
  virtual void eval_all(double z, LongitudinalValue* out) const = 0;
  virtual double lower() const = 0;
  virtual double upper() const = 0;
};

/// Hartree-Fock spline orbitals.
class SplineOrbitals final : public LongitudinalSet {
 public:
  explicit SplineOrbitals(const OrbitalSet& set);
  std::size_t size() const override { return m_.size(); }
  int m(std::size_t nu) const override { return m_[nu]; }
  void eval_all(double z, LongitudinalValue* out) const override;
  double lower() const override { return basis_.lower(); }
  double upper() const override { return basis_.upper(); }

 private:
  SplineBasis basis_;
  std::vector<int> m_;
  Eigen::MatrixXd coeffs_;  // basis function x orbital
};

/// One-body potential: nuclear Coulomb attraction plus an optional
/// longitudinal harmonic well.
struct ExternalPotential {
  double charge = 0.0;
  double omega_z = 0.0;
};

struct JastrowParams {
  double beta = 1.0;  // B / B0; the range is set by sqrt(beta)
  double charge = 0.0;
  int n = 1;
};

struct JastrowValue {
  double u = 0.0;
  std::vector<double> grad;  // dU / dr_i, flat
  std::vector<double> lap;   // nabla_i^2 U per electron
};

/// U = -1/4 sum_{i<j} r_ij/(1 + sqrt(beta) r_ij) + Z sum_i r_i/(1 + sqrt(beta) r_i).
JastrowValue jastrow_u(const JastrowParams& params, const Configuration& R);

struct SlaterValue {
  bool ok = false;              // false: on (or numerically at) a node
  double log_abs = 0.0;
  double phase = 0.0;           // (-pi, pi]
  std::vector<cplx> grad;       // nabla_i log det, flat
  std::vector<cplx> lap_ratio;  // (nabla_i^2 det) / det per electron
};

/// Orbital psi_nu(r) = Phi_{m_nu}(rho, phi) f_nu(z); the determinant is
/// det[psi_nu(r_i)] with electrons on rows.
SlaterValue slater_eval(const LongitudinalSet& orbitals, double gamma, const Configuration& R);

/// Row i of the scaled orbital matrix and its derivatives. Rows carry a
/// factor exp(+gamma rho_i^2 / 4) and columns 1 / N_m relative to psi.
struct OrbitalRow {
  Eigen::VectorXcd value, dx, dy, dz, lap;
  double log_scale = 0.0;  // log of the factor dropped from this row
};
bool orbital_row(const LongitudinalSet& orbitals, double gamma, double x, double y, double z, OrbitalRow& row);

/// Orbital matrix with its inverse, kept current across single-electron
/// moves by rank-one (Sherman-Morrison) updates.
class SlaterMatrix {
 public:
  SlaterMatrix(std::shared_ptr<const LongitudinalSet> orbitals, double gamma);

  /// Full factorization; false if singular.
  bool build(const Configuration& R);
  /// det(A with row i replaced) / det(A), in scaled units.
  cplx ratio(std::size_t i, const OrbitalRow& row) const;
  /// Gradient of log det for electron i at the proposed row, before acceptance.
  Eigen::Vector3cd grad_at(std::size_t i, const OrbitalRow& row, cplx ratio) const;
  void accept(std::size_t i, const OrbitalRow& row, cplx ratio);

  double log_abs() const { return log_abs_; }
  double phase() const { return std::arg(phase_unit_); }
  const Eigen::MatrixXcd& inverse() const { return inv_; }
  const LongitudinalSet& orbitals() const { return *orbitals_; }
  double gamma() const { return gamma_; }

 private:
  std::shared_ptr<const LongitudinalSet> orbitals_;
  double gamma_;
  Eigen::MatrixXcd a_, inv_;
  std::vector<double> row_scale_;
  double log_abs_ = 0.0, log_norm_ = 0.0;
  cplx phase_unit_{1.0, 0.0};
};

struct Hamiltonian {
  double gamma = 1.0;  // field in Hartree atomic units
  ExternalPotential external;
  bool electron_repulsion = true;
  bool spin_zeeman = true;
};

struct GuidingEval {
  bool ok = false;
  double log_abs = 0.0;
  double phase = 0.0;
  std::vector<double> drift;       // nabla log|Psi|
  std::vector<double> phase_grad;  // nabla Phi
  cplx laplacian_log{0.0, 0.0};    // sum_i nabla_i^2 log Psi
  cplx e_local{0.0, 0.0};
};

/// Psi_G = exp(-U) det[psi_nu(r_i)] with the Hamiltonian it is tested against.
class GuidingFunction {
 public:
  GuidingFunction(std::shared_ptr<const LongitudinalSet> orbitals, JastrowParams jastrow, Hamiltonian h,
                  bool use_jastrow = true);
  /// Atom in the field described by a Hartree-Fock orbital set.
  static GuidingFunction from_orbitals(const OrbitalSet& set);

  std::size_t n_electrons() const { return orbitals_->size(); }
  const LongitudinalSet& orbitals() const { return *orbitals_; }
  std::shared_ptr<const LongitudinalSet> orbitals_ptr() const { return orbitals_; }
  const JastrowParams& jastrow() const { return jastrow_; }
  const Hamiltonian& hamiltonian() const { return ham_; }
  bool uses_jastrow() const { return use_jastrow_; }

  /// Full evaluation. Returns false (and ok = false) on a node or when an
  /// electron sits within 1e-12 bohr of the nucleus or another electron.
  bool evaluate(const Configuration& R, GuidingEval& out) const;

  /// True when R is admissible: no coincident particles within 1e-12 bohr.
  bool admissible(const Configuration& R) const;

  /// Local energy from precomputed Slater and Jastrow parts.
  cplx local_energy(const Configuration& R, const SlaterValue& s, const JastrowValue& j, cplx* lap_total,
                    std::vector<cplx>* grad_total) const;

 private:
  std::shared_ptr<const LongitudinalSet> orbitals_;
  JastrowParams jastrow_;
  Hamiltonian ham_;
  bool use_jastrow_;
};

/// Fixed-phase drift nabla log|Psi_G|.
inline const std::vector<double>& drift_velocity(const GuidingEval& e) { return e.drift; }

inline constexpr double kMinSeparation = 1e-12;

}  // namespace magdmc
