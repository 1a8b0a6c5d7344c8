#include "magdmc/guiding.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

#include "magdmc/landau.hpp"

namespace magdmc {

double Configuration::distance(std::size_t i, std::size_t j) const {
  const double dx = x(i) - x(j), dy = y(i) - y(j), dz = z(i) - z(j);
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void Configuration::set(std::size_t i, double x, double y, double z) {
  c_[3 * i] = x;
  c_[3 * i + 1] = y;
  c_[3 * i + 2] = z;
}

void Configuration::set_cylindrical(std::size_t i, double rho, double phi, double z) {
  set(i, rho * std::cos(phi), rho * std::sin(phi), z);
}

// ------------------------------------------------------------ orbitals

SplineOrbitals::SplineOrbitals(const OrbitalSet& set) : basis_(set.basis) {
  coeffs_.resize(static_cast<Eigen::Index>(basis_.size()), static_cast<Eigen::Index>(set.size()));
  for (std::size_t nu = 0; nu < set.size(); ++nu) {
    m_.push_back(set.orbitals[nu].m);
    coeffs_.col(static_cast<Eigen::Index>(nu)) = set.orbitals[nu].coeffs;
  }
}

void SplineOrbitals::eval_all(double z, LongitudinalValue* out) const {
  const std::size_t n = m_.size();
  for (std::size_t nu = 0; nu < n; ++nu) out[nu] = {};
  if (z <= basis_.lower() || z >= basis_.upper()) return;
  const SplineEval e = basis_.evaluate(z);
  const long nb = static_cast<long>(basis_.size());
  for (int k = 0; k < e.count; ++k) {
    const long a = e.first + k - 1;
    if (a < 0 || a >= nb) continue;
    for (std::size_t nu = 0; nu < n; ++nu) {
      const double c = coeffs_(a, static_cast<Eigen::Index>(nu));
      out[nu].f += c * e.v[k];
      out[nu].df += c * e.d1[k];
      out[nu].d2f += c * e.d2[k];
    }
  }
}

// ------------------------------------------------------------- Jastrow

JastrowValue jastrow_u(const JastrowParams& p, const Configuration& R) {
  const std::size_t n = R.size();
  const double b = std::sqrt(p.beta);
  JastrowValue out;
  out.grad.assign(3 * n, 0.0);
  out.lap.assign(n, 0.0);
  // u(r) = c r / (1 + b r): u' = c / (1 + b r)^2, u'' = -2 c b / (1 + b r)^3.
  auto term = [b](double c, double r, double& u, double& du, double& lap) {
    const double q = 1.0 / (1.0 + b * r);
    u = c * r * q;
    du = c * q * q;
    lap = -2.0 * c * b * q * q * q + (r > 0.0 ? 2.0 * du / r : 0.0);
  };
  const auto& c = R.coords();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = R.r(i);
    double u, du, lap;
    term(p.charge, r, u, du, lap);
    out.u += u;
    out.lap[i] += lap;
    if (r > 0.0)
      for (int k = 0; k < 3; ++k) out.grad[3 * i + k] += du * c[3 * i + k] / r;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = R.distance(i, j);
      double u, du, lap;
      term(-0.25, r, u, du, lap);
      out.u += u;
      out.lap[i] += lap;
      out.lap[j] += lap;
      if (r > 0.0)
        for (int k = 0; k < 3; ++k) {
          const double g = du * (c[3 * i + k] - c[3 * j + k]) / r;
          out.grad[3 * i + k] += g;
          out.grad[3 * j + k] -= g;
        }
    }
  return out;
}

// ------------------------------------------------------------- Slater

bool orbital_row(const LongitudinalSet& orbs, double gamma, double x, double y, double z, OrbitalRow& row) {
  const std::size_t n = orbs.size();
  row.value.resize(n);
  row.dx.resize(n);
  row.dy.resize(n);
  row.dz.resize(n);
  row.lap.resize(n);
  LongitudinalValue lv[64];
  std::vector<LongitudinalValue> big;
  LongitudinalValue* f = lv;
  if (n > 64) {
    big.resize(n);
    f = big.data();
  }
  orbs.eval_all(z, f);
  const cplx w(x, -y);
  const double rho2 = x * x + y * y;
  row.log_scale = -0.25 * gamma * rho2;
  bool any = false;
  for (std::size_t nu = 0; nu < n; ++nu) {
    const int m = orbs.m(nu);
    const cplx wm = m == 0 ? cplx(1.0) : std::pow(w, m);
    const cplx wm1 = m == 0 ? cplx(0.0) : (m == 1 ? cplx(1.0) : std::pow(w, m - 1));
    const double mm = m;
    const cplx hx = mm * wm1 - 0.5 * gamma * x * wm;
    const cplx hy = cplx(0.0, -mm) * wm1 - 0.5 * gamma * y * wm;
    const double lperp = 0.25 * gamma * gamma * rho2 - gamma * (m + 1);
    row.value[nu] = wm * f[nu].f;
    row.dx[nu] = hx * f[nu].f;
    row.dy[nu] = hy * f[nu].f;
    row.dz[nu] = wm * f[nu].df;
    row.lap[nu] = wm * (lperp * f[nu].f + f[nu].d2f);
    any = any || f[nu].f != 0.0;
  }
  return any;
}

namespace {

double column_log_norm(const LongitudinalSet& orbs, double gamma) {
  double s = 0.0;
  for (std::size_t nu = 0; nu < orbs.size(); ++nu) s += log_landau_norm(orbs.m(nu), gamma);
  return s;
}

struct SlaterWorkspace {
  Eigen::MatrixXcd a, dx, dy, dz, lap, inv;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu;
  OrbitalRow row;
  void resize(Eigen::Index n) {
    if (a.rows() == n) return;
    a.resize(n, n);
    dx.resize(n, n);
    dy.resize(n, n);
    dz.resize(n, n);
    lap.resize(n, n);
    inv.resize(n, n);
  }
};

// log|det| and unit phase of a factorized matrix; false when singular.
bool lu_log_det(const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu, double scale, double& log_abs, cplx& unit) {
  const auto& m = lu.matrixLU();
  log_abs = 0.0;
  unit = cplx(lu.permutationP().determinant(), 0.0);
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    const double a = std::abs(m(k, k));
    if (!(a > 1e-14 * scale) || !std::isfinite(a)) return false;
    log_abs += std::log(a);
    unit *= m(k, k) / a;
  }
  return true;
}

}  // namespace

SlaterValue slater_eval(const LongitudinalSet& orbs, double gamma, const Configuration& R) {
  thread_local SlaterWorkspace ws;
  const Eigen::Index n = static_cast<Eigen::Index>(orbs.size());
  if (static_cast<Eigen::Index>(R.size()) != n) throw std::invalid_argument("slater_eval: electron count mismatch");
  ws.resize(n);
  SlaterValue out;
  double row_log = 0.0, scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t e = static_cast<std::size_t>(i);
    if (!orbital_row(orbs, gamma, R.x(e), R.y(e), R.z(e), ws.row)) return out;
    ws.a.row(i) = ws.row.value.transpose();
    ws.dx.row(i) = ws.row.dx.transpose();
    ws.dy.row(i) = ws.row.dy.transpose();
    ws.dz.row(i) = ws.row.dz.transpose();
    ws.lap.row(i) = ws.row.lap.transpose();
    row_log += ws.row.log_scale;
    scale = std::max(scale, ws.row.value.cwiseAbs().maxCoeff());
  }
  ws.lu.compute(ws.a);
  double log_abs = 0.0;
  cplx unit;
  if (!lu_log_det(ws.lu, scale, log_abs, unit)) return out;
  ws.inv = ws.lu.inverse();
  out.ok = true;
  out.log_abs = log_abs + row_log + column_log_norm(orbs, gamma);
  out.phase = std::arg(unit);
  out.grad.resize(3 * n);
  out.lap_ratio.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cplx gx = 0.0, gy = 0.0, gz = 0.0, l = 0.0;
    for (Eigen::Index nu = 0; nu < n; ++nu) {
      const cplx c = ws.inv(nu, i);
      gx += ws.dx(i, nu) * c;
      gy += ws.dy(i, nu) * c;
      gz += ws.dz(i, nu) * c;
      l += ws.lap(i, nu) * c;
    }
    out.grad[3 * i] = gx;
    out.grad[3 * i + 1] = gy;
    out.grad[3 * i + 2] = gz;
    out.lap_ratio[i] = l;
  }
  return out;
}

SlaterMatrix::SlaterMatrix(std::shared_ptr<const LongitudinalSet> orbitals, double gamma)
    : orbitals_(std::move(orbitals)), gamma_(gamma) {
  log_norm_ = column_log_norm(*orbitals_, gamma_);
}

bool SlaterMatrix::build(const Configuration& R) {
  const Eigen::Index n = static_cast<Eigen::Index>(orbitals_->size());
  a_.resize(n, n);
  row_scale_.assign(n, 0.0);
  OrbitalRow row;
  double scale = 0.0, row_log = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t e = static_cast<std::size_t>(i);
    if (!orbital_row(*orbitals_, gamma_, R.x(e), R.y(e), R.z(e), row)) return false;
    a_.row(i) = row.value.transpose();
    row_scale_[e] = row.log_scale;
    row_log += row.log_scale;
    scale = std::max(scale, row.value.cwiseAbs().maxCoeff());
  }
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a_);
  double la = 0.0;
  if (!lu_log_det(lu, scale, la, phase_unit_)) return false;
  inv_ = lu.inverse();
  log_abs_ = la + row_log + log_norm_;
  return true;
}

cplx SlaterMatrix::ratio(std::size_t i, const OrbitalRow& row) const {
  return row.value.transpose() * inv_.col(static_cast<Eigen::Index>(i));
}

Eigen::Vector3cd SlaterMatrix::grad_at(std::size_t i, const OrbitalRow& row, cplx q) const {
  const auto col = inv_.col(static_cast<Eigen::Index>(i));
  Eigen::Vector3cd g;
  g << row.dx.transpose() * col, row.dy.transpose() * col, row.dz.transpose() * col;
  return g / q;
}

void SlaterMatrix::accept(std::size_t i, const OrbitalRow& row, cplx q) {
  const Eigen::Index k = static_cast<Eigen::Index>(i);
  Eigen::RowVectorXcd r = row.value.transpose() * inv_;
  r(k) -= 1.0;
  const Eigen::VectorXcd col = inv_.col(k);
  inv_.noalias() -= (col / q) * r;
  a_.row(k) = row.value.transpose();
  log_abs_ += std::log(std::abs(q)) + row.log_scale - row_scale_[i];
  row_scale_[i] = row.log_scale;
  phase_unit_ *= q / std::abs(q);
}

// --------------------------------------------------------- guiding

GuidingFunction::GuidingFunction(std::shared_ptr<const LongitudinalSet> orbitals, JastrowParams jastrow,
                                 Hamiltonian h, bool use_jastrow)
    : orbitals_(std::move(orbitals)), jastrow_(jastrow), ham_(h), use_jastrow_(use_jastrow) {
  if (!orbitals_ || orbitals_->size() == 0) throw std::invalid_argument("guiding function needs orbitals");
  jastrow_.n = static_cast<int>(orbitals_->size());
}

GuidingFunction GuidingFunction::from_orbitals(const OrbitalSet& set) {
  Hamiltonian h;
  h.gamma = kGammaPerBeta * set.beta;
  h.external.charge = set.charge;
  h.spin_zeeman = set.spin_zeeman_included;
  return GuidingFunction(std::make_shared<SplineOrbitals>(set),
                         JastrowParams{set.beta, set.charge, static_cast<int>(set.size())}, h);
}

bool GuidingFunction::admissible(const Configuration& R) const {
  const std::size_t n = R.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (ham_.external.charge != 0.0 && R.r(i) < kMinSeparation) return false;
    for (std::size_t j = i + 1; j < n; ++j)
      if (R.distance(i, j) < kMinSeparation) return false;
  }
  return true;
}

cplx GuidingFunction::local_energy(const Configuration& R, const SlaterValue& s, const JastrowValue& j,
                                   cplx* lap_total, std::vector<cplx>* grad_total) const {
  const std::size_t n = R.size();
  const double g = ham_.gamma;
  const cplx I(0.0, 1.0);
  cplx e = 0.0, lap_sum = 0.0;
  if (grad_total) grad_total->resize(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    cplx G[3];
    cplx gd2 = 0.0, gg = 0.0;
    for (int k = 0; k < 3; ++k) {
      const cplx gd = s.grad[3 * i + k];
      gd2 += gd * gd;
      G[k] = use_jastrow_ ? gd - j.grad[3 * i + k] : gd;
      gg += G[k] * G[k];
      if (grad_total) (*grad_total)[3 * i + k] = G[k];
    }
    const cplx lap = s.lap_ratio[i] - gd2 - (use_jastrow_ ? j.lap[i] : 0.0);
    lap_sum += lap;
    const double x = R.x(i), y = R.y(i), z = R.z(i);
    const double rho2 = x * x + y * y;
    e += -0.5 * (lap + gg);
    e += -I * (0.5 * g) * (x * G[1] - y * G[0]);
    e += 0.125 * g * g * rho2;
    if (ham_.external.charge != 0.0) e += -ham_.external.charge / R.r(i);
    if (ham_.external.omega_z != 0.0) e += 0.5 * ham_.external.omega_z * ham_.external.omega_z * z * z;
  }
  if (ham_.electron_repulsion)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) e += 1.0 / R.distance(a, b);
  if (ham_.spin_zeeman) e -= 0.5 * g * static_cast<double>(n);
  if (lap_total) *lap_total = lap_sum;
  return e;
}

bool GuidingFunction::evaluate(const Configuration& R, GuidingEval& out) const {
  out.ok = false;
  if (R.size() != n_electrons()) throw std::invalid_argument("configuration has the wrong electron count");
  if (!admissible(R)) return false;
  const SlaterValue s = slater_eval(*orbitals_, ham_.gamma, R);
  if (!s.ok) return false;
  JastrowValue j;
  if (use_jastrow_) j = jastrow_u(jastrow_, R);
  std::vector<cplx> grad;
  cplx lap;
  out.e_local = local_energy(R, s, j, &lap, &grad);
  if (!std::isfinite(out.e_local.real()) || !std::isfinite(out.e_local.imag())) return false;
  out.laplacian_log = lap;
  out.log_abs = s.log_abs - (use_jastrow_ ? j.u : 0.0);
  out.phase = s.phase;
  out.drift.resize(grad.size());
  out.phase_grad.resize(grad.size());
  for (std::size_t k = 0; k < grad.size(); ++k) {
    out.drift[k] = grad[k].real();
    out.phase_grad[k] = grad[k].imag();
  }
  out.ok = true;
  return true;
}

}  // namespace magdmc
