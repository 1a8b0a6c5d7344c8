#include "magdmc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace magdmc::oracle {

using std::numbers::pi;

double erfcx(double x) {
  if (x < 0.0) throw OracleError("erfcx: negative argument");
  if (x < 20.0) return std::exp(x * x) * std::erfc(x);
  // Asymptotic series; at x >= 20 the seventh term is below 1e-14.
  const double t = 1.0 / (2.0 * x * x);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 7; ++k) {
    term *= -(2.0 * k - 1.0) * t;
    sum += term;
  }
  return sum / (x * std::sqrt(pi));
}

double nuclear_kernel_m0(double gamma, double charge, double z) {
  return -charge * std::sqrt(pi * gamma / 2.0) * erfcx(std::sqrt(gamma / 2.0) * std::abs(z));
}

double direct_kernel_00(double gamma, double zeta, int intervals) {
  if (intervals % 2) ++intervals;
  const double R = std::sqrt(4.0 * 45.0 / gamma);
  const double h = R / intervals;
  auto f = [&](double r) { return r * std::exp(-gamma * r * r / 4.0) / std::sqrt(r * r + zeta * zeta); };
  auto f0 = [&](double r) { return r == 0.0 && zeta == 0.0 ? 1.0 : f(r); };
  double s = f0(0.0) + f(R);
  for (int k = 1; k < intervals; ++k) s += (k % 2 ? 4.0 : 2.0) * f(k * h);
  return 0.5 * gamma * s * h / 3.0;
}

double landau_density(int m, double gamma, double rho) {
  if (rho == 0.0) return m == 0 ? gamma / (2.0 * pi) : 0.0;
  const double log_n = (m + 1) * std::log(gamma / 2.0) - std::log(pi) - std::lgamma(m + 1.0);
  return std::exp(log_n + 2.0 * m * std::log(rho) - gamma * rho * rho / 2.0);
}

namespace {

struct Point2 {
  double x, y;
};

Point2 draw_landau(int m, double gamma, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(m + 1.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
  const double rho = std::sqrt(2.0 * g(rng) / gamma);
  const double phi = u(rng);
  return {rho * std::cos(phi), rho * std::sin(phi)};
}

McEstimate finish(double s, double s2, long n) {
  const double mean = s / n;
  const double var = std::max(0.0, s2 / n - mean * mean);
  return {mean, std::sqrt(var / (n - 1.0))};
}

}  // namespace

McEstimate mc_integral_kernel(double gamma, int m, int mp, double zeta, long n, std::uint64_t seed) {
  if (n < 10000) throw OracleError("mc_integral_kernel needs at least 1e4 samples");
  std::mt19937_64 rng(seed);
  double s = 0.0, s2 = 0.0;
  for (long k = 0; k < n; ++k) {
    const Point2 a = draw_landau(m, gamma, rng), b = draw_landau(mp, gamma, rng);
    const double dx = a.x - b.x, dy = a.y - b.y;
    const double v = 1.0 / std::sqrt(dx * dx + dy * dy + zeta * zeta);
    s += v;
    s2 += v * v;
  }
  return finish(s, s2, n);
}

McEstimate mc_exchange_kernel(double gamma, int m, int mp, double zeta, long n, std::uint64_t seed) {
  if (n < 10000) throw OracleError("mc_exchange_kernel needs at least 1e4 samples");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution pick(0.5);
  auto draw = [&] { return draw_landau(pick(rng) ? m : mp, gamma, rng); };
  auto mixed = [&](const Point2& p, double& weight, double& phi) {
    const double rho = std::hypot(p.x, p.y);
    const double da = landau_density(m, gamma, rho), db = landau_density(mp, gamma, rho);
    weight = std::sqrt(da * db) / (0.5 * (da + db));
    phi = std::atan2(p.y, p.x);
  };
  double s = 0.0, s2 = 0.0;
  for (long k = 0; k < n; ++k) {
    const Point2 a = draw(), b = draw();
    double wa, pa, wb, pb;
    mixed(a, wa, pa);
    mixed(b, wb, pb);
    const double dx = a.x - b.x, dy = a.y - b.y;
    const double v = wa * wb * std::cos((m - mp) * (pa - pb)) / std::sqrt(dx * dx + dy * dy + zeta * zeta);
    s += v;
    s2 += v * v;
  }
  return finish(s, s2, n);
}

// ------------------------------------------------------------ grid solver

namespace {

struct Tridiagonal {
  std::vector<double> diag;
  double off = 0.0;
  double h = 0.0;
  std::vector<double> z;
};

Tridiagonal assemble(const GridEigenProblem& p, int points) {
  Tridiagonal t;
  t.h = (p.upper - p.lower) / (points - 1);
  const double k = 1.0 / (t.h * t.h);
  for (int i = 1; i + 1 < points; ++i) {
    const double z = p.lower + i * t.h;
    t.z.push_back(z);
    t.diag.push_back(k + p.potential(z));
  }
  t.off = -0.5 * k;
  return t;
}

// Number of eigenvalues below x (Sturm sequence of the LDL^T pivots).
long sturm_count(const Tridiagonal& t, double x) {
  long c = 0;
  double q = 1.0;
  const double b2 = t.off * t.off;
  for (std::size_t i = 0; i < t.diag.size(); ++i) {
    q = t.diag[i] - x - (i ? b2 / q : 0.0);
    if (q == 0.0) q = -1e-300;
    if (q < 0.0) ++c;
  }
  return c;
}

double bisect(const Tridiagonal& t, long k) {
  auto [lo, hi] = std::minmax_element(t.diag.begin(), t.diag.end());
  double a = *lo - 2.0 * std::abs(t.off), b = *hi + 2.0 * std::abs(t.off);
  for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
    const double mid = 0.5 * (a + b);
    if (sturm_count(t, mid) > k) b = mid;
    else a = mid;
  }
  return 0.5 * (a + b);
}

std::vector<double> inverse_iteration(const Tridiagonal& t, double lambda) {
  const std::size_t n = t.diag.size();
  const double shift = lambda + 1e-10 * std::max(1.0, std::abs(lambda));
  std::vector<double> x(n, 1.0), c(n), d(n);
  for (int pass = 0; pass < 3; ++pass) {
    // Thomas algorithm on (T - shift) y = x.
    double denom = t.diag[0] - shift;
    c[0] = t.off / denom;
    d[0] = x[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
      denom = t.diag[i] - shift - t.off * c[i - 1];
      if (denom == 0.0) denom = 1e-300;
      c[i] = t.off / denom;
      d[i] = (x[i] - t.off * d[i - 1]) / denom;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    double norm = 0.0;
    for (double v : x) norm += v * v;
    norm = std::sqrt(norm * t.h);
    for (double& v : x) v /= norm;
  }
  // Fix the sign: positive at the largest-magnitude point of the right half.
  std::size_t best = n / 2;
  for (std::size_t i = n / 2; i < n; ++i)
    if (std::abs(x[i]) > std::abs(x[best])) best = i;
  if (x[best] < 0.0)
    for (double& v : x) v = -v;
  return x;
}

}  // namespace

GridEigenResult grid_eigensolve(const GridEigenProblem& p) {
  if (p.points < 10001) throw OracleError("grid_eigensolve: at least 1e4 grid points required");
  if (!(p.upper > p.lower) || p.n_eigen < 1) throw OracleError("grid_eigensolve: bad problem");
  const Tridiagonal coarse = assemble(p, p.points);
  const Tridiagonal fine = assemble(p, 2 * p.points - 1);
  GridEigenResult r;
  for (int k = 0; k < p.n_eigen; ++k) {
    r.coarse.push_back(bisect(coarse, k));
    r.fine.push_back(bisect(fine, k));
  }
  // Resolution: the largest local wavenumber must be well sampled.
  double vmin = 0.0;
  for (std::size_t i = 0; i < fine.z.size(); ++i) vmin = std::min(vmin, p.potential(fine.z[i]));
  vmin = std::min(vmin, *std::min_element(fine.diag.begin(), fine.diag.end()) - 1.0 / (fine.h * fine.h));
  const double kmax = std::sqrt(2.0 * std::max(0.0, r.fine.back() - vmin));
  if (kmax * coarse.h > 0.3)
    throw OracleError("grid_eigensolve: potential not resolved (k h = " + std::to_string(kmax * coarse.h) + ")");
  for (int k = 0; k < p.n_eigen; ++k) {
    const double e = (4.0 * r.fine[k] - r.coarse[k]) / 3.0;
    r.eigenvalues.push_back(e);
    r.error.push_back(std::abs(r.fine[k] - e));
    r.vectors.push_back(inverse_iteration(fine, r.fine[k]));
  }
  r.z = fine.z;
  return r;
}

// ------------------------------------------------------------ separable test

GaussianOrbitals::GaussianOrbitals(std::vector<int> m, std::vector<double> exponents)
    : m_(std::move(m)), a_(std::move(exponents)) {
  if (m_.size() != a_.size()) throw OracleError("GaussianOrbitals: size mismatch");
  for (double a : a_) {
    if (!(a > 0.0)) throw OracleError("GaussianOrbitals: exponent must be positive");
    extent_ = std::max(extent_, 12.0 / std::sqrt(a));
  }
}

void GaussianOrbitals::eval_all(double z, LongitudinalValue* out) const {
  for (std::size_t nu = 0; nu < a_.size(); ++nu) {
    const double a = a_[nu];
    const double f = std::pow(a / pi, 0.25) * std::exp(-0.5 * a * z * z);
    out[nu] = {f, -a * z * f, (a * a * z * z - a) * f};
  }
}

SeparableTest separable_test_hamiltonian(double gamma, double omega, double jitter, bool spin_zeeman) {
  if (!(gamma > 0.0) || !(omega > 0.0)) throw OracleError("separable test needs positive frequencies");
  Hamiltonian h;
  h.gamma = gamma;
  h.external = {0.0, omega};
  h.electron_repulsion = false;
  h.spin_zeeman = spin_zeeman;
  auto orbs = std::make_shared<GaussianOrbitals>(std::vector<int>{0}, std::vector<double>{omega * (1.0 + jitter)});
  const double e = 0.5 * gamma + 0.5 * omega - (spin_zeeman ? 0.5 * gamma : 0.0);
  return {e, GuidingFunction(orbs, JastrowParams{1.0, 0.0, 1}, h, false)};
}

}  // namespace magdmc::oracle
