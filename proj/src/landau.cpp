#include "magdmc/landau.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/laguerre.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

namespace magdmc {

namespace {

using boost::math::quadrature::gauss_kronrod;

struct Piece {
  double value = 0.0, error = 0.0, l1 = 0.0;
};

template <class F>
Piece piece(F f, double a, double b, double rel_tol) {
  Piece p;
  if (!(b > a)) return p;
  // Mapped onto [0, 1]: the library's error estimate degrades on very short intervals.
  const double w = b - a;
  auto g = [&](double x) { return f(a + w * x); };
  p.value = w * gauss_kronrod<double, 31>::integrate(g, 0.0, 1.0, 18, rel_tol, &p.error, &p.l1);
  p.error *= w;
  p.l1 *= w;
  return p;
}

// Sums the pieces and checks the combined error estimate against the
// combined L1 norm, so a negligible sub-interval cannot fail on its own.
double checked_sum(const std::vector<Piece>& pieces, double rel_tol, const char* what, double at) {
  double v = 0.0, err = 0.0, l1 = 0.0;
  for (const auto& p : pieces) v += p.value, err += p.error, l1 += p.l1;
  if (!std::isfinite(v) || err > 1e3 * rel_tol * l1) {
    std::ostringstream msg;
    msg << what << ": adaptive quadrature did not converge at z=" << at << " (estimate " << v << ", error " << err
        << ", L1 " << l1 << ")";
    throw QuadratureError(msg.str());
  }
  return v;
}

template <class F>
double integrate(F f, double a, double b, double rel_tol, const char* what, double at) {
  return checked_sum({piece(f, a, b, rel_tol)}, rel_tol, what, at);
}

// |F_mm'(t)|^2 for the exchange kernel, and F_m F_m' for the direct one.
double exchange_form_factor(int m, int mp, double t) {
  const int lo = std::min(m, mp), hi = std::max(m, mp), d = hi - lo;
  if (t <= 0.0) return d == 0 ? 1.0 : 0.0;
  const double lag = boost::math::laguerre(static_cast<unsigned>(lo), static_cast<unsigned>(d), t);
  const double logpre = std::lgamma(lo + 1.0) - std::lgamma(hi + 1.0) + d * std::log(t) - 2.0 * t;
  return std::exp(logpre) * lag * lag;
}

double direct_form_factor(int m, int mp, double t) {
  return std::exp(-2.0 * t) * boost::math::laguerre(static_cast<unsigned>(m), t) *
         boost::math::laguerre(static_cast<unsigned>(mp), t);
}

template <class FF>
KernelValue k_space_kernel(double gamma, int m, int mp, double zeta, double rel_tol, FF form, const char* what) {
  const double az = std::abs(zeta);
  const double c = std::sqrt(2.0 * gamma);
  // k = c s, t = s^2; the integrand carries exp(-2 s^2).
  const double smax = std::sqrt(2.0 * (m + mp) + 60.0);
  auto fv = [&](double s) { return form(m, mp, s * s) * std::exp(-c * s * az); };
  auto fd = [&](double s) { return s * form(m, mp, s * s) * std::exp(-c * s * az); };
  KernelValue out;
  out.value = c * integrate(fv, 0.0, smax, rel_tol, what, zeta);
  out.derivative = -c * c * integrate(fd, 0.0, smax, rel_tol, what, zeta);
  if (zeta < 0.0) out.derivative = -out.derivative;
  return out;
}

}  // namespace

double log_landau_norm(int m, double gamma) {
  return 0.5 * ((m + 1) * std::log(gamma / 2.0) - std::log(std::numbers::pi) - std::lgamma(m + 1.0));
}

double landau_norm(int m, double gamma) { return std::exp(log_landau_norm(m, gamma)); }

std::complex<double> eval_transverse(const LandauOrbital& o, double rho, double phi) {
  double mag;
  if (o.m == 0) {
    mag = landau_norm(0, o.gamma) * std::exp(-o.gamma * rho * rho / 4.0);
  } else if (rho == 0.0) {
    return {0.0, 0.0};
  } else {
    mag = std::exp(log_landau_norm(o.m, o.gamma) + o.m * std::log(rho) - o.gamma * rho * rho / 4.0);
  }
  return std::polar(mag, -o.m * phi);
}

KernelValue nuclear_kernel(double gamma, int m, double charge, double z, double rel_tol) {
  const double az = std::abs(z);
  const double lg = std::lgamma(m + 1.0);
  const double a = 2.0 / gamma;
  // weight(s) ds = u^m e^{-u} / m! du with u = s^2
  auto weight = [&](double s) { return 2.0 * std::exp((2 * m + 1) * std::log(s) - s * s - lg); };
  auto fv = [&](double s) { return weight(s) / std::sqrt(a * s * s + az * az); };
  auto fd = [&](double s) {
    const double r2 = a * s * s + az * az;
    return weight(s) / (r2 * std::sqrt(r2));
  };
  const double smax = std::sqrt(m + 0.5) + 9.0;
  // The derivative integrand peaks near s ~ |z| / sqrt(a); split there.
  const double split = std::clamp(az / std::sqrt(a), 1e-3, smax / 2.0);
  KernelValue out;
  out.value = -charge * checked_sum({piece(fv, 0.0, split, rel_tol), piece(fv, split, smax, rel_tol)}, rel_tol,
                                    "nuclear_kernel", z);
  if (az == 0.0) {
    // One-sided slope at the origin: Z gamma for m = 0, zero otherwise.
    out.derivative = m == 0 ? charge * gamma : 0.0;
  } else {
    // Below the clamp the peak and its power-law shoulder get geometric breakpoints.
    std::vector<Piece> parts;
    double lo = 0.0;
    for (double b = std::min(az / std::sqrt(a), split); b < split; b *= 4.0) {
      parts.push_back(piece(fd, lo, b, rel_tol));
      lo = b;
    }
    parts.push_back(piece(fd, lo, split, rel_tol));
    parts.push_back(piece(fd, split, smax, rel_tol));
    out.derivative = charge * az *
                     checked_sum(parts,
                                 rel_tol, "nuclear_kernel'", z);
    if (z < 0.0) out.derivative = -out.derivative;
  }
  return out;
}

KernelValue direct_kernel(double gamma, int m, int mp, double zeta, double rel_tol) {
  return k_space_kernel(gamma, m, mp, zeta, rel_tol, direct_form_factor, "direct_kernel");
}

KernelValue exchange_kernel(double gamma, int m, int mp, double zeta, double rel_tol) {
  return k_space_kernel(gamma, m, mp, zeta, rel_tol, exchange_form_factor, "exchange_kernel");
}

}  // namespace magdmc
