#include "magdmc/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace magdmc {

GaussRule gauss_legendre(int n) {
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0, p1 = x;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.x[i] = -x;
    r.x[n - 1 - i] = x;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

SplineBasis::SplineBasis(std::vector<double> breakpoints, int degree, std::vector<int> multiplicity)
    : breakpoints_(std::move(breakpoints)), multiplicity_(std::move(multiplicity)), degree_(degree) {
  if (degree_ < 1 || degree_ + 1 > kMaxSplineOrder) throw std::invalid_argument("unsupported B-spline degree");
  if (breakpoints_.size() < 2) throw std::invalid_argument("need at least one element");
  for (std::size_t i = 1; i < breakpoints_.size(); ++i)
    if (!(breakpoints_[i] > breakpoints_[i - 1])) throw std::invalid_argument("breakpoints must increase");
  const std::size_t interior = breakpoints_.size() - 2;
  if (multiplicity_.empty()) multiplicity_.assign(interior, 1);
  if (multiplicity_.size() != interior) throw std::invalid_argument("multiplicity size mismatch");
  for (int mu : multiplicity_)
    if (mu < 1 || mu > degree_) throw std::invalid_argument("interior knot multiplicity must be in [1, degree]");

  knots_.assign(degree_ + 1, breakpoints_.front());
  for (std::size_t i = 0; i < interior; ++i) knots_.insert(knots_.end(), multiplicity_[i], breakpoints_[i + 1]);
  knots_.insert(knots_.end(), degree_ + 1, breakpoints_.back());
  if (full_size() < 3) throw std::invalid_argument("basis too small");
}

SplineBasis SplineBasis::graded_symmetric(double half_width, int n, double h0, int degree, int origin_multiplicity) {
  if (!(half_width > 0.0) || n < 1 || !(h0 > 0.0)) throw std::invalid_argument("bad mesh parameters");
  // widths h0 r^j, j = 0..n-1, summing to half_width
  double ratio = 1.0;
  if (h0 * n < half_width) {
    auto total = [&](double r) { return h0 * (std::pow(r, n) - 1.0) / (r - 1.0); };
    double lo = 1.0 + 1e-12, hi = 2.0;
    while (total(hi) < half_width) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (total(mid) < half_width ? lo : hi) = mid;
    }
    ratio = 0.5 * (lo + hi);
  }
  std::vector<double> pos(n + 1, 0.0);
  const double width0 = ratio == 1.0 ? half_width / n : h0;
  double h = width0;
  for (int j = 1; j <= n; ++j) {
    pos[j] = pos[j - 1] + h;
    h *= ratio;
  }
  for (int j = 1; j <= n; ++j) pos[j] *= half_width / pos[n];  // exact end point
  std::vector<double> bp;
  bp.reserve(2 * n + 1);
  for (int j = n; j >= 1; --j) bp.push_back(-pos[j]);
  bp.push_back(0.0);
  for (int j = 1; j <= n; ++j) bp.push_back(pos[j]);
  std::vector<int> mult(bp.size() - 2, 1);
  mult[n - 1] = origin_multiplicity;
  return SplineBasis(std::move(bp), degree, std::move(mult));
}

std::size_t SplineBasis::element_of(double x) const {
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
  std::size_t e = it == breakpoints_.begin() ? 0 : static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  return std::min(e, num_elements() - 1);
}

SplineEval SplineBasis::evaluate(double x) const {
  const int p = degree_;
  const int n_full = static_cast<int>(full_size());
  // knot span: knots[span] <= x < knots[span+1], p <= span <= n_full-1
  int span;
  if (x >= knots_[n_full]) {
    span = n_full - 1;
  } else if (x <= knots_[p]) {
    span = p;
  } else {
    span = static_cast<int>(std::upper_bound(knots_.begin() + p, knots_.begin() + n_full + 1, x) - knots_.begin()) - 1;
  }

  // Derivatives of the nonzero basis functions (de Boor / Piegl-Tiller A2.3).
  constexpr int M = kMaxSplineOrder;
  double ndu[M][M], a[2][M], left[M], right[M];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - knots_[span + 1 - j];
    right[j] = knots_[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  SplineEval out;
  out.first = span - p;
  out.count = p + 1;
  double ders[3][M] = {};
  for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];
  const int nd = std::min(2, p);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= nd; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      ders[k][r] = d;
      std::swap(s1, s2);
    }
  }
  int fac = p;
  for (int k = 1; k <= nd; ++k) {
    for (int j = 0; j <= p; ++j) ders[k][j] *= fac;
    fac *= (p - k);
  }
  for (int j = 0; j <= p; ++j) {
    out.v[j] = ders[0][j];
    out.d1[j] = ders[1][j];
    out.d2[j] = ders[2][j];
  }
  return out;
}

}  // namespace magdmc
