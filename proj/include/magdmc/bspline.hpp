#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace magdmc {

inline constexpr int kMaxSplineOrder = 10;

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> x, w;
};
GaussRule gauss_legendre(int n);

/// Nonzero B-splines (full numbering) and their first two derivatives at a point.
struct SplineEval {
  int first = 0;  // full index of the first nonzero function
  int count = 0;  // order
  std::array<double, kMaxSplineOrder> v{}, d1{}, d2{};
};

/// Clamped B-spline basis on finite elements. The first and last functions
/// (the only ones nonzero at the boundary) are dropped, so every function in
/// the reduced basis vanishes at both ends of the domain.
class SplineBasis {
 public:
  SplineBasis() = default;
  /// `breakpoints` strictly increasing; `multiplicity[i]` applies to interior
  /// breakpoint i+1 (empty: all simple).
  SplineBasis(std::vector<double> breakpoints, int degree, std::vector<int> multiplicity = {});

  /// Symmetric mesh on [-L, L]; element widths grow geometrically away from z = 0
  /// starting at `first_element`. The knot at z = 0 gets `origin_multiplicity`.
  static SplineBasis graded_symmetric(double half_width, int elements_per_side, double first_element, int degree,
                                      int origin_multiplicity);

  int degree() const { return degree_; }
  int order() const { return degree_ + 1; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<int>& multiplicity() const { return multiplicity_; }
  std::size_t num_elements() const { return breakpoints_.size() - 1; }
  double lower() const { return breakpoints_.front(); }
  double upper() const { return breakpoints_.back(); }

  std::size_t full_size() const { return knots_.size() - order(); }
  /// Number of functions in the reduced (Dirichlet) basis.
  std::size_t size() const { return full_size() - 2; }

  /// Index of the element containing x (clamped into range).
  std::size_t element_of(double x) const;

  SplineEval evaluate(double x) const;

  /// Value and derivatives of sum_a c_a B_a(x) in the reduced basis; zero outside the domain.
  template <class Vec>
  std::array<double, 3> combine(const Vec& coeffs, double x) const {
    if (x <= lower() || x >= upper()) return {0.0, 0.0, 0.0};
    const SplineEval e = evaluate(x);
    std::array<double, 3> out{0.0, 0.0, 0.0};
    for (int k = 0; k < e.count; ++k) {
      const long a = e.first + k - 1;
      if (a < 0 || a >= static_cast<long>(size())) continue;
      out[0] += coeffs[a] * e.v[k];
      out[1] += coeffs[a] * e.d1[k];
      out[2] += coeffs[a] * e.d2[k];
    }
    return out;
  }

 private:
  std::vector<double> breakpoints_;
  std::vector<int> multiplicity_;
  std::vector<double> knots_;
  int degree_ = 3;
};

}  // namespace magdmc
