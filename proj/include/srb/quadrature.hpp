#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <utility>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "srb/errors.hpp"

namespace srb {

// Adaptive Gauss-Kronrod with an explicit convergence certificate: the returned
// value is only accepted if the error estimate lands under
// max(abs_tol, rel_tol*|I|), otherwise QuadratureError carries the achieved
// estimate. Works for double and float128 alike; Points=61 is exposed so tests
// can check invariance under node doubling.
template <class Real = double, unsigned Points = 31, class F>
Real integrate(F&& f, Real a, Real b, Real abs_tol = Real(1e-10),
               Real rel_tol = Real(1e-12), int max_depth = 14,
               Real* achieved = nullptr) {
  using GK = boost::math::quadrature::gauss_kronrod<Real, Points>;
  Real err = 0, l1 = 0;
  // Drive refinement by a relative target below rel_tol; the certificate below
  // is ours, not boost's.
  const Real eps = std::numeric_limits<Real>::epsilon();
  Real target = rel_tol / 4;
  if (target < eps) target = eps;
  Real value = GK::integrate(std::forward<F>(f), a, b,
                             static_cast<unsigned>(max_depth), target, &err, &l1);
  if (achieved != nullptr) *achieved = err;
  using std::fabs;
  const bool ok = err <= abs_tol || err <= rel_tol * fabs(value) ||
                  err <= Real(16) * eps * l1;
  if (!ok) {
    char msg[96];
    std::snprintf(msg, sizeof msg, "quadrature failed to converge: achieved error %.3e",
                  static_cast<double>(err));
    throw QuadratureError(msg, static_cast<double>(err));
  }
  return value;
}

// Composite Gauss-Legendre aligned to the breakpoints of a piecewise-smooth
// integrand (spline knots): each cell is polynomial-like, so a fixed
// high-order rule is exact to round-off where adaptive refinement stalls on
// the C^2 seams. Breakpoints must be sorted ascending.
template <class F>
auto integrate_cells(F&& f, std::span<const double> breaks, double a, double b)
    -> decltype(f(a)) {
  using Result = decltype(f(a));
  Result acc{};
  if (!(b > a)) return acc;
  using G = boost::math::quadrature::gauss<double, 10>;
  double lo = a;
  for (auto it = std::upper_bound(breaks.begin(), breaks.end(), a);
       it != breaks.end() && *it < b; ++it) {
    if (*it > lo) {
      acc += G::integrate(f, lo, *it);
      lo = *it;
    }
  }
  if (b > lo) acc += G::integrate(f, lo, b);
  return acc;
}

}  // namespace srb
