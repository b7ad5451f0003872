#pragma once

// Reference quadrature and closed-form geometry used to cross-check the
// library's Monte Carlo estimates. Kept independent of src/ internals on
// purpose: everything here is derived directly from the defining formulas.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p1 = 0.0, dp = 0.0;
    for (int it = 0; it < 64; ++it) {
      double p0 = 1.0;
      p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::fabs(dt) < 1e-15) break;
    }
    x[i] = -t;
    x[n - 1 - i] = t;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

inline double integrate(const std::function<double(double)>& f, double a, double b, int n = 32) {
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += w[i] * f(mid + half * x[i]);
  return sum * half;
}

// Fraction of the circle |z| = t that lands inside the disk |z^q/(z^q-eps)| < s,
// s = r8^q/(r8^q+eps). With rho = t^q and c = cos(q theta) the membership
// condition reduces to c < c* where c* is the chord value below.
inline double circle_fraction(double t, double eps, int q, double r8) {
  double rho = std::pow(t, q);
  double R = std::pow(r8, q);
  double cstar = eps / (2.0 * rho) - rho / R - eps * rho / (2.0 * R * R);
  cstar = std::clamp(cstar, -1.0, 1.0);
  return 1.0 - std::acos(cstar) / M_PI;
}

// Area fraction of the annulus r7 < |z| < r8 covered by the same disk
// condition. The integrand has a sqrt cusp at t = r8, handled by the
// substitution t = r8 - u^2 on the last panel.
inline double annulus_density(double r7, double r8, double eps, int q) {
  if (!(r7 > 0 && r7 < r8)) throw std::invalid_argument("annulus_density: bad radii");
  auto g = [&](double t) { return circle_fraction(t, eps, q, r8) * 2.0 * t; };
  std::vector<double> knots = {r7, r8 * std::pow(0.5, 1.0 / q), r8 * std::pow(0.9, 1.0 / q),
                               r8 * std::pow(0.99, 1.0 / q), r8};
  for (std::size_t i = 0; i + 1 < knots.size(); ++i)
    if (!(knots[i] < knots[i + 1])) knots[i + 1] = std::nextafter(knots[i], 2.0);
  double total = 0.0;
  for (std::size_t i = 0; i + 2 < knots.size(); ++i) total += integrate(g, knots[i], knots[i + 1]);
  double a = knots[knots.size() - 2];
  double umax = std::sqrt(r8 - a);
  total += integrate([&](double u) { return g(r8 - u * u) * 2.0 * u; }, 0.0, umax);
  return total / (r8 * r8 - r7 * r7);
}

}  // namespace oracle
