#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "siegel/cfrac.hpp"
#include "siegel/errors.hpp"
#include "siegel/precision.hpp"

namespace siegel::dyn {

// P(z) = lambda z + z^2 with lambda = e^{2 pi i rotation}
struct QuadraticMap {
  Real rotation;
  Complex lambda;
  std::complex<double> lambda_d;

  static QuadraticMap from_rotation(const Real& rot) {
    Complex lam = exp2pii(rot);
    return {rot, lam, lam.to_std()};
  }
  std::complex<double> operator()(std::complex<double> z) const {
    return lambda_d * z + z * z;
  }
  Complex apply_hp(const Complex& z) const { return lambda * z + z * z; }
};

struct IterateResult {
  std::complex<double> z;
  std::optional<std::size_t> escaped_at;
};

IterateResult iterate(const QuadraticMap& map, std::complex<double> z, std::size_t k,
                      double escape_radius);

// truncated power series of the linearizer phi: P(phi(z)) = phi(lambda z),
// phi(0) = 0, phi'(0) = 1
struct LinearizerSeries {
  Complex lambda;
  std::vector<Complex> coeffs;                  // c_1..c_M
  std::vector<std::complex<double>> coeffs_d;   // double mirror
  std::size_t M = 0;
  double radius_estimate = 0.0;                 // fitted disk-of-convergence radius
  std::size_t fit_lo = 0, fit_hi = 0;           // index window of the radius fit
  std::vector<std::size_t> excluded;            // small-divisor indices left out of the fit
  std::optional<std::size_t> breakdown_at;      // series truncated here if set
};

LinearizerSeries linearizer(const Complex& lambda, std::size_t M);

// Horner evaluation of z*(c_1 + c_2 z + ...) and its derivative; works for
// std::complex<double> and for Complex
template <class C, class V>
V eval_series(const std::vector<C>& coeffs, const V& z) {
  V acc = make_like(z, 0.0, 0.0);
  for (std::size_t i = coeffs.size(); i-- > 0;) acc = acc * z + V(coeffs[i]);
  return acc * z;
}
template <class C, class V>
V eval_series_deriv(const std::vector<C>& coeffs, const V& z) {
  V acc = make_like(z, 0.0, 0.0);
  for (std::size_t i = coeffs.size(); i-- > 0;)
    acc = acc * z + make_like(z, static_cast<double>(i + 1), 0.0) * V(coeffs[i]);
  return acc;
}

struct ExplosionCycle {
  long p = 0, q = 1;
  std::complex<double> delta;
  std::complex<double> eta;                    // p/q + delta^q
  std::vector<std::complex<double>> points;    // points[j+1] = P_eta(points[j])
  std::vector<std::pair<double, int>> continuation_trace;  // (|delta| step, newton iters)
  double max_residual = 0.0;                   // max_j |P^q(point_j) - point_j|
};

// q-periodic cycle of P_eta, eta = p/q + delta^q, by Newton on P^q(z) - z
// continued geometrically in |delta| from the q-th-root asymptotic seed
ExplosionCycle explosion_cycle(long p, long q, std::complex<double> delta,
                               double seed_radius = 1e-3);

// z^{q+1} coefficient of P^{oq} - id at the parabolic e^{2 pi i p/q},
// by discrete circle averaging at high precision
std::complex<double> parabolic_top_coefficient(long p, long q);

enum class ChiMode { proxy, exact };

struct EvalResult {
  std::complex<double> value{0.0, 0.0};
  double residual = 0.0;  // a-posteriori conjugacy defect at this evaluation
  bool ok = false;
};
struct EvalResultHP {
  Complex value;
  Real residual;
  bool ok = false;
};

// f_n = chi^{-1} o P_{alpha_n} o chi in the chosen chi mode.
// proxy: chi(z) = phi_alpha(r_hat * z), the truncated linearizer polynomial
//        rescaled to the unit disk; fast, used for bulk orbit work
// exact: chi(z) is the explosion-cycle point at parameter z, one ray
//        continuation per call; slower, used for cross-checks
class ExplodedMapContext {
 public:
  ExplodedMapContext(cfrac::PerturbationSetup setup, ChiMode mode, std::size_t M = 200);

  const cfrac::PerturbationSetup& setup() const { return setup_; }
  const LinearizerSeries& lin() const { return lin_; }
  ChiMode mode() const { return mode_; }
  double r_hat() const { return lin_.radius_estimate; }
  long q() const { return q_; }
  long p() const { return p_; }
  double eps() const { return eps_; }
  std::complex<double> lambda_alpha() const { return lambda_alpha_; }
  std::complex<double> lambda_n() const { return lambda_n_; }

  std::complex<double> chi(std::complex<double> z, bool* ok = nullptr) const;
  std::complex<double> chi_inv(std::complex<double> w, std::complex<double> seed,
                               bool* ok = nullptr) const;

  EvalResult f(std::complex<double> z) const;
  EvalResult f_pow(std::complex<double> z, std::size_t k) const;

  // high-precision twins (proxy mode only)
  Complex chi_hp(const Complex& z) const;
  EvalResultHP f_hp(const Complex& z) const;

 private:
  cfrac::PerturbationSetup setup_;
  ChiMode mode_;
  LinearizerSeries lin_;
  long p_ = 0, q_ = 1;
  double eps_ = 0.0;
  std::complex<double> lambda_alpha_, lambda_n_;
  Complex lambda_n_hp_;
  std::complex<double> seed_root_;  // (-2 pi i q / b)^{1/q} for exact-mode seeds
};

// deviation of f^{oq_n} from z + 2 pi i q_n z (eps_n - z^{q_n}), relative to
// the leading term's magnitude
struct ExpansionResidual {
  double value = 0.0;
  bool defined = false;  // false when eps - z^q is degenerate at this z
};
ExpansionResidual qn_expansion_residual(const ExplodedMapContext& ctx, std::complex<double> z);

// derivative of the exact-mode chi at 0 by cycle-averaged ratios at two radii
std::complex<double> chi_prime0(const ExplodedMapContext& ctx, double probe_radius = 0.05);

struct CompareResult {
  double sup_diff = 0.0;
  std::size_t attempted = 0;
  std::size_t converged = 0;  // coverage of the sample set
};
// sup over samples of |psi_n(delta) - phi_alpha(delta)| where
// psi_n(delta) = chi_n(delta / chi_n'(0)); samples should stay within
// |delta| <= 0.5 * r_hat, half the fitted disk of phi_alpha
CompareResult compare_explosion_to_linearizer(const ExplodedMapContext& ctx,
                                              const std::vector<std::complex<double>>& samples);

}  // namespace siegel::dyn
