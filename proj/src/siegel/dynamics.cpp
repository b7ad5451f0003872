#include "siegel/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace siegel::dyn {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::complex<double> i_times(double s) { return {0.0, s}; }

}  // namespace

IterateResult iterate(const QuadraticMap& map, std::complex<double> z, std::size_t k,
                      double escape_radius) {
  for (std::size_t i = 0; i < k; ++i) {
    z = map(z);
    double a2 = std::norm(z);
    if (!std::isfinite(a2) || a2 > escape_radius * escape_radius) return {z, i + 1};
  }
  return {z, std::nullopt};
}

LinearizerSeries linearizer(const Complex& lambda, std::size_t M) {
  if (M < 2) throw input_error("linearizer: M must be >= 2");
  const mpfr_prec_t prec = lambda.prec();
  LinearizerSeries out;
  out.lambda = lambda;
  out.M = M;
  out.coeffs.reserve(M);
  out.coeffs.push_back(Complex(1.0, 0.0, prec));  // c_1

  Complex lam_pow = lambda;  // lambda^m
  for (std::size_t m = 2; m <= M; ++m) {
    lam_pow = lam_pow * lambda;
    Complex divisor = lam_pow - lambda;
    double div_abs = divisor.abs().to_double();
    if (div_abs < 1e-12) {
      out.breakdown_at = m;
      out.M = m - 1;
      break;
    }
    if (div_abs < 1e-6) out.excluded.push_back(m);
    Complex s(prec);
    for (std::size_t i = 1; i < m; ++i) s = s + out.coeffs[i - 1] * out.coeffs[m - i - 1];
    out.coeffs.push_back(s / divisor);
  }

  out.coeffs_d.reserve(out.coeffs.size());
  for (const auto& c : out.coeffs) out.coeffs_d.push_back(c.to_std());

  // radius from the slope of log|c_m| over the last quarter, spikes excluded
  std::size_t lo = std::max<std::size_t>(2, out.coeffs.size() - out.coeffs.size() / 4);
  std::size_t hi = out.coeffs.size();
  out.fit_lo = lo;
  out.fit_hi = hi;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t cnt = 0;
  for (std::size_t m = lo; m <= hi; ++m) {
    if (std::find(out.excluded.begin(), out.excluded.end(), m) != out.excluded.end()) continue;
    double y = log(out.coeffs[m - 1].abs()).to_double();
    if (!std::isfinite(y)) continue;
    double x = static_cast<double>(m);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  if (cnt >= 2) {
    double slope = (sxy - sx * sy / cnt) / (sxx - sx * sx / cnt);
    out.radius_estimate = std::exp(-slope);
  }
  return out;
}

std::complex<double> parabolic_top_coefficient(long p, long q) {
  const mpfr_prec_t prec = 192;
  const int N = 96;
  Complex lam0 = exp2pii(Real::ratio(p, q, prec));
  Real sigma(0.1, prec);
  Complex acc(prec);
  for (int k = 0; k < N; ++k) {
    Complex z = Complex::polar(sigma, Real::pi(prec) * (2.0 * k) / double(N));
    Complex w = z;
    for (long i = 0; i < q; ++i) w = lam0 * w + w * w;
    Complex s = w - z;
    acc = acc + s / z.pow_ui(static_cast<unsigned long>(q + 1));
  }
  return (acc * Real::ratio(1, N, prec)).to_std();
}

namespace {

struct NewtonOut {
  std::complex<double> z;
  bool ok = false;
  int iters = 0;
};

NewtonOut cycle_newton(std::complex<double> lambda, long q, std::complex<double> z0) {
  std::complex<double> z = z0;
  double best = 1e300;
  int stall = 0;
  for (int it = 1; it <= 80; ++it) {
    std::complex<double> w = z, D = 1.0;
    for (long i = 0; i < q; ++i) {
      D *= lambda + 2.0 * w;
      w = lambda * w + w * w;
    }
    std::complex<double> g = w - z;
    double ag = std::abs(g);
    if (!std::isfinite(ag)) return {z, false, it};
    if (ag < 1e-13) return {z, true, it};
    if (ag < 0.5 * best) {
      best = ag;
      stall = 0;
    } else if (++stall > 8) {
      return {z, false, it};
    }
    std::complex<double> gp = D - 1.0;
    if (std::abs(gp) < 1e-290) return {z, false, it};
    std::complex<double> step = g / gp;
    z -= step;
    if (std::abs(step) < 1e-16 * std::abs(z)) {
      std::complex<double> w2 = z;
      for (long i = 0; i < q; ++i) w2 = lambda * w2 + w2 * w2;
      return {z, std::abs(w2 - z) < 1e-12, it};
    }
  }
  return {z, false, 80};
}

std::complex<double> lambda_of_delta(long p, long q, std::complex<double> delta) {
  std::complex<double> dq = std::pow(delta, static_cast<double>(q));
  std::complex<double> eta = static_cast<double>(p) / static_cast<double>(q) + dq;
  return std::exp(i_times(kTwoPi) * eta);
}

}  // namespace

ExplosionCycle explosion_cycle(long p, long q, std::complex<double> delta, double seed_radius) {
  if (q < 1 || std::abs(std::gcd(p, q)) != 1)
    throw input_error("explosion_cycle: p/q must be in lowest terms, q >= 1");
  double target = std::abs(delta);
  if (target == 0.0) throw input_error("explosion_cycle: delta must be nonzero");

  ExplosionCycle out;
  out.p = p;
  out.q = q;
  out.delta = delta;
  std::complex<double> dq = std::pow(delta, static_cast<double>(q));
  out.eta = static_cast<double>(p) / static_cast<double>(q) + dq;

  std::complex<double> b = parabolic_top_coefficient(p, q);
  std::complex<double> root =
      std::exp(std::log(-i_times(kTwoPi) * static_cast<double>(q) / b) /
               static_cast<double>(q));

  // below this modulus the cycle multiplier 1 + O(q^2 delta^q) is not
  // resolvable in double, so Newton starts here at the earliest
  double cond_floor = std::pow(1e-11, 1.0 / static_cast<double>(q));
  double start = std::min(target, std::max(seed_radius, cond_floor));
  std::complex<double> dir = delta / target;

  double cur = start;
  std::complex<double> z = root * dir * cur;
  {
    auto nw = cycle_newton(lambda_of_delta(p, q, dir * cur), q, z);
    if (!nw.ok || std::abs(nw.z) < cur / 10.0 || std::abs(nw.z - z) > 0.3 * std::abs(z))
      throw numerical_error("explosion_cycle: seeding failed at |delta| = " +
                            std::to_string(cur));
    z = nw.z;
    out.continuation_trace.emplace_back(cur, nw.iters);
  }

  double cur_old = 0.0;
  std::complex<double> z_old = z;
  while (cur < target) {
    double next = std::min(target, cur * 1.25);
    for (;;) {
      // linear prediction along the ray keeps Newton inside the branch basin
      std::complex<double> pred = z;
      if (cur_old > 0.0) pred = z + (z - z_old) * ((next - cur) / (cur - cur_old));
      auto nw = cycle_newton(lambda_of_delta(p, q, dir * next), q, pred);
      bool continuous = std::abs(nw.z - pred) < 0.25 * std::abs(pred);
      if (nw.ok && std::abs(nw.z) > next / 10.0 && continuous) {
        cur_old = cur;
        z_old = z;
        z = nw.z;
        cur = next;
        out.continuation_trace.emplace_back(next, nw.iters);
        break;
      }
      double mid = 0.5 * (cur + next);
      if (mid - cur < target * std::ldexp(1.0, -30))
        throw numerical_error("explosion_cycle: continuation failed, last good |delta| = " +
                              std::to_string(cur));
      next = mid;
    }
  }

  std::complex<double> lam = lambda_of_delta(p, q, delta);
  std::vector<std::complex<double>> orbit(static_cast<std::size_t>(2 * q));
  orbit[0] = z;
  for (long i = 1; i < 2 * q; ++i) orbit[i] = lam * orbit[i - 1] + orbit[i - 1] * orbit[i - 1];
  out.points.assign(orbit.begin(), orbit.begin() + q);
  out.max_residual = 0.0;
  for (long j = 0; j < q; ++j)
    out.max_residual = std::max(out.max_residual, std::abs(orbit[j + q] - orbit[j]));

  for (long j = 0; j < q; ++j) {
    if (std::abs(out.points[j]) < target / 10.0)
      throw numerical_error("explosion_cycle: degenerate cycle, point near the fixed point 0");
    for (long i = 0; i < j; ++i)
      if (std::abs(out.points[j] - out.points[i]) < 1e-6 * target)
        throw numerical_error("explosion_cycle: cycle points collide");
  }
  return out;
}

ExplodedMapContext::ExplodedMapContext(cfrac::PerturbationSetup setup, ChiMode mode,
                                       std::size_t M)
    : setup_(std::move(setup)), mode_(mode), lambda_n_hp_(setup_.precision_bits) {
  p_ = mpz_get_si(setup_.p_n.get_mpz_t());
  q_ = mpz_get_si(setup_.q_n.get_mpz_t());
  eps_ = setup_.eps_d();
  Complex lam_alpha_hp = exp2pii(setup_.alpha_value);
  lambda_n_hp_ = exp2pii(setup_.alpha_n);
  lambda_alpha_ = lam_alpha_hp.to_std();
  lambda_n_ = lambda_n_hp_.to_std();
  lin_ = linearizer(lam_alpha_hp, M);
  if (lin_.radius_estimate <= 0.0)
    throw numerical_error("f_n context: linearizer radius estimate failed");
  std::complex<double> b = parabolic_top_coefficient(p_, q_);
  seed_root_ = std::exp(std::log(-i_times(kTwoPi) * static_cast<double>(q_) / b) /
                        static_cast<double>(q_));
}

namespace {

// Newton inversion of the truncated series w = phi(x), double flavor
std::complex<double> invert_series(const std::vector<std::complex<double>>& coeffs,
                                   std::complex<double> w, std::complex<double> x0, bool* ok) {
  std::complex<double> x = x0;
  bool good = false;
  for (int it = 0; it < 60; ++it) {
    std::complex<double> g = eval_series(coeffs, x) - w;
    if (std::abs(g) < 1e-15 * (1.0 + std::abs(w))) {
      good = true;
      break;
    }
    std::complex<double> gp = eval_series_deriv(coeffs, x);
    if (std::abs(gp) < 1e-290 || !std::isfinite(std::abs(g))) break;
    std::complex<double> step = g / gp;
    x -= step;
    if (std::abs(step) < 1e-17 * std::abs(x)) {
      good = std::abs(eval_series(coeffs, x) - w) < 1e-12 * (1.0 + std::abs(w));
      break;
    }
  }
  if (ok) *ok = good;
  return x;
}

}  // namespace

std::complex<double> ExplodedMapContext::chi(std::complex<double> z, bool* ok) const {
  if (mode_ == ChiMode::proxy) {
    if (ok) *ok = true;
    return eval_series(lin_.coeffs_d, z * lin_.radius_estimate);
  }
  try {
    auto cyc = explosion_cycle(p_, q_, z);
    if (ok) *ok = true;
    return cyc.points[0];
  } catch (const error&) {
    if (!ok) throw;
    *ok = false;
    return {0.0, 0.0};
  }
}

std::complex<double> ExplodedMapContext::chi_inv(std::complex<double> w,
                                                 std::complex<double> seed, bool* ok) const {
  if (mode_ == ChiMode::proxy) {
    bool good = false;
    std::complex<double> x =
        invert_series(lin_.coeffs_d, w, seed * lin_.radius_estimate, &good);
    if (!good && !ok) throw numerical_error("chi_inv: outside univalent domain");
    if (ok) *ok = good;
    return x / lin_.radius_estimate;
  }
  // exact mode: Newton on chi(delta) = w with a finite-difference derivative
  std::complex<double> d = seed;
  bool good = false;
  for (int it = 0; it < 40; ++it) {
    bool cok = false;
    std::complex<double> c = chi(d, &cok);
    if (!cok) break;
    std::complex<double> g = c - w;
    if (std::abs(g) < 1e-11 * (1.0 + std::abs(w))) {
      good = true;
      break;
    }
    double h = 1e-7 * std::max(std::abs(d), 1e-6);
    bool cok2 = false;
    std::complex<double> c2 = chi(d + h, &cok2);
    if (!cok2) break;
    std::complex<double> gp = (c2 - c) / h;
    if (std::abs(gp) < 1e-290) break;
    d -= g / gp;
  }
  if (!good && !ok) throw numerical_error("chi_inv: outside univalent domain");
  if (ok) *ok = good;
  return d;
}

EvalResult ExplodedMapContext::f(std::complex<double> z) const {
  EvalResult r;
  if (z == std::complex<double>(0.0, 0.0)) return {{0.0, 0.0}, 0.0, true};
  if (mode_ == ChiMode::proxy) {
    double rh = lin_.radius_estimate;
    std::complex<double> x = z * rh;
    std::complex<double> w = eval_series(lin_.coeffs_d, x);
    std::complex<double> w2 = lambda_n_ * w + w * w;
    bool good = false;
    std::complex<double> x2 = invert_series(lin_.coeffs_d, w2, lambda_n_ * x, &good);
    r.value = x2 / rh;
    r.residual = std::abs(eval_series(lin_.coeffs_d, x2) - w2);
    r.ok = good && std::isfinite(std::abs(r.value));
    return r;
  }
  bool cok = false;
  std::complex<double> c = chi(z, &cok);
  if (!cok) return r;
  std::complex<double> w2 = lambda_n_ * c + c * c;
  bool iok = false;
  std::complex<double> z2 = chi_inv(w2, lambda_n_ * z, &iok);
  if (!iok) return r;
  bool rok = false;
  std::complex<double> back = chi(z2, &rok);
  r.value = z2;
  r.residual = rok ? std::abs(back - w2) : 1e300;
  r.ok = rok;
  return r;
}

EvalResult ExplodedMapContext::f_pow(std::complex<double> z, std::size_t k) const {
  EvalResult r{z, 0.0, true};
  for (std::size_t i = 0; i < k; ++i) {
    EvalResult step = f(r.value);
    if (!step.ok) return {step.value, std::max(r.residual, step.residual), false};
    r.value = step.value;
    r.residual = std::max(r.residual, step.residual);
  }
  return r;
}

Complex ExplodedMapContext::chi_hp(const Complex& z) const {
  if (mode_ != ChiMode::proxy)
    throw input_error("chi_hp: high-precision path exists for proxy mode only");
  Real rh(lin_.radius_estimate, z.prec());
  return eval_series(lin_.coeffs, z * rh);
}

EvalResultHP ExplodedMapContext::f_hp(const Complex& z) const {
  if (mode_ != ChiMode::proxy)
    throw input_error("f_hp: high-precision path exists for proxy mode only");
  const mpfr_prec_t prec = std::max<mpfr_prec_t>(z.prec(), setup_.precision_bits);
  EvalResultHP r{Complex(prec), Real(prec), false};
  Real rh(lin_.radius_estimate, prec);
  Complex x = z * rh;
  Complex w = eval_series(lin_.coeffs, x);
  Complex lam = lambda_n_hp_;
  Complex w2 = lam * w + w * w;
  Complex xk = lam * x;
  Real tol = Real::pow2(-(prec - 24), 64);
  bool good = false;
  for (int it = 0; it < 200; ++it) {
    Complex g = eval_series(lin_.coeffs, xk) - w2;
    if (g.abs() < tol * (Real(1.0, 64) + w2.abs())) {
      good = true;
      break;
    }
    Complex gp = eval_series_deriv(lin_.coeffs, xk);
    xk = xk - g / gp;
  }
  r.value = xk / rh;
  r.residual = (eval_series(lin_.coeffs, xk) - w2).abs();
  r.ok = good;
  return r;
}

ExpansionResidual qn_expansion_residual(const ExplodedMapContext& ctx, std::complex<double> z) {
  ExpansionResidual out;
  if (z == std::complex<double>(0.0, 0.0))
    throw input_error("qn_expansion_residual: z must be nonzero");
  long q = ctx.q();
  std::complex<double> zq = std::pow(z, static_cast<double>(q));
  std::complex<double> gap = ctx.eps() - zq;
  if (std::abs(gap) < 1e-6 * std::abs(ctx.eps())) return out;  // near-cycle degeneracy
  EvalResult fq = ctx.f_pow(z, static_cast<std::size_t>(q));
  if (!fq.ok) throw numerical_error("qn_expansion_residual: orbit left the working domain");
  std::complex<double> lead = i_times(kTwoPi) * static_cast<double>(q) * z * gap;
  out.value = std::abs(fq.value - z - lead) / (kTwoPi * q * std::abs(z) * std::abs(gap));
  out.defined = true;
  return out;
}

std::complex<double> chi_prime0(const ExplodedMapContext& ctx, double probe_radius) {
  long q = ctx.q();
  double sigma1 =
      std::max(probe_radius, 1.25 * std::pow(1e-9, 1.0 / static_cast<double>(q)));
  double sigma2 = sigma1 * std::pow(2.0, -1.0 / static_cast<double>(q));
  auto average = [&](double sigma) {
    auto cyc = explosion_cycle(ctx.p(), ctx.q(), {sigma, 0.0});
    std::complex<double> zeta = std::exp(i_times(kTwoPi) * (static_cast<double>(ctx.p()) / q));
    std::complex<double> acc = 0.0, zj = std::complex<double>(sigma, 0.0);
    for (long j = 0; j < q; ++j) {
      acc += cyc.points[j] / zj;
      zj *= zeta;
    }
    return acc / static_cast<double>(q);
  };
  // the cycle average equals chi'(0) + c u + O(u^2) with u = sigma^q;
  // sigma2^q = sigma1^q / 2, so 2 E(sigma2) - E(sigma1) cancels the u term
  return 2.0 * average(sigma2) - average(sigma1);
}

CompareResult compare_explosion_to_linearizer(const ExplodedMapContext& ctx,
                                              const std::vector<std::complex<double>>& samples) {
  CompareResult out;
  std::complex<double> d0 = chi_prime0(ctx);
  for (auto delta : samples) {
    ++out.attempted;
    bool ok = true;
    std::complex<double> psi;
    if (delta == std::complex<double>(0.0, 0.0)) {
      psi = 0.0;
    } else {
      try {
        auto cyc = explosion_cycle(ctx.p(), ctx.q(), delta / d0);
        psi = cyc.points[0];
      } catch (const error&) {
        ok = false;
      }
    }
    if (!ok) continue;
    ++out.converged;
    std::complex<double> phi = eval_series(ctx.lin().coeffs_d, delta);
    out.sup_diff = std::max(out.sup_diff, std::abs(psi - phi));
  }
  return out;
}

}  // namespace siegel::dyn
