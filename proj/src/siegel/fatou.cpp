#include "siegel/fatou.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "siegel/errors.hpp"

namespace siegel::fatou {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// e^w - 1 without cancellation for small |w|
cplx cexpm1(cplx w) {
  if (std::abs(w) > 0.5) return std::exp(w) - 1.0;
  cplx term = w, sum = w;
  for (int k = 2; k < 28; ++k) {
    term *= w / static_cast<double>(k);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

cplx exp2pii_d(cplx V) { return std::exp(cplx(0.0, kTwoPi) * V); }

cplx ipow(cplx z, long n) {
  cplx acc(1.0, 0.0);
  for (long i = 0; i < n; ++i) acc *= z;
  return acc;
}

}  // namespace

LiftContext::LiftContext(const cfrac::PerturbationSetup& setup, const geo::Ladder& ladder,
                         dyn::ChiMode mode, std::size_t M)
    : ctx_(setup, mode, M), params_(setup, ladder) {
  q_ = params_.q();
  q_prev_ = setup.q_nm1.get_si();
  mirrored_ = params_.flipped();
  eps_ = params_.eps();
  X_ = params_.period();
  k_ = kTwoPi / X_;
  theta_ = setup.theta_value.to_double();
  gshift_ = X_ - static_cast<double>(q_prev_) / static_cast<double>(q_);
  omega_ = std::polar(1.0, M_PI / static_cast<double>(q_));
  ring_root_ = std::pow(eps_, 1.0 / static_cast<double>(q_)) * omega_;
  double rp0 = params_.ladder().rp0;
  for (int s = 0; s < 8; ++s) {
    cplx zh = std::polar(rp0 * 0.999, kTwoPi * (s + 0.37) / 8.0);
    if (!oriented_step(zh).ok)
      throw numerical_error("LiftContext: map not evaluable at the outermost rung");
  }
}

cplx LiftContext::chart_point(cplx Z) const {
  const double invq = 1.0 / static_cast<double>(q_);
  if (Z.imag() > 0.0) {
    cplx ikZ = cplx(0.0, 1.0) * (k_ * Z);
    cplx one_minus_E = -cexpm1(ikZ);
    if (one_minus_E == cplx(0.0, 0.0))
      throw numerical_error("chart_point: evaluation at a gate pole");
    return ring_root_ * std::exp(ikZ * invq) * std::exp(-std::log(one_minus_E) * invq);
  }
  cplx den = -cexpm1(cplx(0.0, -1.0) * (k_ * Z));
  if (den == cplx(0.0, 0.0)) throw numerical_error("chart_point: evaluation at a gate pole");
  return std::exp(std::log(eps_ / den) * invq);
}

cplx LiftContext::u_of(cplx Z) const {
  cplx den = -cexpm1(cplx(0.0, -1.0) * (k_ * Z));
  if (den == cplx(0.0, 0.0)) throw numerical_error("u_of: evaluation at a gate pole");
  return eps_ / den;
}

dyn::EvalResult LiftContext::oriented_step(cplx zhat) const {
  if (!mirrored_) return ctx_.f(zhat);
  dyn::EvalResult r = ctx_.f(omega_ * std::conj(zhat));
  r.value = omega_ * std::conj(r.value);
  return r;
}

dyn::EvalResult LiftContext::oriented_power(cplx zhat, long k) const {
  if (!mirrored_) return ctx_.f_pow(zhat, static_cast<std::size_t>(k));
  dyn::EvalResult r = ctx_.f_pow(omega_ * std::conj(zhat), static_cast<std::size_t>(k));
  r.value = omega_ * std::conj(r.value);
  return r;
}

// One covering branch of the target: u determines e^{ikW} in closed form,
// the seed picks the horizontal copy. Branches sit a full period apart, so
// the quarter-unit ball around the seed selects at most one of them.
LiftValue LiftContext::lift(cplx target_z, cplx seed) const {
  cplx ut = ipow(target_z, q_);
  if (!(std::abs(ut) > 1e-250))
    throw numerical_error("lift: target power collapsed toward the fixed point");
  if (std::abs(ut - eps_) < 1e-250)
    throw numerical_error("lift: target power degenerate at the cycle");
  cplx Et = ut / (ut - eps_);
  cplx W = cplx(0.0, -1.0) * std::log(Et) / k_;
  W += std::round((seed.real() - W.real()) / X_) * X_;
  LiftValue out;
  out.W = W;
  out.deviation = std::abs(W - seed);
  if (!(out.deviation < lift_ball()))
    throw numerical_error("lift: no branch inside the uniqueness ball");
  out.conj_residual = std::abs(chart_point(W) - target_z);
  if (out.conj_residual > 1e-6 * (1.0 + std::abs(target_z)))
    throw numerical_error("lift: chart mismatch after branch selection");
  return out;
}

LiftValue LiftContext::lift_Fn(cplx Z) const {
  if (!geo::contains(params_, geo::RegionId::QBn(), Z).inside)
    throw input_error("lift_Fn: point outside the sector-box union");
  dyn::EvalResult orbit = oriented_power(chart_point(Z), q_);
  if (!orbit.ok) throw numerical_error("lift_Fn: orbit evaluation failed");
  LiftValue out = lift(orbit.value, Z + 1.0);
  out.map_residual = orbit.residual;
  return out;
}

LiftValue LiftContext::lift_Gn(cplx Z) const {
  if (!geo::contains(params_, geo::RegionId::Hn_half(params_.ladder().r1), Z).inside)
    throw input_error("lift_Gn: point below the half-plane threshold");
  dyn::EvalResult orbit = oriented_power(chart_point(Z), q_prev_);
  if (!orbit.ok) throw numerical_error("lift_Gn: orbit evaluation failed");
  LiftValue out = lift(orbit.value, Z - gshift_);
  out.map_residual = orbit.residual;
  return out;
}

FatouCoordinate::FatouCoordinate(const LiftContext& lc, PhiOptions opt)
    : lc_(&lc), opt_(opt) {
  const geo::RegionParams& P = lc.params();
  B_ = cplx(P.base_point(), 0.0);
  const double qe = static_cast<double>(lc.q()) * lc.eps();  // 1/(q X)

  for (int m = 1; m <= opt_.modes; ++m) {
    double w = m * qe;
    if (std::abs(cexpm1(cplx(0.0, kTwoPi) * w)) >= opt_.divisor_floor)
      chart_.omega.push_back(w);
    else
      ++report_.masked;
  }
  chart_.coef.assign(chart_.omega.size(), cplx(0.0, 0.0));

  std::vector<cplx> Zs, Ws;
  gather(Zs, Ws);
  fit_chart(chart_, Zs, Ws);

  base_raw_ = raw_eval(chart_, B_);
}

void FatouCoordinate::gather(std::vector<cplx>& Zs, std::vector<cplx>& Ws) const {
  const geo::RegionParams& P = lc_->params();
  const double qX = static_cast<double>(lc_->q()) * lc_->period();
  const double y_lo = P.height(P.ladder().r4);
  const double y_hi = opt_.band_top;
  if (!(y_hi > 1.2 * y_lo))
    throw input_error("fatou fit: band top must clear the strip height");

  const int L = std::max(2, opt_.lines);
  const int npts = std::max(8, opt_.line_points);
  const double span = qX + 2.0;
  const double step = span / (npts - 1);

  for (int t = 0; t < L; ++t) {
    double y = y_lo * std::pow(y_hi / y_lo, t / (L - 1.0));
    double x0 = -0.5 * span + 0.37 * step * t / L;
    for (int i = 0; i < npts; ++i) {
      cplx Z(x0 + i * step, y);
      if (!geo::contains(P, geo::RegionId::QBn(), Z).inside) continue;
      try {
        LiftValue lv = lc_->lift_Fn(Z);
        Zs.push_back(Z);
        Ws.push_back(lv.W);
      } catch (const error& e) {
        if (e.code() != errc::numerical) throw;
      }
    }
  }
}

// Stage iteration on the cached pairs: measure the step defect, expand it in
// the chart's harmonics, cancel each component through the step equation,
// fold the correction into the chart, repeat until the defect stalls or the
// target is met. The design matrix never changes, so it is factored once.
void FatouCoordinate::fit_chart(Chart& c, const std::vector<cplx>& Zs,
                                const std::vector<cplx>& Ws) {
  const std::size_t N = Zs.size();
  const std::size_t J = c.omega.size();
  if (N < 2 * (J + 1))
    throw numerical_error("fatou fit: too few usable samples for the mode set");

  c.y_lo = c.y_hi = Zs[0].imag();
  for (const cplx& z : Zs) {
    c.y_lo = std::min(c.y_lo, z.imag());
    c.y_hi = std::max(c.y_hi, z.imag());
  }

  const std::size_t rows = N + J + 1;
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(rows, J + 1);
  std::vector<double> norm(J + 1, 0.0);
  for (std::size_t i = 0; i < N; ++i) A(i, 0) = cplx(1.0, 0.0);
  norm[0] = std::sqrt(static_cast<double>(N));
  for (std::size_t j = 0; j < J; ++j) {
    double nn = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      cplx e = exp2pii_d(c.omega[j] * Zs[i]);
      A(i, j + 1) = e;
      nn += std::norm(e);
    }
    norm[j + 1] = std::sqrt(std::max(nn, 1e-300));
  }
  const double ridge = std::sqrt(opt_.ridge);
  for (std::size_t col = 0; col <= J; ++col) {
    A.block(0, col, N, 1) /= norm[col];
    A(N + col, col) = ridge;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(A);

  int stage = 0;
  double rms = 0.0, mx = 0.0;
  cplx last_mean(0.0, 0.0);
  for (;;) {
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(rows);
    rms = 0.0;
    mx = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      cplx D = raw_eval(c, Ws[i]) - raw_eval(c, Zs[i]) - 1.0;
      b(i) = D;
      rms += std::norm(D);
      mx = std::max(mx, std::abs(D));
    }
    rms = std::sqrt(rms / static_cast<double>(N));
    if (stage >= opt_.max_stages || rms < opt_.target_defect) break;

    Eigen::VectorXcd x = qr.solve(b);
    cplx m = x(0) / norm[0];
    last_mean = m;
    cplx onep = 1.0 + m;
    if (!(std::abs(onep) > 0.5)) throw numerical_error("fatou fit: stage step collapsed");
    c.sigma /= onep;
    c.shift /= onep;
    for (std::size_t j = 0; j < J; ++j) {
      cplx d = x(j + 1) / norm[j + 1];
      cplx h = -d / cexpm1(cplx(0.0, kTwoPi) * c.omega[j]);
      c.coef[j] = (c.coef[j] + h) / onep;
    }
    ++stage;
  }

  c.band_peak.assign(J, 0.0);
  for (std::size_t j = 0; j < J; ++j)
    c.band_peak[j] = std::abs(c.coef[j]) * std::exp(-kTwoPi * c.omega[j] * c.y_lo);

  report_.stages = stage;
  report_.samples = static_cast<int>(N);
  report_.modes = static_cast<int>(J);
  report_.defect_rms = rms;
  report_.defect_max = mx;
  report_.mean_step = std::abs(last_mean);
  report_.band_lo = c.y_lo;
  report_.band_hi = c.y_hi;
}

cplx FatouCoordinate::raw_eval(const Chart& c, cplx Z) const {
  cplx acc = c.sigma * Z + c.shift;
  const bool capped = !c.band_peak.empty();
  for (std::size_t j = 0; j < c.omega.size(); ++j) {
    cplx term = c.coef[j] * exp2pii_d(c.omega[j] * Z);
    if (capped && std::abs(term) > opt_.amp_cap * c.band_peak[j]) continue;
    acc += term;
  }
  return acc;
}

cplx FatouCoordinate::raw_derivative(const Chart& c, cplx Z) const {
  cplx acc = c.sigma;
  const bool capped = !c.band_peak.empty();
  for (std::size_t j = 0; j < c.omega.size(); ++j) {
    cplx term = c.coef[j] * exp2pii_d(c.omega[j] * Z);
    if (capped && std::abs(term) > opt_.amp_cap * c.band_peak[j]) continue;
    acc += cplx(0.0, kTwoPi) * c.omega[j] * term;
  }
  return acc;
}

PhiValue FatouCoordinate::at(cplx Z, bool with_residual) const {
  PhiValue v;
  v.value = raw_eval(chart_, Z) - base_raw_ + B_;
  if (with_residual) {
    LiftValue L = lc_->lift_Fn(Z);
    cplx pw = raw_eval(chart_, L.W) - base_raw_ + B_;
    v.abel_residual = std::abs(pw - v.value - 1.0);
  }
  return v;
}

cplx FatouCoordinate::derivative(cplx Z) const { return raw_derivative(chart_, Z); }

cplx FatouCoordinate::inverse(cplx V) const {
  cplx Z = V;
  for (int it = 0; it < 40; ++it) {
    cplx g = raw_eval(chart_, Z) - base_raw_ + B_ - V;
    if (std::abs(g) < 1e-12 * (1.0 + std::abs(V))) break;
    cplx gp = raw_derivative(chart_, Z);
    if (!(std::abs(gp) > 1e-8)) throw numerical_error("inverse: flat derivative");
    Z -= g / gp;
  }
  cplx back = raw_eval(chart_, Z) - base_raw_ + B_;
  if (!(std::abs(back - V) <= 1e-10 * (1.0 + std::abs(V))))
    throw numerical_error("inverse: Newton did not converge");
  return Z;
}

RegimeProbe FatouCoordinate::regime_probe(cplx Z) const {
  RegimeProbe pr;
  pr.min_tail = 1e300;
  cplx W = Z;
  int run = 0;
  while (pr.steps < opt_.probe_budget) {
    if (!geo::contains(lc_->params(), geo::RegionId::QBn(), W).inside) {
      pr.reason = "left-domain";
      pr.stopped_at = W;
      return pr;
    }
    LiftValue L;
    try {
      L = lc_->lift_Fn(W);
    } catch (const error& e) {
      if (e.code() != errc::numerical) throw;
      pr.reason = "lift-ambiguity";
      pr.stopped_at = W;
      return pr;
    }
    double tail = std::abs(L.W - W - 1.0);
    pr.min_tail = std::min(pr.min_tail, tail);
    if (tail < opt_.tail_tolerance) {
      if (++run >= opt_.sustain) {
        pr.entered = true;
        pr.reason = "entered";
        pr.stopped_at = L.W;
        return pr;
      }
    } else {
      run = 0;
    }
    W = L.W;
    ++pr.steps;
  }
  pr.reason = "budget";
  pr.stopped_at = W;
  return pr;
}

std::string FatouCoordinate::scheme() const {
  std::ostringstream os;
  os << "identity plus upward-decaying harmonic correction on period-wide lines; stages "
     << report_.stages << ", modes " << report_.modes << ", defect rms "
     << report_.defect_rms;
  return os.str();
}

RenormContext::RenormContext(const FatouCoordinate& phi, double anchor_re,
                             int boundary_samples)
    : phi_(&phi) {
  const LiftContext& lc = phi.context();
  const geo::RegionParams& P = lc.params();
  const double bound = P.height(P.ladder().r5);
  if (!(std::abs(anchor_re) < bound))
    throw input_error("RenormContext: anchor real part outside the strip bound");
  if (boundary_samples < 8) throw input_error("RenormContext: too few boundary samples");
  theta_ = lc.theta();
  Zn_ = cplx(anchor_re, P.height(P.ladder().r4));
  FZn_ = lc.lift_Fn(Zn_).W;
  phi_anchor_ = phi(Zn_);
  double lo = 1e300;
  for (int i = 0; i < boundary_samples; ++i) {
    double t = (i + 0.5) / boundary_samples;
    cplx S = Zn_ + t * (FZn_ - Zn_);
    lo = std::min(lo, std::abs(exp2pii_d(phi(S))));
  }
  rho_ = 0.9 * lo;
  if (!(rho_ > 0.0) || !std::isfinite(rho_))
    throw numerical_error("RenormContext: boundary probe collapsed");
}

RenormValue RenormContext::renormalize(cplx z) const {
  if (z == cplx(0.0, 0.0)) throw input_error("renormalize: the puncture is excluded");
  if (!(std::abs(z) < rho_)) throw input_error("renormalize: outside-cylinder");
  const LiftContext& lc = phi_->context();
  cplx V0 = std::log(z) / cplx(0.0, kTwoPi);
  long m0 = static_cast<long>(std::ceil(phi_anchor_.real() - V0.real()));
  for (long dm : {0L, 1L, -1L}) {
    cplx V = V0 + static_cast<double>(m0 + dm);
    cplx W;
    try {
      W = phi_->inverse(V);
    } catch (const error& e) {
      if (e.code() != errc::numerical) throw;
      continue;
    }
    if (W.imag() < Zn_.imag() - 1e-9) continue;
    if (W.real() < Zn_.real() - strip_pad_ || W.real() > Zn_.real() + 1.0 + strip_pad_)
      continue;
    LiftValue G = lc.lift_Gn(W);
    RenormValue out;
    out.value = exp2pii_d((*phi_)(G.W));
    double inv_defect = 1e-10 * (1.0 + std::abs(V));
    out.residual = kTwoPi * std::abs(out.value) *
                   (G.conj_residual + G.map_residual + inv_defect +
                    2.0 * phi_->report().defect_max);
    return out;
  }
  throw input_error("renormalize: no branch lands in the strip, outside-cylinder");
}

RotationCheck RenormContext::rotation_check(double h, double tol) const {
  if (!(h > 0.0) || !(h < rho_ / 10.0))
    throw input_error("rotation_check: probe radius outside (0, rho/10)");
  auto ray_mean = [&](double hh) {
    cplx acc(0.0, 0.0);
    for (int s = 0; s < 4; ++s) {
      cplx zz = std::polar(hh, 0.5 * M_PI * s);
      acc += renormalize(zz).value / zz;
    }
    return acc / 4.0;
  };
  RotationCheck rc;
  rc.h = h;
  rc.coarse = ray_mean(h);
  rc.fine = ray_mean(0.5 * h);
  rc.estimate = (16.0 * rc.fine - rc.coarse) / 15.0;
  rc.spread = std::abs(rc.fine - rc.coarse);
  rc.unstable = rc.spread > 10.0 * tol;
  return rc;
}

}  // namespace siegel::fatou
